#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "pcsimp/geometry.hpp"

namespace pcs {

enum class ShapeKind { Sphere, BumpySphere, Cube, Torus, Plane, Icosphere };

ShapeKind parse_shape_kind(std::string_view name);
std::string_view shape_name(ShapeKind kind);

/// Radial Gaussian bump on the unit sphere: r(u) += amplitude * exp(-angle(u, center)^2 / (2 width^2)).
struct Bump {
  Vec3 center;  // unit direction
  double amplitude = 0.15;
  double width = 0.25;  // angular standard deviation, radians
};

struct ShapeParams {
  std::size_t bumps = 6;
  double bump_amplitude = 0.15;
  double bump_width = 0.25;
  double torus_major = 1.0;
  double torus_minor = 0.35;
  double plane_extent = 1.0;  // half side length
  double cube_half = 1.0;
};

struct SynthShape {
  ShapeKind kind = ShapeKind::Sphere;
  PointCloud cloud;
  std::optional<Mesh> mesh;  // cube and icosphere
  std::vector<Bump> bumps;   // bumpy sphere ground truth
};

/// Deterministic per seed. Throws BadParams when n < 100. The icosphere uses the
/// smallest subdivision level with at least n vertices.
SynthShape synth_shape(ShapeKind kind, std::size_t n, std::uint64_t seed, const ShapeParams& params = {});

/// True when p's direction lies within `sigmas` angular widths of some bump center.
bool in_bump_support(const std::vector<Bump>& bumps, const Vec3& p, double sigmas = 3.0);

/// Unit icosphere with 10 * 4^level + 2 vertices.
Mesh icosphere(unsigned level);

/// Per-coordinate Gaussian offsets. std = sigma * bbox diagonal, or sigma itself
/// when `absolute`. Normals and cached descriptors are dropped.
PointCloud add_noise(const PointCloud& cloud, double sigma, std::uint64_t seed, bool absolute = false);

}  // namespace pcs
