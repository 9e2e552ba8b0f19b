#include "pcsimp/synth.hpp"

#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <string>

#include "pcsimp/error.hpp"

namespace pcs {

namespace {

Vec3 random_direction(std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (;;) {
    const Vec3 v(gauss(rng), gauss(rng), gauss(rng));
    const double n = v.norm();
    if (n > 1e-12) return v / n;
  }
}

double angle_between(const Vec3& a, const Vec3& b) {
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

std::vector<Bump> place_bumps(const ShapeParams& params, std::mt19937_64& rng) {
  std::vector<Bump> bumps;
  const double min_separation = 4.0 * params.bump_width;
  for (std::size_t attempt = 0; bumps.size() < params.bumps; ++attempt) {
    const Vec3 c = random_direction(rng);
    bool ok = true;
    for (const Bump& b : bumps) ok = ok && angle_between(b.center, c) >= min_separation;
    if (ok || attempt > 10000) bumps.push_back({c, params.bump_amplitude, params.bump_width});
  }
  return bumps;
}

double bumpy_radius(const std::vector<Bump>& bumps, const Vec3& u) {
  double r = 1.0;
  for (const Bump& b : bumps) {
    const double a = angle_between(u, b.center);
    r += b.amplitude * std::exp(-a * a / (2.0 * b.width * b.width));
  }
  return r;
}

Mesh cube_mesh(double h) {
  Mesh m;
  for (int i = 0; i < 8; ++i) m.positions.emplace_back(i & 1 ? h : -h, i & 2 ? h : -h, i & 4 ? h : -h);
  m.faces = {{0, 2, 1}, {1, 2, 3}, {4, 5, 6}, {5, 7, 6}, {0, 1, 4}, {1, 5, 4},
             {2, 6, 3}, {3, 6, 7}, {0, 4, 2}, {2, 4, 6}, {1, 3, 5}, {3, 7, 5}};
  return m;
}

}  // namespace

ShapeKind parse_shape_kind(std::string_view name) {
  if (name == "sphere") return ShapeKind::Sphere;
  if (name == "bumpy_sphere") return ShapeKind::BumpySphere;
  if (name == "cube") return ShapeKind::Cube;
  if (name == "torus") return ShapeKind::Torus;
  if (name == "plane") return ShapeKind::Plane;
  if (name == "icosphere") return ShapeKind::Icosphere;
  throw Error(ErrorCode::BadParams, "unknown shape '" + std::string(name) + "'");
}

std::string_view shape_name(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::Sphere: return "sphere";
    case ShapeKind::BumpySphere: return "bumpy_sphere";
    case ShapeKind::Cube: return "cube";
    case ShapeKind::Torus: return "torus";
    case ShapeKind::Plane: return "plane";
    case ShapeKind::Icosphere: return "icosphere";
  }
  return "?";
}

Mesh icosphere(unsigned level) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  Mesh m;
  for (const auto& v : {Vec3(-1, t, 0), Vec3(1, t, 0), Vec3(-1, -t, 0), Vec3(1, -t, 0), Vec3(0, -1, t),
                        Vec3(0, 1, t), Vec3(0, -1, -t), Vec3(0, 1, -t), Vec3(t, 0, -1), Vec3(t, 0, 1),
                        Vec3(-t, 0, -1), Vec3(-t, 0, 1)})
    m.positions.push_back(v.normalized());
  m.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
             {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
             {3, 8, 9},   {4, 9, 5},  {2, 4, 11}, {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  for (unsigned l = 0; l < level; ++l) {
    std::map<std::pair<Index, Index>, Index> midpoints;
    auto midpoint = [&](Index a, Index b) {
      const auto key = std::minmax(a, b);
      const auto it = midpoints.find(key);
      if (it != midpoints.end()) return it->second;
      const auto id = static_cast<Index>(m.positions.size());
      m.positions.push_back((m.positions[a] + m.positions[b]).normalized());
      midpoints.emplace(key, id);
      return id;
    };
    std::vector<Face> next;
    next.reserve(m.faces.size() * 4);
    for (const Face& f : m.faces) {
      const Index ab = midpoint(f[0], f[1]);
      const Index bc = midpoint(f[1], f[2]);
      const Index ca = midpoint(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    m.faces = std::move(next);
  }
  return m;
}

SynthShape synth_shape(ShapeKind kind, std::size_t n, std::uint64_t seed, const ShapeParams& params) {
  if (n < 100) throw Error(ErrorCode::BadParams, "synthetic shapes need at least 100 points");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  SynthShape s;
  s.kind = kind;
  Positions& pts = s.cloud.positions;
  pts.reserve(n);

  switch (kind) {
    case ShapeKind::Sphere:
      for (std::size_t i = 0; i < n; ++i) pts.push_back(random_direction(rng));
      break;
    case ShapeKind::BumpySphere:
      s.bumps = place_bumps(params, rng);
      for (std::size_t i = 0; i < n; ++i) {
        const Vec3 u = random_direction(rng);
        pts.push_back(bumpy_radius(s.bumps, u) * u);
      }
      break;
    case ShapeKind::Cube: {
      const double h = params.cube_half;
      std::uniform_int_distribution<int> face(0, 5);
      for (std::size_t i = 0; i < n; ++i) {
        const int f = face(rng);
        const double a = (2.0 * unit(rng) - 1.0) * h;
        const double b = (2.0 * unit(rng) - 1.0) * h;
        const double c = f % 2 == 0 ? -h : h;
        const int axis = f / 2;
        Vec3 p;
        p[axis] = c;
        p[(axis + 1) % 3] = a;
        p[(axis + 2) % 3] = b;
        pts.push_back(p);
      }
      s.mesh = cube_mesh(h);
      break;
    }
    case ShapeKind::Torus: {
      const double big = params.torus_major;
      const double small = params.torus_minor;
      while (pts.size() < n) {
        const double theta = 2.0 * std::numbers::pi * unit(rng);
        const double phi = 2.0 * std::numbers::pi * unit(rng);
        // Area element is proportional to (R + r cos theta).
        if (unit(rng) * (big + small) > big + small * std::cos(theta)) continue;
        const double ring = big + small * std::cos(theta);
        pts.emplace_back(ring * std::cos(phi), ring * std::sin(phi), small * std::sin(theta));
      }
      break;
    }
    case ShapeKind::Plane:
      for (std::size_t i = 0; i < n; ++i)
        pts.emplace_back((2.0 * unit(rng) - 1.0) * params.plane_extent, (2.0 * unit(rng) - 1.0) * params.plane_extent,
                         0.0);
      break;
    case ShapeKind::Icosphere: {
      unsigned level = 0;
      while (10 * (std::size_t{1} << (2 * level)) + 2 < n) ++level;
      s.mesh = icosphere(level);
      pts = s.mesh->positions;
      break;
    }
  }
  return s;
}

bool in_bump_support(const std::vector<Bump>& bumps, const Vec3& p, double sigmas) {
  const Vec3 u = p.normalized();
  for (const Bump& b : bumps)
    if (angle_between(u, b.center) <= sigmas * b.width) return true;
  return false;
}

PointCloud add_noise(const PointCloud& cloud, double sigma, std::uint64_t seed, bool absolute) {
  if (!(sigma >= 0.0)) throw Error(ErrorCode::BadParams, "noise sigma must be nonnegative");
  PointCloud out(cloud.positions);
  if (sigma == 0.0 || cloud.positions.empty()) {
    out.normals = cloud.normals;
    return out;
  }
  const double std_dev = absolute ? sigma : sigma * bounding_box(cloud.positions).diagonal();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, std_dev);
  for (Vec3& p : out.positions)
    for (int a = 0; a < 3; ++a) p[a] += gauss(rng);
  return out;
}

}  // namespace pcs
