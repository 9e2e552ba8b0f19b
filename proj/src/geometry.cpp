#include "pcsimp/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pcsimp/error.hpp"

namespace pcs {

std::size_t SurfaceDescriptors::degenerate_count() const {
  return static_cast<std::size_t>(std::count(degenerate.begin(), degenerate.end(), 1));
}

void PointCloud::validate() const {
  if (positions.empty()) throw Error(ErrorCode::EmptyCloud, "point cloud has no points");
  for (std::size_t i = 0; i < positions.size(); ++i) {
    if (!positions[i].allFinite())
      throw Error(ErrorCode::InvalidCloud, "non-finite coordinate at point " + std::to_string(i));
  }
  if (normals.empty()) return;
  if (normals.size() != positions.size())
    throw Error(ErrorCode::InvalidCloud, "normal count differs from point count");
  for (std::size_t i = 0; i < normals.size(); ++i) {
    if (std::abs(normals[i].norm() - 1.0) > 1e-6)
      throw Error(ErrorCode::InvalidCloud, "normal " + std::to_string(i) + " is not unit length");
  }
}

void Mesh::validate() const {
  for (std::size_t f = 0; f < faces.size(); ++f) {
    const Face& t = faces[f];
    for (Index v : t) {
      if (v >= positions.size())
        throw Error(ErrorCode::InvalidMesh, "face " + std::to_string(f) + " references vertex " +
                                                std::to_string(v) + " out of range");
    }
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2])
      throw Error(ErrorCode::InvalidMesh, "face " + std::to_string(f) + " is degenerate");
  }
}

BoundingBox bounding_box(std::span<const Vec3> points) {
  if (points.empty()) return {Vec3::Zero(), Vec3::Zero()};
  BoundingBox box{points.front(), points.front()};
  for (const Vec3& p : points) {
    box.min = box.min.cwiseMin(p);
    box.max = box.max.cwiseMax(p);
  }
  return box;
}

}  // namespace pcs
