#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pcsimp/geometry.hpp"

namespace pcs {

enum class FileFormat { Ply, Obj, Off, Xyz };

enum class PlyEncoding { Ascii, BinaryLittleEndian };

/// Contents of a geometry file. Faces are empty for pure point files; polygons
/// are fan-triangulated on load.
struct Geometry {
  Positions positions;
  std::vector<Vec3> normals;  // empty unless the file carried per-vertex normals
  std::vector<Face> faces;

  bool is_mesh() const { return !faces.empty(); }
  PointCloud cloud() const;
  Mesh mesh() const;
};

/// Format from the file extension (.ply, .obj, .off, .xyz); throws UnsupportedFormat.
FileFormat format_from_path(const std::filesystem::path& path);
FileFormat parse_format(std::string_view name);
std::string_view format_name(FileFormat format);

/// Throws MalformedFile with a line (text formats) or byte offset (binary PLY).
Geometry parse_geometry(std::string_view data, FileFormat format);
Geometry parse_geometry(const std::filesystem::path& path);

/// Shortest round-trip decimal output; XYZ drops faces.
std::string write_geometry(const Geometry& geometry, FileFormat format,
                           PlyEncoding encoding = PlyEncoding::Ascii);
void write_geometry(const std::filesystem::path& path, const Geometry& geometry,
                    PlyEncoding encoding = PlyEncoding::Ascii);

/// Gray level in [0, 255] per value, min-max scaled; a constant field maps to 0.
std::vector<unsigned char> gray_levels(std::span<const double> values);

/// ASCII PLY with x, y, z, a double `mean_curvature` property and the gray
/// level repeated in red/green/blue.
std::string curvature_ply(std::span<const Vec3> positions, std::span<const double> mean_curvature);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace pcs
