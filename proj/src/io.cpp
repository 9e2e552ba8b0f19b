#include "pcsimp/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>

#include "pcsimp/error.hpp"
#include "pcsimp/text.hpp"

namespace pcs {

PointCloud Geometry::cloud() const {
  PointCloud c(positions);
  c.normals = normals;
  return c;
}

Mesh Geometry::mesh() const { return Mesh{positions, faces}; }

namespace {

[[noreturn]] void malformed_line(std::size_t line, const std::string& what) {
  throw Error(ErrorCode::MalformedFile, "line " + std::to_string(line) + ": " + what);
}

[[noreturn]] void malformed_offset(std::size_t offset, const std::string& what) {
  throw Error(ErrorCode::MalformedFile, "byte offset " + std::to_string(offset) + ": " + what);
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    const std::size_t b = i;
    while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    if (i > b) out.push_back(s.substr(b, i - b));
  }
  return out;
}

struct Line {
  std::size_t number;
  std::vector<std::string_view> tokens;
};

// Nonblank lines with '#' comments stripped.
std::vector<Line> content_lines(std::string_view data) {
  std::vector<Line> out;
  std::size_t number = 0;
  std::size_t pos = 0;
  while (pos <= data.size()) {
    const std::size_t eol = std::min(data.find('\n', pos), data.size());
    std::string_view line = data.substr(pos, eol - pos);
    ++number;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    auto tokens = split_ws(line);
    if (!tokens.empty()) out.push_back({number, std::move(tokens)});
    if (eol == data.size()) break;
    pos = eol + 1;
  }
  return out;
}

double number_at(const Line& line, std::size_t i) {
  if (i >= line.tokens.size()) malformed_line(line.number, "expected a number");
  const auto v = parse_double(line.tokens[i]);
  if (!v) malformed_line(line.number, "not a number: '" + std::string(line.tokens[i]) + "'");
  return *v;
}

long long integer_at(const Line& line, std::size_t i) {
  if (i >= line.tokens.size()) malformed_line(line.number, "expected an integer");
  const auto v = parse_integer(line.tokens[i]);
  if (!v) malformed_line(line.number, "not an integer: '" + std::string(line.tokens[i]) + "'");
  return *v;
}

void add_polygon(Geometry& g, const std::vector<long long>& ids, std::size_t line) {
  if (ids.size() < 3) malformed_line(line, "face with fewer than 3 vertices");
  for (long long id : ids)
    if (id < 0 || static_cast<std::size_t>(id) >= g.positions.size())
      malformed_line(line, "face index " + std::to_string(id) + " out of range");
  for (std::size_t t = 1; t + 1 < ids.size(); ++t)
    g.faces.push_back({static_cast<Index>(ids[0]), static_cast<Index>(ids[t]), static_cast<Index>(ids[t + 1])});
}

Geometry parse_off(std::string_view data) {
  const auto lines = content_lines(data);
  if (lines.empty()) throw Error(ErrorCode::MalformedFile, "empty OFF file");
  const Line& head = lines[0];
  if (head.tokens[0] != "OFF" && head.tokens[0] != "COFF")
    malformed_line(head.number, "expected OFF or COFF header");

  // Counts may share the header line.
  Line counts = head;
  std::size_t next = 1;
  if (head.tokens.size() > 1) {
    counts.tokens.erase(counts.tokens.begin());
  } else {
    if (lines.size() < 2) malformed_line(head.number, "missing vertex/face counts");
    counts = lines[1];
    next = 2;
  }
  const long long nv = integer_at(counts, 0);
  const long long nf = integer_at(counts, 1);
  if (nv < 0 || nf < 0) malformed_line(counts.number, "negative element count");

  Geometry g;
  g.positions.reserve(static_cast<std::size_t>(nv));
  for (long long v = 0; v < nv; ++v, ++next) {
    if (next >= lines.size()) malformed_line(lines.back().number, "file ends before all vertices");
    const Line& l = lines[next];
    g.positions.emplace_back(number_at(l, 0), number_at(l, 1), number_at(l, 2));
  }
  for (long long f = 0; f < nf; ++f, ++next) {
    if (next >= lines.size()) malformed_line(lines.back().number, "file ends before all faces");
    const Line& l = lines[next];
    const long long n = integer_at(l, 0);
    if (n < 3) malformed_line(l.number, "face with fewer than 3 vertices");
    std::vector<long long> ids;
    for (long long t = 0; t < n; ++t) ids.push_back(integer_at(l, static_cast<std::size_t>(t + 1)));
    add_polygon(g, ids, l.number);
  }
  if (next < lines.size()) malformed_line(lines[next].number, "unexpected content after the last face");
  return g;
}

Geometry parse_obj(std::string_view data) {
  Geometry g;
  std::vector<Vec3> normals;
  for (const Line& l : content_lines(data)) {
    const std::string_view key = l.tokens[0];
    if (key == "v") {
      g.positions.emplace_back(number_at(l, 1), number_at(l, 2), number_at(l, 3));
    } else if (key == "vn") {
      normals.emplace_back(number_at(l, 1), number_at(l, 2), number_at(l, 3));
    } else if (key == "f") {
      std::vector<long long> ids;
      for (std::size_t t = 1; t < l.tokens.size(); ++t) {
        const std::string_view ref = l.tokens[t].substr(0, l.tokens[t].find('/'));
        const auto id = parse_integer(ref);
        if (!id || *id == 0) malformed_line(l.number, "bad face reference '" + std::string(l.tokens[t]) + "'");
        ids.push_back(*id > 0 ? *id - 1 : static_cast<long long>(g.positions.size()) + *id);
      }
      add_polygon(g, ids, l.number);
    }
  }
  if (normals.size() == g.positions.size()) g.normals = std::move(normals);
  return g;
}

Geometry parse_xyz(std::string_view data) {
  Geometry g;
  std::size_t columns = 0;
  for (const Line& l : content_lines(data)) {
    if (columns == 0) columns = l.tokens.size();
    if (l.tokens.size() != columns || (columns != 3 && columns != 6))
      malformed_line(l.number, "expected 3 or 6 columns consistently, got " + std::to_string(l.tokens.size()));
    g.positions.emplace_back(number_at(l, 0), number_at(l, 1), number_at(l, 2));
    if (columns == 6) g.normals.emplace_back(number_at(l, 3), number_at(l, 4), number_at(l, 5));
  }
  return g;
}

// ---- PLY ----

enum class PlyType { Int8, UInt8, Int16, UInt16, Int32, UInt32, Float32, Float64 };

std::optional<PlyType> ply_type(std::string_view name) {
  if (name == "char" || name == "int8") return PlyType::Int8;
  if (name == "uchar" || name == "uint8") return PlyType::UInt8;
  if (name == "short" || name == "int16") return PlyType::Int16;
  if (name == "ushort" || name == "uint16") return PlyType::UInt16;
  if (name == "int" || name == "int32") return PlyType::Int32;
  if (name == "uint" || name == "uint32") return PlyType::UInt32;
  if (name == "float" || name == "float32") return PlyType::Float32;
  if (name == "double" || name == "float64") return PlyType::Float64;
  return std::nullopt;
}

std::size_t ply_size(PlyType t) {
  switch (t) {
    case PlyType::Int8:
    case PlyType::UInt8: return 1;
    case PlyType::Int16:
    case PlyType::UInt16: return 2;
    case PlyType::Int32:
    case PlyType::UInt32:
    case PlyType::Float32: return 4;
    case PlyType::Float64: return 8;
  }
  return 0;
}

struct PlyProperty {
  std::string name;
  PlyType type = PlyType::Float64;
  bool is_list = false;
  PlyType count_type = PlyType::UInt8;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> properties;
};

template <typename T>
T load_le(const unsigned char* p) {
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

template <typename T>
void store_le(std::string& out, T v) {
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  out.append(reinterpret_cast<const char*>(buf), sizeof(T));
}

// Sequential reader over the PLY body in either encoding.
class PlyBody {
 public:
  PlyBody(std::string_view body, std::size_t body_offset, std::size_t first_line, bool binary)
      : body_(body), base_(body_offset), line_(first_line), binary_(binary) {}

  double read(PlyType t) { return binary_ ? read_binary(t) : read_ascii(t); }

  void expect_end() {
    if (binary_) {
      if (pos_ != body_.size()) malformed_offset(base_ + pos_, "trailing bytes after the last element");
      return;
    }
    skip_space();
    if (pos_ != body_.size()) malformed_line(line_, "unexpected content after the last element");
  }

 private:
  void skip_space() {
    while (pos_ < body_.size() && std::isspace(static_cast<unsigned char>(body_[pos_]))) {
      if (body_[pos_] == '\n') ++line_;
      ++pos_;
    }
  }

  double read_ascii(PlyType t) {
    skip_space();
    const std::size_t b = pos_;
    while (pos_ < body_.size() && !std::isspace(static_cast<unsigned char>(body_[pos_]))) ++pos_;
    if (pos_ == b) malformed_line(line_, "file ends before all elements were read");
    const std::string_view tok = body_.substr(b, pos_ - b);
    if (t == PlyType::Float32 || t == PlyType::Float64) {
      const auto v = parse_double(tok);
      if (!v) malformed_line(line_, "not a number: '" + std::string(tok) + "'");
      return *v;
    }
    const auto v = parse_integer(tok);
    if (!v) malformed_line(line_, "not an integer: '" + std::string(tok) + "'");
    return static_cast<double>(*v);
  }

  double read_binary(PlyType t) {
    const std::size_t n = ply_size(t);
    if (pos_ + n > body_.size()) malformed_offset(base_ + pos_, "file ends before all elements were read");
    const auto* p = reinterpret_cast<const unsigned char*>(body_.data() + pos_);
    pos_ += n;
    switch (t) {
      case PlyType::Int8: return load_le<std::int8_t>(p);
      case PlyType::UInt8: return load_le<std::uint8_t>(p);
      case PlyType::Int16: return load_le<std::int16_t>(p);
      case PlyType::UInt16: return load_le<std::uint16_t>(p);
      case PlyType::Int32: return load_le<std::int32_t>(p);
      case PlyType::UInt32: return load_le<std::uint32_t>(p);
      case PlyType::Float32: return load_le<float>(p);
      case PlyType::Float64: return load_le<double>(p);
    }
    return 0.0;
  }

  std::string_view body_;
  std::size_t base_;
  std::size_t pos_ = 0;
  std::size_t line_;
  bool binary_;
};

Geometry parse_ply(std::string_view data) {
  std::vector<PlyElement> elements;
  bool binary = false;
  bool have_format = false;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  bool ended = false;
  while (pos < data.size()) {
    const std::size_t eol = data.find('\n', pos);
    if (eol == std::string_view::npos) break;
    std::string_view line = data.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const auto tok = split_ws(line);
    if (line_no == 1) {
      if (tok.size() != 1 || tok[0] != "ply") malformed_line(1, "missing 'ply' magic");
      continue;
    }
    if (tok.empty() || tok[0] == "comment" || tok[0] == "obj_info") continue;
    if (tok[0] == "end_header") {
      ended = true;
      break;
    }
    if (tok[0] == "format") {
      if (tok.size() != 3) malformed_line(line_no, "bad format line");
      if (tok[1] == "ascii") {
        binary = false;
      } else if (tok[1] == "binary_little_endian") {
        binary = true;
      } else {
        throw Error(ErrorCode::UnsupportedFormat, "PLY encoding '" + std::string(tok[1]) + "' is not supported");
      }
      have_format = true;
    } else if (tok[0] == "element") {
      if (tok.size() != 3) malformed_line(line_no, "bad element line");
      const auto count = parse_integer(tok[2]);
      if (!count || *count < 0) malformed_line(line_no, "bad element count");
      elements.push_back({std::string(tok[1]), static_cast<std::size_t>(*count), {}});
    } else if (tok[0] == "property") {
      if (elements.empty()) malformed_line(line_no, "property before any element");
      PlyProperty prop;
      if (tok.size() == 5 && tok[1] == "list") {
        const auto ct = ply_type(tok[2]);
        const auto it = ply_type(tok[3]);
        if (!ct || !it) malformed_line(line_no, "unknown property type");
        prop = {std::string(tok[4]), *it, true, *ct};
      } else if (tok.size() == 3) {
        const auto t = ply_type(tok[1]);
        if (!t) malformed_line(line_no, "unknown property type '" + std::string(tok[1]) + "'");
        prop = {std::string(tok[2]), *t, false, PlyType::UInt8};
      } else {
        malformed_line(line_no, "bad property line");
      }
      elements.back().properties.push_back(prop);
    } else {
      malformed_line(line_no, "unknown header keyword '" + std::string(tok[0]) + "'");
    }
  }
  if (!ended) malformed_line(line_no, "header has no end_header");
  if (!have_format) malformed_line(line_no, "header has no format line");

  Geometry g;
  PlyBody body(data.substr(pos), pos, line_no + 1, binary);
  for (const PlyElement& el : elements) {
    const bool is_vertex = el.name == "vertex";
    const bool is_face = el.name == "face";
    int xyz[3] = {-1, -1, -1};
    int nxyz[3] = {-1, -1, -1};
    int face_prop = -1;
    for (std::size_t p = 0; p < el.properties.size(); ++p) {
      const auto& name = el.properties[p].name;
      const int ip = static_cast<int>(p);
      for (int a = 0; a < 3; ++a) {
        if (name == std::string(1, static_cast<char>('x' + a))) xyz[a] = ip;
        if (name == "n" + std::string(1, static_cast<char>('x' + a))) nxyz[a] = ip;
      }
      if (el.properties[p].is_list && (name == "vertex_indices" || name == "vertex_index")) face_prop = ip;
    }
    if (is_vertex && (xyz[0] < 0 || xyz[1] < 0 || xyz[2] < 0))
      throw Error(ErrorCode::MalformedFile, "vertex element lacks x/y/z properties");
    const bool with_normals = is_vertex && nxyz[0] >= 0 && nxyz[1] >= 0 && nxyz[2] >= 0;

    std::vector<double> scalars(el.properties.size());
    std::vector<long long> list;
    for (std::size_t e = 0; e < el.count; ++e) {
      std::vector<long long> face;
      for (std::size_t p = 0; p < el.properties.size(); ++p) {
        const PlyProperty& prop = el.properties[p];
        if (!prop.is_list) {
          scalars[p] = body.read(prop.type);
          continue;
        }
        const double n = body.read(prop.count_type);
        if (n < 0) throw Error(ErrorCode::MalformedFile, "negative list length");
        list.assign(static_cast<std::size_t>(n), 0);
        for (auto& v : list) v = static_cast<long long>(body.read(prop.type));
        if (static_cast<int>(p) == face_prop) face = list;
      }
      if (is_vertex) {
        g.positions.emplace_back(scalars[xyz[0]], scalars[xyz[1]], scalars[xyz[2]]);
        if (with_normals) g.normals.emplace_back(scalars[nxyz[0]], scalars[nxyz[1]], scalars[nxyz[2]]);
      } else if (is_face && face_prop >= 0) {
        if (face.size() < 3) throw Error(ErrorCode::MalformedFile, "face " + std::to_string(e) + " has < 3 vertices");
        for (long long id : face)
          if (id < 0 || static_cast<std::size_t>(id) >= g.positions.size())
            throw Error(ErrorCode::MalformedFile, "face " + std::to_string(e) + " index out of range");
        for (std::size_t t = 1; t + 1 < face.size(); ++t)
          g.faces.push_back({static_cast<Index>(face[0]), static_cast<Index>(face[t]),
                             static_cast<Index>(face[t + 1])});
      }
    }
  }
  body.expect_end();
  return g;
}

void append_row(std::string& out, const Vec3& v) {
  out += format_double(v.x());
  out += ' ';
  out += format_double(v.y());
  out += ' ';
  out += format_double(v.z());
}

std::string write_ply(const Geometry& g, PlyEncoding encoding) {
  const bool normals = g.normals.size() == g.positions.size() && !g.normals.empty();
  std::string out = "ply\nformat ";
  out += encoding == PlyEncoding::Ascii ? "ascii 1.0\n" : "binary_little_endian 1.0\n";
  out += "element vertex " + std::to_string(g.positions.size()) + "\n";
  out += "property double x\nproperty double y\nproperty double z\n";
  if (normals) out += "property double nx\nproperty double ny\nproperty double nz\n";
  if (g.is_mesh()) {
    out += "element face " + std::to_string(g.faces.size()) + "\n";
    out += "property list uchar int vertex_indices\n";
  }
  out += "end_header\n";
  for (std::size_t i = 0; i < g.positions.size(); ++i) {
    if (encoding == PlyEncoding::Ascii) {
      append_row(out, g.positions[i]);
      if (normals) {
        out += ' ';
        append_row(out, g.normals[i]);
      }
      out += '\n';
    } else {
      for (int a = 0; a < 3; ++a) store_le<double>(out, g.positions[i][a]);
      if (normals)
        for (int a = 0; a < 3; ++a) store_le<double>(out, g.normals[i][a]);
    }
  }
  for (const Face& f : g.faces) {
    if (encoding == PlyEncoding::Ascii) {
      out += "3 " + std::to_string(f[0]) + ' ' + std::to_string(f[1]) + ' ' + std::to_string(f[2]) + '\n';
    } else {
      store_le<std::uint8_t>(out, 3);
      for (Index v : f) store_le<std::int32_t>(out, static_cast<std::int32_t>(v));
    }
  }
  return out;
}

std::string write_obj(const Geometry& g) {
  std::string out;
  for (const Vec3& p : g.positions) {
    out += "v ";
    append_row(out, p);
    out += '\n';
  }
  if (g.normals.size() == g.positions.size())
    for (const Vec3& n : g.normals) {
      out += "vn ";
      append_row(out, n);
      out += '\n';
    }
  for (const Face& f : g.faces)
    out += "f " + std::to_string(f[0] + 1) + ' ' + std::to_string(f[1] + 1) + ' ' + std::to_string(f[2] + 1) + '\n';
  return out;
}

std::string write_off(const Geometry& g) {
  std::string out = "OFF\n" + std::to_string(g.positions.size()) + ' ' + std::to_string(g.faces.size()) + " 0\n";
  for (const Vec3& p : g.positions) {
    append_row(out, p);
    out += '\n';
  }
  for (const Face& f : g.faces)
    out += "3 " + std::to_string(f[0]) + ' ' + std::to_string(f[1]) + ' ' + std::to_string(f[2]) + '\n';
  return out;
}

std::string write_xyz(const Geometry& g) {
  const bool normals = !g.normals.empty() && g.normals.size() == g.positions.size();
  std::string out;
  for (std::size_t i = 0; i < g.positions.size(); ++i) {
    append_row(out, g.positions[i]);
    if (normals) {
      out += ' ';
      append_row(out, g.normals[i]);
    }
    out += '\n';
  }
  return out;
}

}  // namespace

FileFormat parse_format(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "ply") return FileFormat::Ply;
  if (lower == "obj") return FileFormat::Obj;
  if (lower == "off") return FileFormat::Off;
  if (lower == "xyz") return FileFormat::Xyz;
  throw Error(ErrorCode::UnsupportedFormat, "unknown format '" + std::string(name) + "'");
}

FileFormat format_from_path(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  if (ext.empty()) throw Error(ErrorCode::UnsupportedFormat, "no file extension: " + path.string());
  return parse_format(std::string_view(ext).substr(1));
}

std::string_view format_name(FileFormat format) {
  switch (format) {
    case FileFormat::Ply: return "ply";
    case FileFormat::Obj: return "obj";
    case FileFormat::Off: return "off";
    case FileFormat::Xyz: return "xyz";
  }
  return "?";
}

Geometry parse_geometry(std::string_view data, FileFormat format) {
  switch (format) {
    case FileFormat::Ply: return parse_ply(data);
    case FileFormat::Obj: return parse_obj(data);
    case FileFormat::Off: return parse_off(data);
    case FileFormat::Xyz: return parse_xyz(data);
  }
  throw Error(ErrorCode::UnsupportedFormat, "unknown format");
}

Geometry parse_geometry(const std::filesystem::path& path) {
  const FileFormat format = format_from_path(path);
  const std::string data = read_file(path);
  try {
    return parse_geometry(data, format);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::MalformedFile) throw;
    throw Error(ErrorCode::MalformedFile, path.string() + ": " + e.what());
  }
}

std::string write_geometry(const Geometry& geometry, FileFormat format, PlyEncoding encoding) {
  switch (format) {
    case FileFormat::Ply: return write_ply(geometry, encoding);
    case FileFormat::Obj: return write_obj(geometry);
    case FileFormat::Off: return write_off(geometry);
    case FileFormat::Xyz: return write_xyz(geometry);
  }
  throw Error(ErrorCode::UnsupportedFormat, "unknown format");
}

void write_geometry(const std::filesystem::path& path, const Geometry& geometry, PlyEncoding encoding) {
  write_file(path, write_geometry(geometry, format_from_path(path), encoding));
}

std::vector<unsigned char> gray_levels(std::span<const double> values) {
  std::vector<unsigned char> out(values.size(), 0);
  if (values.empty()) return out;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double range = *hi - *lo;
  if (!(range > 0.0)) return out;
  for (std::size_t i = 0; i < values.size(); ++i)
    out[i] = static_cast<unsigned char>(std::lround(255.0 * (values[i] - *lo) / range));
  return out;
}

std::string curvature_ply(std::span<const Vec3> positions, std::span<const double> mean_curvature) {
  if (positions.size() != mean_curvature.size())
    throw Error(ErrorCode::LengthMismatch, "one curvature value per point required");
  const auto gray = gray_levels(mean_curvature);
  std::string out = "ply\nformat ascii 1.0\nelement vertex " + std::to_string(positions.size()) + "\n";
  out += "property double x\nproperty double y\nproperty double z\nproperty double mean_curvature\n";
  out += "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n";
  for (std::size_t i = 0; i < positions.size(); ++i) {
    append_row(out, positions[i]);
    const std::string g = std::to_string(gray[i]);
    out += ' ' + format_double(mean_curvature[i]) + ' ' + g + ' ' + g + ' ' + g + '\n';
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error(ErrorCode::IoFailure, "read failed: " + path.string());
  return std::move(ss).str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw Error(ErrorCode::IoFailure, "write failed: " + path.string());
}

}  // namespace pcs
