#pragma once

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "sandro/error.hpp"
#include "sandro/geometry.hpp"
#include "sandro/io.hpp"

namespace sandro {

// PLY point clouds: ASCII or binary little-endian, vertex x/y/z as float or
// double, optional nx/ny/nz. Other vertex properties and other elements are
// skipped where the layout allows it.

namespace ply {

enum class Format { kAscii, kBinaryLittleEndian };

enum class ScalarType { kInt8, kUint8, kInt16, kUint16, kInt32, kUint32, kFloat32, kFloat64 };

inline std::optional<ScalarType> parse_scalar(std::string_view s) {
  if (s == "char" || s == "int8") return ScalarType::kInt8;
  if (s == "uchar" || s == "uint8") return ScalarType::kUint8;
  if (s == "short" || s == "int16") return ScalarType::kInt16;
  if (s == "ushort" || s == "uint16") return ScalarType::kUint16;
  if (s == "int" || s == "int32") return ScalarType::kInt32;
  if (s == "uint" || s == "uint32") return ScalarType::kUint32;
  if (s == "float" || s == "float32") return ScalarType::kFloat32;
  if (s == "double" || s == "float64") return ScalarType::kFloat64;
  return std::nullopt;
}

inline std::size_t scalar_size(ScalarType t) {
  switch (t) {
    case ScalarType::kInt8:
    case ScalarType::kUint8: return 1;
    case ScalarType::kInt16:
    case ScalarType::kUint16: return 2;
    case ScalarType::kInt32:
    case ScalarType::kUint32:
    case ScalarType::kFloat32: return 4;
    case ScalarType::kFloat64: return 8;
  }
  return 0;
}

struct Property {
  std::string name;
  ScalarType type = ScalarType::kFloat32;
  bool is_list = false;
};

struct Element {
  std::string name;
  std::size_t count = 0;
  std::vector<Property> properties;

  bool has_lists() const {
    for (const auto& p : properties) {
      if (p.is_list) return true;
    }
    return false;
  }
  std::size_t record_size() const {
    std::size_t n = 0;
    for (const auto& p : properties) n += scalar_size(p.type);
    return n;
  }
  int find(std::string_view prop) const {
    for (std::size_t i = 0; i < properties.size(); ++i) {
      if (properties[i].name == prop) return static_cast<int>(i);
    }
    return -1;
  }
};

struct Header {
  Format format = Format::kAscii;
  std::vector<Element> elements;
  std::size_t payload_offset = 0;
};

[[noreturn]] inline void fail(std::size_t offset, const std::string& what) {
  throw Error(ErrorCategory::kParse, "PLY parse error at byte offset " + std::to_string(offset) + ": " + what);
}

inline Header parse_header(std::string_view data) {
  Header h;
  std::size_t pos = 0;
  bool saw_format = false;
  bool first = true;
  for (;;) {
    const std::size_t eol = data.find('\n', pos);
    if (eol == std::string_view::npos) fail(pos, "header is not terminated by end_header");
    std::string_view line = data.substr(pos, eol - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const std::size_t line_offset = pos;
    pos = eol + 1;

    std::istringstream is{std::string(line)};
    std::string kw;
    is >> kw;
    if (first) {
      if (kw != "ply") fail(line_offset, "missing 'ply' magic");
      first = false;
      continue;
    }
    if (kw.empty() || kw == "comment" || kw == "obj_info") continue;
    if (kw == "format") {
      std::string fmt, version;
      is >> fmt >> version;
      if (fmt == "ascii") {
        h.format = Format::kAscii;
      } else if (fmt == "binary_little_endian") {
        h.format = Format::kBinaryLittleEndian;
      } else {
        fail(line_offset, "unsupported format '" + fmt + "'");
      }
      saw_format = true;
    } else if (kw == "element") {
      Element e;
      long long count = -1;
      is >> e.name >> count;
      if (e.name.empty() || count < 0) fail(line_offset, "malformed element line");
      e.count = static_cast<std::size_t>(count);
      h.elements.push_back(std::move(e));
    } else if (kw == "property") {
      if (h.elements.empty()) fail(line_offset, "property before any element");
      Property p;
      std::string type;
      is >> type;
      if (type == "list") {
        std::string count_type, item_type;
        is >> count_type >> item_type >> p.name;
        if (!parse_scalar(count_type) || !parse_scalar(item_type)) fail(line_offset, "bad list property types");
        p.is_list = true;
        p.type = *parse_scalar(item_type);
      } else {
        const auto t = parse_scalar(type);
        if (!t) fail(line_offset, "unknown property type '" + type + "'");
        p.type = *t;
        is >> p.name;
      }
      if (p.name.empty()) fail(line_offset, "property without a name");
      h.elements.back().properties.push_back(p);
    } else if (kw == "end_header") {
      break;
    } else {
      fail(line_offset, "unexpected header keyword '" + kw + "'");
    }
  }
  if (!saw_format) fail(0, "missing format line");
  h.payload_offset = pos;
  return h;
}

template <typename T>
T load_le(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  static_assert(std::endian::native == std::endian::little, "big-endian hosts are not supported");
  return v;
}

inline double read_scalar(const char* p, ScalarType t) {
  switch (t) {
    case ScalarType::kInt8: return load_le<std::int8_t>(p);
    case ScalarType::kUint8: return load_le<std::uint8_t>(p);
    case ScalarType::kInt16: return load_le<std::int16_t>(p);
    case ScalarType::kUint16: return load_le<std::uint16_t>(p);
    case ScalarType::kInt32: return load_le<std::int32_t>(p);
    case ScalarType::kUint32: return load_le<std::uint32_t>(p);
    case ScalarType::kFloat32: return load_le<float>(p);
    case ScalarType::kFloat64: return load_le<double>(p);
  }
  return 0.0;
}

}  // namespace ply

/// Parses PLY bytes. Errors name the byte offset; a short payload names the
/// first missing vertex record.
inline PointCloud parse_ply(std::string_view data) {
  using namespace ply;
  const Header h = parse_header(data);

  std::size_t vertex_elem = h.elements.size();
  for (std::size_t i = 0; i < h.elements.size(); ++i) {
    if (h.elements[i].name == "vertex") {
      vertex_elem = i;
      break;
    }
  }
  if (vertex_elem == h.elements.size()) fail(h.payload_offset, "no vertex element");
  const Element& vx = h.elements[vertex_elem];
  const int ix = vx.find("x"), iy = vx.find("y"), iz = vx.find("z");
  if (ix < 0 || iy < 0 || iz < 0) fail(h.payload_offset, "vertex element lacks x, y or z");
  for (int i : {ix, iy, iz}) {
    const auto t = vx.properties[static_cast<std::size_t>(i)].type;
    if (t != ScalarType::kFloat32 && t != ScalarType::kFloat64) {
      fail(h.payload_offset, "vertex coordinates must be float or double");
    }
  }
  const int inx = vx.find("nx"), iny = vx.find("ny"), inz = vx.find("nz");
  const bool with_normals = inx >= 0 && iny >= 0 && inz >= 0;
  if (vx.has_lists()) fail(h.payload_offset, "unsupported element layout: list property in vertex element");

  PointCloud cloud;
  cloud.points.reserve(vx.count);
  if (with_normals) cloud.normals.reserve(vx.count);
  std::vector<double> values(vx.properties.size());

  auto store = [&](std::size_t offset) {
    const Point3 p(values[static_cast<std::size_t>(ix)], values[static_cast<std::size_t>(iy)],
                   values[static_cast<std::size_t>(iz)]);
    if (!p.allFinite()) fail(offset, "non-finite vertex coordinate in record " + std::to_string(cloud.size()));
    cloud.points.push_back(p);
    if (with_normals) {
      Point3 n(values[static_cast<std::size_t>(inx)], values[static_cast<std::size_t>(iny)],
               values[static_cast<std::size_t>(inz)]);
      const double len = n.norm();
      // Files commonly store normals in float32; renormalize to meet the unit invariant.
      cloud.normals.push_back(len > 0.0 && std::isfinite(len) ? Point3(n / len) : Point3::Zero());
    }
  };

  std::size_t pos = h.payload_offset;
  if (h.format == Format::kBinaryLittleEndian) {
    for (std::size_t e = 0; e < vertex_elem; ++e) {
      if (h.elements[e].has_lists()) {
        fail(pos, "unsupported element layout: list element '" + h.elements[e].name + "' precedes vertex data");
      }
      pos += h.elements[e].count * h.elements[e].record_size();
    }
    const std::size_t rec = vx.record_size();
    for (std::size_t r = 0; r < vx.count; ++r) {
      if (pos + rec > data.size()) {
        fail(pos, "truncated payload: vertex record " + std::to_string(r) + " of " + std::to_string(vx.count) +
                      " is missing");
      }
      std::size_t off = pos;
      for (std::size_t k = 0; k < vx.properties.size(); ++k) {
        values[k] = read_scalar(data.data() + off, vx.properties[k].type);
        off += scalar_size(vx.properties[k].type);
      }
      store(pos);
      pos += rec;
    }
    return cloud;
  }

  // ASCII: one record per line.
  auto next_line = [&](std::string_view& line) {
    while (pos < data.size()) {
      const std::size_t eol = std::min(data.find('\n', pos), data.size());
      line = data.substr(pos, eol - pos);
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      const std::size_t start = pos;
      pos = eol + 1;
      if (line.find_first_not_of(" \t") != std::string_view::npos) return start;
    }
    return std::string::npos;
  };
  std::string_view line;
  for (std::size_t e = 0; e < vertex_elem; ++e) {
    for (std::size_t r = 0; r < h.elements[e].count; ++r) {
      if (next_line(line) == std::string::npos) {
        fail(data.size(), "truncated payload inside element '" + h.elements[e].name + "'");
      }
    }
  }
  for (std::size_t r = 0; r < vx.count; ++r) {
    const std::size_t start = next_line(line);
    if (start == std::string::npos) {
      fail(data.size(), "truncated payload: vertex record " + std::to_string(r) + " of " + std::to_string(vx.count) +
                            " is missing");
    }
    const char* p = line.data();
    const char* end = line.data() + line.size();
    for (std::size_t k = 0; k < values.size(); ++k) {
      while (p < end && (*p == ' ' || *p == '\t')) ++p;
      const auto [next, ec] = std::from_chars(p, end, values[k]);
      if (ec != std::errc()) {
        fail(start + static_cast<std::size_t>(p - line.data()),
             "vertex record " + std::to_string(r) + ": expected " + std::to_string(values.size()) + " numbers");
      }
      p = next;
    }
    store(start);
  }
  return cloud;
}

inline PointCloud read_cloud(const std::filesystem::path& path) { return parse_ply(read_file(path)); }

enum class PlyEncoding { kAscii, kBinary };

inline std::string format_ply(const PointCloud& cloud, PlyEncoding encoding = PlyEncoding::kBinary) {
  cloud.validate();
  const bool normals = cloud.has_normals();
  std::string out = "ply\nformat ";
  out += encoding == PlyEncoding::kBinary ? "binary_little_endian 1.0\n" : "ascii 1.0\n";
  out += "element vertex " + std::to_string(cloud.size()) + "\n";
  out += "property double x\nproperty double y\nproperty double z\n";
  if (normals) out += "property double nx\nproperty double ny\nproperty double nz\n";
  out += "end_header\n";

  if (encoding == PlyEncoding::kBinary) {
    const std::size_t per = normals ? 6 : 3;
    const std::size_t head = out.size();
    out.resize(head + cloud.size() * per * sizeof(double));
    char* dst = out.data() + head;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      for (int k = 0; k < 3; ++k, dst += sizeof(double)) std::memcpy(dst, &cloud.points[i][k], sizeof(double));
      if (!normals) continue;
      for (int k = 0; k < 3; ++k, dst += sizeof(double)) std::memcpy(dst, &cloud.normals[i][k], sizeof(double));
    }
    return out;
  }

  char buf[32];
  auto put = [&](double v, char sep) {
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);  // shortest round-trip form
    out.append(buf, res.ptr);
    out.push_back(sep);
  };
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    put(cloud.points[i].x(), ' ');
    put(cloud.points[i].y(), ' ');
    put(cloud.points[i].z(), normals ? ' ' : '\n');
    if (!normals) continue;
    put(cloud.normals[i].x(), ' ');
    put(cloud.normals[i].y(), ' ');
    put(cloud.normals[i].z(), '\n');
  }
  return out;
}

inline void write_cloud(const PointCloud& cloud, const std::filesystem::path& path,
                        PlyEncoding encoding = PlyEncoding::kBinary) {
  atomic_write(path, format_ply(cloud, encoding));
}

}  // namespace sandro
