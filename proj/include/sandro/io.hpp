#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "sandro/error.hpp"
#include "sandro/features.hpp"
#include "sandro/geometry.hpp"

namespace sandro {

/// Writes `content` to a sibling temp file, then renames it over `path`, so a
/// failed write never leaves a partial file behind.
inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
  std::random_device rd;
  const fs::path tmp = dir / (path.filename().string() + ".tmp" + std::to_string(rd()));
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw Error(ErrorCategory::kIo, "cannot open " + tmp.string() + " for writing");
    os.write(content.data(), static_cast<std::streamsize>(content.size()));
    os.flush();
    if (!os) {
      os.close();
      std::error_code ec;
      fs::remove(tmp, ec);
      throw Error(ErrorCategory::kIo, "failed writing " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(ErrorCategory::kIo, "cannot move output into place at " + path.string());
  }
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCategory::kIo, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

// ---------------------------------------------------------------------------
// Transforms
// ---------------------------------------------------------------------------

inline nlohmann::json transform_to_json(const RigidTransform& t) {
  nlohmann::json a = nlohmann::json::array();
  const Matrix4 m = t.matrix();
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) a.push_back(m(r, c));
  }
  return a;
}

inline RigidTransform transform_from_values(const std::vector<double>& v) {
  if (v.size() != 16) {
    throw Error(ErrorCategory::kParse, "a transform needs 16 numbers, got " + std::to_string(v.size()));
  }
  Matrix4 m;
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) m(r, c) = v[static_cast<std::size_t>(4 * r + c)];
  }
  return RigidTransform::from_matrix(m, 1e-6);
}

/// Accepts a JSON record with a "transform" array, a bare JSON array, or 16
/// whitespace-separated numbers (row-major homogeneous matrix). Rigidity is
/// re-validated.
inline RigidTransform parse_transform(const std::string& text) {
  std::vector<double> values;
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && (text[first] == '{' || text[first] == '[')) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCategory::kParse, std::string("malformed transform record: ") + e.what());
    }
    const nlohmann::json& arr = j.is_object() ? j.value("transform", nlohmann::json()) : j;
    if (!arr.is_array()) throw Error(ErrorCategory::kParse, "transform record has no 'transform' array");
    for (const auto& x : arr) {
      if (!x.is_number()) throw Error(ErrorCategory::kParse, "transform entries must be numbers");
      values.push_back(x.get<double>());
    }
  } else {
    std::istringstream is(text);
    double x;
    while (is >> x) values.push_back(x);
    if (!is.eof()) throw Error(ErrorCategory::kParse, "non-numeric token in transform file");
  }
  return transform_from_values(values);
}

inline RigidTransform read_transform(const std::filesystem::path& path) { return parse_transform(read_file(path)); }

// ---------------------------------------------------------------------------
// Correspondences (CSV with header src_idx,tgt_idx)
// ---------------------------------------------------------------------------

inline std::string correspondences_csv(const CorrespondenceSet& c) {
  std::string out = "src_idx,tgt_idx\n";
  for (std::size_t k = 0; k < c.size(); ++k) {
    out += std::to_string(c.source_indices[k]) + ',' + std::to_string(c.target_indices[k]) + '\n';
  }
  return out;
}

inline CorrespondenceSet parse_correspondences(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) throw Error(ErrorCategory::kParse, "empty correspondence file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "src_idx,tgt_idx") {
    throw Error(ErrorCategory::kParse, "correspondence file must start with header 'src_idx,tgt_idx'");
  }
  CorrespondenceSet c;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    auto parse_index = [&](std::string_view field, std::size_t& out) {
      const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), out);
      return ec == std::errc() && ptr == field.data() + field.size() && !field.empty();
    };
    std::size_t s = 0, t = 0;
    const std::string_view view(line);
    if (comma == std::string::npos || !parse_index(view.substr(0, comma), s) ||
        !parse_index(view.substr(comma + 1), t)) {
      throw Error(ErrorCategory::kParse, "bad correspondence on line " + std::to_string(lineno) + ": '" + line + "'");
    }
    c.push_back(s, t);
  }
  return c;
}

inline CorrespondenceSet read_correspondences(const std::filesystem::path& path) {
  return parse_correspondences(read_file(path));
}

}  // namespace sandro
