#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <nlohmann/json.hpp>

#include "sandro/error.hpp"
#include "sandro/solver.hpp"
#include "sandro/splitting.hpp"
#include "sandro/synthbench.hpp"

namespace sandro {

/// Environment variable naming a default `register` config file.
inline constexpr const char* kConfigEnvVar = "SANDRO_CONFIG";

namespace config_detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline double to_double(const std::string& field, const std::string& raw) {
  const std::string v = trim(raw);
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty()) {
    throw Error(ErrorCategory::kParse, "field '" + field + "': expected a number, got '" + v + "'");
  }
  return out;
}

inline long long to_int(const std::string& field, const std::string& raw) {
  const std::string v = trim(raw);
  long long out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty()) {
    throw Error(ErrorCategory::kParse, "field '" + field + "': expected an integer, got '" + v + "'");
  }
  return out;
}

inline bool to_bool(const std::string& field, const std::string& raw) {
  const std::string v = trim(raw);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw Error(ErrorCategory::kParse, "field '" + field + "': expected true or false, got '" + v + "'");
}

inline std::vector<double> to_list(const std::string& field, const std::string& raw) {
  std::vector<double> out;
  std::stringstream ss(raw);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_double(field, item));
  if (out.empty()) throw Error(ErrorCategory::kParse, "field '" + field + "': empty list");
  return out;
}

inline boost::property_tree::ptree read_ini(const std::filesystem::path& path) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(path.string(), tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw Error(ErrorCategory::kParse, std::string("config file: ") + e.what());
  }
  return tree;
}

inline std::optional<double> parse_alpha0(const std::string& field, const std::string& raw) {
  if (trim(raw) == "auto") return std::nullopt;
  return to_double(field, raw);
}

}  // namespace config_detail

/// Everything `register` needs. Defaults suit scene fragments at 5 cm resolution.
struct RunConfig {
  double voxel = 0.05;
  std::optional<double> normal_radius;   // default 2 * voxel
  std::optional<double> feature_radius;  // default 5 * voxel
  GncConfig gnc;
  SplitConfig split;
  std::uint64_t seed = 0;
  SuccessThresholds thresholds;

  double effective_normal_radius() const { return normal_radius.value_or(2.0 * voxel); }
  double effective_feature_radius() const { return feature_radius.value_or(5.0 * voxel); }

  void validate() const {
    if (!(voxel > 0.0)) throw Error(ErrorCategory::kConfig, "voxel: must be positive");
    if (!(effective_normal_radius() > 0.0)) throw Error(ErrorCategory::kConfig, "normal_radius: must be positive");
    if (!(effective_feature_radius() > 0.0)) throw Error(ErrorCategory::kConfig, "feature_radius: must be positive");
    gnc.validate();
    if (split.num_splits < 1) throw Error(ErrorCategory::kConfig, "splits: must be >= 1");
    if (!(thresholds.rotation_deg >= 0.0)) throw Error(ErrorCategory::kConfig, "threshold_rot_deg: must be >= 0");
    if (!(thresholds.translation_m >= 0.0)) throw Error(ErrorCategory::kConfig, "threshold_trans_m: must be >= 0");
  }

  /// Applies one `key = value` setting. Unknown keys are rejected.
  void set(const std::string& key, const std::string& value) {
    using namespace config_detail;
    if (key == "voxel") voxel = to_double(key, value);
    else if (key == "normal_radius") normal_radius = to_double(key, value);
    else if (key == "feature_radius") feature_radius = to_double(key, value);
    else if (key == "alpha0") gnc.alpha0 = parse_alpha0(key, value);
    else if (key == "beta") gnc.beta = to_double(key, value);
    else if (key == "epsilon") gnc.epsilon = to_double(key, value);
    else if (key == "max_iters") gnc.max_iterations = static_cast<int>(to_int(key, value));
    else if (key == "splits") split.num_splits = static_cast<int>(to_int(key, value));
    else if (key == "scheme") split.scheme = parse_scheme(trim(value));
    else if (key == "selection") split.selection = parse_selection(trim(value));
    else if (key == "seed") {
      seed = static_cast<std::uint64_t>(to_int(key, value));
      split.seed = seed;
    }
    else if (key == "threshold_rot_deg") thresholds.rotation_deg = to_double(key, value);
    else if (key == "threshold_trans_m") thresholds.translation_m = to_double(key, value);
    else throw Error(ErrorCategory::kParse, "unknown config field '" + key + "'");
  }

  static RunConfig from_file(const std::filesystem::path& path) {
    RunConfig cfg;
    for (const auto& [key, node] : config_detail::read_ini(path)) {
      if (!node.empty()) throw Error(ErrorCategory::kParse, "config section '[" + key + "]' is not supported here");
      cfg.set(key, node.data());
    }
    return cfg;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["voxel"] = voxel;
    j["normal_radius"] = effective_normal_radius();
    j["feature_radius"] = effective_feature_radius();
    j["alpha0"] = gnc.alpha0 ? nlohmann::json(*gnc.alpha0) : nlohmann::json("auto");
    j["beta"] = gnc.beta;
    j["epsilon"] = gnc.epsilon;
    j["max_iters"] = gnc.max_iterations;
    j["splits"] = split.num_splits;
    j["scheme"] = std::string(to_string(split.scheme));
    j["selection"] = std::string(to_string(split.selection));
    j["seed"] = seed;
    j["threshold_rot_deg"] = thresholds.rotation_deg;
    j["threshold_trans_m"] = thresholds.translation_m;
    return j;
  }
};

/// A synthetic campaign: top-level keys describe the scenarios, every
/// `[section]` defines one method named after the section.
struct CampaignConfig {
  std::vector<double> rates{0.5, 0.8, 0.9, 0.95};
  int trials = 40;
  std::uint64_t seed = 1;
  std::string source = "builtin";
  double voxel = 0.02;
  double noise_sigma = 0.0;
  double translation_box = 2.0;
  std::optional<double> rotation_deg;
  double sphere_radius = 1.0;
  double decoy_fraction = 0.0;
  double decoy_angle_deg = 30.0;
  double decoy_offset_m = 0.3;
  CampaignOptions options;
  std::vector<MethodConfig> methods;

  static MethodConfig parse_method(const std::string& name, const boost::property_tree::ptree& node) {
    using namespace config_detail;
    MethodConfig m;
    m.name = name;
    for (const auto& [key, child] : node) {
      const std::string field = name + "." + key;
      const std::string v = child.data();
      if (key == "splits") m.split.num_splits = static_cast<int>(to_int(field, v));
      else if (key == "scheme") m.split.scheme = parse_scheme(trim(v));
      else if (key == "selection") m.split.selection = parse_selection(trim(v));
      else if (key == "split_seed") m.split.seed = static_cast<std::uint64_t>(to_int(field, v));
      else if (key == "alpha0") m.gnc.alpha0 = parse_alpha0(field, v);
      else if (key == "beta") m.gnc.beta = to_double(field, v);
      else if (key == "epsilon") m.gnc.epsilon = to_double(field, v);
      else if (key == "max_iters") m.gnc.max_iterations = static_cast<int>(to_int(field, v));
      else throw Error(ErrorCategory::kParse, "unknown config field '" + field + "'");
    }
    if (m.split.num_splits < 1) throw Error(ErrorCategory::kConfig, "field '" + name + ".splits': must be >= 1");
    try {
      m.gnc.validate();
    } catch (const Error& e) {
      throw Error(ErrorCategory::kConfig, "method '" + name + "': " + e.what());
    }
    return m;
  }

  static CampaignConfig from_tree(const boost::property_tree::ptree& tree) {
    using namespace config_detail;
    CampaignConfig c;
    for (const auto& [key, node] : tree) {
      if (!node.empty()) {
        c.methods.push_back(parse_method(key, node));
        continue;
      }
      const std::string v = node.data();
      if (key == "rates") c.rates = to_list(key, v);
      else if (key == "trials") c.trials = static_cast<int>(to_int(key, v));
      else if (key == "seed") c.seed = static_cast<std::uint64_t>(to_int(key, v));
      else if (key == "source") c.source = trim(v);
      else if (key == "voxel") c.voxel = to_double(key, v);
      else if (key == "noise_sigma") c.noise_sigma = to_double(key, v);
      else if (key == "translation") c.translation_box = to_double(key, v);
      else if (key == "rotation_deg") c.rotation_deg = trim(v) == "uniform" ? std::nullopt : std::optional(to_double(key, v));
      else if (key == "sphere_radius") c.sphere_radius = to_double(key, v);
      else if (key == "decoy_fraction") c.decoy_fraction = to_double(key, v);
      else if (key == "decoy_angle_deg") c.decoy_angle_deg = to_double(key, v);
      else if (key == "decoy_offset_m") c.decoy_offset_m = to_double(key, v);
      else if (key == "timing") c.options.timing = to_bool(key, v);
      else if (key == "threshold_rot_deg") c.options.thresholds.rotation_deg = to_double(key, v);
      else if (key == "threshold_trans_m") c.options.thresholds.translation_m = to_double(key, v);
      else throw Error(ErrorCategory::kParse, "unknown config field '" + key + "'");
    }
    if (c.methods.empty()) throw Error(ErrorCategory::kConfig, "campaign config defines no [method] sections");
    if (c.trials < 1) throw Error(ErrorCategory::kConfig, "field 'trials': must be >= 1");
    if (!(c.voxel >= 0.0)) throw Error(ErrorCategory::kConfig, "field 'voxel': must be >= 0 (0 disables downsampling)");
    for (double r : c.rates) {
      if (!(r >= 0.0 && r < 1.0)) throw Error(ErrorCategory::kConfig, "field 'rates': every rate must lie in [0, 1)");
    }
    return c;
  }

  static CampaignConfig from_file(const std::filesystem::path& path) {
    return from_tree(config_detail::read_ini(path));
  }

  /// One scenario per outlier rate; scenario seeds derive from the master seed.
  std::vector<ScenarioConfig> scenarios(const PointCloud& source) const {
    std::vector<ScenarioConfig> out;
    for (std::size_t i = 0; i < rates.size(); ++i) {
      ScenarioConfig s;
      s.outlier_rate = rates[i];
      s.noise_sigma = noise_sigma;
      s.rotation_deg = rotation_deg;
      s.translation_box = translation_box;
      s.trials = trials;
      s.seed = mix_seed(seed + i);
      s.sphere_radius = sphere_radius;
      if (decoy_fraction > 0.0) {
        s.decoy = DecoyConfig{decoy_fraction,
                              DecoyConfig::nearby_copy(source.centroid(), decoy_angle_deg, decoy_offset_m)};
      }
      s.validate();
      out.push_back(s);
    }
    return out;
  }
};

}  // namespace sandro
