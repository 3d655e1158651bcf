#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sandro/config.hpp"
#include "sandro/features.hpp"
#include "sandro/geometry.hpp"
#include "sandro/io.hpp"
#include "sandro/splitting.hpp"
#include "sandro/synthbench.hpp"

namespace sandro {

struct FeatureStage {
  PointCloud source;  // downsampled, with normals
  PointCloud target;
  std::vector<FpfhDescriptor> source_descriptors;
  std::vector<FpfhDescriptor> target_descriptors;
  CorrespondenceSet matches;
};

/// Downsample, estimate normals, describe with FPFH and keep mutual best matches.
inline FeatureStage compute_features(const PointCloud& source, const PointCloud& target, const RunConfig& cfg) {
  FeatureStage f;
  f.source = estimate_normals(voxel_downsample(source, cfg.voxel), cfg.effective_normal_radius());
  f.target = estimate_normals(voxel_downsample(target, cfg.voxel), cfg.effective_normal_radius());
  f.source_descriptors = compute_fpfh(f.source, cfg.effective_feature_radius());
  f.target_descriptors = compute_fpfh(f.target, cfg.effective_feature_radius());
  f.matches = mutual_match(f.source_descriptors, f.target_descriptors);
  return f;
}

struct RegistrationResult {
  RigidTransform transform;  // maps source onto target
  double final_loss = 0.0;
  std::size_t num_correspondences = 0;
  int num_splits = 1;
  std::size_t winner = 0;
  std::vector<double> split_losses;
  double wall_ms = 0.0;
  nlohmann::json config;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["transform"] = transform_to_json(transform);
    j["final_loss"] = final_loss;
    j["num_correspondences"] = num_correspondences;
    j["num_splits"] = num_splits;
    j["winner"] = winner;
    nlohmann::json losses = nlohmann::json::array();
    for (double l : split_losses) losses.push_back(std::isfinite(l) ? nlohmann::json(l) : nlohmann::json(nullptr));
    j["split_losses"] = losses;
    j["wall_time_ms"] = wall_ms;
    j["config"] = config;
    return j;
  }
};

/// End-to-end registration. With `matches` the feature stage is skipped and
/// the indices refer to the clouds exactly as given.
inline RegistrationResult register_clouds(const PointCloud& source, const PointCloud& target, const RunConfig& cfg,
                                          const std::optional<CorrespondenceSet>& matches = std::nullopt) {
  cfg.validate();
  source.validate();
  target.validate();
  const auto start = std::chrono::steady_clock::now();

  PointPairs pairs;
  std::size_t n = 0;
  if (matches) {
    pairs = make_pairs(source, target, *matches);
    n = matches->size();
  } else {
    const FeatureStage f = compute_features(source, target, cfg);
    pairs = make_pairs(f.source, f.target, f.matches);
    n = f.matches.size();
  }
  if (n < 3) {
    throw Error(ErrorCategory::kInsufficientCorrespondences,
                "insufficient correspondences: " + std::to_string(n) + " (need at least 3)");
  }
  if (n < 3 * static_cast<std::size_t>(cfg.split.num_splits)) {
    throw Error(ErrorCategory::kInsufficientCorrespondences,
                "insufficient correspondences: " + std::to_string(n) + " cannot feed " +
                    std::to_string(cfg.split.num_splits) + " sub-clouds of at least 3 pairs");
  }

  const SplitReport rep = solve_with_splits(pairs, cfg.gnc, cfg.split);
  const auto stop = std::chrono::steady_clock::now();

  RegistrationResult r;
  r.transform = rep.transform;
  r.final_loss = rep.winning_solve().final_gamma;
  r.num_correspondences = n;
  r.num_splits = cfg.split.num_splits;
  r.winner = rep.winner;
  r.split_losses = rep.losses;
  r.wall_ms = std::chrono::duration<double, std::milli>(stop - start).count();
  r.config = cfg.to_json();
  return r;
}

}  // namespace sandro
