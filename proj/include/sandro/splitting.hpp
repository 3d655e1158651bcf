#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sandro/error.hpp"
#include "sandro/features.hpp"
#include "sandro/solver.hpp"

namespace sandro {

enum class PartitionScheme { kContiguous, kShuffled, kSpatial };
enum class SelectionScope { kPerSubcloudLoss, kFullSetLoss };

inline std::string_view to_string(PartitionScheme s) {
  switch (s) {
    case PartitionScheme::kContiguous: return "contiguous";
    case PartitionScheme::kShuffled: return "shuffled";
    case PartitionScheme::kSpatial: return "spatial";
  }
  return "?";
}

inline std::string_view to_string(SelectionScope s) {
  return s == SelectionScope::kPerSubcloudLoss ? "subcloud" : "full";
}

inline PartitionScheme parse_scheme(std::string_view s) {
  if (s == "contiguous") return PartitionScheme::kContiguous;
  if (s == "shuffled") return PartitionScheme::kShuffled;
  if (s == "spatial") return PartitionScheme::kSpatial;
  throw Error(ErrorCategory::kConfig, "unknown partition scheme '" + std::string(s) +
                                          "' (expected contiguous, shuffled or spatial)");
}

inline SelectionScope parse_selection(std::string_view s) {
  if (s == "subcloud") return SelectionScope::kPerSubcloudLoss;
  if (s == "full") return SelectionScope::kFullSetLoss;
  throw Error(ErrorCategory::kConfig, "unknown selection scope '" + std::string(s) + "' (expected subcloud or full)");
}

struct SplitConfig {
  int num_splits = 4;
  PartitionScheme scheme = PartitionScheme::kContiguous;
  std::uint64_t seed = 0;  // used by the shuffled scheme
  SelectionScope selection = SelectionScope::kPerSubcloudLoss;

  void validate(std::size_t n) const {
    if (num_splits < 1) throw Error(ErrorCategory::kConfig, "number of splits must be >= 1");
    if (n < 3 * static_cast<std::size_t>(num_splits)) {
      throw Error(ErrorCategory::kConfig, "cannot split " + std::to_string(n) + " correspondences into " +
                                              std::to_string(num_splits) +
                                              " sub-clouds of at least 3 pairs each");
    }
  }
};

/// Partitions positions 0..n-1 into `num_splits` blocks whose sizes differ by at
/// most one (the first n % s blocks are the larger ones). `source_points[k]` is
/// the source-side point of pair k; only the spatial scheme reads it.
inline std::vector<std::vector<std::size_t>> split_indices(std::size_t n, const SplitConfig& config,
                                                           std::span<const Point3> source_points = {}) {
  config.validate(n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  switch (config.scheme) {
    case PartitionScheme::kContiguous:
      break;
    case PartitionScheme::kShuffled: {
      std::mt19937_64 rng(config.seed);
      std::shuffle(order.begin(), order.end(), rng);
      break;
    }
    case PartitionScheme::kSpatial: {
      if (source_points.size() != n) {
        throw Error(ErrorCategory::kConfig, "spatial partition needs one source point per correspondence");
      }
      Point3 mean = Point3::Zero();
      for (const auto& p : source_points) mean += p;
      mean /= static_cast<double>(n);
      Point3 var = Point3::Zero();
      for (const auto& p : source_points) var += (p - mean).cwiseAbs2();
      int axis = 0;
      var.maxCoeff(&axis);
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return source_points[a][axis] < source_points[b][axis];
      });
      break;
    }
  }

  const auto s = static_cast<std::size_t>(config.num_splits);
  std::vector<std::vector<std::size_t>> blocks(s);
  std::size_t pos = 0;
  for (std::size_t b = 0; b < s; ++b) {
    const std::size_t len = n / s + (b < n % s ? 1 : 0);
    blocks[b].assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                     order.begin() + static_cast<std::ptrdiff_t>(pos + len));
    pos += len;
  }
  return blocks;
}

inline std::vector<CorrespondenceSet> split_correspondences(const CorrespondenceSet& corr, const SplitConfig& config,
                                                            std::span<const Point3> source_cloud = {}) {
  std::vector<Point3> source_points;
  if (config.scheme == PartitionScheme::kSpatial) {
    source_points.reserve(corr.size());
    for (std::size_t idx : corr.source_indices) {
      if (idx >= source_cloud.size()) {
        throw Error(ErrorCategory::kConfig, "spatial partition needs the source cloud");
      }
      source_points.push_back(source_cloud[idx]);
    }
  }
  std::vector<CorrespondenceSet> out;
  for (const auto& block : split_indices(corr.size(), config, source_points)) {
    CorrespondenceSet part;
    for (std::size_t k : block) part.push_back(corr.source_indices[k], corr.target_indices[k]);
    out.push_back(std::move(part));
  }
  return out;
}

struct SplitReport {
  std::vector<std::vector<std::size_t>> partitions;
  std::vector<std::optional<SolveReport>> solves;  // empty where the sub-solve failed
  std::vector<std::string> errors;                 // per split, empty on success
  std::vector<double> losses;                      // comparison loss, +inf where failed
  std::size_t winner = 0;
  RigidTransform transform;
  double comparison_alpha = 0.0;  // common alpha used by the full-set scope

  const SolveReport& winning_solve() const { return *solves[winner]; }
};

/// Solves every sub-cloud independently and keeps the transform with the
/// smallest comparison loss (ties to the lower split index).
///
/// The per-sub-cloud score is the run's final gamma divided by
/// (subset size * final alpha), i.e. the mean saturation of the surrogate in
/// [0, 1). The full-set score re-evaluates gamma over all pairs for each
/// candidate at one common alpha.
inline SplitReport solve_with_splits(const PointPairs& pairs, const GncConfig& gnc, const SplitConfig& split) {
  std::vector<Point3> moving;
  if (split.scheme == PartitionScheme::kSpatial) {
    moving.reserve(pairs.size());
    for (Eigen::Index i = 0; i < pairs.q.cols(); ++i) moving.emplace_back(pairs.q.col(i));
  }

  SplitReport report;
  report.partitions = split_indices(pairs.size(), split, moving);
  const std::size_t s = report.partitions.size();
  report.solves.resize(s);
  report.errors.resize(s);
  report.losses.assign(s, std::numeric_limits<double>::infinity());

  for (std::size_t k = 0; k < s; ++k) {
    try {
      if (s == 1) {
        report.solves[k] = irls_solve(pairs, gnc);
      } else {
        report.solves[k] = irls_solve(pairs.subset(report.partitions[k]), gnc);
      }
    } catch (const Error& e) {
      if (e.category() == ErrorCategory::kConfig) throw;
      report.errors[k] = e.what();
    }
  }

  if (std::none_of(report.solves.begin(), report.solves.end(), [](const auto& r) { return r.has_value(); })) {
    std::string msg = "every sub-cloud solve failed:";
    for (std::size_t k = 0; k < s; ++k) msg += " [split " + std::to_string(k) + "] " + report.errors[k];
    throw Error(ErrorCategory::kSolveFailed, msg);
  }

  if (split.selection == SelectionScope::kFullSetLoss) {
    double alpha = std::numeric_limits<double>::infinity();
    for (const auto& r : report.solves) {
      if (r) alpha = std::min(alpha, r->final_alpha);
    }
    report.comparison_alpha = alpha;
    for (std::size_t k = 0; k < s; ++k) {
      if (report.solves[k]) report.losses[k] = robust_loss(pairs, report.solves[k]->transform, alpha);
    }
  } else {
    for (std::size_t k = 0; k < s; ++k) {
      if (!report.solves[k]) continue;
      const auto& r = *report.solves[k];
      report.losses[k] = r.final_gamma / (static_cast<double>(report.partitions[k].size()) * r.final_alpha);
    }
  }

  for (std::size_t k = 1; k < s; ++k) {
    if (report.losses[k] < report.losses[report.winner]) report.winner = k;
  }
  report.transform = report.solves[report.winner]->transform;
  return report;
}

}  // namespace sandro
