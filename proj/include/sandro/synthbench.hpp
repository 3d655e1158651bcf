#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "sandro/error.hpp"
#include "sandro/features.hpp"
#include "sandro/geometry.hpp"
#include "sandro/splitting.hpp"

namespace sandro {

// ---------------------------------------------------------------------------
// Error metrics
// ---------------------------------------------------------------------------

/// Geodesic angle between two rotations, degrees. Evaluated as
/// atan2(sin, cos) of the relative rotation, which equals
/// arccos((trace(Ra Rb^T) - 1) / 2) but stays accurate near 0 and 180.
inline double rotation_error(const RigidTransform& a, const RigidTransform& b) {
  const Matrix3 m = a.rotation() * b.rotation().transpose();
  const double cos_angle = std::clamp((m.trace() - 1.0) / 2.0, -1.0, 1.0);
  const Point3 axis(m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1));
  const double sin_angle = std::min(1.0, axis.norm() / 2.0);
  return std::atan2(sin_angle, cos_angle) * 180.0 / std::numbers::pi;
}

inline double translation_error(const RigidTransform& a, const RigidTransform& b) {
  return (a.translation() - b.translation()).norm();
}

struct SuccessThresholds {
  double rotation_deg = 10.0;
  double translation_m = 1.0;

  bool success(double rot_err_deg, double trans_err_m) const {
    return rot_err_deg <= rotation_deg && trans_err_m <= translation_m;
  }
};

// ---------------------------------------------------------------------------
// Random rigid motions
// ---------------------------------------------------------------------------

/// Uniform over SO(3) via a uniformly sampled unit quaternion.
template <typename Rng>
Matrix3 random_rotation(Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double u1 = u(rng), u2 = u(rng), u3 = u(rng);
  const double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  const Eigen::Quaterniond q(b * std::cos(kTwoPi * u3), a * std::sin(kTwoPi * u2), a * std::cos(kTwoPi * u2),
                             b * std::sin(kTwoPi * u3));
  return q.normalized().toRotationMatrix();
}

template <typename Rng>
Point3 random_unit_vector(Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  for (;;) {
    const Point3 v(g(rng), g(rng), g(rng));
    const double n = v.norm();
    if (n > 1e-12) return v / n;
  }
}

/// Rotation of fixed magnitude about a uniformly random axis.
template <typename Rng>
Matrix3 random_rotation_with_angle(Rng& rng, double angle_deg) {
  return Eigen::AngleAxisd(angle_deg * std::numbers::pi / 180.0, random_unit_vector(rng)).toRotationMatrix();
}

template <typename Rng>
RigidTransform random_transform(Rng& rng, double translation_box = 2.0,
                                std::optional<double> rotation_deg = std::nullopt) {
  std::uniform_real_distribution<double> t(-translation_box, translation_box);
  const Matrix3 r = rotation_deg ? random_rotation_with_angle(rng, *rotation_deg) : random_rotation(rng);
  const Point3 tr(t(rng), t(rng), t(rng));
  return {r, tr};
}

/// SplitMix64 finalizer; used to derive independent per-trial seeds.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t trial_seed(std::uint64_t scenario_seed, std::uint64_t trial) {
  return mix_seed(mix_seed(scenario_seed) ^ (trial * 0x632be59bd9b4e019ULL + 1));
}

// ---------------------------------------------------------------------------
// Scenarios
// ---------------------------------------------------------------------------

/// Pairs rewired to agree exactly with a second rigid motion. `transform` acts
/// in the source frame: a decoy pair maps source point x to G * transform * x,
/// where G is the trial's ground truth.
struct DecoyConfig {
  double fraction = 0.45;  // of all correspondences
  RigidTransform transform;

  /// Rotation by `angle_deg` about the vertical (z) axis through `center`.
  static RigidTransform spin_about(const Point3& center, double angle_deg) {
    const Matrix3 r = Eigen::AngleAxisd(angle_deg * std::numbers::pi / 180.0, Point3::UnitZ()).toRotationMatrix();
    return {r, center - r * center};
  }

  /// A second copy of the object standing next to the first: turned by
  /// `angle_deg` about the vertical axis through `center`, then moved
  /// `offset_m` along x. The default 30 deg / 0.3 m copy overlaps the original
  /// enough that a whole-set solve is pulled onto it.
  static RigidTransform nearby_copy(const Point3& center, double angle_deg = 30.0, double offset_m = 0.3) {
    return compose(RigidTransform::from_translation(Point3(offset_m, 0.0, 0.0)), spin_about(center, angle_deg));
  }
};

struct ScenarioConfig {
  double outlier_rate = 0.0;
  double noise_sigma = 0.0;                 // isotropic Gaussian on inlier targets, meters
  std::optional<double> rotation_deg;       // unset: uniform over SO(3)
  double translation_box = 2.0;             // translation uniform in [-box, box]^3
  int trials = 40;
  std::uint64_t seed = 0;
  double sphere_radius = 1.0;
  std::optional<Point3> sphere_center;      // unset: centroid of the clean target
  std::optional<DecoyConfig> decoy;

  void validate() const {
    if (!(outlier_rate >= 0.0 && outlier_rate < 1.0)) {
      throw Error(ErrorCategory::kConfig, "outlier_rate must lie in [0, 1)");
    }
    if (trials < 1) throw Error(ErrorCategory::kConfig, "trials must be >= 1");
    if (!(noise_sigma >= 0.0)) throw Error(ErrorCategory::kConfig, "noise_sigma must be >= 0");
    if (!(sphere_radius > 0.0)) throw Error(ErrorCategory::kConfig, "sphere_radius must be positive");
    if (decoy) {
      if (!(decoy->fraction >= 0.0) || decoy->fraction > outlier_rate + 1e-12) {
        throw Error(ErrorCategory::kConfig,
                    "decoy fraction must be in [0, outlier_rate] so decoy + inliers <= 1");
      }
    }
  }
};

enum class PairKind : std::uint8_t { kInlier, kSphereOutlier, kDecoy };

struct GeneratedPair {
  PointCloud source;
  PointCloud target;
  CorrespondenceSet correspondences;  // identity pairing
  RigidTransform ground_truth;        // maps source onto target
  std::vector<PairKind> kinds;
};

/// Builds one synthetic registration problem from `source`.
///
/// The target is the ground truth applied to the source (plus optional noise).
/// Exactly round(outlier_rate * N) target points are corrupted by radial
/// projection onto a sphere; when a decoy is configured, round(fraction * N)
/// of those instead follow the decoy motion. Without a decoy the corrupted
/// positions are uniform at random; with one, inliers occupy the leading
/// indices and the corrupted pairs follow in random order.
inline GeneratedPair generate_pair(const PointCloud& source, const ScenarioConfig& config, std::uint64_t seed) {
  config.validate();
  if (source.empty()) throw Error(ErrorCategory::kValidation, "source cloud is empty");
  const std::size_t n = source.size();
  std::mt19937_64 rng(seed);

  GeneratedPair out;
  out.source.points = source.points;
  out.ground_truth = random_transform(rng, config.translation_box, config.rotation_deg);
  out.target.points.reserve(n);
  for (const auto& p : source.points) out.target.points.push_back(out.ground_truth * p);
  const Point3 center = config.sphere_center.value_or(out.target.centroid());

  if (config.noise_sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, config.noise_sigma);
    for (auto& q : out.target.points) q += Point3(noise(rng), noise(rng), noise(rng));
  }

  const auto n_corrupt = static_cast<std::size_t>(std::llround(config.outlier_rate * static_cast<double>(n)));
  const auto n_decoy = config.decoy
                           ? std::min(n_corrupt, static_cast<std::size_t>(
                                                     std::llround(config.decoy->fraction * static_cast<double>(n))))
                           : std::size_t{0};

  std::vector<std::size_t> corrupt;
  if (config.decoy) {
    for (std::size_t i = n - n_corrupt; i < n; ++i) corrupt.push_back(i);
    std::shuffle(corrupt.begin(), corrupt.end(), rng);
  } else {
    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    std::shuffle(all.begin(), all.end(), rng);
    corrupt.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_corrupt));
  }

  out.kinds.assign(n, PairKind::kInlier);
  RigidTransform decoy_motion;
  if (config.decoy) decoy_motion = compose(out.ground_truth, config.decoy->transform);
  for (std::size_t k = 0; k < corrupt.size(); ++k) {
    const std::size_t i = corrupt[k];
    if (k < n_decoy) {
      out.target.points[i] = decoy_motion * source.points[i];
      out.kinds[i] = PairKind::kDecoy;
      continue;
    }
    Point3 dir = out.target.points[i] - center;
    const double len = dir.norm();
    dir = len > 1e-12 ? Point3(dir / len) : random_unit_vector(rng);
    out.target.points[i] = center + config.sphere_radius * dir;
    out.kinds[i] = PairKind::kSphereOutlier;
  }

  out.correspondences = CorrespondenceSet::identity(n);
  return out;
}

/// Solver pairs for a correspondence set: p from the target, q from the source,
/// so the solved T maps source onto target.
inline PointPairs make_pairs(const PointCloud& source, const PointCloud& target, const CorrespondenceSet& corr) {
  const auto n = static_cast<Eigen::Index>(corr.size());
  PointPairs pairs{Eigen::Matrix3Xd(3, n), Eigen::Matrix3Xd(3, n)};
  for (Eigen::Index k = 0; k < n; ++k) {
    const std::size_t s = corr.source_indices[static_cast<std::size_t>(k)];
    const std::size_t t = corr.target_indices[static_cast<std::size_t>(k)];
    if (s >= source.size() || t >= target.size()) {
      throw Error(ErrorCategory::kValidation, "correspondence " + std::to_string(k) + " indexes out of range");
    }
    pairs.q.col(k) = source.points[s];
    pairs.p.col(k) = target.points[t];
  }
  return pairs;
}

/// Procedural stand-in for a scanned figure: two loosely mirror-symmetric
/// ellipsoidal lobes under a smaller head, roughly 0.45 m wide and 0.8 m tall,
/// with points sampled on the surfaces.
inline PointCloud make_standin_cloud(std::size_t n_points = 5000, std::uint64_t seed = 20240601) {
  std::mt19937_64 rng(seed);
  struct Lobe {
    Point3 center;
    Point3 radii;
    double tilt_deg;
    double weight;
  };
  const Lobe lobes[] = {
      {{-0.11, 0.0, 0.0}, {0.09, 0.07, 0.27}, 6.0, 0.42},
      {{0.12, 0.01, -0.02}, {0.10, 0.07, 0.25}, -11.0, 0.42},
      {{0.01, 0.02, 0.36}, {0.08, 0.08, 0.10}, 0.0, 0.16},
  };
  std::discrete_distribution<int> pick({lobes[0].weight, lobes[1].weight, lobes[2].weight});
  std::uniform_real_distribution<double> bump(-0.01, 0.01);
  PointCloud cloud;
  cloud.points.reserve(n_points);
  while (cloud.points.size() < n_points) {
    const Lobe& lobe = lobes[pick(rng)];
    const Point3 dir = random_unit_vector(rng);
    const Matrix3 tilt =
        Eigen::AngleAxisd(lobe.tilt_deg * std::numbers::pi / 180.0, Point3::UnitY()).toRotationMatrix();
    Point3 p = lobe.center + tilt * lobe.radii.cwiseProduct(dir);
    p.z() += bump(rng);
    cloud.points.push_back(p);
  }
  return cloud;
}

// ---------------------------------------------------------------------------
// Campaigns
// ---------------------------------------------------------------------------

struct MethodConfig {
  std::string name;
  GncConfig gnc;
  SplitConfig split;
};

struct TrialRecord {
  std::string method;
  std::size_t scenario = 0;
  int trial = 0;
  double outlier_rate = 0.0;
  RigidTransform ground_truth;
  RigidTransform estimate;
  double rotation_error_deg = std::numeric_limits<double>::quiet_NaN();
  double translation_error_m = std::numeric_limits<double>::quiet_NaN();
  bool success = false;
  double wall_ms = 0.0;
  std::size_t winner = 0;
  std::string error;  // non-empty when the solve threw
};

struct AggregateRow {
  std::string method;
  double outlier_rate = 0.0;
  int trials = 0;
  double success_rate = 0.0;
  double median_rot_err_deg = std::numeric_limits<double>::quiet_NaN();
  double median_trans_err_m = std::numeric_limits<double>::quiet_NaN();
  double mean_wall_ms = 0.0;
};

struct CampaignOptions {
  SuccessThresholds thresholds;
  bool timing = true;  // false: wall times recorded as 0 so output is reproducible byte for byte
};

struct CampaignResult {
  std::vector<TrialRecord> records;
  std::vector<AggregateRow> aggregates;
};

inline double median(std::vector<double> v) {
  std::erase_if(v, [](double x) { return !std::isfinite(x); });
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

/// Runs every (scenario, trial, method) combination serially. Each trial's
/// problem depends only on the scenario seed and trial index. Solver failures
/// are recorded as unsuccessful trials.
inline CampaignResult run_campaign(const PointCloud& source, const std::vector<ScenarioConfig>& scenarios,
                                   const std::vector<MethodConfig>& methods, const CampaignOptions& options = {}) {
  if (scenarios.empty() || methods.empty()) {
    throw Error(ErrorCategory::kConfig, "a campaign needs at least one scenario and one method");
  }
  for (const auto& s : scenarios) s.validate();
  for (const auto& m : methods) m.gnc.validate();

  CampaignResult result;
  for (std::size_t si = 0; si < scenarios.size(); ++si) {
    const ScenarioConfig& scenario = scenarios[si];
    std::vector<std::vector<const TrialRecord*>> per_method(methods.size());
    const std::size_t first = result.records.size();
    for (int trial = 0; trial < scenario.trials; ++trial) {
      const GeneratedPair gen = generate_pair(source, scenario, trial_seed(scenario.seed, static_cast<std::uint64_t>(trial)));
      const PointPairs pairs = make_pairs(gen.source, gen.target, gen.correspondences);
      for (const auto& method : methods) {
        TrialRecord rec;
        rec.method = method.name;
        rec.scenario = si;
        rec.trial = trial;
        rec.outlier_rate = scenario.outlier_rate;
        rec.ground_truth = gen.ground_truth;
        const auto start = std::chrono::steady_clock::now();
        try {
          const SplitReport rep = solve_with_splits(pairs, method.gnc, method.split);
          rec.estimate = rep.transform;
          rec.winner = rep.winner;
        } catch (const Error& e) {
          if (e.category() == ErrorCategory::kConfig) throw;
          rec.error = e.what();
        }
        const auto stop = std::chrono::steady_clock::now();
        rec.wall_ms = options.timing ? std::chrono::duration<double, std::milli>(stop - start).count() : 0.0;
        if (rec.error.empty()) {
          rec.rotation_error_deg = rotation_error(rec.estimate, rec.ground_truth);
          rec.translation_error_m = translation_error(rec.estimate, rec.ground_truth);
          rec.success = options.thresholds.success(rec.rotation_error_deg, rec.translation_error_m);
        }
        result.records.push_back(std::move(rec));
      }
    }
    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
      AggregateRow row;
      row.method = methods[mi].name;
      row.outlier_rate = scenario.outlier_rate;
      std::vector<double> rot, trans;
      double wall = 0.0;
      int ok = 0;
      for (std::size_t r = first; r < result.records.size(); ++r) {
        const auto& rec = result.records[r];
        if (rec.method != methods[mi].name) continue;
        ++row.trials;
        ok += rec.success ? 1 : 0;
        rot.push_back(rec.rotation_error_deg);
        trans.push_back(rec.translation_error_m);
        wall += rec.wall_ms;
      }
      row.success_rate = row.trials ? static_cast<double>(ok) / row.trials : 0.0;
      row.median_rot_err_deg = median(rot);
      row.median_trans_err_m = median(trans);
      row.mean_wall_ms = row.trials ? wall / row.trials : 0.0;
      result.aggregates.push_back(row);
    }
  }
  return result;
}

inline constexpr const char* kAggregateCsvHeader =
    "method,outlier_rate,trials,success_rate,median_rot_err_deg,median_trans_err_m,mean_wall_ms";

inline std::string aggregates_csv(const std::vector<AggregateRow>& rows) {
  std::ostringstream os;
  os << kAggregateCsvHeader << '\n';
  os << std::setprecision(10);
  for (const auto& r : rows) {
    os << r.method << ',' << r.outlier_rate << ',' << r.trials << ',' << r.success_rate << ','
       << r.median_rot_err_deg << ',' << r.median_trans_err_m << ',' << r.mean_wall_ms << '\n';
  }
  return os.str();
}

}  // namespace sandro
