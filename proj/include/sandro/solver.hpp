#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SVD>

#include "sandro/error.hpp"
#include "sandro/geometry.hpp"

namespace sandro {

/// Paired points for the solver. Column i of `p` corresponds to column i of
/// `q`; the solver looks for T with p_i ~= T q_i, i.e. residual r_i = p_i - T q_i.
struct PointPairs {
  Eigen::Matrix3Xd p;
  Eigen::Matrix3Xd q;

  std::size_t size() const noexcept { return static_cast<std::size_t>(p.cols()); }

  /// Gathers the listed columns.
  PointPairs subset(std::span<const std::size_t> indices) const {
    PointPairs out{Eigen::Matrix3Xd(3, static_cast<Eigen::Index>(indices.size())),
                   Eigen::Matrix3Xd(3, static_cast<Eigen::Index>(indices.size()))};
    for (std::size_t k = 0; k < indices.size(); ++k) {
      const auto c = static_cast<Eigen::Index>(indices[k]);
      out.p.col(static_cast<Eigen::Index>(k)) = p.col(c);
      out.q.col(static_cast<Eigen::Index>(k)) = q.col(c);
    }
    return out;
  }
};

/// Graduated non-convexity schedule. `alpha0` unset means "max squared residual
/// at t0". Convergence is declared when |gamma - gamma_prev| / (N * alpha0)
/// drops below `epsilon`.
struct GncConfig {
  std::optional<double> alpha0;
  double beta = 0.9;
  double epsilon = 1e-6;
  int max_iterations = 100;
  RigidTransform t0;
  bool record_trace = false;

  /// Annealing never takes alpha below this fraction of alpha0.
  static constexpr double kAlphaFloor = 1e-12;

  void validate() const {
    if (alpha0 && !(*alpha0 > 0.0 && std::isfinite(*alpha0))) {
      throw Error(ErrorCategory::kConfig, "alpha0 must be positive and finite");
    }
    if (!(beta > 0.0 && beta < 1.0)) throw Error(ErrorCategory::kConfig, "beta must lie in (0, 1)");
    if (!(epsilon > 0.0)) throw Error(ErrorCategory::kConfig, "epsilon must be positive");
    if (max_iterations < 1) throw Error(ErrorCategory::kConfig, "max_iterations must be >= 1");
  }
};

/// One pass of the outer loop. `gamma` is the loss at the incoming transform,
/// `gamma_after` the loss at the solved transform, both at the same `alpha`.
struct IrlsIteration {
  double alpha;
  double gamma;
  double gamma_after;
  double min_weight;
  double max_weight;
  double mean_weight;
};

struct SolveReport {
  RigidTransform transform;
  double final_gamma = 0.0;  // loss of `transform` at final_alpha
  double final_alpha = 0.0;  // alpha used in the last iteration
  double alpha0 = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<IrlsIteration> trace;
};

/// Single Geman-McClure surrogate term alpha*s / (alpha + s) for s = |r|^2.
inline double geman_mcclure_term(double sq_residual, double alpha) {
  return alpha * sq_residual / (alpha + sq_residual);
}

/// IRLS weight alpha^2 / (alpha + s)^2 for s = |r|^2; the derivative of the
/// surrogate term with respect to s.
inline double irls_weight(double sq_residual, double alpha) {
  const double d = alpha + sq_residual;
  return (alpha / d) * (alpha / d);
}

/// gamma = sum_i alpha |r_i|^2 / (alpha + |r_i|^2), given squared residual norms.
inline double geman_mcclure_loss(std::span<const double> sq_residuals, double alpha) {
  double gamma = 0.0;
  for (double s : sq_residuals) gamma += geman_mcclure_term(s, alpha);
  return gamma;
}

inline std::vector<double> irls_weights(std::span<const double> sq_residuals, double alpha) {
  std::vector<double> w(sq_residuals.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = irls_weight(sq_residuals[i], alpha);
  return w;
}

/// |p_i - T q_i|^2 for every pair.
inline Eigen::VectorXd squared_residuals(const PointPairs& pairs, const RigidTransform& t) {
  return ((pairs.p - ((t.rotation() * pairs.q).colwise() + t.translation())).colwise().squaredNorm())
      .transpose();
}

inline double robust_loss(const PointPairs& pairs, const RigidTransform& t, double alpha) {
  const Eigen::VectorXd s = squared_residuals(pairs, t);
  return geman_mcclure_loss(std::span<const double>(s.data(), static_cast<std::size_t>(s.size())), alpha);
}

/// Closed-form minimizer of sum_i w_i |p_i - (R q_i + t)|^2 over proper rigid
/// motions (weighted Kabsch with reflection correction).
inline RigidTransform weighted_svd(const Eigen::Matrix3Xd& p, const Eigen::Matrix3Xd& q,
                                   const Eigen::VectorXd& w) {
  const Eigen::Index n = p.cols();
  if (q.cols() != n || w.size() != n) {
    throw Error(ErrorCategory::kValidation, "weighted_svd: p, q and weights differ in length");
  }
  if (n < 3) {
    throw Error(ErrorCategory::kInsufficientCorrespondences,
                "weighted_svd needs at least 3 correspondences, got " + std::to_string(n));
  }
  if ((w.array() < 0.0).any() || !w.allFinite()) {
    throw Error(ErrorCategory::kValidation, "weights must be finite and non-negative");
  }
  const double wsum = w.sum();
  if (!(wsum > 0.0)) throw Error(ErrorCategory::kDegenerateGeometry, "total weight is zero");

  const Point3 p_bar = (p * w) / wsum;
  const Point3 q_bar = (q * w) / wsum;
  const Eigen::Matrix3Xd pc = p.colwise() - p_bar;
  const Eigen::Matrix3Xd qc = q.colwise() - q_bar;
  const Matrix3 h = qc * w.asDiagonal() * pc.transpose();

  Eigen::JacobiSVD<Matrix3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (!(sv(0) > 0.0) || sv(1) <= 1e-12 * sv(0)) {
    throw Error(ErrorCategory::kDegenerateGeometry,
                "weighted cross-covariance has rank < 2 (collinear or coincident points)");
  }
  const Matrix3& u = svd.matrixU();
  const Matrix3& v = svd.matrixV();
  Matrix3 d = Matrix3::Identity();
  d(2, 2) = (v * u.transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  const Matrix3 r = v * d * u.transpose();
  return {r, p_bar - r * q_bar};
}

/// Robust registration of paired points: IRLS on the Geman-McClure surrogate
/// with alpha annealed geometrically by beta each iteration.
inline SolveReport irls_solve(const PointPairs& pairs, const GncConfig& config) {
  config.validate();
  const std::size_t n = pairs.size();
  if (static_cast<std::size_t>(pairs.q.cols()) != n) {
    throw Error(ErrorCategory::kValidation, "p and q differ in length");
  }
  if (n < 3) {
    throw Error(ErrorCategory::kInsufficientCorrespondences,
                "need at least 3 correspondences, got " + std::to_string(n));
  }
  if (!pairs.p.allFinite() || !pairs.q.allFinite()) {
    throw Error(ErrorCategory::kValidation, "correspondences contain non-finite coordinates");
  }

  SolveReport report;
  RigidTransform t = config.t0;
  Eigen::VectorXd sq = squared_residuals(pairs, t);
  if (!sq.allFinite()) throw Error(ErrorCategory::kValidation, "non-finite residual");

  double alpha0 = config.alpha0.value_or(sq.maxCoeff());
  if (!(alpha0 > 0.0)) alpha0 = 1.0;  // already an exact fit at t0
  const double alpha_floor = GncConfig::kAlphaFloor * alpha0;
  const double scale = static_cast<double>(n) * alpha0;
  report.alpha0 = alpha0;

  double alpha = alpha0;
  double gamma_prev = std::numeric_limits<double>::infinity();
  Eigen::VectorXd w(static_cast<Eigen::Index>(n));
  for (int it = 0; it < config.max_iterations; ++it) {
    if (it > 0) sq = squared_residuals(pairs, t);
    double gamma = 0.0;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      w(i) = irls_weight(sq(i), alpha);
      gamma += geman_mcclure_term(sq(i), alpha);
    }
    if (!std::isfinite(gamma)) throw Error(ErrorCategory::kValidation, "non-finite residual");

    t = weighted_svd(pairs.p, pairs.q, w);
    report.iterations = it + 1;
    report.final_alpha = alpha;

    if (config.record_trace) {
      report.trace.push_back({alpha, gamma, robust_loss(pairs, t, alpha), w.minCoeff(), w.maxCoeff(),
                              w.mean()});
    }

    alpha = std::max(alpha * config.beta, alpha_floor);
    if (std::abs(gamma - gamma_prev) / scale < config.epsilon) {
      report.converged = true;
      break;
    }
    gamma_prev = gamma;
  }

  report.transform = t;
  report.final_gamma = robust_loss(pairs, t, report.final_alpha);
  return report;
}

}  // namespace sandro
