#pragma once

// Optimization kernels: l1-regularized least squares (BPDN), weighted l1
// minimization under an equality constraint, and the pilot filter fit.

#include "psdmap/numcore.hpp"

#include <span>
#include <vector>

namespace psdmap {

struct BpdnOptions {
  /// Fixed penalty when positive; otherwise lambda_ratio * ||M^T r||_inf.
  double lambda = 0.0;
  double lambda_ratio = 0.01;
  /// Noise standard deviation of r when known. A positive value raises the
  /// automatic penalty to at least
  /// noise_lambda_scale * sigma * sqrt(2 ln n) * max column norm.
  double noise_sigma = 0.0;
  double noise_lambda_scale = 1.0;
  std::size_t max_iterations = 1000;
  /// Relative change of the iterate (and of the objective) that stops the
  /// proximal-gradient phase.
  double tolerance = 1e-6;
  /// Finish with an active-set (feature-sign) phase that lands on the exact
  /// minimizer. Every accepted step still lowers the objective.
  bool active_set_refinement = true;
  /// Keep the objective after every accepted iteration in SolveReport.
  bool record_trace = false;

  void validate() const;
};

struct SolveReport {
  Vector solution;
  std::size_t iterations = 0;
  double objective = 0.0;
  bool converged = false;
  double seconds = 0.0;
  double lambda = 0.0;
  /// ||M z - b|| for equality-constrained solves; 0 otherwise.
  double feasibility_residual = 0.0;
  std::vector<double> objective_trace;
};

/// Entry-wise sign(v) * max(|v| - t, 0).
Vector soft_threshold(const Vector& v, double threshold);

/// Penalty bpdn() uses for this system.
double resolve_lambda(const Matrix& m, const Vector& r, const BpdnOptions& opts);

/// Minimizes 0.5 ||r - M z||^2 + lambda ||z||_1.
SolveReport bpdn(const Matrix& m, const Vector& r, const BpdnOptions& opts);

/// Minimizes 0.5 ||r - M z||^2 + lambda * sum_i w_i |z_i| for a fixed
/// lambda > 0 and non-negative weights, optionally warm-started.
SolveReport bpdn_weighted(const Matrix& m, const Vector& r, const Vector& weights, double lambda,
                          const BpdnOptions& opts, const Vector* warm_start = nullptr);

struct L1EqualityOptions {
  /// Feasibility target: ||M z - b|| <= feas_tol * (1 + ||b||).
  double feas_tol = 1e-6;
  std::size_t max_iterations = 5000;
  /// Penalty is divided by this factor between homotopy stages.
  double stage_factor = 10.0;
  /// Final penalty relative to the first stage's.
  double final_lambda_ratio = 1e-10;

  void validate() const;
};

/// Minimizes sum_i w_i |z_i| subject to M z = b by a decreasing-penalty BPDN
/// homotopy. Coordinates with weight 0 are never thresholded.
SolveReport min_l1_equality(const Matrix& m, const Vector& b, const Vector& weights,
                            const L1EqualityOptions& opts = {});

/// argmin ||r_c - Y beta||_2 (+ ridge ||beta||^2) with Y the circulant pilot
/// matrix. Throws RankDeficientError for singular Y with ridge == 0.
Vector fit_filter(const Matrix& pilot_circulant, const Vector& received_pilot, double ridge);

/// Same fit restricted to the taps listed in support; other taps are zero.
Vector fit_filter_on_support(const Matrix& pilot_circulant, const Vector& received_pilot,
                             std::span<const std::size_t> support, double ridge);

}  // namespace psdmap
