#include "psdmap/solvers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <Eigen/SVD>
#include <optional>
#include <limits>

namespace psdmap {

void BpdnOptions::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("solver.lambda", "must be >= 0");
  if (!(lambda_ratio > 0.0) || !std::isfinite(lambda_ratio))
    throw ConfigError("solver.lambda_ratio", "must be positive");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma))
    throw ConfigError("solver.noise_sigma", "must be >= 0");
  if (!(noise_lambda_scale >= 0.0)) throw ConfigError("solver.noise_lambda_scale", "must be >= 0");
  if (max_iterations == 0) throw ConfigError("solver.max_iterations", "must be positive");
  if (!(tolerance > 0.0)) throw ConfigError("solver.tolerance", "must be positive");
}

void L1EqualityOptions::validate() const {
  if (!(feas_tol > 0.0)) throw ConfigError("solver.feas_tol", "must be positive");
  if (max_iterations == 0) throw ConfigError("solver.max_iterations", "must be positive");
  if (!(stage_factor > 1.0)) throw ConfigError("solver.stage_factor", "must exceed 1");
  if (!(final_lambda_ratio > 0.0 && final_lambda_ratio < 1.0))
    throw ConfigError("solver.final_lambda_ratio", "must lie in (0, 1)");
}

Vector soft_threshold(const Vector& v, double threshold) {
  Vector out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double mag = std::abs(v(i)) - threshold;
    out(i) = mag > 0.0 ? std::copysign(mag, v(i)) : 0.0;
  }
  return out;
}

namespace {

using Clock = std::chrono::steady_clock;

class WeightedLasso {
 public:
  WeightedLasso(const Matrix& m, const Vector& r, const Vector& w, double lambda)
      : m_(m), r_(r), w_(w), lambda_(lambda) {}

  double objective(const Vector& x) const {
    return 0.5 * (r_ - m_ * x).squaredNorm() + lambda_ * w_.cwiseProduct(x.cwiseAbs()).sum();
  }

  Vector prox(const Vector& v, double step) const {
    Vector out(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      const double mag = std::abs(v(i)) - step * lambda_ * w_(i);
      out(i) = mag > 0.0 ? std::copysign(mag, v(i)) : 0.0;
    }
    return out;
  }

  // Monotone accelerated proximal gradient (FISTA with objective safeguard).
  bool accelerated(Vector& x, double& fx, std::size_t max_iterations, double tolerance,
                   std::size_t& iterations, std::vector<double>* trace) const {
    const double lipschitz = spectral_norm_sq_bound(m_);
    if (lipschitz == 0.0) {
      x.setZero();
      fx = objective(x);
      return true;
    }
    const double step = 1.0 / lipschitz;
    Vector y = x;
    double t = 1.0;
    for (std::size_t it = 0; it < max_iterations; ++it) {
      const Vector grad = m_.transpose() * (m_ * y - r_);
      const Vector z = prox(y - step * grad, step);
      const double fz = objective(z);
      const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      const Vector x_prev = x;
      const double f_prev = fx;
      if (fz <= fx) {
        x = z;
        fx = fz;
      }
      y = x + (t / t_next) * (z - x) + ((t - 1.0) / t_next) * (x - x_prev);
      t = t_next;
      ++iterations;
      if (trace) trace->push_back(fx);
      const double change = (z - x_prev).norm();
      const double scale = std::max(x_prev.norm(), z.norm());
      if (change <= tolerance * scale && std::abs(f_prev - fx) <= tolerance * (1.0 + std::abs(fx)))
        return true;
    }
    return false;
  }

  // Feature-sign search: exact minimizer reached by solving the smooth
  // problem on a signed active set, with a discrete line search over sign
  // changes. Returns true when the optimality conditions hold.
  bool refine(Vector& x, double& fx, std::size_t max_steps, std::size_t& iterations,
              std::vector<double>* trace) const {
    // More active columns than rows makes every step singular; start from
    // the largest entries instead and keep whichever point ends lower.
    Vector work = x;
    std::vector<Eigen::Index> order;
    for (Eigen::Index i = 0; i < work.size(); ++i)
      if (work(i) != 0.0) order.push_back(i);
    if (static_cast<Eigen::Index>(order.size()) > m_.rows()) {
      std::stable_sort(order.begin(), order.end(),
                       [&](Eigen::Index a, Eigen::Index b) { return std::abs(work(a)) > std::abs(work(b)); });
      for (std::size_t c = static_cast<std::size_t>(m_.rows()); c < order.size(); ++c) work(order[c]) = 0.0;
    }
    double f_work = objective(work);
    const bool optimal = feature_sign(work, f_work, fx, max_steps, iterations, trace);
    if (f_work <= fx) {
      x = std::move(work);
      fx = f_work;
      return optimal;
    }
    return false;
  }

  bool feature_sign(Vector& x, double& fx, double f_start, std::size_t max_steps, std::size_t& iterations,
                    std::vector<double>* trace) const {
    const Eigen::Index n = x.size();
    const Vector mt_r = m_.transpose() * r_;
    const double wmax = w_.size() > 0 ? w_.maxCoeff() : 0.0;
    const double scale = std::max({mt_r.cwiseAbs().maxCoeff(), lambda_ * wmax, 1e-300});
    const double opt_tol = std::max(1e-6 * lambda_ * wmax, 1e-12 * scale);

    const Matrix full_gram = m_.transpose() * m_;
    std::vector<Eigen::Index> active;
    Vector theta = Vector::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i)
      if (x(i) != 0.0) {
        active.push_back(i);
        theta(i) = x(i) > 0.0 ? 1.0 : -1.0;
      }

    for (std::size_t s = 0; s < max_steps; ++s) {
      const Vector residual = r_ - m_ * x;
      const Vector grad = -(m_.transpose() * residual);

      double worst_active = 0.0;
      for (Eigen::Index i : active)
        worst_active = std::max(worst_active, std::abs(grad(i) + lambda_ * w_(i) * theta(i)));
      if (worst_active <= opt_tol) {
        Eigen::Index pick = -1;
        double violation = opt_tol;
        for (Eigen::Index i = 0; i < n; ++i) {
          if (x(i) != 0.0) continue;
          const double v = std::abs(grad(i)) - lambda_ * w_(i);
          if (v > violation) {
            violation = v;
            pick = i;
          }
        }
        if (pick < 0) {
          snap_to_active_minimizer(x, fx, active, theta, mt_r, full_gram);
          return true;
        }
        theta(pick) = grad(pick) > 0.0 ? -1.0 : 1.0;
        active.push_back(pick);
      }

      const auto k = static_cast<Eigen::Index>(active.size());
      Matrix sub(m_.rows(), k);
      Vector rhs(k);
      Matrix gram(k, k);
      for (Eigen::Index c = 0; c < k; ++c) {
        sub.col(c) = m_.col(active[c]);
        rhs(c) = mt_r(active[c]) - lambda_ * w_(active[c]) * theta(active[c]);
        for (Eigen::Index d = 0; d < k; ++d) gram(d, c) = full_gram(active[d], active[c]);
      }
      Vector current(k);
      for (Eigen::Index c = 0; c < k; ++c) current(c) = x(active[c]);

      // Line search from x toward target over the sign-change breakpoints.
      auto try_target = [&](const Vector& target, Vector& best, double& best_f) {
        if (!target.allFinite()) return false;
        const Vector delta = target - current;
        const Vector direction = sub * delta;
        std::vector<double> steps{1.0};
        for (Eigen::Index c = 0; c < k; ++c) {
          const double a = current(c);
          const double b = target(c);
          if (a != 0.0 && ((a > 0.0) != (b > 0.0)) && b != a) {
            const double t = a / (a - b);
            if (t > 0.0 && t < 1.0) steps.push_back(t);
          }
        }
        // Objective along the segment without re-multiplying by m_.
        auto along = [&](double t) {
          double penalty = 0.0;
          for (Eigen::Index c = 0; c < k; ++c) penalty += w_(active[c]) * std::abs(current(c) + t * delta(c));
          return 0.5 * (residual - t * direction).squaredNorm() + lambda_ * penalty;
        };
        double best_t = -1.0;
        double best_est = fx;
        for (double t : steps) {
          const double f = along(t);
          if (f < best_est) {
            best_est = f;
            best_t = t;
          }
        }
        if (best_t < 0.0) return false;
        best = x;
        for (Eigen::Index c = 0; c < k; ++c) {
          double v = current(c) + best_t * delta(c);
          // Coordinates sitting on their breakpoint become exact zeros.
          const double a = current(c);
          const double b = target(c);
          if (a != 0.0 && b != a && std::abs(best_t - a / (a - b)) <= 1e-15) v = 0.0;
          best(active[c]) = v;
        }
        best_f = objective(best);
        return best_f < fx;
      };

      Vector best;
      double best_f = fx;
      bool moved = false;
      if (k <= m_.rows()) {
        // Normal equations first; QR on the columns when they are too ill
        // conditioned for the Cholesky step to descend.
        Eigen::LLT<Matrix> llt(gram);
        if (llt.info() == Eigen::Success) moved = try_target(llt.solve(rhs), best, best_f);
        if (!moved) {
          Eigen::ColPivHouseholderQR<Matrix> qr(sub);
          if (qr.rank() == k) {
            const auto r = qr.matrixR().topLeftCorner(k, k).template triangularView<Eigen::Upper>();
            const Vector permuted = qr.colsPermutation().transpose() * rhs;
            const Vector u = r.transpose().solve(permuted);
            moved = try_target(qr.colsPermutation() * Vector(r.solve(u)), best, best_f);
          }
        }
      }
      if (!moved) {
        Vector target;
        if (singular_target(sub, rhs, current, theta, active, target)) moved = try_target(target, best, best_f);
      }
      if (!moved) return stalled_but_optimal(grad, x, theta, opt_tol);
      x = std::move(best);
      fx = best_f;
      ++iterations;
      if (trace && fx < f_start) trace->push_back(fx);

      active.clear();
      theta.setZero();
      for (Eigen::Index i = 0; i < n; ++i)
        if (x(i) != 0.0) {
          active.push_back(i);
          theta(i) = x(i) > 0.0 ? 1.0 : -1.0;
        }
    }
    return false;
  }

 private:
  // The tolerance test above can pass a few ulps-worth of descent early. One
  // exact solve on the signed active set removes that residue when it keeps
  // every sign and does not raise the objective.
  void snap_to_active_minimizer(Vector& x, double& fx, const std::vector<Eigen::Index>& active,
                                const Vector& theta, const Vector& mt_r, const Matrix& full_gram) const {
    const auto k = static_cast<Eigen::Index>(active.size());
    if (k == 0 || k > m_.rows()) return;
    Matrix gram(k, k);
    Vector rhs(k);
    for (Eigen::Index c = 0; c < k; ++c) {
      rhs(c) = mt_r(active[c]) - lambda_ * w_(active[c]) * theta(active[c]);
      for (Eigen::Index d = 0; d < k; ++d) gram(d, c) = full_gram(active[d], active[c]);
    }
    Eigen::LLT<Matrix> llt(gram);
    if (llt.info() != Eigen::Success) return;
    const Vector target = llt.solve(rhs);
    if (!target.allFinite()) return;
    Vector candidate = x;
    for (Eigen::Index c = 0; c < k; ++c) {
      if (target(c) == 0.0 || (target(c) > 0.0) != (theta(active[c]) > 0.0)) return;
      candidate(active[c]) = target(c);
    }
    const double f = objective(candidate);
    if (f <= fx) {
      x = std::move(candidate);
      fx = f;
    }
  }

  // Rounding can stop descent just short of opt_tol; accept the point when
  // the optimality conditions hold to a looser tolerance.
  bool stalled_but_optimal(const Vector& grad, const Vector& x, const Vector& theta, double opt_tol) const {
    const double loose = std::max(1e3 * opt_tol, 1e-3 * lambda_ * (w_.size() > 0 ? w_.maxCoeff() : 0.0));
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double v = x(i) != 0.0 ? std::abs(grad(i) + lambda_ * w_(i) * theta(i))
                                   : std::abs(grad(i)) - lambda_ * w_(i);
      if (v > loose) return false;
    }
    return true;
  }

  // Active columns are linearly dependent. If the signed linear term has a
  // component in the null space of `sub`, the objective falls along that
  // direction until the first coordinate reaches zero; otherwise use the
  // minimum-norm stationary point.
  bool singular_target(const Matrix& sub, const Vector& rhs, const Vector& current, const Vector& theta,
                       const std::vector<Eigen::Index>& active, Vector& target) const {
    const Eigen::Index k = sub.cols();
    Eigen::JacobiSVD<Matrix> svd(sub, Eigen::ComputeFullV);
    const Vector& sv = svd.singularValues();
    const double cutoff = std::max(sv.size() > 0 ? sv(0) : 0.0, 1e-300) * 1e-10 * static_cast<double>(k);
    Eigen::Index rank = 0;
    while (rank < sv.size() && sv(rank) > cutoff) ++rank;
    Vector signed_weights(k);
    for (Eigen::Index c = 0; c < k; ++c) signed_weights(c) = w_(active[c]) * theta(active[c]);
    const Matrix null_basis = svd.matrixV().rightCols(k - rank);
    Vector d = -(null_basis * (null_basis.transpose() * signed_weights));
    if (d.norm() > 1e-12 * std::max(signed_weights.norm(), 1e-300)) {
      double first = std::numeric_limits<double>::infinity();
      for (Eigen::Index c = 0; c < k; ++c) {
        if (current(c) == 0.0) {
          if (theta(active[c]) * d(c) < 0.0) return false;
          continue;
        }
        if ((current(c) > 0.0) != (d(c) > 0.0) && d(c) != 0.0) first = std::min(first, -current(c) / d(c));
      }
      if (!std::isfinite(first) || first <= 0.0) return false;
      target = current + first * d;
      return true;
    }
    const Matrix range_basis = svd.matrixV().leftCols(rank);
    const Vector inv_sq = sv.head(rank).array().square().inverse();
    target = range_basis * inv_sq.cwiseProduct(range_basis.transpose() * rhs);
    return true;
  }

  const Matrix& m_;
  const Vector& r_;
  const Vector& w_;
  double lambda_;
};

void check_inputs(const Matrix& m, const Vector& r, const char* who) {
  if (m.rows() != r.size())
    throw Error(std::string(who) + ": matrix has " + std::to_string(m.rows()) + " rows, vector has " +
                std::to_string(r.size()));
  if (!all_finite(m) || !all_finite(r)) throw Error(std::string(who) + ": non-finite input");
}

std::optional<Vector> polish_on_support(const Matrix& m, const Vector& b, const Vector& weights, const Vector& x,
                                        double target) {
  std::vector<Eigen::Index> support;
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (x(i) != 0.0 || weights(i) == 0.0) support.push_back(i);
  if (support.empty() || static_cast<Eigen::Index>(support.size()) > m.rows()) return std::nullopt;
  Matrix sub(m.rows(), static_cast<Eigen::Index>(support.size()));
  for (std::size_t c = 0; c < support.size(); ++c) sub.col(static_cast<Eigen::Index>(c)) = m.col(support[c]);
  const Vector coef = sub.colPivHouseholderQr().solve(b);
  if (!coef.allFinite() || (sub * coef - b).norm() > 1e-3 * target) return std::nullopt;
  Vector out = Vector::Zero(x.size());
  for (std::size_t c = 0; c < support.size(); ++c) {
    const Eigen::Index i = support[c];
    const double v = coef(static_cast<Eigen::Index>(c));
    if (weights(i) != 0.0 && v != 0.0 && ((v > 0.0) != (x(i) > 0.0))) return std::nullopt;
    out(i) = v;
  }
  return out;
}

}  // namespace

SolveReport bpdn_weighted(const Matrix& m, const Vector& r, const Vector& weights, double lambda,
                          const BpdnOptions& opts, const Vector* warm_start) {
  const auto start = Clock::now();
  check_inputs(m, r, "bpdn");
  if (weights.size() != m.cols()) throw Error("bpdn: weight vector length mismatch");
  if ((weights.array() < 0.0).any()) throw Error("bpdn: negative weight");
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw Error("bpdn: lambda must be positive");

  SolveReport report;
  report.lambda = lambda;
  Vector x = Vector::Zero(m.cols());
  if (warm_start) {
    if (warm_start->size() != m.cols()) throw Error("bpdn: warm start length mismatch");
    x = *warm_start;
  }
  WeightedLasso problem(m, r, weights, lambda);
  double fx = problem.objective(x);
  std::vector<double>* trace = opts.record_trace ? &report.objective_trace : nullptr;
  if (trace) trace->push_back(fx);

  bool converged = problem.accelerated(x, fx, opts.max_iterations, opts.tolerance, report.iterations, trace);
  if (opts.active_set_refinement) {
    const std::size_t max_steps = 4 * static_cast<std::size_t>(m.cols()) + 100;
    converged = problem.refine(x, fx, max_steps, report.iterations, trace) || converged;
  }
  report.solution = std::move(x);
  report.objective = fx;
  report.converged = converged && std::isfinite(fx);
  report.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return report;
}

double resolve_lambda(const Matrix& m, const Vector& r, const BpdnOptions& opts) {
  if (opts.lambda > 0.0) return opts.lambda;
  if (m.cols() == 0) return 0.0;
  double lambda = opts.lambda_ratio * (m.transpose() * r).cwiseAbs().maxCoeff();
  if (opts.noise_sigma > 0.0 && opts.noise_lambda_scale > 0.0) {
    const double n = static_cast<double>(m.cols());
    const double col_norm = m.colwise().norm().maxCoeff();
    lambda = std::max(lambda, opts.noise_lambda_scale * opts.noise_sigma *
                                  std::sqrt(2.0 * std::log(std::max(n, 2.0))) * col_norm);
  }
  return lambda;
}

SolveReport bpdn(const Matrix& m, const Vector& r, const BpdnOptions& opts) {
  opts.validate();
  check_inputs(m, r, "bpdn");
  const double lambda = resolve_lambda(m, r, opts);
  if (lambda == 0.0) {
    // r is orthogonal to every column: zero is optimal.
    SolveReport report;
    report.solution = Vector::Zero(m.cols());
    report.objective = 0.5 * r.squaredNorm();
    report.converged = true;
    if (opts.record_trace) report.objective_trace.push_back(report.objective);
    return report;
  }
  return bpdn_weighted(m, r, Vector::Ones(m.cols()), lambda, opts);
}

SolveReport min_l1_equality(const Matrix& m, const Vector& b, const Vector& weights,
                            const L1EqualityOptions& opts) {
  const auto start = Clock::now();
  opts.validate();
  check_inputs(m, b, "min_l1_equality");
  if (weights.size() != m.cols()) throw Error("min_l1_equality: weight vector length mismatch");
  if ((weights.array() < 0.0).any()) throw Error("min_l1_equality: negative weight");

  SolveReport report;
  const double b_norm = b.norm();
  const double target = opts.feas_tol * (1.0 + b_norm);
  Vector x = Vector::Zero(m.cols());
  const double top = (m.transpose() * b).cwiseAbs().maxCoeff();
  if (top == 0.0) {
    report.solution = x;
    report.feasibility_residual = b_norm;
    report.converged = b_norm <= target;
    report.seconds = std::chrono::duration<double>(Clock::now() - start).count();
    return report;
  }

  BpdnOptions stage;
  stage.max_iterations = std::min<std::size_t>(opts.max_iterations, 200);
  stage.tolerance = 1e-8;
  const double final_lambda = top * opts.final_lambda_ratio;
  bool last_converged = false;
  for (double lambda = top / opts.stage_factor;; lambda /= opts.stage_factor) {
    lambda = std::max(lambda, final_lambda);
    SolveReport sr = bpdn_weighted(m, b, weights, lambda, stage, &x);
    x = std::move(sr.solution);
    report.iterations += sr.iterations;
    report.lambda = lambda;
    last_converged = sr.converged;
    if (last_converged) {
      // The stage's residual is a dual certificate for any feasible point on
      // its support whose signs agree with the stage solution.
      if (auto exact = polish_on_support(m, b, weights, x, target)) {
        x = std::move(*exact);
        break;
      }
    }
    if (lambda <= final_lambda) break;
  }
  report.feasibility_residual = (m * x - b).norm();
  report.objective = weights.cwiseProduct(x.cwiseAbs()).sum();
  report.solution = std::move(x);
  report.converged = last_converged && report.feasibility_residual <= target;
  report.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return report;
}

Vector fit_filter(const Matrix& pilot_circulant, const Vector& received_pilot, double ridge) {
  try {
    return solve_least_squares(pilot_circulant, received_pilot, ridge);
  } catch (const RankDeficientError& e) {
    throw RankDeficientError(std::string("fit_filter: singular pilot circulant; set a positive ridge (") +
                             e.what() + ")");
  }
}

Vector fit_filter_on_support(const Matrix& pilot_circulant, const Vector& received_pilot,
                             std::span<const std::size_t> support, double ridge) {
  const Eigen::Index w = pilot_circulant.cols();
  Matrix sub(pilot_circulant.rows(), static_cast<Eigen::Index>(support.size()));
  for (std::size_t c = 0; c < support.size(); ++c) {
    if (support[c] >= static_cast<std::size_t>(w)) throw Error("fit_filter_on_support: tap out of range");
    sub.col(static_cast<Eigen::Index>(c)) = pilot_circulant.col(static_cast<Eigen::Index>(support[c]));
  }
  const Vector taps = fit_filter(sub, received_pilot, ridge);
  Vector beta = Vector::Zero(w);
  for (std::size_t c = 0; c < support.size(); ++c)
    beta(static_cast<Eigen::Index>(support[c])) = taps(static_cast<Eigen::Index>(c));
  return beta;
}

}  // namespace psdmap
