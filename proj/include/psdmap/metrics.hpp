#pragma once

// Evaluation: reconstruction error, fail-rates with boxplot summaries,
// per-subband occupancy scores and ROC/AUC.

#include "psdmap/numcore.hpp"

#include <map>
#include <span>
#include <string>
#include <vector>

namespace psdmap {

enum class Method {
  individual,
  jsm,
  known_common_jsm_zc,
  known_common_opt_zc,
  compensated,
  uncompensated,
};

const char* method_name(Method m) noexcept;
/// Throws ConfigError for unknown names.
Method method_from_name(const std::string& name);

/// One method applied to every sensor of the scene in one snapshot of one
/// sweep cell.
struct TrialReport {
  std::size_t snapshot = 0;
  Method method = Method::individual;
  double sensing_rate = 0.0;
  double snr_db = 0.0;
  /// Per-sensor relative MSE; NaN where the truth has zero power.
  std::vector<double> relative_mse;
  std::vector<bool> converged;
  /// Total solver wall time over the snapshot's groups.
  double seconds = 0.0;
  /// Number of group solves behind `seconds`.
  std::size_t solves = 0;
  /// Row-major [sensor][subband].
  std::vector<double> scores;
  std::vector<int> labels;
};

/// ||estimate - truth||^2 / ||truth||^2. Throws for a zero-power truth.
double relative_mse(const Vector& estimate, const Vector& truth);

/// A reconstruction fails when its solver did not converge or its relative
/// MSE exceeds 1 (worse than the all-zero estimate).
bool is_failure(double relative_mse, bool converged) noexcept;

struct FiveNumber {
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
};

/// Quartiles with linear interpolation between order statistics.
FiveNumber five_number_summary(std::vector<double> values);

struct FailRateSummary {
  /// Fraction of (sensor, snapshot) reconstructions that failed.
  double fail_fraction = 0.0;
  std::size_t reconstructions = 0;
  /// Boxplot over per-trial fail fractions.
  FiveNumber per_trial;
};

/// Per-method fail statistics. Sensors with a NaN MSE are left out.
std::map<Method, FailRateSummary> fail_rate(std::span<const TrialReport> reports);

/// Mean of the PSD over each subband's samples.
Vector occupancy_scores(const Vector& psd, std::size_t subbands, std::size_t samples_per_subband);

struct RocPoint {
  double p_fa = 0.0;
  double p_d = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;  // from (0,0) to (1,1)
  double auc = 0.0;
};

/// Empirical ROC with a threshold at every distinct score (detect when
/// score >= threshold); AUC by the trapezoid rule. Needs both classes.
RocCurve roc(std::span<const double> scores, std::span<const int> labels);

}  // namespace psdmap
