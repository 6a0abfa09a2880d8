#include "psdmap/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace psdmap {

namespace {
constexpr std::pair<Method, const char*> kMethodNames[] = {
    {Method::individual, "individual"},
    {Method::jsm, "jsm"},
    {Method::known_common_jsm_zc, "known_common_jsm_zc"},
    {Method::known_common_opt_zc, "known_common_opt_zc"},
    {Method::compensated, "compensated"},
    {Method::uncompensated, "uncompensated"},
};
}  // namespace

const char* method_name(Method m) noexcept {
  for (const auto& [method, name] : kMethodNames)
    if (method == m) return name;
  return "unknown";
}

Method method_from_name(const std::string& name) {
  for (const auto& [method, label] : kMethodNames)
    if (name == label) return method;
  throw ConfigError("methods", "unknown method '" + name + "'");
}

double relative_mse(const Vector& estimate, const Vector& truth) {
  if (estimate.size() != truth.size()) throw Error("relative_mse: length mismatch");
  const double power = truth.squaredNorm();
  if (power == 0.0) throw Error("relative_mse: truth has zero power");
  return (estimate - truth).squaredNorm() / power;
}

bool is_failure(double relative_mse, bool converged) noexcept {
  return !converged || !(relative_mse <= 1.0);
}

FiveNumber five_number_summary(std::vector<double> values) {
  if (values.empty()) throw Error("five_number_summary: no values");
  std::sort(values.begin(), values.end());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
  };
  return {values.front(), quantile(0.25), quantile(0.5), quantile(0.75), values.back()};
}

std::map<Method, FailRateSummary> fail_rate(std::span<const TrialReport> reports) {
  if (reports.empty()) throw Error("fail_rate: no reports");
  std::map<Method, std::vector<double>> per_trial;
  std::map<Method, std::pair<std::size_t, std::size_t>> totals;  // failures, count
  for (const TrialReport& rep : reports) {
    std::size_t failures = 0;
    std::size_t counted = 0;
    for (std::size_t s = 0; s < rep.relative_mse.size(); ++s) {
      if (std::isnan(rep.relative_mse[s])) continue;
      ++counted;
      const bool ok = s < rep.converged.size() ? rep.converged[s] : true;
      if (is_failure(rep.relative_mse[s], ok)) ++failures;
    }
    if (counted == 0) continue;
    per_trial[rep.method].push_back(static_cast<double>(failures) / static_cast<double>(counted));
    totals[rep.method].first += failures;
    totals[rep.method].second += counted;
  }
  std::map<Method, FailRateSummary> out;
  for (auto& [method, fractions] : per_trial) {
    FailRateSummary summary;
    summary.reconstructions = totals[method].second;
    summary.fail_fraction =
        static_cast<double>(totals[method].first) / static_cast<double>(totals[method].second);
    summary.per_trial = five_number_summary(fractions);
    out.emplace(method, summary);
  }
  return out;
}

Vector occupancy_scores(const Vector& psd, std::size_t subbands, std::size_t samples_per_subband) {
  if (static_cast<std::size_t>(psd.size()) != subbands * samples_per_subband)
    throw Error("occupancy_scores: PSD length " + std::to_string(psd.size()) + " is not " +
                std::to_string(subbands) + " x " + std::to_string(samples_per_subband));
  Vector scores(static_cast<Eigen::Index>(subbands));
  const auto width = static_cast<Eigen::Index>(samples_per_subband);
  for (Eigen::Index b = 0; b < scores.size(); ++b) scores(b) = psd.segment(b * width, width).mean();
  return scores;
}

RocCurve roc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw Error("roc: scores and labels differ in length");
  std::size_t positives = 0;
  for (int label : labels) positives += label != 0 ? 1 : 0;
  const std::size_t negatives = labels.size() - positives;
  if (positives == 0 || negatives == 0) throw Error("roc: both occupied and vacant samples are required");
  for (double s : scores)
    if (!std::isfinite(s)) throw Error("roc: non-finite score");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocCurve curve;
  curve.points.push_back({0.0, 0.0});
  std::size_t tp = 0;
  std::size_t fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double threshold = scores[order[i]];
    while (i < order.size() && scores[order[i]] == threshold) {
      if (labels[order[i]] != 0)
        ++tp;
      else
        ++fp;
      ++i;
    }
    curve.points.push_back(
        {static_cast<double>(fp) / static_cast<double>(negatives), static_cast<double>(tp) / static_cast<double>(positives)});
  }
  for (std::size_t k = 1; k < curve.points.size(); ++k) {
    const RocPoint& a = curve.points[k - 1];
    const RocPoint& b = curve.points[k];
    curve.auc += (b.p_fa - a.p_fa) * 0.5 * (a.p_d + b.p_d);
  }
  return curve;
}

}  // namespace psdmap
