#pragma once

// Experiment runner: sweeps sensing rate x SNR, runs every selected method
// over Monte Carlo snapshots and writes CSV results plus a run manifest.

#include "psdmap/channel.hpp"
#include "psdmap/metrics.hpp"
#include "psdmap/scene.hpp"
#include "psdmap/solvers.hpp"

#include <json.hpp>

#include <atomic>
#include <string>
#include <vector>

namespace psdmap {

enum class Scale { desk, paper };
enum class Figure { fig3, fig5, fig6 };

Scale scale_from_name(const std::string& name);
Figure figure_from_name(const std::string& name);
const char* figure_name(Figure f) noexcept;

enum class CommonBootstrap {
  truth,               // optimal split of the ground-truth PSDs
  jsm_first_snapshot,  // optimal split of a joint reconstruction of the first snapshot
};

struct ExperimentConfig {
  SceneConfig scene;
  ChannelConfig channel;
  BpdnOptions solver;
  L1EqualityOptions common_solver;
  /// lambda_ratio used when the reporting channel is ideal (no multipath,
  /// infinite SNR).
  double noiseless_lambda_ratio = 1e-6;
  /// Feed each group's noise level to the BPDN penalty rule.
  bool noise_aware_lambda = false;
  double filter_ridge = 0.0;
  /// Fit only the taps at channel.tap_offsets instead of all w_j taps.
  bool filter_known_support = true;
  CommonBootstrap bootstrap = CommonBootstrap::truth;

  std::vector<double> sensing_rates{0.2, 0.35, 0.5};
  std::vector<double> snr_db{std::numeric_limits<double>::infinity()};
  std::vector<Method> methods{Method::individual, Method::jsm, Method::known_common_jsm_zc,
                              Method::known_common_opt_zc};
  std::size_t snapshots = 100;
  std::uint64_t seed = 42;
  std::string output_dir = "results";
  std::size_t jobs = 1;
  /// Figure whose plot script is emitted next to the CSVs (empty: none).
  std::string figure;

  void validate() const;
};

/// Defaults for a scale: desk (N=64, M=4, 20 snapshots) or paper (N=256,
/// M=12, 100 snapshots).
ExperimentConfig default_config(Scale scale);

/// Canned sweep behind one of the figure reproductions.
ExperimentConfig figure_config(Figure figure, Scale scale);

nlohmann::json experiment_config_to_json(const ExperimentConfig& cfg);
/// Keys absent from j keep the values of base.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j, const ExperimentConfig& base);
ExperimentConfig load_experiment_config(const std::string& path, const ExperimentConfig& base);

struct RunOptions {
  /// Reuse cell files from an earlier run with the same configuration.
  bool resume = true;
  /// Checked between snapshots; set to stop early and flush what is done.
  const std::atomic<bool>* interrupt = nullptr;
};

struct ExperimentResult {
  std::vector<TrialReport> reports;
  std::vector<std::string> files;
  std::size_t cells_total = 0;
  std::size_t cells_reused = 0;
  bool interrupted = false;
};

/// Thrown after partial results were flushed because of an interrupt.
class Interrupted : public Error {
 public:
  using Error::Error;
};

ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opts = {});

/// Runs only the snapshots of one (sensing rate, SNR) cell without writing
/// files. Useful for tests and acceptance checks.
std::vector<TrialReport> run_cell(const ExperimentConfig& cfg, double sensing_rate, double snr_db);

/// Measurement count per sensor for a sensing rate.
std::size_t measurements_for_rate(double sensing_rate, std::size_t n);

// Result file writers (exposed for reuse by tests and tools).
void write_mse_time_csv(std::span<const TrialReport> reports, const std::string& path);
void write_failrate_csv(std::span<const TrialReport> reports, const std::string& path);
void write_roc_csv(std::span<const TrialReport> reports, const std::string& path);
void write_auc_csv(std::span<const TrialReport> reports, const std::string& path);

/// ROC of one method at one SNR, pooled over sensing rates and snapshots.
RocCurve pooled_roc(std::span<const TrialReport> reports, Method method, double snr_db);

}  // namespace psdmap
