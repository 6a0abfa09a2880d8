#include "psdmap/harness.hpp"

#include "psdmap/reconstruct.hpp"
#include "psdmap/sparsity.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

namespace psdmap {

namespace fs = std::filesystem;

Scale scale_from_name(const std::string& name) {
  if (name == "desk") return Scale::desk;
  if (name == "paper") return Scale::paper;
  throw ConfigError("scale", "expected desk or paper, got '" + name + "'");
}

Figure figure_from_name(const std::string& name) {
  if (name == "fig3") return Figure::fig3;
  if (name == "fig5") return Figure::fig5;
  if (name == "fig6") return Figure::fig6;
  throw ConfigError("figure", "unknown figure id '" + name + "' (expected fig3, fig5 or fig6)");
}

const char* figure_name(Figure f) noexcept {
  switch (f) {
    case Figure::fig3: return "fig3";
    case Figure::fig5: return "fig5";
    case Figure::fig6: return "fig6";
  }
  return "unknown";
}

std::size_t measurements_for_rate(double sensing_rate, std::size_t n) {
  const auto w = static_cast<std::size_t>(std::llround(sensing_rate * static_cast<double>(n)));
  return std::clamp<std::size_t>(w, 1, n);
}

void ExperimentConfig::validate() const {
  scene.validate();
  channel.validate();
  solver.validate();
  common_solver.validate();
  if (!(noiseless_lambda_ratio > 0.0)) throw ConfigError("solver.noiseless_lambda_ratio", "must be positive");
  if (!(filter_ridge >= 0.0)) throw ConfigError("filter.ridge", "must be >= 0");
  if (sensing_rates.empty()) throw ConfigError("sweep.sensing_rates", "must not be empty");
  for (double r : sensing_rates)
    if (!(r > 0.0 && r <= 1.0)) throw ConfigError("sweep.sensing_rates", "rates must lie in (0, 1]");
  if (snr_db.empty()) throw ConfigError("sweep.snr_db", "must not be empty");
  for (double s : snr_db)
    if (std::isnan(s) || s == -std::numeric_limits<double>::infinity())
      throw ConfigError("sweep.snr_db", "entries must be numbers or \"inf\"");
  if (methods.empty()) throw ConfigError("methods", "must not be empty");
  if (snapshots == 0) throw ConfigError("snapshots", "must be at least 1");
  if (jobs == 0) throw ConfigError("jobs", "must be at least 1");
  if (output_dir.empty()) throw ConfigError("output_dir", "must not be empty");
  if (!figure.empty()) figure_from_name(figure);
  if (channel.multipath)
    for (double r : sensing_rates)
      if (measurements_for_rate(r, scene.psd_length()) <= channel.tap_offsets.back())
        throw ConfigError("sweep.sensing_rates",
                          "rate " + std::to_string(r) + " leaves too few measurements for the channel taps");
}

ExperimentConfig default_config(Scale scale) {
  ExperimentConfig cfg;
  if (scale == Scale::desk) {
    // Same sensor spacing (~10 grid points) as the full-size scene.
    cfg.scene.grid_side = 42;
    cfg.scene.sensors_per_side = 4;
    cfg.scene.subbands = 8;
    cfg.scene.samples_per_subband = 8;
    cfg.snapshots = 20;
  } else {
    cfg.scene.grid_side = 122;
    cfg.scene.sensors_per_side = 12;
    cfg.scene.subbands = 32;
    cfg.scene.samples_per_subband = 8;
    cfg.snapshots = 100;
  }
  return cfg;
}

ExperimentConfig figure_config(Figure figure, Scale scale) {
  ExperimentConfig cfg = default_config(scale);
  cfg.figure = figure_name(figure);
  constexpr double inf = std::numeric_limits<double>::infinity();
  switch (figure) {
    case Figure::fig3:
      cfg.channel.multipath = false;
      cfg.sensing_rates = {0.2, 0.35, 0.5};
      cfg.snr_db = {inf};
      cfg.methods = {Method::individual, Method::jsm, Method::known_common_jsm_zc, Method::known_common_opt_zc};
      break;
    case Figure::fig5:
      cfg.channel.multipath = true;
      cfg.sensing_rates = {0.2, 0.35, 0.5};
      cfg.snr_db = {0.0, 10.0, 20.0, inf};
      cfg.methods = {Method::compensated, Method::uncompensated};
      break;
    case Figure::fig6:
      cfg.channel.multipath = true;
      cfg.sensing_rates = {0.5};
      cfg.snr_db = {0.0, 10.0, 20.0};
      cfg.methods = {Method::compensated, Method::uncompensated};
      break;
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// JSON configuration

namespace {

nlohmann::json snr_to_json(double snr) {
  return std::isinf(snr) ? nlohmann::json("inf") : nlohmann::json(snr);
}

double snr_from_json(const nlohmann::json& v, const char* field) {
  if (v.is_string()) {
    if (v.get<std::string>() == "inf") return std::numeric_limits<double>::infinity();
    throw ConfigError(field, "string entries must be \"inf\"");
  }
  if (!v.is_number()) throw ConfigError(field, "entries must be numbers or \"inf\"");
  return v.get<double>();
}

template <typename T>
void read(const nlohmann::json& j, const char* key, const std::string& qualified, T& into) {
  if (!j.contains(key)) return;
  try {
    into = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(qualified, std::string("wrong type (") + e.what() + ")");
  }
}

const char* bootstrap_name(CommonBootstrap b) {
  return b == CommonBootstrap::truth ? "truth" : "jsm_first_snapshot";
}

}  // namespace

nlohmann::json experiment_config_to_json(const ExperimentConfig& cfg) {
  nlohmann::json snrs = nlohmann::json::array();
  for (double s : cfg.snr_db) snrs.push_back(snr_to_json(s));
  nlohmann::json methods = nlohmann::json::array();
  for (Method m : cfg.methods) methods.push_back(method_name(m));
  nlohmann::json channel = channel_config_to_json(cfg.channel);
  channel.erase("snr_db");
  return {{"seed", cfg.seed},
          {"snapshots", cfg.snapshots},
          {"output_dir", cfg.output_dir},
          {"jobs", cfg.jobs},
          {"figure", cfg.figure},
          {"scene", scene_config_to_json(cfg.scene)},
          {"channel", channel},
          {"solver",
           {{"lambda", cfg.solver.lambda},
            {"lambda_ratio", cfg.solver.lambda_ratio},
            {"noiseless_lambda_ratio", cfg.noiseless_lambda_ratio},
            {"noise_aware_lambda", cfg.noise_aware_lambda},
            {"noise_lambda_scale", cfg.solver.noise_lambda_scale},
            {"max_iterations", cfg.solver.max_iterations},
            {"tolerance", cfg.solver.tolerance},
            {"active_set_refinement", cfg.solver.active_set_refinement},
            {"feas_tol", cfg.common_solver.feas_tol}}},
          {"filter", {{"ridge", cfg.filter_ridge}, {"known_support", cfg.filter_known_support}}},
          {"common_bootstrap", bootstrap_name(cfg.bootstrap)},
          {"sweep", {{"sensing_rates", cfg.sensing_rates}, {"snr_db", snrs}}},
          {"methods", methods}};
}

ExperimentConfig experiment_config_from_json(const nlohmann::json& j, const ExperimentConfig& base) {
  if (!j.is_object()) throw ConfigError("config", "top level must be a JSON object");
  static const char* known[] = {"seed",   "snapshots", "output_dir", "jobs",  "figure",  "scene",
                                "channel", "solver",   "filter",     "sweep", "methods", "common_bootstrap",
                                "scale"};
  for (const auto& [key, value] : j.items())
    if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return key == k; }) == std::end(known))
      throw ConfigError(key, "unknown configuration key");

  ExperimentConfig cfg = base;
  read(j, "seed", "seed", cfg.seed);
  read(j, "snapshots", "snapshots", cfg.snapshots);
  read(j, "output_dir", "output_dir", cfg.output_dir);
  read(j, "jobs", "jobs", cfg.jobs);
  read(j, "figure", "figure", cfg.figure);
  if (j.contains("scene")) {
    nlohmann::json merged = scene_config_to_json(cfg.scene);
    if (!j.at("scene").is_object()) throw ConfigError("scene", "must be a JSON object");
    merged.update(j.at("scene"));
    cfg.scene = scene_config_from_json(merged);
  }
  if (j.contains("channel")) {
    nlohmann::json merged = channel_config_to_json(cfg.channel);
    if (!j.at("channel").is_object()) throw ConfigError("channel", "must be a JSON object");
    merged.update(j.at("channel"));
    cfg.channel = channel_config_from_json(merged);
  }
  if (j.contains("solver")) {
    const auto& s = j.at("solver");
    if (!s.is_object()) throw ConfigError("solver", "must be a JSON object");
    read(s, "lambda", "solver.lambda", cfg.solver.lambda);
    read(s, "lambda_ratio", "solver.lambda_ratio", cfg.solver.lambda_ratio);
    read(s, "noiseless_lambda_ratio", "solver.noiseless_lambda_ratio", cfg.noiseless_lambda_ratio);
    read(s, "noise_aware_lambda", "solver.noise_aware_lambda", cfg.noise_aware_lambda);
    read(s, "noise_lambda_scale", "solver.noise_lambda_scale", cfg.solver.noise_lambda_scale);
    read(s, "max_iterations", "solver.max_iterations", cfg.solver.max_iterations);
    read(s, "tolerance", "solver.tolerance", cfg.solver.tolerance);
    read(s, "active_set_refinement", "solver.active_set_refinement", cfg.solver.active_set_refinement);
    read(s, "feas_tol", "solver.feas_tol", cfg.common_solver.feas_tol);
  }
  if (j.contains("filter")) {
    const auto& f = j.at("filter");
    if (!f.is_object()) throw ConfigError("filter", "must be a JSON object");
    read(f, "ridge", "filter.ridge", cfg.filter_ridge);
    read(f, "known_support", "filter.known_support", cfg.filter_known_support);
  }
  if (j.contains("common_bootstrap")) {
    std::string b;
    read(j, "common_bootstrap", "common_bootstrap", b);
    if (b == "truth")
      cfg.bootstrap = CommonBootstrap::truth;
    else if (b == "jsm_first_snapshot")
      cfg.bootstrap = CommonBootstrap::jsm_first_snapshot;
    else
      throw ConfigError("common_bootstrap", "expected truth or jsm_first_snapshot");
  }
  if (j.contains("sweep")) {
    const auto& s = j.at("sweep");
    if (!s.is_object()) throw ConfigError("sweep", "must be a JSON object");
    read(s, "sensing_rates", "sweep.sensing_rates", cfg.sensing_rates);
    if (s.contains("snr_db")) {
      if (!s.at("snr_db").is_array()) throw ConfigError("sweep.snr_db", "must be an array");
      cfg.snr_db.clear();
      for (const auto& v : s.at("snr_db")) cfg.snr_db.push_back(snr_from_json(v, "sweep.snr_db"));
    }
  }
  if (j.contains("methods")) {
    if (!j.at("methods").is_array()) throw ConfigError("methods", "must be an array of method names");
    cfg.methods.clear();
    for (const auto& m : j.at("methods")) {
      if (!m.is_string()) throw ConfigError("methods", "entries must be strings");
      cfg.methods.push_back(method_from_name(m.get<std::string>()));
    }
  }
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path, const ExperimentConfig& base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config", std::string("invalid JSON: ") + e.what());
  }
  ExperimentConfig start = base;
  if (j.is_object() && j.contains("scale")) {
    if (!j.at("scale").is_string()) throw ConfigError("scale", "must be a string");
    start = default_config(scale_from_name(j.at("scale").get<std::string>()));
  }
  return experiment_config_from_json(j, start);
}

// ---------------------------------------------------------------------------
// Simulation

namespace {

enum SeedTag : std::uint64_t { kSceneTag = 1, kPhiTag = 2, kNoiseTag = 3, kPilotTag = 4 };

std::uint64_t snr_key(double snr) { return std::bit_cast<std::uint64_t>(snr); }

struct HoldingContext {
  Scene scene;
  std::vector<Vector> truth;
  std::vector<int> labels;
};

HoldingContext holding_context(const ExperimentConfig& cfg, std::size_t holding) {
  SceneConfig sc = cfg.scene;
  sc.seed = derive_seed(cfg.seed, {kSceneTag, holding});
  HoldingContext ctx;
  ctx.scene = generate_scene(sc);
  for (std::size_t s = 0; s < ctx.scene.sensors.size(); ++s) ctx.truth.push_back(ground_truth_psd(ctx.scene, s));
  ctx.labels = occupancy_labels(ctx.scene);
  return ctx;
}

std::vector<Matrix> draw_phis(const ExperimentConfig& cfg, std::size_t snapshot, std::size_t w) {
  std::vector<Matrix> phis;
  for (std::size_t s = 0; s < cfg.scene.sensor_count(); ++s) {
    SeededRng rng(derive_seed(cfg.seed, {kPhiTag, snapshot, s, w}));
    phis.push_back(gaussian_matrix(w, cfg.scene.psd_length(), rng));
  }
  return phis;
}

struct Received {
  std::vector<Vector> r;
  std::vector<double> noise_variance;
};

Received receive(const ExperimentConfig& cfg, const HoldingContext& ctx, const ChannelRealization& ch,
                 const std::vector<Matrix>& phis, std::size_t snapshot, double snr) {
  Received out;
  for (std::size_t s = 0; s < phis.size(); ++s) {
    const Vector y = phis[s] * ctx.truth[s];
    const Vector clean = circular_convolve(y, ch.filters[s].taps);
    if (clean.squaredNorm() == 0.0) {
      out.r.push_back(clean);
      out.noise_variance.push_back(0.0);
      continue;
    }
    SeededRng rng(derive_seed(cfg.seed, {kNoiseTag, snapshot, s, static_cast<std::uint64_t>(y.size()), snr_key(snr)}));
    out.noise_variance.push_back(noise_variance_for(clean, snr));
    out.r.push_back(transmit(y, ch.filters[s], snr, rng));
  }
  return out;
}

struct MethodOutput {
  std::vector<Vector> psds;  // per group sensor
  std::vector<bool> converged;
  double seconds = 0.0;
};

class SnapshotRunner {
 public:
  SnapshotRunner(const ExperimentConfig& cfg, double rate, double snr, std::size_t snapshot)
      : cfg_(cfg), rate_(rate), snr_(snr), snapshot_(snapshot) {
    n_ = cfg.scene.psd_length();
    w_ = measurements_for_rate(rate, n_);
    holding_ = snapshot / cfg.scene.holding_snapshots;
    ctx_ = holding_context(cfg, holding_);
    dictionary_ = cumsum_matrix(n_);
    groups_ = partition_groups(cfg.scene);
    const std::vector<std::size_t> lengths(cfg.scene.sensor_count(), w_);
    channel_ = realize_channel(ctx_.scene, cfg.channel, lengths);
    phis_ = draw_phis(cfg, snapshot, w_);
    received_ = receive(cfg, ctx_, channel_, phis_, snapshot, snr);
  }

  std::vector<TrialReport> run() {
    std::vector<TrialReport> reports;
    for (Method m : cfg_.methods) {
      TrialReport rep;
      rep.snapshot = snapshot_;
      rep.method = m;
      rep.sensing_rate = rate_;
      rep.snr_db = snr_;
      const std::size_t sensors = cfg_.scene.sensor_count();
      rep.relative_mse.assign(sensors, std::numeric_limits<double>::quiet_NaN());
      rep.converged.assign(sensors, true);
      rep.scores.assign(sensors * cfg_.scene.subbands, 0.0);
      for (std::size_t s = 0; s < sensors; ++s)
        rep.labels.insert(rep.labels.end(), ctx_.labels.begin(), ctx_.labels.end());
      for (const GroupOfSensors& g : groups_) {
        const MethodOutput out = run_method(m, g);
        rep.seconds += out.seconds;
        ++rep.solves;
        for (std::size_t k = 0; k < g.sensors.size(); ++k) {
          const std::size_t s = g.sensors[k];
          const Vector& truth = ctx_.truth[s];
          if (truth.squaredNorm() > 0.0) rep.relative_mse[s] = relative_mse(out.psds[k], truth);
          rep.converged[s] = out.converged[k];
          const Vector sc = occupancy_scores(out.psds[k], cfg_.scene.subbands, cfg_.scene.samples_per_subband);
          for (std::size_t b = 0; b < cfg_.scene.subbands; ++b)
            rep.scores[s * cfg_.scene.subbands + b] = sc(static_cast<Eigen::Index>(b));
        }
      }
      reports.push_back(std::move(rep));
    }
    return reports;
  }

 private:
  BpdnOptions options_for(const GroupOfSensors& g, const Received& rx) const {
    BpdnOptions opts = cfg_.solver;
    // Exact-fit regime only when the reports reach the FC unaltered.
    if (std::isinf(snr_) && !cfg_.channel.multipath) opts.lambda_ratio = cfg_.noiseless_lambda_ratio;
    if (cfg_.noise_aware_lambda) {
      double var = 0.0;
      for (std::size_t s : g.sensors) var += rx.noise_variance[s];
      opts.noise_sigma = std::sqrt(var / static_cast<double>(g.sensors.size()));
    } else {
      opts.noise_sigma = 0.0;
    }
    return opts;
  }

  GroupMeasurements measurements(const GroupOfSensors& g, const std::vector<Matrix>& phis,
                                 const Received& rx) const {
    GroupMeasurements gm;
    for (std::size_t s : g.sensors) {
      gm.received.push_back(rx.r[s]);
      gm.phis.push_back(phis[s]);
    }
    return gm;
  }

  std::vector<Vector> group_truth(const GroupOfSensors& g) const {
    std::vector<Vector> out;
    for (std::size_t s : g.sensors) out.push_back(ctx_.truth[s]);
    return out;
  }

  // Common part agreed at the start of the holding period.
  CommonKnowledge common_for(const GroupOfSensors& g, CommonMode mode) {
    const auto key = std::make_pair(g.id, mode == CommonMode::jsm ? 0 : 1);
    if (auto it = common_cache_.find(key); it != common_cache_.end()) return it->second;
    std::vector<Vector> psds;
    if (cfg_.bootstrap == CommonBootstrap::truth) {
      psds = group_truth(g);
    } else {
      const std::size_t first = holding_ * cfg_.scene.holding_snapshots;
      const auto phis = first == snapshot_ ? phis_ : draw_phis(cfg_, first, w_);
      const Received rx = first == snapshot_ ? received_ : receive(cfg_, ctx_, channel_, phis, first, snr_);
      const GroupMeasurements gm = measurements(g, phis, rx);
      psds = reconstruct_jsm(gm, dictionary_, options_for(g, rx)).psds;
    }
    CommonKnowledge ck;
    ck.common_edges = optimal_common(psds, mode, cfg_.common_solver).common_edges;
    ck.valid_from = holding_ * cfg_.scene.holding_snapshots;
    ck.valid_until = ck.valid_from + cfg_.scene.holding_snapshots;
    common_cache_.emplace(key, ck);
    return ck;
  }

  // One pilot per sensor per holding period, sent with that period's first
  // measurement matrices.
  CompensationSet compensation_for(const GroupOfSensors& g, const CommonKnowledge& ck) const {
    const std::size_t first = holding_ * cfg_.scene.holding_snapshots;
    const auto phis = first == snapshot_ ? phis_ : draw_phis(cfg_, first, w_);
    GroupMeasurements pilot_gm;
    std::vector<Vector> identity_filters;
    bool usable = true;
    for (std::size_t s : g.sensors) {
      const Vector sent = phis[s] * (dictionary_ * ck.common_edges);
      Vector delta = Vector::Zero(static_cast<Eigen::Index>(w_));
      delta(0) = 1.0;
      identity_filters.push_back(delta);
      if (sent.squaredNorm() == 0.0) usable = false;
      SeededRng rng(derive_seed(cfg_.seed, {kPilotTag, holding_, s, static_cast<std::uint64_t>(w_), snr_key(snr_)}));
      pilot_gm.phis.push_back(phis[s]);
      pilot_gm.pilots.push_back(usable ? transmit_pilot(sent, channel_.filters[s], snr_, rng) : sent);
      pilot_gm.received.push_back(pilot_gm.pilots.back());
    }
    // Without a common part there is nothing to probe the channel with.
    if (!usable) return compensation_from_filters(std::move(identity_filters));
    std::vector<std::size_t> support;
    if (cfg_.filter_known_support) support = channel_.tap_offsets;
    try {
      return estimate_filters(pilot_gm, ck, dictionary_, cfg_.filter_ridge, support);
    } catch (const RankDeficientError&) {
      return compensation_from_filters(std::move(identity_filters));
    }
  }

  MethodOutput run_method(Method m, const GroupOfSensors& g) {
    using Clock = std::chrono::steady_clock;
    const GroupMeasurements gm = measurements(g, phis_, received_);
    const BpdnOptions opts = options_for(g, received_);
    MethodOutput out;
    auto take = [&](GroupReconstruction&& rec) {
      out.psds = std::move(rec.psds);
      out.converged.assign(out.psds.size(), rec.report.converged);
    };
    switch (m) {
      case Method::individual: {
        const auto start = Clock::now();
        for (std::size_t k = 0; k < g.sensors.size(); ++k) {
          BpdnOptions single = opts;
          if (cfg_.noise_aware_lambda) single.noise_sigma = std::sqrt(received_.noise_variance[g.sensors[k]]);
          GroupReconstruction rec = reconstruct_individual(gm.received[k], gm.phis[k], dictionary_, single);
          out.psds.push_back(std::move(rec.psds.front()));
          out.converged.push_back(rec.report.converged);
        }
        out.seconds = std::chrono::duration<double>(Clock::now() - start).count();
        break;
      }
      case Method::jsm: {
        const auto start = Clock::now();
        take(reconstruct_jsm(gm, dictionary_, opts));
        out.seconds = std::chrono::duration<double>(Clock::now() - start).count();
        break;
      }
      case Method::known_common_jsm_zc:
      case Method::known_common_opt_zc:
      case Method::uncompensated: {
        const CommonKnowledge ck =
            common_for(g, m == Method::known_common_jsm_zc ? CommonMode::jsm : CommonMode::innovation_only);
        const auto start = Clock::now();
        take(reconstruct_known_common(gm, ck, dictionary_, opts));
        out.seconds = std::chrono::duration<double>(Clock::now() - start).count();
        break;
      }
      case Method::compensated: {
        const CommonKnowledge ck = common_for(g, CommonMode::innovation_only);
        const CompensationSet comp = compensation_for(g, ck);
        const auto start = Clock::now();
        take(reconstruct_compensated(gm, ck, comp, dictionary_, opts));
        out.seconds = std::chrono::duration<double>(Clock::now() - start).count();
        break;
      }
    }
    return out;
  }

  const ExperimentConfig& cfg_;
  double rate_;
  double snr_;
  std::size_t snapshot_;
  std::size_t n_ = 0;
  std::size_t w_ = 0;
  std::size_t holding_ = 0;
  HoldingContext ctx_;
  Matrix dictionary_;
  std::vector<GroupOfSensors> groups_;
  ChannelRealization channel_;
  std::vector<Matrix> phis_;
  Received received_;
  std::map<std::pair<std::size_t, int>, CommonKnowledge> common_cache_;
};

// Runs snapshots [0, count) of a cell on `jobs` threads; output order is by
// snapshot regardless of scheduling.
std::vector<TrialReport> run_cell_snapshots(const ExperimentConfig& cfg, double rate, double snr,
                                            const std::atomic<bool>* interrupt, bool& interrupted) {
  std::vector<std::vector<TrialReport>> per_snapshot(cfg.snapshots);
  std::vector<char> done(cfg.snapshots, 0);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      if (interrupt && interrupt->load()) return;
      const std::size_t k = next.fetch_add(1);
      if (k >= cfg.snapshots) return;
      try {
        SnapshotRunner runner(cfg, rate, snr, k);
        per_snapshot[k] = runner.run();
        done[k] = 1;
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(cfg.snapshots);
        return;
      }
    }
  };
  const std::size_t threads = std::min(cfg.jobs, cfg.snapshots);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
  std::vector<TrialReport> out;
  interrupted = false;
  for (std::size_t k = 0; k < cfg.snapshots; ++k) {
    if (!done[k]) {
      interrupted = true;
      continue;
    }
    for (auto& rep : per_snapshot[k]) out.push_back(std::move(rep));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Output

std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::string hex(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// Hash of everything that influences results (not paths or worker count).
std::string config_hash(const ExperimentConfig& cfg) {
  nlohmann::json j = experiment_config_to_json(cfg);
  j.erase("output_dir");
  j.erase("jobs");
  return hex(fnv1a(j.dump()));
}

std::string cell_id(double rate, double snr) { return "rate_" + fmt(rate) + "_snr_" + fmt(snr); }

nlohmann::json report_to_json(const TrialReport& r) {
  nlohmann::json mse = nlohmann::json::array();
  for (double v : r.relative_mse) mse.push_back(std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v));
  std::vector<int> conv(r.converged.begin(), r.converged.end());
  return {{"snapshot", r.snapshot},       {"method", method_name(r.method)}, {"sensing_rate", r.sensing_rate},
          {"snr_db", snr_to_json(r.snr_db)}, {"relative_mse", mse},          {"converged", conv},
          {"seconds", r.seconds},         {"solves", r.solves},              {"scores", r.scores},
          {"labels", r.labels}};
}

TrialReport report_from_json(const nlohmann::json& j) {
  TrialReport r;
  r.snapshot = j.at("snapshot").get<std::size_t>();
  r.method = method_from_name(j.at("method").get<std::string>());
  r.sensing_rate = j.at("sensing_rate").get<double>();
  r.snr_db = snr_from_json(j.at("snr_db"), "snr_db");
  for (const auto& v : j.at("relative_mse"))
    r.relative_mse.push_back(v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>());
  for (int c : j.at("converged").get<std::vector<int>>()) r.converged.push_back(c != 0);
  r.seconds = j.at("seconds").get<double>();
  r.solves = j.at("solves").get<std::size_t>();
  r.scores = j.at("scores").get<std::vector<double>>();
  r.labels = j.at("labels").get<std::vector<int>>();
  return r;
}

void write_text_atomically(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp.string() + "'");
    out << text;
    if (!out) throw Error("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

std::optional<std::vector<TrialReport>> load_cell(const fs::path& path, const std::string& hash) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  try {
    nlohmann::json j;
    in >> j;
    if (j.value("config_hash", "") != hash || !j.value("complete", false)) return std::nullopt;
    std::vector<TrialReport> out;
    for (const auto& r : j.at("reports")) out.push_back(report_from_json(r));
    return out;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

std::string gnuplot_script(Figure figure) {
  switch (figure) {
    case Figure::fig3:
      return "# Mean relative MSE versus sensing rate per method.\n"
             "set datafile separator ','\n"
             "set key autotitle columnhead\n"
             "set logscale y\n"
             "set xlabel 'sensing rate w_j/N'\n"
             "set ylabel 'mean relative MSE'\n"
             "methods = 'individual jsm known_common_jsm_zc known_common_opt_zc'\n"
             "plot for [m in methods] '< grep -E \"^(method|'.m.',)\" mse_time.csv' "
             "using 2:3 with linespoints title m\n";
    case Figure::fig5:
      return "# Pooled fail-rate boxplots (rows with snr_db == all).\n"
             "set datafile separator ','\n"
             "set style fill empty\n"
             "set ylabel 'fail rate per snapshot'\n"
             "set xtics ('compensated' 1, 'uncompensated' 2)\n"
             "set xrange [0:3]\n"
             "plot '< grep \"^compensated,all\" failrate.csv' using (1):5:4:8:7 with candlesticks "
             "whiskerbars notitle, \\\n"
             "     '< grep \"^uncompensated,all\" failrate.csv' using (2):5:4:8:7 with candlesticks "
             "whiskerbars notitle\n";
    case Figure::fig6:
      return "# ROC curves per method and SNR.\n"
             "set datafile separator ','\n"
             "set xlabel 'P_{fa}'\n"
             "set ylabel 'P_d'\n"
             "set key bottom right\n"
             "plot for [m in 'compensated uncompensated'] for [s in '0 10 20'] "
             "'< grep \"^'.m.','.s.',\" roc.csv' using 3:4 with lines title m.' '.s.' dB'\n";
  }
  return {};
}

}  // namespace

std::vector<TrialReport> run_cell(const ExperimentConfig& cfg, double sensing_rate, double snr_db) {
  cfg.validate();
  bool interrupted = false;
  return run_cell_snapshots(cfg, sensing_rate, snr_db, nullptr, interrupted);
}

void write_mse_time_csv(std::span<const TrialReport> reports, const std::string& path) {
  // (method order of first appearance, rate) -> sums
  struct Acc {
    double mse = 0.0;
    std::size_t mse_count = 0;
    double seconds = 0.0;
    std::size_t solves = 0;
  };
  std::vector<std::pair<Method, double>> keys;
  std::map<std::pair<int, double>, Acc> acc;
  for (const TrialReport& r : reports) {
    const auto key = std::make_pair(static_cast<int>(r.method), r.sensing_rate);
    if (!acc.contains(key)) keys.emplace_back(r.method, r.sensing_rate);
    Acc& a = acc[key];
    for (double v : r.relative_mse)
      if (!std::isnan(v)) {
        a.mse += v;
        ++a.mse_count;
      }
    a.seconds += r.seconds;
    a.solves += r.solves;
  }
  std::ostringstream out;
  out << "method,sensing_rate,mean_mse,mean_seconds\n";
  for (const auto& [method, rate] : keys) {
    const Acc& a = acc[{static_cast<int>(method), rate}];
    out << method_name(method) << ',' << fmt(rate) << ','
        << fmt(a.mse_count ? a.mse / static_cast<double>(a.mse_count) : std::numeric_limits<double>::quiet_NaN())
        << ',' << fmt(a.solves ? a.seconds / static_cast<double>(a.solves) : 0.0) << '\n';
  }
  write_text_atomically(path, out.str());
}

void write_failrate_csv(std::span<const TrialReport> reports, const std::string& path) {
  std::ostringstream out;
  out << "method,snr_db,sensing_rate,min,q1,median,q3,max\n";
  std::vector<std::tuple<Method, double, double>> cells;
  for (const TrialReport& r : reports) {
    const auto key = std::make_tuple(r.method, r.snr_db, r.sensing_rate);
    if (std::find(cells.begin(), cells.end(), key) == cells.end()) cells.push_back(key);
  }
  auto row = [&](Method m, const std::string& snr, const std::string& rate, const FiveNumber& f) {
    out << method_name(m) << ',' << snr << ',' << rate << ',' << fmt(f.min) << ',' << fmt(f.q1) << ','
        << fmt(f.median) << ',' << fmt(f.q3) << ',' << fmt(f.max) << '\n';
  };
  for (const auto& [method, snr, rate] : cells) {
    std::vector<TrialReport> subset;
    for (const TrialReport& r : reports)
      if (r.method == method && r.snr_db == snr && r.sensing_rate == rate) subset.push_back(r);
    const auto summary = fail_rate(subset);
    if (auto it = summary.find(method); it != summary.end()) row(method, fmt(snr), fmt(rate), it->second.per_trial);
  }
  const auto pooled = fail_rate(reports);
  std::vector<Method> order;
  for (const auto& [method, snr, rate] : cells)
    if (std::find(order.begin(), order.end(), method) == order.end()) order.push_back(method);
  for (Method m : order)
    if (auto it = pooled.find(m); it != pooled.end()) row(m, "all", "all", it->second.per_trial);
  write_text_atomically(path, out.str());
}

RocCurve pooled_roc(std::span<const TrialReport> reports, Method method, double snr_db) {
  std::vector<double> scores;
  std::vector<int> labels;
  for (const TrialReport& r : reports) {
    if (r.method != method || !(r.snr_db == snr_db)) continue;
    scores.insert(scores.end(), r.scores.begin(), r.scores.end());
    labels.insert(labels.end(), r.labels.begin(), r.labels.end());
  }
  return roc(scores, labels);
}

namespace {

std::vector<std::pair<Method, double>> method_snr_pairs(std::span<const TrialReport> reports) {
  std::vector<std::pair<Method, double>> pairs;
  for (const TrialReport& r : reports) {
    const auto key = std::make_pair(r.method, r.snr_db);
    if (std::find(pairs.begin(), pairs.end(), key) == pairs.end()) pairs.push_back(key);
  }
  return pairs;
}

bool has_both_classes(std::span<const TrialReport> reports, Method m, double snr) {
  bool pos = false;
  bool neg = false;
  for (const TrialReport& r : reports)
    if (r.method == m && r.snr_db == snr)
      for (int l : r.labels) (l ? pos : neg) = true;
  return pos && neg;
}

}  // namespace

void write_roc_csv(std::span<const TrialReport> reports, const std::string& path) {
  std::ostringstream out;
  out << "method,snr_db,p_fa,p_d\n";
  for (const auto& [method, snr] : method_snr_pairs(reports)) {
    if (!has_both_classes(reports, method, snr)) continue;
    for (const RocPoint& p : pooled_roc(reports, method, snr).points)
      out << method_name(method) << ',' << fmt(snr) << ',' << fmt(p.p_fa) << ',' << fmt(p.p_d) << '\n';
  }
  write_text_atomically(path, out.str());
}

void write_auc_csv(std::span<const TrialReport> reports, const std::string& path) {
  std::ostringstream out;
  out << "method,snr_db,auc\n";
  for (const auto& [method, snr] : method_snr_pairs(reports)) {
    if (!has_both_classes(reports, method, snr)) continue;
    out << method_name(method) << ',' << fmt(snr) << ',' << fmt(pooled_roc(reports, method, snr).auc) << '\n';
  }
  write_text_atomically(path, out.str());
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opts) {
  cfg.validate();
  const fs::path out_dir(cfg.output_dir);
  std::error_code ec;
  fs::create_directories(out_dir / "cells", ec);
  if (ec) throw Error("cannot create output directory '" + out_dir.string() + "': " + ec.message());

  const std::string hash = config_hash(cfg);
  ExperimentResult result;
  nlohmann::json cells = nlohmann::json::array();
  for (double rate : cfg.sensing_rates)
    for (double snr : cfg.snr_db) {
      ++result.cells_total;
      const std::string id = cell_id(rate, snr);
      const fs::path cell_path = out_dir / "cells" / (id + ".json");
      cells.push_back({{"id", id}, {"sensing_rate", rate}, {"snr_db", snr_to_json(snr)},
                       {"measurements_per_sensor", measurements_for_rate(rate, cfg.scene.psd_length())}});
      if (result.interrupted) continue;
      std::optional<std::vector<TrialReport>> reports;
      if (opts.resume) reports = load_cell(cell_path, hash);
      if (reports) {
        ++result.cells_reused;
      } else {
        bool interrupted = false;
        reports = run_cell_snapshots(cfg, rate, snr, opts.interrupt, interrupted);
        if (interrupted) result.interrupted = true;
        nlohmann::json doc = {{"config_hash", hash}, {"cell", id}, {"complete", !interrupted}};
        doc["reports"] = nlohmann::json::array();
        for (const TrialReport& r : *reports) doc["reports"].push_back(report_to_json(r));
        write_text_atomically(cell_path, doc.dump(1) + "\n");
      }
      result.reports.insert(result.reports.end(), reports->begin(), reports->end());
    }

  if (!result.reports.empty()) {
    const std::string mse = (out_dir / "mse_time.csv").string();
    const std::string fail = (out_dir / "failrate.csv").string();
    const std::string rocp = (out_dir / "roc.csv").string();
    const std::string aucp = (out_dir / "auc.csv").string();
    // A figure run emits only the data its plot needs; a plain sweep emits all.
    const bool all = cfg.figure.empty();
    const bool fig3 = cfg.figure == "fig3", fig5 = cfg.figure == "fig5", fig6 = cfg.figure == "fig6";
    if (all || fig3) {
      write_mse_time_csv(result.reports, mse);
      result.files.push_back(mse);
    }
    if (all || fig5) {
      write_failrate_csv(result.reports, fail);
      result.files.push_back(fail);
    }
    if (all || fig6) {
      write_roc_csv(result.reports, rocp);
      write_auc_csv(result.reports, aucp);
      result.files.push_back(rocp);
      result.files.push_back(aucp);
    }
  }
  if (!cfg.figure.empty()) {
    const fs::path script = out_dir / (cfg.figure + ".gp");
    write_text_atomically(script, gnuplot_script(figure_from_name(cfg.figure)));
    result.files.push_back(script.string());
  }

  nlohmann::json manifest = {
      {"format", "psdmap-manifest/1"},
      {"version", "0.1.0"},
      {"config", experiment_config_to_json(cfg)},
      {"config_hash", hash},
      {"master_seed", cfg.seed},
      {"rng", "xoshiro256** seeded by splitmix64; child seeds by splitmix64 over (tag, ids)"},
      {"aggregation", "per-sensor means; fail-rate boxplots over per-snapshot fail fractions"},
      {"cells", cells},
      {"complete", !result.interrupted},
  };
  manifest["files"] = nlohmann::json::array();
  for (const auto& f : result.files) manifest["files"].push_back(fs::path(f).filename().string());
  const fs::path manifest_path = out_dir / "manifest.json";
  write_text_atomically(manifest_path, manifest.dump(2) + "\n");
  result.files.push_back(manifest_path.string());

  if (result.interrupted) throw Interrupted("run interrupted; completed cells were written to " + out_dir.string());
  return result;
}

}  // namespace psdmap
