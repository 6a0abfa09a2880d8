#include "psdmap/psdmap.h"

#include "psdmap/channel.hpp"
#include "psdmap/harness.hpp"
#include "psdmap/scene.hpp"

#include <cstring>
#include <fstream>
#include <string>

struct psdmap_config {
  psdmap::ExperimentConfig cfg;
};

struct psdmap_result {
  psdmap::ExperimentResult res;
};

struct psdmap_scene {
  psdmap::Scene scene;
};

struct psdmap_channel {
  psdmap::ChannelRealization channel;
};

namespace {

thread_local std::string g_error;
thread_local std::string g_field;
std::atomic<bool> g_interrupt{false};

int fail(int code, const std::string& message, const std::string& field = {}) {
  g_error = message;
  g_field = field;
  return code;
}

// Maps exceptions escaping the C++ core to status codes.
template <typename F>
int guarded(F&& body) {
  try {
    g_error.clear();
    g_field.clear();
    body();
    return PSDMAP_OK;
  } catch (const psdmap::ConfigError& e) {
    return fail(PSDMAP_ERR_CONFIG, e.what(), e.field());
  } catch (const psdmap::Interrupted& e) {
    return fail(PSDMAP_ERR_INTERRUPTED, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(PSDMAP_ERR_IO, e.what());
  } catch (const std::bad_alloc&) {
    return fail(PSDMAP_ERR_RUNTIME, "out of memory");
  } catch (const std::exception& e) {
    return fail(PSDMAP_ERR_RUNTIME, e.what());
  } catch (...) {
    return fail(PSDMAP_ERR_RUNTIME, "unknown error");
  }
}

#define REQUIRE_ARG(cond, name) \
  if (!(cond)) return fail(PSDMAP_ERR_INVALID_ARGUMENT, std::string("null or invalid argument: ") + (name))

std::ofstream open_out(const char* path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::filesystem::filesystem_error("cannot open for writing", path, std::make_error_code(std::errc::io_error));
  return out;
}

}  // namespace

extern "C" {

const char* psdmap_version(void) { return "0.1.0"; }
const char* psdmap_last_error(void) { return g_error.c_str(); }
const char* psdmap_last_error_field(void) { return g_field.c_str(); }

int psdmap_config_default(const char* scale, psdmap_config** out) {
  REQUIRE_ARG(scale && out, "scale/out");
  return guarded([&] { *out = new psdmap_config{psdmap::default_config(psdmap::scale_from_name(scale))}; });
}

int psdmap_config_for_figure(const char* figure, const char* scale, psdmap_config** out) {
  REQUIRE_ARG(figure && scale && out, "figure/scale/out");
  return guarded([&] {
    *out = new psdmap_config{
        psdmap::figure_config(psdmap::figure_from_name(figure), psdmap::scale_from_name(scale))};
  });
}

int psdmap_config_load(const char* path, psdmap_config** out) {
  REQUIRE_ARG(path && out, "path/out");
  return guarded([&] {
    *out = new psdmap_config{psdmap::load_experiment_config(path, psdmap::default_config(psdmap::Scale::desk))};
  });
}

int psdmap_config_parse(const char* json, psdmap_config** out) {
  REQUIRE_ARG(json && out, "json/out");
  return guarded([&] {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(json);
    } catch (const nlohmann::json::exception& e) {
      throw psdmap::ConfigError("config", std::string("invalid JSON: ") + e.what());
    }
    psdmap::ExperimentConfig base = psdmap::default_config(psdmap::Scale::desk);
    if (j.is_object() && j.contains("scale") && j.at("scale").is_string())
      base = psdmap::default_config(psdmap::scale_from_name(j.at("scale").get<std::string>()));
    *out = new psdmap_config{psdmap::experiment_config_from_json(j, base)};
  });
}

int psdmap_config_set_seed(psdmap_config* cfg, uint64_t seed) {
  REQUIRE_ARG(cfg, "cfg");
  cfg->cfg.seed = seed;
  return PSDMAP_OK;
}

int psdmap_config_set_output_dir(psdmap_config* cfg, const char* dir) {
  REQUIRE_ARG(cfg && dir && *dir, "cfg/dir");
  cfg->cfg.output_dir = dir;
  return PSDMAP_OK;
}

int psdmap_config_set_jobs(psdmap_config* cfg, size_t jobs) {
  REQUIRE_ARG(cfg && jobs > 0, "cfg/jobs");
  cfg->cfg.jobs = jobs;
  return PSDMAP_OK;
}

int psdmap_config_set_snapshots(psdmap_config* cfg, size_t snapshots) {
  REQUIRE_ARG(cfg && snapshots > 0, "cfg/snapshots");
  cfg->cfg.snapshots = snapshots;
  return PSDMAP_OK;
}

int psdmap_config_validate(const psdmap_config* cfg) {
  REQUIRE_ARG(cfg, "cfg");
  return guarded([&] { cfg->cfg.validate(); });
}

int psdmap_config_to_json(const psdmap_config* cfg, char* buf, size_t cap, size_t* needed) {
  REQUIRE_ARG(cfg && (buf || cap == 0), "cfg/buf");
  return guarded([&] {
    const std::string text = psdmap::experiment_config_to_json(cfg->cfg).dump(2);
    if (needed) *needed = text.size() + 1;
    if (cap > 0) {
      const size_t n = std::min(cap - 1, text.size());
      std::memcpy(buf, text.data(), n);
      buf[n] = '\0';
    }
  });
}

void psdmap_config_destroy(psdmap_config* cfg) { delete cfg; }

int psdmap_run(const psdmap_config* cfg, int resume, psdmap_result** out) {
  REQUIRE_ARG(cfg && out, "cfg/out");
  *out = nullptr;
  return guarded([&] {
    psdmap::RunOptions opts;
    opts.resume = resume != 0;
    opts.interrupt = &g_interrupt;
    *out = new psdmap_result{psdmap::run_experiment(cfg->cfg, opts)};
  });
}

void psdmap_request_interrupt(void) { g_interrupt.store(true); }
void psdmap_clear_interrupt(void) { g_interrupt.store(false); }

size_t psdmap_result_trial_count(const psdmap_result* res) { return res ? res->res.reports.size() : 0; }
size_t psdmap_result_cells_total(const psdmap_result* res) { return res ? res->res.cells_total : 0; }
size_t psdmap_result_cells_reused(const psdmap_result* res) { return res ? res->res.cells_reused : 0; }
size_t psdmap_result_file_count(const psdmap_result* res) { return res ? res->res.files.size() : 0; }

const char* psdmap_result_file(const psdmap_result* res, size_t index) {
  if (!res || index >= res->res.files.size()) return nullptr;
  return res->res.files[index].c_str();
}

int psdmap_result_fail_fraction(const psdmap_result* res, const char* method, double* out) {
  REQUIRE_ARG(res && method && out, "res/method/out");
  return guarded([&] {
    const psdmap::Method m = psdmap::method_from_name(method);
    const auto summary = psdmap::fail_rate(res->res.reports);
    const auto it = summary.find(m);
    if (it == summary.end()) throw psdmap::Error(std::string("no reports for method ") + method);
    *out = it->second.fail_fraction;
  });
}

int psdmap_result_auc(const psdmap_result* res, const char* method, double snr_db, double* out) {
  REQUIRE_ARG(res && method && out, "res/method/out");
  return guarded([&] {
    *out = psdmap::pooled_roc(res->res.reports, psdmap::method_from_name(method), snr_db).auc;
  });
}

void psdmap_result_destroy(psdmap_result* res) { delete res; }

int psdmap_scene_generate(const psdmap_config* cfg, uint64_t seed, psdmap_scene** out) {
  REQUIRE_ARG(cfg && out, "cfg/out");
  return guarded([&] {
    psdmap::SceneConfig sc = cfg->cfg.scene;
    sc.seed = seed;
    *out = new psdmap_scene{psdmap::generate_scene(sc)};
  });
}

int psdmap_scene_load(const char* path, psdmap_scene** out) {
  REQUIRE_ARG(path && out, "path/out");
  std::ifstream in(path);
  if (!in) return fail(PSDMAP_ERR_IO, std::string("cannot open '") + path + "'");
  return guarded([&] {
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw psdmap::ConfigError("scene", std::string("invalid JSON: ") + e.what());
    }
    *out = new psdmap_scene{psdmap::scene_from_json(j)};
  });
}

int psdmap_scene_save(const psdmap_scene* scene, const char* path) {
  REQUIRE_ARG(scene && path, "scene/path");
  return guarded([&] { open_out(path) << psdmap::scene_to_json(scene->scene).dump(2) << '\n'; });
}

int psdmap_scene_write_occupancy_csv(const psdmap_scene* scene, const char* path) {
  REQUIRE_ARG(scene && path, "scene/path");
  return guarded([&] {
    auto out = open_out(path);
    psdmap::write_occupancy_csv(scene->scene, out);
  });
}

size_t psdmap_scene_sensor_count(const psdmap_scene* scene) { return scene ? scene->scene.sensors.size() : 0; }
size_t psdmap_scene_psd_length(const psdmap_scene* scene) { return scene ? scene->scene.config.psd_length() : 0; }

int psdmap_scene_psd(const psdmap_scene* scene, size_t sensor, double* out, size_t len) {
  REQUIRE_ARG(scene && out, "scene/out");
  REQUIRE_ARG(sensor < scene->scene.sensors.size(), "sensor");
  REQUIRE_ARG(len >= scene->scene.config.psd_length(), "len");
  return guarded([&] {
    const psdmap::Vector psd = psdmap::ground_truth_psd(scene->scene, sensor);
    std::memcpy(out, psd.data(), sizeof(double) * static_cast<size_t>(psd.size()));
  });
}

void psdmap_scene_destroy(psdmap_scene* scene) { delete scene; }

int psdmap_channel_realize(const psdmap_config* cfg, const psdmap_scene* scene, size_t measurements,
                           psdmap_channel** out) {
  REQUIRE_ARG(cfg && scene && out && measurements > 0, "cfg/scene/out/measurements");
  return guarded([&] {
    const std::vector<std::size_t> lengths(scene->scene.sensors.size(), measurements);
    *out = new psdmap_channel{psdmap::realize_channel(scene->scene, cfg->cfg.channel, lengths)};
  });
}

int psdmap_channel_save(const psdmap_channel* ch, const char* path) {
  REQUIRE_ARG(ch && path, "channel/path");
  return guarded([&] { open_out(path) << psdmap::channel_to_json(ch->channel).dump(2) << '\n'; });
}

int psdmap_channel_write_gains_csv(const psdmap_channel* ch, const char* path) {
  REQUIRE_ARG(ch && path, "channel/path");
  return guarded([&] {
    auto out = open_out(path);
    psdmap::write_path_gain_csv(ch->channel, out);
  });
}

void psdmap_channel_destroy(psdmap_channel* ch) { delete ch; }

}  // extern "C"
