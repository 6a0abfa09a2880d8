// psdmap command line front end. Talks to the library only through psdmap.h.

#include "psdmap/psdmap.h"

#include <CLI11.hpp>

#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <optional>
#include <string>

namespace {

int exit_code(int status) {
  switch (status) {
    case PSDMAP_OK: return 0;
    case PSDMAP_ERR_INVALID_ARGUMENT:
    case PSDMAP_ERR_CONFIG: return 2;
    case PSDMAP_ERR_IO: return 4;
    case PSDMAP_ERR_INTERRUPTED: return 130;
    default: return 3;
  }
}

int report(int status, const char* what) {
  if (status == PSDMAP_OK) return 0;
  const std::string field = psdmap_last_error_field();
  std::fprintf(stderr, "psdmap: %s failed: %s%s%s\n", what, psdmap_last_error(),
               field.empty() ? "" : " [field: ", field.empty() ? "" : (field + "]").c_str());
  return exit_code(status);
}

void on_sigint(int) { psdmap_request_interrupt(); }

struct RunFlags {
  std::string scale = "desk";
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<std::size_t> jobs;
  std::optional<std::size_t> snapshots;
  bool fresh = false;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("--seed", f.seed, "Master seed");
  cmd->add_option("--out", f.out, "Output directory (overrides PSDMAP_OUTPUT_DIR and the config)");
  cmd->add_option("--jobs", f.jobs, "Worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--snapshots", f.snapshots, "Monte Carlo snapshots per cell")->check(CLI::PositiveNumber);
  cmd->add_flag("--fresh", f.fresh, "Ignore finished cells from an earlier run");
}

int apply_flags(psdmap_config* cfg, const RunFlags& f) {
  int st = PSDMAP_OK;
  if (f.seed) st = psdmap_config_set_seed(cfg, *f.seed);
  std::string out = f.out;
  if (out.empty())
    if (const char* env = std::getenv("PSDMAP_OUTPUT_DIR"); env && *env) out = env;
  if (st == PSDMAP_OK && !out.empty()) st = psdmap_config_set_output_dir(cfg, out.c_str());
  if (st == PSDMAP_OK && f.jobs) st = psdmap_config_set_jobs(cfg, *f.jobs);
  if (st == PSDMAP_OK && f.snapshots) st = psdmap_config_set_snapshots(cfg, *f.snapshots);
  return st;
}

int run_and_report(psdmap_config* cfg, const RunFlags& f) {
  if (int st = psdmap_config_validate(cfg); st != PSDMAP_OK) return report(st, "configuration check");
  std::signal(SIGINT, on_sigint);
  psdmap_result* res = nullptr;
  const int st = psdmap_run(cfg, f.fresh ? 0 : 1, &res);
  if (st != PSDMAP_OK) return report(st, "run");
  std::printf("cells: %zu (%zu reused), trials: %zu\n", psdmap_result_cells_total(res),
              psdmap_result_cells_reused(res), psdmap_result_trial_count(res));
  for (std::size_t i = 0; i < psdmap_result_file_count(res); ++i) std::printf("wrote %s\n", psdmap_result_file(res, i));
  psdmap_result_destroy(res);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"psdmap: cooperative PSD map reconstruction from compressive sensor reports"};
  app.set_version_flag("--version", psdmap_version());
  app.require_subcommand(1);

  RunFlags sim_flags;
  std::string sim_config;
  auto* sim = app.add_subcommand("simulate", "Run the sweep described by a JSON configuration");
  sim->add_option("--config", sim_config, "Configuration file")->required()->check(CLI::ExistingFile);
  add_run_flags(sim, sim_flags);

  RunFlags fig_flags;
  std::string fig_id;
  auto* fig = app.add_subcommand("figure", "Reproduce one figure (fig3, fig5, fig6)");
  fig->add_option("id", fig_id, "Figure id")->required()->check(CLI::IsMember({"fig3", "fig5", "fig6"}));
  fig->add_option("--scale", fig_flags.scale, "desk or paper")->check(CLI::IsMember({"desk", "paper"}));
  add_run_flags(fig, fig_flags);

  std::string check_path;
  auto* check = app.add_subcommand("validate-config", "Check a configuration file and print the resolved values");
  check->add_option("path", check_path, "Configuration file")->required();

  std::string scene_config;
  std::string scene_out;
  std::uint64_t scene_seed = 1;
  std::size_t channel_w = 0;
  auto* scene = app.add_subcommand("export-scene", "Write a scene, its occupancy labels and channel gains");
  scene->add_option("--config", scene_config, "Configuration file (default: desk defaults)");
  scene->add_option("--seed", scene_seed, "Scene seed");
  scene->add_option("--out", scene_out, "Output file prefix")->required();
  scene->add_option("--measurements", channel_w, "Per-sensor sample count for the channel export (0: none)");

  CLI11_PARSE(app, argc, argv);

  if (*sim || *fig) {
    psdmap_config* cfg = nullptr;
    const RunFlags& flags = *sim ? sim_flags : fig_flags;
    const int st = *sim ? psdmap_config_load(sim_config.c_str(), &cfg)
                        : psdmap_config_for_figure(fig_id.c_str(), fig_flags.scale.c_str(), &cfg);
    if (st != PSDMAP_OK) return report(st, "loading configuration");
    int rc = report(apply_flags(cfg, flags), "applying options");
    if (rc == 0) rc = run_and_report(cfg, flags);
    psdmap_config_destroy(cfg);
    return rc;
  }

  if (*check) {
    psdmap_config* cfg = nullptr;
    int st = psdmap_config_load(check_path.c_str(), &cfg);
    if (st == PSDMAP_OK) st = psdmap_config_validate(cfg);
    if (st != PSDMAP_OK) {
      psdmap_config_destroy(cfg);
      return report(st, "validate-config");
    }
    std::size_t needed = 0;
    psdmap_config_to_json(cfg, nullptr, 0, &needed);
    std::string text(needed, '\0');
    psdmap_config_to_json(cfg, text.data(), text.size(), &needed);
    std::printf("%s\nok\n", text.c_str());
    psdmap_config_destroy(cfg);
    return 0;
  }

  psdmap_config* cfg = nullptr;
  int st = scene_config.empty() ? psdmap_config_default("desk", &cfg) : psdmap_config_load(scene_config.c_str(), &cfg);
  if (st != PSDMAP_OK) return report(st, "loading configuration");
  psdmap_scene* sc = nullptr;
  st = psdmap_scene_generate(cfg, scene_seed, &sc);
  if (st == PSDMAP_OK) st = psdmap_scene_save(sc, (scene_out + "_scene.json").c_str());
  if (st == PSDMAP_OK) st = psdmap_scene_write_occupancy_csv(sc, (scene_out + "_occupancy.csv").c_str());
  if (st == PSDMAP_OK && channel_w > 0) {
    psdmap_channel* ch = nullptr;
    st = psdmap_channel_realize(cfg, sc, channel_w, &ch);
    if (st == PSDMAP_OK) st = psdmap_channel_save(ch, (scene_out + "_channel.json").c_str());
    if (st == PSDMAP_OK) st = psdmap_channel_write_gains_csv(ch, (scene_out + "_gains.csv").c_str());
    psdmap_channel_destroy(ch);
  }
  psdmap_scene_destroy(sc);
  psdmap_config_destroy(cfg);
  return report(st, "export-scene");
}
