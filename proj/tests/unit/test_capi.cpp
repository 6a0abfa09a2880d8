#include "psdmap/psdmap.h"

#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const char* base = std::getenv("PSDMAP_TEST_TMP");
  const fs::path dir = (base && *base ? fs::path(base) : fs::temp_directory_path() / "psdmap_capi") / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("version and error state") {
  CHECK(std::string(psdmap_version()) == "0.1.0");
  psdmap_config* cfg = nullptr;
  CHECK(psdmap_config_default(nullptr, &cfg) == PSDMAP_ERR_INVALID_ARGUMENT);
  CHECK(std::string(psdmap_last_error()).find("scale") != std::string::npos);
  CHECK(psdmap_config_default("galactic", &cfg) == PSDMAP_ERR_CONFIG);
  CHECK(std::string(psdmap_last_error_field()) == "scale");
  CHECK(psdmap_config_for_figure("fig9", "desk", &cfg) == PSDMAP_ERR_CONFIG);
  CHECK(std::string(psdmap_last_error_field()) == "figure");
}

TEST_CASE("config parse, edit, validate and serialize") {
  psdmap_config* cfg = nullptr;
  REQUIRE(psdmap_config_parse(R"({"seed": 9, "snapshots": 3})", &cfg) == PSDMAP_OK);
  CHECK(psdmap_config_validate(cfg) == PSDMAP_OK);
  CHECK(psdmap_config_set_jobs(cfg, 0) == PSDMAP_ERR_INVALID_ARGUMENT);
  CHECK(psdmap_config_set_seed(cfg, 77) == PSDMAP_OK);

  size_t needed = 0;
  REQUIRE(psdmap_config_to_json(cfg, nullptr, 0, &needed) == PSDMAP_OK);
  REQUIRE(needed > 1);
  std::string text(needed, '\0');
  REQUIRE(psdmap_config_to_json(cfg, text.data(), text.size(), &needed) == PSDMAP_OK);
  CHECK(text.find("\"seed\": 77") != std::string::npos);
  CHECK(text.find("\"snapshots\": 3") != std::string::npos);

  // Truncation keeps the terminator.
  char small[8];
  CHECK(psdmap_config_to_json(cfg, small, sizeof small, &needed) == PSDMAP_OK);
  CHECK(std::string(small).size() == 7);
  psdmap_config_destroy(cfg);

  cfg = nullptr;
  CHECK(psdmap_config_parse(R"({"sweep": {"sensing_rates": []}})", &cfg) == PSDMAP_OK);
  CHECK(psdmap_config_validate(cfg) == PSDMAP_ERR_CONFIG);
  CHECK(std::string(psdmap_last_error_field()) == "sweep.sensing_rates");
  psdmap_config_destroy(cfg);

  cfg = nullptr;
  CHECK(psdmap_config_parse("{not json", &cfg) == PSDMAP_ERR_CONFIG);
  CHECK(psdmap_config_parse(R"({"unknown": true})", &cfg) == PSDMAP_ERR_CONFIG);
  CHECK(std::string(psdmap_last_error_field()) == "unknown");
  CHECK(psdmap_config_load("/nonexistent/config.json", &cfg) == PSDMAP_ERR_CONFIG);
}

TEST_CASE("scene and channel export") {
  const fs::path dir = scratch("scene");
  psdmap_config* cfg = nullptr;
  REQUIRE(psdmap_config_default("desk", &cfg) == PSDMAP_OK);
  psdmap_scene* scene = nullptr;
  REQUIRE(psdmap_scene_generate(cfg, 3, &scene) == PSDMAP_OK);
  CHECK(psdmap_scene_sensor_count(scene) == 16);
  const size_t n = psdmap_scene_psd_length(scene);
  CHECK(n == 64);

  std::vector<double> psd(n);
  CHECK(psdmap_scene_psd(scene, 0, psd.data(), psd.size()) == PSDMAP_OK);
  CHECK(psdmap_scene_psd(scene, 99, psd.data(), psd.size()) == PSDMAP_ERR_INVALID_ARGUMENT);
  CHECK(psdmap_scene_psd(scene, 0, psd.data(), 3) == PSDMAP_ERR_INVALID_ARGUMENT);

  const std::string scene_path = (dir / "scene.json").string();
  CHECK(psdmap_scene_save(scene, scene_path.c_str()) == PSDMAP_OK);
  CHECK(psdmap_scene_write_occupancy_csv(scene, (dir / "occ.csv").string().c_str()) == PSDMAP_OK);
  psdmap_scene* loaded = nullptr;
  REQUIRE(psdmap_scene_load(scene_path.c_str(), &loaded) == PSDMAP_OK);
  std::vector<double> again(n);
  CHECK(psdmap_scene_psd(loaded, 0, again.data(), again.size()) == PSDMAP_OK);
  CHECK(again == psd);
  psdmap_scene_destroy(loaded);
  CHECK(psdmap_scene_load((dir / "missing.json").string().c_str(), &loaded) == PSDMAP_ERR_IO);

  psdmap_channel* ch = nullptr;
  REQUIRE(psdmap_channel_realize(cfg, scene, 16, &ch) == PSDMAP_OK);
  CHECK(psdmap_channel_save(ch, (dir / "channel.json").string().c_str()) == PSDMAP_OK);
  CHECK(psdmap_channel_write_gains_csv(ch, (dir / "gains.csv").string().c_str()) == PSDMAP_OK);
  CHECK(psdmap_channel_write_gains_csv(ch, "/nonexistent/dir/gains.csv") == PSDMAP_ERR_IO);
  psdmap_channel_destroy(ch);
  CHECK(psdmap_channel_realize(cfg, scene, 2, &ch) == PSDMAP_ERR_RUNTIME);

  psdmap_scene_destroy(scene);
  psdmap_config_destroy(cfg);
}

TEST_CASE("run a tiny sweep") {
  const fs::path dir = scratch("run");
  psdmap_config* cfg = nullptr;
  REQUIRE(psdmap_config_parse(R"({"snapshots": 1, "methods": ["compensated", "uncompensated"],
                                  "sweep": {"sensing_rates": [0.5], "snr_db": [10]}})",
                              &cfg) == PSDMAP_OK);
  REQUIRE(psdmap_config_set_output_dir(cfg, dir.string().c_str()) == PSDMAP_OK);
  psdmap_result* res = nullptr;
  REQUIRE(psdmap_run(cfg, 0, &res) == PSDMAP_OK);
  CHECK(psdmap_result_cells_total(res) == 1);
  CHECK(psdmap_result_trial_count(res) == 2);
  CHECK(psdmap_result_file_count(res) >= 4);
  CHECK(psdmap_result_file(res, 1000) == nullptr);
  for (size_t i = 0; i < psdmap_result_file_count(res); ++i) CHECK(fs::exists(psdmap_result_file(res, i)));
  double fail = -1.0;
  CHECK(psdmap_result_fail_fraction(res, "compensated", &fail) == PSDMAP_OK);
  CHECK(fail >= 0.0);
  CHECK(fail <= 1.0);
  CHECK(psdmap_result_fail_fraction(res, "jsm", &fail) == PSDMAP_ERR_RUNTIME);
  double auc = -1.0;
  CHECK(psdmap_result_auc(res, "compensated", 10.0, &auc) == PSDMAP_OK);
  CHECK(auc >= 0.0);
  CHECK(auc <= 1.0);
  psdmap_result_destroy(res);

  res = nullptr;
  REQUIRE(psdmap_run(cfg, 1, &res) == PSDMAP_OK);
  CHECK(psdmap_result_cells_reused(res) == 1);
  psdmap_result_destroy(res);

  psdmap_request_interrupt();
  res = nullptr;
  CHECK(psdmap_run(cfg, 0, &res) == PSDMAP_ERR_INTERRUPTED);
  CHECK(res == nullptr);
  psdmap_clear_interrupt();
  psdmap_config_destroy(cfg);
}

TEST_CASE("null handles are rejected") {
  CHECK(psdmap_config_validate(nullptr) == PSDMAP_ERR_INVALID_ARGUMENT);
  CHECK(psdmap_run(nullptr, 0, nullptr) == PSDMAP_ERR_INVALID_ARGUMENT);
  CHECK(psdmap_result_trial_count(nullptr) == 0);
  CHECK(psdmap_scene_sensor_count(nullptr) == 0);
  psdmap_config_destroy(nullptr);
  psdmap_result_destroy(nullptr);
  psdmap_scene_destroy(nullptr);
  psdmap_channel_destroy(nullptr);
}
