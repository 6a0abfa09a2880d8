#include "psdmap/scene.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <unordered_set>

namespace psdmap {

void SceneConfig::validate() const {
  if (grid_side == 0) throw ConfigError("scene.grid_side", "must be positive");
  if (sensors_per_side == 0) throw ConfigError("scene.sensors_per_side", "must be positive");
  if (sensors_per_side > grid_side)
    throw ConfigError("scene.sensors_per_side", "sensor lattice does not fit the grid");
  if (subbands == 0) throw ConfigError("scene.subbands", "must be positive");
  if (samples_per_subband == 0) throw ConfigError("scene.samples_per_subband", "must be positive");
  if (max_pus_per_subband == 0) throw ConfigError("scene.max_pus_per_subband", "must be positive");
  if (max_pus_per_subband > grid_side * grid_side)
    throw ConfigError("scene.max_pus_per_subband", "exceeds the number of grid points");
  if (!(occupancy_probability >= 0.0 && occupancy_probability <= 1.0))
    throw ConfigError("scene.occupancy_probability", "must lie in [0, 1]");
  if (!(pu_power_max > 0.0) || !std::isfinite(pu_power_max))
    throw ConfigError("scene.pu_power_max", "must be positive and finite");
  if (!(pathloss_exponent >= 0.0) || !std::isfinite(pathloss_exponent))
    throw ConfigError("scene.pathloss_exponent", "must be non-negative and finite");
  if (group_size == 0 || sensor_count() % group_size != 0)
    throw ConfigError("scene.group_size", "must divide the sensor count M^2 = " +
                                              std::to_string(sensor_count()));
  if (group_size == 4 && sensors_per_side % 2 != 0)
    throw ConfigError("scene.group_size", "2x2 groups need an even sensors_per_side");
  if (holding_snapshots == 0) throw ConfigError("scene.holding_snapshots", "must be positive");
}

double Scene::sensor_distance_to_fc(std::size_t sensor) const {
  const GridPoint& p = sensors.at(sensor);
  return std::hypot(p.x - fc_x, p.y - fc_y);
}

namespace {

std::vector<GridPoint> sensor_lattice(const SceneConfig& cfg) {
  std::vector<GridPoint> out;
  out.reserve(cfg.sensor_count());
  const double spacing = static_cast<double>(cfg.grid_side) / static_cast<double>(cfg.sensors_per_side);
  for (std::size_t row = 0; row < cfg.sensors_per_side; ++row)
    for (std::size_t col = 0; col < cfg.sensors_per_side; ++col)
      out.push_back({static_cast<int>(std::floor((static_cast<double>(col) + 0.5) * spacing)),
                     static_cast<int>(std::floor((static_cast<double>(row) + 0.5) * spacing))});
  return out;
}

// Floyd's sampling of k distinct indices from [0, n), returned in draw order.
std::vector<std::uint64_t> distinct_indices(std::uint64_t n, std::uint64_t k, SeededRng& rng) {
  std::unordered_set<std::uint64_t> seen;
  std::vector<std::uint64_t> out;
  out.reserve(k);
  for (std::uint64_t j = n - k; j < n; ++j) {
    const std::uint64_t t = rng.uniform_index(j + 1);
    const std::uint64_t pick = seen.contains(t) ? j : t;
    seen.insert(pick);
    out.push_back(pick);
  }
  return out;
}

}  // namespace

Scene generate_scene(const SceneConfig& cfg) {
  cfg.validate();
  Scene scene;
  scene.config = cfg;
  scene.sensors = sensor_lattice(cfg);
  scene.fc_x = (static_cast<double>(cfg.grid_side) - 1.0) / 2.0;
  scene.fc_y = scene.fc_x;

  SeededRng rng(derive_seed(cfg.seed, {0x5CE4E}));
  const std::uint64_t points = static_cast<std::uint64_t>(cfg.grid_side) * cfg.grid_side;
  scene.pus_by_subband.resize(cfg.subbands);
  for (auto& pus : scene.pus_by_subband) {
    if (rng.uniform() >= cfg.occupancy_probability) continue;
    const std::uint64_t count = 1 + rng.uniform_index(cfg.max_pus_per_subband);
    for (std::uint64_t idx : distinct_indices(points, count, rng)) {
      PrimaryUser pu;
      pu.position = {static_cast<int>(idx % cfg.grid_side), static_cast<int>(idx / cfg.grid_side)};
      pu.power = cfg.pu_power_max * rng.uniform_open_closed();
      pus.push_back(pu);
    }
  }
  return scene;
}

Vector ground_truth_psd(const Scene& scene, std::size_t sensor_index) {
  if (sensor_index >= scene.sensors.size())
    throw Error("ground_truth_psd: sensor index " + std::to_string(sensor_index) + " out of range");
  const SceneConfig& cfg = scene.config;
  const GridPoint& at = scene.sensors[sensor_index];
  Vector psd = Vector::Zero(static_cast<Eigen::Index>(cfg.psd_length()));
  for (std::size_t b = 0; b < cfg.subbands; ++b) {
    double level = 0.0;
    for (const PrimaryUser& pu : scene.pus_by_subband[b]) {
      const double d = std::hypot(pu.position.x - at.x, pu.position.y - at.y);
      level += pu.power * std::pow(1.0 + d, -cfg.pathloss_exponent);
    }
    psd.segment(static_cast<Eigen::Index>(b * cfg.samples_per_subband),
                static_cast<Eigen::Index>(cfg.samples_per_subband))
        .setConstant(level);
  }
  return psd;
}

std::vector<GroupOfSensors> partition_groups(const SceneConfig& cfg) {
  const std::size_t m = cfg.sensors_per_side;
  const std::size_t j = cfg.group_size;
  if (j == 0 || (m * m) % j != 0)
    throw ConfigError("scene.group_size", "cannot partition " + std::to_string(m * m) +
                                              " sensors into groups of " + std::to_string(j));
  std::vector<GroupOfSensors> groups;
  if (j == 4) {
    if (m % 2 != 0) throw ConfigError("scene.group_size", "2x2 groups need an even sensors_per_side");
    for (std::size_t br = 0; br < m / 2; ++br)
      for (std::size_t bc = 0; bc < m / 2; ++bc) {
        GroupOfSensors g;
        g.id = groups.size();
        const std::size_t r0 = 2 * br;
        const std::size_t c0 = 2 * bc;
        g.sensors = {r0 * m + c0, r0 * m + c0 + 1, (r0 + 1) * m + c0, (r0 + 1) * m + c0 + 1};
        groups.push_back(std::move(g));
      }
    return groups;
  }
  for (std::size_t start = 0; start < m * m; start += j) {
    GroupOfSensors g;
    g.id = groups.size();
    for (std::size_t s = start; s < start + j; ++s) g.sensors.push_back(s);
    groups.push_back(std::move(g));
  }
  return groups;
}

CommonSplit group_common_truth(const Scene& scene, const GroupOfSensors& group) {
  std::vector<Vector> psds;
  for (std::size_t s : group.sensors) psds.push_back(ground_truth_psd(scene, s));
  CommonSplit split;
  if (psds.empty()) return split;
  split.common = psds.front();
  for (const Vector& p : psds) split.common = split.common.cwiseMin(p);
  for (const Vector& p : psds) split.innovations.push_back(p - split.common);
  return split;
}

std::vector<int> occupancy_labels(const Scene& scene) {
  std::vector<int> labels;
  for (const auto& pus : scene.pus_by_subband) labels.push_back(pus.empty() ? 0 : 1);
  return labels;
}

nlohmann::json scene_config_to_json(const SceneConfig& cfg) {
  return {{"grid_side", cfg.grid_side},
          {"sensors_per_side", cfg.sensors_per_side},
          {"subbands", cfg.subbands},
          {"samples_per_subband", cfg.samples_per_subband},
          {"max_pus_per_subband", cfg.max_pus_per_subband},
          {"occupancy_probability", cfg.occupancy_probability},
          {"pu_power_max", cfg.pu_power_max},
          {"pathloss_exponent", cfg.pathloss_exponent},
          {"group_size", cfg.group_size},
          {"holding_snapshots", cfg.holding_snapshots},
          {"seed", cfg.seed}};
}

namespace {

template <typename T>
void read_field(const nlohmann::json& j, const char* key, const char* qualified, T& into) {
  if (!j.contains(key)) return;
  try {
    into = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(qualified, std::string("wrong type (") + e.what() + ")");
  }
}

}  // namespace

SceneConfig scene_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("scene", "must be a JSON object");
  SceneConfig cfg;
  read_field(j, "grid_side", "scene.grid_side", cfg.grid_side);
  read_field(j, "sensors_per_side", "scene.sensors_per_side", cfg.sensors_per_side);
  read_field(j, "subbands", "scene.subbands", cfg.subbands);
  read_field(j, "samples_per_subband", "scene.samples_per_subband", cfg.samples_per_subband);
  read_field(j, "max_pus_per_subband", "scene.max_pus_per_subband", cfg.max_pus_per_subband);
  read_field(j, "occupancy_probability", "scene.occupancy_probability", cfg.occupancy_probability);
  read_field(j, "pu_power_max", "scene.pu_power_max", cfg.pu_power_max);
  read_field(j, "pathloss_exponent", "scene.pathloss_exponent", cfg.pathloss_exponent);
  read_field(j, "group_size", "scene.group_size", cfg.group_size);
  read_field(j, "holding_snapshots", "scene.holding_snapshots", cfg.holding_snapshots);
  read_field(j, "seed", "scene.seed", cfg.seed);
  return cfg;
}

nlohmann::json scene_to_json(const Scene& scene) {
  nlohmann::json subbands = nlohmann::json::array();
  for (std::size_t b = 0; b < scene.pus_by_subband.size(); ++b) {
    nlohmann::json pus = nlohmann::json::array();
    for (const PrimaryUser& pu : scene.pus_by_subband[b])
      pus.push_back({{"x", pu.position.x}, {"y", pu.position.y}, {"power", pu.power}});
    subbands.push_back({{"subband", b}, {"pus", std::move(pus)}});
  }
  nlohmann::json sensors = nlohmann::json::array();
  for (const GridPoint& p : scene.sensors) sensors.push_back({p.x, p.y});
  return {{"format", "psdmap-scene/1"},
          {"config", scene_config_to_json(scene.config)},
          {"fc", {scene.fc_x, scene.fc_y}},
          {"sensors", std::move(sensors)},
          {"subbands", std::move(subbands)}};
}

Scene scene_from_json(const nlohmann::json& j) {
  try {
    if (j.value("format", "") != "psdmap-scene/1") throw ConfigError("format", "expected psdmap-scene/1");
    Scene scene;
    scene.config = scene_config_from_json(j.at("config"));
    scene.config.validate();
    scene.fc_x = j.at("fc").at(0).get<double>();
    scene.fc_y = j.at("fc").at(1).get<double>();
    for (const auto& p : j.at("sensors")) scene.sensors.push_back({p.at(0).get<int>(), p.at(1).get<int>()});
    if (scene.sensors.size() != scene.config.sensor_count())
      throw ConfigError("sensors", "count does not match config");
    scene.pus_by_subband.resize(scene.config.subbands);
    for (const auto& entry : j.at("subbands")) {
      const auto b = entry.at("subband").get<std::size_t>();
      if (b >= scene.config.subbands) throw ConfigError("subbands", "subband index out of range");
      for (const auto& pu : entry.at("pus"))
        scene.pus_by_subband[b].push_back(
            {{pu.at("x").get<int>(), pu.at("y").get<int>()}, pu.at("power").get<double>()});
    }
    return scene;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("scene", std::string("malformed scene JSON: ") + e.what());
  }
}

void write_occupancy_csv(const Scene& scene, std::ostream& out) {
  out << "sensor";
  for (std::size_t b = 0; b < scene.config.subbands; ++b) out << ",subband_" << b;
  out << '\n';
  const auto labels = occupancy_labels(scene);
  for (std::size_t s = 0; s < scene.sensors.size(); ++s) {
    out << s;
    for (int label : labels) out << ',' << label;
    out << '\n';
  }
}

}  // namespace psdmap
