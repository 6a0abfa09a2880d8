#pragma once

// Synthetic radio environment: primary users on a square grid, a uniform
// sensor lattice, ground-truth PSDs and groups of neighbouring sensors.

#include "psdmap/numcore.hpp"

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace psdmap {

struct SceneConfig {
  std::size_t grid_side = 122;
  std::size_t sensors_per_side = 12;
  std::size_t subbands = 32;
  std::size_t samples_per_subband = 8;
  std::size_t max_pus_per_subband = 50;
  /// Probability that a subband carries any primary user in a snapshot.
  double occupancy_probability = 0.5;
  double pu_power_max = 1.0;
  double pathloss_exponent = 2.0;
  std::size_t group_size = 4;
  std::size_t holding_snapshots = 1;
  std::uint64_t seed = 1;

  std::size_t psd_length() const noexcept { return subbands * samples_per_subband; }
  std::size_t sensor_count() const noexcept { return sensors_per_side * sensors_per_side; }
  /// Throws ConfigError naming the first invalid field.
  void validate() const;
};

struct GridPoint {
  int x = 0;
  int y = 0;
  friend bool operator==(const GridPoint&, const GridPoint&) = default;
};

struct PrimaryUser {
  GridPoint position;
  double power = 0.0;
  friend bool operator==(const PrimaryUser&, const PrimaryUser&) = default;
};

struct Scene {
  SceneConfig config;
  /// Active primary users, one list per subband (empty list = vacant subband).
  std::vector<std::vector<PrimaryUser>> pus_by_subband;
  /// Row-major sensor lattice: sensor index = row * M + col.
  std::vector<GridPoint> sensors;
  double fc_x = 0.0;
  double fc_y = 0.0;

  bool subband_occupied(std::size_t subband) const { return !pus_by_subband.at(subband).empty(); }
  double sensor_distance_to_fc(std::size_t sensor) const;
};

struct GroupOfSensors {
  std::size_t id = 0;
  std::vector<std::size_t> sensors;
};

/// Common/innovation split of a group's PSDs.
struct CommonSplit {
  Vector common;
  std::vector<Vector> innovations;
};

Scene generate_scene(const SceneConfig& cfg);

/// Piecewise-constant PSD seen by one sensor: each subband level is
/// sum_u p_u * (1 + d_u)^(-alpha).
Vector ground_truth_psd(const Scene& scene, std::size_t sensor_index);

/// 2x2 lattice blocks for J = 4 (row-major block order); consecutive
/// row-major runs of J sensors otherwise.
std::vector<GroupOfSensors> partition_groups(const SceneConfig& cfg);

/// Diagnostic split: element-wise minimum as the common part.
CommonSplit group_common_truth(const Scene& scene, const GroupOfSensors& group);

/// 0/1 occupancy labels per subband.
std::vector<int> occupancy_labels(const Scene& scene);

nlohmann::json scene_to_json(const Scene& scene);
Scene scene_from_json(const nlohmann::json& j);
nlohmann::json scene_config_to_json(const SceneConfig& cfg);
/// Missing keys keep their defaults.
SceneConfig scene_config_from_json(const nlohmann::json& j);

/// CSV with one row per sensor and one 0/1 column per subband.
void write_occupancy_csv(const Scene& scene, std::ostream& out);

}  // namespace psdmap
