#pragma once

// Imperfect sensor-to-fusion-center reporting channel: a short destructive
// filter applied by circular convolution, plus additive white Gaussian noise.

#include "psdmap/numcore.hpp"
#include "psdmap/scene.hpp"

#include <json.hpp>

#include <iosfwd>
#include <limits>
#include <span>
#include <vector>

namespace psdmap {

struct ChannelConfig {
  /// false models a perfect channel: unit-impulse filters everywhere.
  bool multipath = true;
  /// Tap gains seen by a sensor at the fusion center.
  std::vector<double> path_gains_max{1.0, 0.9, 0.8};
  std::vector<std::size_t> tap_offsets{0, 1, 2};
  /// Fraction of the maximum gains left at the farthest sensor.
  double gain_floor = 0.1;
  double snr_db = std::numeric_limits<double>::infinity();
  std::uint64_t seed = 2;

  void validate() const;
};

struct DestructiveFilter {
  std::size_t sensor = 0;
  Vector taps;
};

struct ChannelRealization {
  std::vector<DestructiveFilter> filters;
  /// Normalized distance of each sensor to the fusion center, in [0, 1].
  std::vector<double> normalized_distance;
  std::vector<std::vector<double>> path_gains;
  std::vector<std::size_t> tap_offsets;
};

/// Builds every sensor's filter. Gains fall linearly with the sensor's
/// distance to the fusion center, from path_gains_max down to
/// gain_floor * path_gains_max at the farthest sensor.
ChannelRealization realize_channel(const Scene& scene, const ChannelConfig& cfg,
                                   std::span<const std::size_t> measurement_lengths);

/// Noise variance that yields snr_db for the given noiseless received vector.
/// Zero for infinite SNR.
double noise_variance_for(const Vector& clean, double snr_db);

/// r = y (*) beta + n with n ~ N(0, sigma^2 I) at the requested SNR.
Vector transmit(const Vector& y, const DestructiveFilter& filter, double snr_db, SeededRng& rng);

/// Transport of the known common-part measurement; same law as transmit.
Vector transmit_pilot(const Vector& pilot, const DestructiveFilter& filter, double snr_db, SeededRng& rng);

nlohmann::json channel_to_json(const ChannelRealization& ch);
nlohmann::json channel_config_to_json(const ChannelConfig& cfg);
ChannelConfig channel_config_from_json(const nlohmann::json& j);

/// One row per sensor: sensor, normalized distance, then one gain column per path.
void write_path_gain_csv(const ChannelRealization& ch, std::ostream& out);

}  // namespace psdmap
