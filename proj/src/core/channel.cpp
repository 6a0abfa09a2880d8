#include "psdmap/channel.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace psdmap {

void ChannelConfig::validate() const {
  if (path_gains_max.empty()) throw ConfigError("channel.path_gains_max", "must not be empty");
  if (path_gains_max.size() != tap_offsets.size())
    throw ConfigError("channel.tap_offsets", "must have one offset per path gain");
  for (std::size_t p = 0; p < path_gains_max.size(); ++p) {
    if (!(path_gains_max[p] > 0.0) || !std::isfinite(path_gains_max[p]))
      throw ConfigError("channel.path_gains_max", "gains must be positive");
    if (p > 0 && path_gains_max[p] > path_gains_max[p - 1])
      throw ConfigError("channel.path_gains_max", "gains must be non-increasing");
    if (p > 0 && tap_offsets[p] <= tap_offsets[p - 1])
      throw ConfigError("channel.tap_offsets", "offsets must be strictly increasing");
  }
  if (!(gain_floor > 0.0 && gain_floor <= 1.0)) throw ConfigError("channel.gain_floor", "must lie in (0, 1]");
  if (std::isnan(snr_db) || snr_db == -std::numeric_limits<double>::infinity())
    throw ConfigError("channel.snr_db", "must be a number or +inf");
}

ChannelRealization realize_channel(const Scene& scene, const ChannelConfig& cfg,
                                   std::span<const std::size_t> measurement_lengths) {
  cfg.validate();
  const std::size_t sensors = scene.sensors.size();
  if (measurement_lengths.size() != sensors)
    throw Error("realize_channel: need one measurement length per sensor");
  const std::size_t max_offset = cfg.multipath ? cfg.tap_offsets.back() : 0;
  for (std::size_t s = 0; s < sensors; ++s)
    if (measurement_lengths[s] <= max_offset)
      throw Error("realize_channel: sensor " + std::to_string(s) + " has " +
                  std::to_string(measurement_lengths[s]) + " measurements, need more than tap offset " +
                  std::to_string(max_offset));

  ChannelRealization ch;
  ch.tap_offsets = cfg.multipath ? cfg.tap_offsets : std::vector<std::size_t>{0};
  double d_max = 0.0;
  for (std::size_t s = 0; s < sensors; ++s) d_max = std::max(d_max, scene.sensor_distance_to_fc(s));
  for (std::size_t s = 0; s < sensors; ++s) {
    const double d_hat = d_max > 0.0 ? scene.sensor_distance_to_fc(s) / d_max : 0.0;
    DestructiveFilter f;
    f.sensor = s;
    f.taps = Vector::Zero(static_cast<Eigen::Index>(measurement_lengths[s]));
    std::vector<double> gains;
    if (cfg.multipath) {
      const double factor = 1.0 - (1.0 - cfg.gain_floor) * d_hat;
      for (std::size_t p = 0; p < cfg.path_gains_max.size(); ++p) {
        gains.push_back(cfg.path_gains_max[p] * factor);
        f.taps(static_cast<Eigen::Index>(cfg.tap_offsets[p])) = gains.back();
      }
    } else {
      gains.push_back(1.0);
      f.taps(0) = 1.0;
    }
    ch.filters.push_back(std::move(f));
    ch.normalized_distance.push_back(d_hat);
    ch.path_gains.push_back(std::move(gains));
  }
  return ch;
}

double noise_variance_for(const Vector& clean, double snr_db) {
  if (snr_db == std::numeric_limits<double>::infinity()) return 0.0;
  const double power = clean.squaredNorm() / static_cast<double>(clean.size());
  if (power == 0.0) throw Error("transmit: zero-power signal cannot be scaled to a finite SNR");
  return power / std::pow(10.0, snr_db / 10.0);
}

Vector transmit(const Vector& y, const DestructiveFilter& filter, double snr_db, SeededRng& rng) {
  if (y.size() != filter.taps.size())
    throw Error("transmit: measurement length " + std::to_string(y.size()) + " does not match filter length " +
                std::to_string(filter.taps.size()));
  Vector r = circular_convolve(y, filter.taps);
  const double variance = noise_variance_for(r, snr_db);
  if (variance > 0.0) {
    const double sigma = std::sqrt(variance);
    for (Eigen::Index i = 0; i < r.size(); ++i) r(i) += sigma * rng.gaussian();
  }
  return r;
}

Vector transmit_pilot(const Vector& pilot, const DestructiveFilter& filter, double snr_db, SeededRng& rng) {
  return transmit(pilot, filter, snr_db, rng);
}

nlohmann::json channel_to_json(const ChannelRealization& ch) {
  nlohmann::json sensors = nlohmann::json::array();
  for (std::size_t s = 0; s < ch.filters.size(); ++s) {
    std::vector<double> taps(ch.filters[s].taps.data(), ch.filters[s].taps.data() + ch.filters[s].taps.size());
    sensors.push_back({{"sensor", ch.filters[s].sensor},
                       {"normalized_distance", ch.normalized_distance[s]},
                       {"path_gains", ch.path_gains[s]},
                       {"taps", taps}});
  }
  return {{"format", "psdmap-channel/1"}, {"tap_offsets", ch.tap_offsets}, {"sensors", std::move(sensors)}};
}

nlohmann::json channel_config_to_json(const ChannelConfig& cfg) {
  nlohmann::json snr = std::isinf(cfg.snr_db) ? nlohmann::json("inf") : nlohmann::json(cfg.snr_db);
  return {{"multipath", cfg.multipath},   {"path_gains_max", cfg.path_gains_max},
          {"tap_offsets", cfg.tap_offsets}, {"gain_floor", cfg.gain_floor},
          {"snr_db", snr},                 {"seed", cfg.seed}};
}

ChannelConfig channel_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("channel", "must be a JSON object");
  ChannelConfig cfg;
  try {
    if (j.contains("multipath")) cfg.multipath = j.at("multipath").get<bool>();
    if (j.contains("path_gains_max")) cfg.path_gains_max = j.at("path_gains_max").get<std::vector<double>>();
    if (j.contains("tap_offsets")) cfg.tap_offsets = j.at("tap_offsets").get<std::vector<std::size_t>>();
    if (j.contains("gain_floor")) cfg.gain_floor = j.at("gain_floor").get<double>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("snr_db")) {
      const auto& v = j.at("snr_db");
      if (v.is_string()) {
        if (v.get<std::string>() != "inf") throw ConfigError("channel.snr_db", "string value must be \"inf\"");
        cfg.snr_db = std::numeric_limits<double>::infinity();
      } else {
        cfg.snr_db = v.get<double>();
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("channel", std::string("wrong type (") + e.what() + ")");
  }
  return cfg;
}

void write_path_gain_csv(const ChannelRealization& ch, std::ostream& out) {
  std::size_t paths = 0;
  for (const auto& g : ch.path_gains) paths = std::max(paths, g.size());
  out << "sensor,normalized_distance";
  for (std::size_t p = 0; p < paths; ++p) out << ",gain_path" << (p + 1);
  out << '\n';
  for (std::size_t s = 0; s < ch.filters.size(); ++s) {
    out << ch.filters[s].sensor << ',' << ch.normalized_distance[s];
    for (std::size_t p = 0; p < paths; ++p) out << ',' << (p < ch.path_gains[s].size() ? ch.path_gains[s][p] : 0.0);
    out << '\n';
  }
}

}  // namespace psdmap
