#include "cpsim/channel.hpp"

#include <cmath>
#include <numbers>

#include "cpsim/error.hpp"

namespace cpsim::channel {

namespace {
constexpr double kSpeedOfLight = 299792458.0;
}

void LinkParams::validate() const {
  require(bandwidth_hz > 0.0, ErrorCode::kDomain, "bandwidth_hz", "must be positive");
  require(tx_power_w > 0.0, ErrorCode::kDomain, "tx_power_w", "must be positive");
  require(noise_psd_w_per_hz > 0.0, ErrorCode::kDomain, "noise_psd_w_per_hz",
          "must be positive");
  require(channel_gain >= 0.0, ErrorCode::kDomain, "channel_gain", "must be non-negative");
  require(inference_delay_s >= 0.0, ErrorCode::kDomain, "inference_delay_s",
          "must be non-negative");
}

double snr(const LinkParams& link) {
  require(link.bandwidth_hz > 0.0, ErrorCode::kDomain, "bandwidth_hz", "must be positive");
  require(link.noise_psd_w_per_hz > 0.0, ErrorCode::kDomain, "noise_psd_w_per_hz",
          "must be positive");
  return link.tx_power_w * link.channel_gain / (link.noise_psd_w_per_hz * link.bandwidth_hz);
}

double capacity(const LinkParams& link) {
  return link.bandwidth_hz * std::log2(1.0 + snr(link));
}

double transmission_delay(double packet_bits, const LinkParams& link) {
  require(packet_bits >= 0.0, ErrorCode::kDomain, "packet_bits", "must be non-negative");
  const double c = capacity(link);
  if (packet_bits == 0.0) return 0.0;
  if (c <= 0.0) {
    throw Error(ErrorCode::kUnreachableLink, "link has zero capacity", "channel_gain");
  }
  return packet_bits / c;
}

double total_delay(double packet_bits, const LinkParams& link) {
  return transmission_delay(packet_bits, link) + link.inference_delay_s;
}

void PathLossConfig::validate() const {
  require(carrier_freq_hz > 0.0, ErrorCode::kValidation, "carrier_freq_hz", "must be positive");
  require(path_loss_exponent >= 2.0, ErrorCode::kValidation, "path_loss_exponent",
          "must be >= 2");
  require(shadowing_sigma_db >= 0.0, ErrorCode::kValidation, "shadowing_sigma_db",
          "must be >= 0");
  require(reference_distance_m > 0.0, ErrorCode::kValidation, "reference_distance_m",
          "must be positive");
  require(interferer_density_per_100m2 >= 0.0, ErrorCode::kValidation,
          "interferer_density_per_100m2", "must be >= 0");
  require(interferer_power_w >= 0.0, ErrorCode::kValidation, "interferer_power_w",
          "must be >= 0");
  require(interferer_mean_distance_m > 0.0, ErrorCode::kValidation,
          "interferer_mean_distance_m", "must be positive");
  require(interference_band_hz > 0.0, ErrorCode::kValidation, "interference_band_hz",
          "must be positive");
}

double reference_gain(const PathLossConfig& cfg) {
  const double wavelength = kSpeedOfLight / cfg.carrier_freq_hz;
  const double r = wavelength / (4.0 * std::numbers::pi * cfg.reference_distance_m);
  return r * r;
}

double median_gain_at(double distance_m, const PathLossConfig& cfg) {
  const double d = std::max(distance_m, cfg.reference_distance_m);
  return reference_gain(cfg) * std::pow(d / cfg.reference_distance_m, -cfg.path_loss_exponent);
}

GainSample channel_gain_at(double distance_m, const PathLossConfig& cfg, Rng& rng) {
  GainSample out;
  out.clamped = distance_m < cfg.reference_distance_m;
  const double shadow_db = cfg.shadowing_sigma_db * rng.normal();
  out.gain = median_gain_at(distance_m, cfg) * std::pow(10.0, shadow_db / 10.0);
  return out;
}

double interference_psd(const PathLossConfig& cfg) {
  const double power = cfg.interferer_density_per_100m2 * cfg.interferer_power_w *
                       median_gain_at(cfg.interferer_mean_distance_m, cfg);
  return power / cfg.interference_band_hz;
}

LinkParams with_interference(LinkParams link, const PathLossConfig& cfg) {
  link.noise_psd_w_per_hz += interference_psd(cfg);
  return link;
}

std::vector<bool> realize_losses(std::size_t n_packets, const LossProcess& proc) {
  require(proc.packet_loss_rate >= 0.0 && proc.packet_loss_rate <= 1.0, ErrorCode::kDomain,
          "packet_loss_rate", "must lie in [0, 1]");
  Rng rng(proc.rng_seed);
  std::vector<bool> lost(n_packets);
  for (std::size_t i = 0; i < n_packets; ++i) lost[i] = rng.uniform() < proc.packet_loss_rate;
  return lost;
}

}  // namespace cpsim::channel
