#pragma once

#include <cstdint>
#include <vector>

#include "cpsim/random.hpp"

// Wireless link model: SNR, Shannon capacity, delays, log-distance path loss
// with log-normal shadowing, and i.i.d. packet loss. Gains are linear
// internally; dB appears only in configuration (shadowing sigma).
namespace cpsim::channel {

struct LinkParams {
  double bandwidth_hz = 2e6;
  double tx_power_w = 0.1;
  double noise_psd_w_per_hz = 4e-21;
  double channel_gain = 1.0;  // linear, >= 0
  double inference_delay_s = 0.073;

  void validate() const;
  bool operator==(const LinkParams&) const = default;
};

double snr(const LinkParams& link);

// B log2(1 + SNR), bits per second.
double capacity(const LinkParams& link);

// D / C. Zero-size packets take no time even on a dead link; anything larger
// on a zero-capacity link throws kUnreachableLink.
double transmission_delay(double packet_bits, const LinkParams& link);

// Transmission plus inference delay.
double total_delay(double packet_bits, const LinkParams& link);

struct PathLossConfig {
  double carrier_freq_hz = 2.4e9;
  double path_loss_exponent = 3.5;
  double shadowing_sigma_db = 8.0;
  double reference_distance_m = 1.0;
  double interferer_density_per_100m2 = 0.0;
  double interferer_power_w = 0.1;
  // Interferers are treated as sitting at this distance from the receiver.
  double interferer_mean_distance_m = 20.0;
  // Interference power is spread evenly over this band.
  double interference_band_hz = 2e6;

  void validate() const;
  bool operator==(const PathLossConfig&) const = default;
};

// Free-space gain (lambda / 4 pi d0)^2 at the reference distance.
double reference_gain(const PathLossConfig& cfg);

// Deterministic log-distance gain without shadowing.
double median_gain_at(double distance_m, const PathLossConfig& cfg);

struct GainSample {
  double gain = 0.0;
  // Set when the requested distance was below the reference distance and
  // was clamped up to it.
  bool clamped = false;
};

// Log-distance path loss times a log-normal shadowing draw. Always consumes
// exactly one normal variate so streams stay aligned when sigma is zero.
GainSample channel_gain_at(double distance_m, const PathLossConfig& cfg,
                           Rng& rng);

// Additive interference PSD: density * P_int * G(mean distance) / band.
double interference_psd(const PathLossConfig& cfg);

// Copy of `link` whose noise floor includes interference_psd(cfg).
LinkParams with_interference(LinkParams link, const PathLossConfig& cfg);

struct LossProcess {
  double packet_loss_rate = 0.0;
  std::uint64_t rng_seed = 0;
};

// true = packet lost. Bernoulli(rate) per packet, reproducible from the seed.
std::vector<bool> realize_losses(std::size_t n_packets, const LossProcess& proc);

}  // namespace cpsim::channel
