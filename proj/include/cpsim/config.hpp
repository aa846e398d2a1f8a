#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "cpsim/channel.hpp"
#include "cpsim/experiment.hpp"
#include "cpsim/sched.hpp"

namespace cpsim {

inline constexpr int kSchemaVersion = 1;
inline constexpr double kBitsPerKB = 8192.0;

struct ChannelConfig {
  channel::LinkParams link;
  channel::PathLossConfig path_loss;
  double distance_m = 50.0;  // camera to access point
  double packet_loss_rate = 0.0;

  bool operator==(const ChannelConfig&) const = default;
};

struct AgeConfig {
  double calibration_prob = 0.1;
  double calibration_interval_s = 10.0;
  double count_threshold = 1.0;
  double sampling_interval_s = 0.5;
  double stream_packet_kb = 18.69;
  double capacity_kbps = 100.0;

  bool operator==(const AgeConfig&) const = default;
};

struct ProxyConfig {
  sched::AccuracyProxy calibration{sched::ProxyKind::kCalibration, 100.0, 4.0 * kBitsPerKB, 0.0};
  sched::AccuracyProxy streaming{sched::ProxyKind::kStreaming, 85.0, 6.0 * kBitsPerKB, 0.0};
  // NaN: floor plus a tenth of the range.
  double calibration_threshold = std::numeric_limits<double>::quiet_NaN();
  double streaming_threshold = std::numeric_limits<double>::quiet_NaN();
};

struct CalibrationConfig {
  int frames = 10;
  int frame_stride = 4;
  int start_step = 0;
  int epochs = 3;
  double pixel_noise_px = 2.0;
  double budget_kb = 30.0;
  int top_n = 5;
  int max_bits = scenario::kLosslessBits;
  double drift_rate_deg_per_s = 0.02;
  double drift_speed_m_per_s = 0.002;
  double calibration_interval_s = 0.0;

  bool operator==(const CalibrationConfig&) const = default;
};

struct FusionConfig {
  fusion::FeatureOptions features;  // proxy is taken from proxies.streaming
  double rate_kb = 18.69;
  double peak_threshold = 0.5;
  double min_separation_m = 0.5;
  double match_radius_m = 0.5;
  int frames = 10;
  int frame_stride = 4;
  int start_step = 0;
  double loss_rate = 0.0;
  experiment::MaskPolicy mask_policy = experiment::MaskPolicy::kPriority;
  double loss_alpha = 1.0;
  // Scales the streaming proxy's rate scale to model inter-frame entropy
  // savings; 1 leaves it unchanged.
  double temporal_rate_gain = 1.0;
};

enum class SweepAxis {
  kCapacity,
  kSamplingInterval,
  kCalibrationInterval,
  kBudget,
  kLossRate,
  kTopN,
  kFovSubset,
};

std::string to_string(SweepAxis axis);
SweepAxis sweep_axis_from_string(const std::string& text);

struct SweepSpec {
  std::string name;
  SweepAxis axis = SweepAxis::kBudget;
  std::vector<std::string> values;  // numbers, or camera subsets like "0+1+2"
  int repetitions = 1;
  // Budget axis only: "calibration", "streaming" or "latency".
  std::string target = "calibration";
  // Calibration-interval axis only: one error column pair per budget.
  std::vector<double> budgets_kb;

  void validate() const;
  bool operator==(const SweepSpec&) const = default;
};

struct RunConfig {
  int schema_version = kSchemaVersion;
  std::uint64_t master_seed = 1;
  int workers = 1;
  std::string output_dir = "out";
  experiment::SceneConfig scenario;
  ChannelConfig channel;
  std::vector<experiment::CameraSpec> cameras = experiment::default_camera_specs();
  AgeConfig age;
  sched::Bounds bounds;
  sched::GridSpec grid;
  ProxyConfig proxies;
  sched::LagrangeWeights weights{0.05, 0.01};
  CalibrationConfig calibration;
  FusionConfig fusion;
  std::vector<SweepSpec> sweeps;  // empty: every preset

  void validate() const;
};

// Throws Error(kParse) for malformed text and Error(kValidation) with a
// dotted field path for unknown keys or invalid values.
RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const RunConfig& cfg);
RunConfig load_config(const std::filesystem::path& path);
RunConfig parse_config(const std::string& text);
void save_config(const RunConfig& cfg, const std::filesystem::path& path);

// Derived trial settings.
experiment::CalibrationTrialConfig calibration_trial(const RunConfig& cfg);
experiment::FusionTrialConfig fusion_trial(const RunConfig& cfg);
experiment::AgeTrialConfig age_trial(const RunConfig& cfg);
sched::AccuracyProxy effective_streaming_proxy(const RunConfig& cfg);
// Link with the median path-loss gain at distance_m plus interference.
channel::LinkParams median_link(const RunConfig& cfg);
// Link with a shadowing draw from `seed`.
channel::LinkParams realized_link(const RunConfig& cfg, std::uint64_t seed);

}  // namespace cpsim
