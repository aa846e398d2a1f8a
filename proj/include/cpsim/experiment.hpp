#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cpsim/age.hpp"
#include "cpsim/calib.hpp"
#include "cpsim/channel.hpp"
#include "cpsim/fusion.hpp"
#include "cpsim/scenario.hpp"

// Seeded trials that tie the modules together: a camera fleet watching a
// generated scene, calibrated, streamed and scored.
namespace cpsim::experiment {

using calib::CameraModel;
using calib::Vec3;

struct CameraSpec {
  Vec3 position = Vec3::Zero();
  Vec3 look_at = Vec3::UnitX();
  calib::Intrinsics intrinsics{1400.0, 1400.0, 960.0, 540.0};
  int image_width_px = 1920;
  int image_height_px = 1080;

  bool operator==(const CameraSpec&) const = default;
};

// Seven cameras around the 12 m x 36 m arena, about 3 m up.
std::vector<CameraSpec> default_camera_specs();
std::vector<CameraModel> build_fleet(std::span<const CameraSpec> specs);

struct SceneConfig {
  scenario::ArrivalModel arrivals{1.0, std::log(30.0), 0.3};
  scenario::Arena arena;
  scenario::MotionModel motion;
  scenario::DescriptorModel descriptors;
  double duration_s = 60.0;
  double time_step_s = 0.5;

  void validate() const;
  bool operator==(const SceneConfig&) const = default;
};

scenario::ScenarioTrace make_scene(const SceneConfig& cfg, std::uint64_t seed);

// Per-camera visible-count series g_k(t) at every trace step.
std::vector<std::vector<int>> visible_counts(const scenario::ScenarioTrace& trace,
                                             std::span<const CameraModel> fleet);

struct CalibrationTrialConfig {
  int frames = 10;
  int frame_stride = 4;
  int start_step = 0;
  // Independent calibrations per camera, each starting where the previous
  // one's frames end.
  int epochs = 3;
  double pixel_noise_px = 2.0;
  calib::CalibrationOptions options;
  // Pose drift after calibration; the estimate is scored against the
  // drifting truth averaged over one calibration interval.
  double drift_rate_deg_per_s = 0.0;
  double drift_speed_m_per_s = 0.0;
  double calibration_interval_s = 0.0;

  void validate() const;
};

struct CameraCalibration {
  std::size_t camera = 0;
  int epoch = 0;
  std::size_t reference = 0;
  bool ok = false;
  std::string error;  // error code when !ok
  calib::CalibrationReport report;
};

struct CalibrationTrialResult {
  std::vector<CameraCalibration> cameras;
  double mean_rotation_error_deg = 0.0;
  double mean_translation_error_m = 0.0;
  double mean_extrinsic_error_pct = 0.0;
  double mean_cost_bits = 0.0;
  double mean_quantization_bits = 0.0;
  std::size_t failures = 0;
};

// Recalibrates every camera in turn against the best-matching other camera.
// Seeded streams are shared across budgets and top_n so sweeps see common
// random numbers.
CalibrationTrialResult run_calibration_trial(const scenario::ScenarioTrace& trace,
                                             std::span<const CameraModel> fleet,
                                             const CalibrationTrialConfig& cfg,
                                             std::uint64_t seed);

enum class MaskPolicy { kNone, kPriority, kRandom };
std::string to_string(MaskPolicy policy);
MaskPolicy mask_policy_from_string(const std::string& text);

struct FusionTrialConfig {
  fusion::FeatureOptions features;
  double rate_bits = 18.69 * 8192.0;
  double peak_threshold = 0.5;
  double min_separation_m = 0.5;
  double match_radius_m = 0.5;
  int frames = 10;
  int frame_stride = 4;
  int start_step = 0;
  double loss_rate = 0.0;
  MaskPolicy policy = MaskPolicy::kPriority;
  double loss_alpha = 1.0;

  void validate() const;
};

struct FusionTrialResult {
  fusion::ModaReport moda;
  double mean_loss_penalty = 0.0;
  double comm_cost_bits = 0.0;  // per frame, unmasked streams only
};

using FrameSink = std::function<void(int step, const fusion::OccupancyMap& map,
                                     std::span<const fusion::Detection> detections)>;

// `subset` selects camera indices into fleet/warps; empty means all.
// `on_frame`, when set, sees every fused map and its detections.
FusionTrialResult run_fusion_trial(const scenario::ScenarioTrace& trace,
                                   std::span<const CameraModel> fleet,
                                   std::span<const fusion::GroundWarp> warps,
                                   std::span<const std::size_t> subset,
                                   const FusionTrialConfig& cfg, std::uint64_t seed,
                                   const FrameSink& on_frame = {});

std::vector<fusion::GroundWarp> build_warps(std::span<const CameraModel> fleet,
                                            const scenario::Arena& arena, int stride_px);

struct AgeTrialConfig {
  age::CycleConfig cycle;
  double sampling_interval_s = 0.5;
  double packet_bits = 18.69 * 8192.0;
  // Bottleneck capacity shared by every camera.
  double capacity_bps = 100.0 * 8192.0;
  double inference_delay_s = 0.073;

  void validate() const;
};

struct AgeTrialResult {
  double mean_aopt_streaming = 0.0;
  double mean_aopt_calibration = 0.0;
  double mean_aopt_cycle = 0.0;
  double max_aopt_cycle = 0.0;
  double total_delay_s = 0.0;
  double idle_fraction = 0.0;  // fraction of steps with every agent filtered
};

// Time-averaged AoPT over the trace steps using each camera's visible count.
// The sampling interval is raised to D / C when the link cannot keep up.
// `per_step`, when given, receives the report at every step.
AgeTrialResult run_age_trial(const scenario::ScenarioTrace& trace,
                             std::span<const CameraModel> fleet, std::span<const std::size_t> subset,
                             const AgeTrialConfig& cfg,
                             std::vector<age::AoptReport>* per_step = nullptr);

// Parses "0+1+2" style camera subsets.
std::vector<std::size_t> parse_subset(const std::string& text, std::size_t fleet_size);

}  // namespace cpsim::experiment
