#include "cpsim/experiment.hpp"

#include <cmath>
#include <limits>

#include "cpsim/error.hpp"
#include "cpsim/textio.hpp"

namespace cpsim::experiment {

namespace {
constexpr std::uint64_t kObserveStream = 100;
constexpr std::uint64_t kDriftStream = 200;
constexpr std::uint64_t kMaskStream = 300;

std::vector<int> frame_steps(int start, int stride, int frames, int step_count,
                             const char* field) {
  require(frames >= 1, ErrorCode::kValidation, field, "frames must be >= 1");
  require(stride >= 1, ErrorCode::kValidation, field, "frame_stride must be >= 1");
  const int last = start + (frames - 1) * stride;
  require(start >= 0 && last < step_count, ErrorCode::kValidation, field,
          "frames run past the end of the trace (last step " + std::to_string(last) + ", trace has " +
              std::to_string(step_count) + ")");
  std::vector<int> steps;
  for (int i = 0; i < frames; ++i) steps.push_back(start + i * stride);
  return steps;
}

// Midpoint between typical same-identity and different-identity descriptor
// distances under lossless transmission.
double match_threshold(const scenario::DescriptorModel& m) {
  const double same = std::sqrt(2.0 * m.dim) * m.view_noise;
  const double diff =
      std::sqrt(2.0 * m.dim * (m.identity_spread * m.identity_spread + m.view_noise * m.view_noise));
  return 0.5 * (same + diff);
}
}  // namespace

std::vector<CameraSpec> default_camera_specs() {
  const auto cam = [](double x, double y, double z, double tx, double ty) {
    CameraSpec s;
    s.position = Vec3(x, y, z);
    s.look_at = Vec3(tx, ty, 0.0);
    return s;
  };
  return {
      cam(-1.0, 3.0, 3.0, 7.0, 7.0),    cam(13.0, 9.0, 3.0, 5.0, 13.0),
      cam(-1.0, 15.0, 3.0, 7.0, 19.0),  cam(13.0, 21.0, 3.0, 5.0, 25.0),
      cam(-1.0, 27.0, 3.0, 7.0, 30.0),  cam(13.0, 37.0, 3.0, 5.0, 31.0),
      cam(6.0, -2.0, 4.0, 6.0, 8.0),
  };
}

std::vector<CameraModel> build_fleet(std::span<const CameraSpec> specs) {
  std::vector<CameraModel> fleet;
  for (const auto& s : specs) {
    s.intrinsics.validate();
    fleet.push_back(
        calib::look_at(s.intrinsics, s.image_width_px, s.image_height_px, s.position, s.look_at));
  }
  return fleet;
}

void SceneConfig::validate() const {
  arrivals.validate();
  arena.validate();
  descriptors.validate();
  require(duration_s > 0.0, ErrorCode::kValidation, "scenario.duration_s", "must be > 0");
  require(time_step_s > 0.0 && time_step_s <= duration_s, ErrorCode::kValidation,
          "scenario.time_step_s", "must lie in (0, duration_s]");
  require(motion.walk_speed_m_per_s >= 0.0, ErrorCode::kValidation,
          "scenario.walk_speed_m_per_s", "must be >= 0");
}

scenario::ScenarioTrace make_scene(const SceneConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  return scenario::generate(cfg.arrivals, cfg.arena, cfg.duration_s, cfg.time_step_s, seed,
                            cfg.motion, cfg.descriptors);
}

std::vector<std::vector<int>> visible_counts(const scenario::ScenarioTrace& trace,
                                             std::span<const CameraModel> fleet) {
  std::vector<std::vector<int>> out(fleet.size(), std::vector<int>(trace.step_count(), 0));
  for (int step = 0; step < trace.step_count(); ++step) {
    for (std::size_t idx : trace.active_at_step(step)) {
      const auto p = *trace.tracks[idx].position_at_step(step);
      for (std::size_t k = 0; k < fleet.size(); ++k) {
        if (calib::visible_pixel(fleet[k], p)) ++out[k][step];
      }
    }
  }
  return out;
}

void CalibrationTrialConfig::validate() const {
  require(pixel_noise_px >= 0.0, ErrorCode::kValidation, "calibration.pixel_noise_px",
          "must be >= 0");
  require(options.top_n >= 1, ErrorCode::kValidation, "calibration.top_n", "must be >= 1");
  require(options.budget_bits > 0.0, ErrorCode::kValidation, "calibration.budget_bits",
          "must be > 0");
  require(drift_rate_deg_per_s >= 0.0, ErrorCode::kValidation,
          "calibration.drift_rate_deg_per_s", "must be >= 0");
  require(drift_speed_m_per_s >= 0.0, ErrorCode::kValidation, "calibration.drift_speed_m_per_s",
          "must be >= 0");
  require(calibration_interval_s >= 0.0, ErrorCode::kValidation,
          "calibration.calibration_interval_s", "must be >= 0");
}

CalibrationTrialResult run_calibration_trial(const scenario::ScenarioTrace& trace,
                                             std::span<const CameraModel> fleet,
                                             const CalibrationTrialConfig& cfg,
                                             std::uint64_t seed) {
  cfg.validate();
  require(fleet.size() >= 2, ErrorCode::kValidation, "cameras", "need at least two cameras");
  require(cfg.epochs >= 1, ErrorCode::kValidation, "calibration.epochs", "must be >= 1");
  const double threshold = match_threshold(trace.descriptors);
  CalibrationTrialResult result;
  std::size_t ok = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto steps =
        frame_steps(cfg.start_step + epoch * cfg.frames * cfg.frame_stride, cfg.frame_stride,
                    cfg.frames, trace.step_count(), "calibration.frames");
    const std::uint64_t epoch_seed = derive_seed(seed, static_cast<std::uint64_t>(epoch));
    std::vector<std::vector<calib::FrameObservation>> obs(fleet.size());
    for (std::size_t k = 0; k < fleet.size(); ++k) {
      Rng rng(derive_seed(epoch_seed, kObserveStream + k));
      for (int step : steps) {
        obs[k].push_back(calib::observe_frame(trace, fleet[k], step, cfg.pixel_noise_px, rng));
      }
    }
    for (std::size_t k = 0; k < fleet.size(); ++k) {
      CameraCalibration cc;
      cc.camera = k;
      cc.epoch = epoch;
      std::vector<std::vector<calib::FrameObservation>> candidates;
      std::vector<std::size_t> ids;
      for (std::size_t j = 0; j < fleet.size(); ++j) {
        if (j == k) continue;
        candidates.push_back(obs[j]);
        ids.push_back(j);
      }
      cc.reference = ids[calib::select_reference(candidates, obs[k], threshold)];
      try {
        const auto res = calib::calibrate(fleet[k].intrinsics, fleet[cc.reference],
                                          obs[cc.reference], obs[k], cfg.options,
                                          fleet[k].extrinsics);
        cc.report = res.report;
        if (cfg.calibration_interval_s > 0.0 &&
            (cfg.drift_rate_deg_per_s > 0.0 || cfg.drift_speed_m_per_s > 0.0)) {
          Rng rng(derive_seed(epoch_seed, kDriftStream + k));
          auto drift =
              calib::DriftModel::random(cfg.drift_rate_deg_per_s, cfg.drift_speed_m_per_s, rng);
          // Antithetic pair: the same drift and its reverse.
          const auto e1 = calib::interval_averaged_errors(res.extrinsics, fleet[k].extrinsics,
                                                          drift, cfg.calibration_interval_s);
          drift.axis = -drift.axis;
          drift.direction = -drift.direction;
          const auto e2 = calib::interval_averaged_errors(res.extrinsics, fleet[k].extrinsics,
                                                          drift, cfg.calibration_interval_s);
          cc.report.rotation_error_deg = 0.5 * (e1.rotation_error_deg + e2.rotation_error_deg);
          cc.report.translation_error_m = 0.5 * (e1.translation_error_m + e2.translation_error_m);
          cc.report.extrinsic_error_pct = 0.5 * (e1.extrinsic_error_pct + e2.extrinsic_error_pct);
        }
        cc.ok = true;
        ++ok;
        result.mean_rotation_error_deg += cc.report.rotation_error_deg;
        result.mean_translation_error_m += cc.report.translation_error_m;
        result.mean_extrinsic_error_pct += cc.report.extrinsic_error_pct;
        result.mean_cost_bits += static_cast<double>(cc.report.cost_bits);
        result.mean_quantization_bits += cc.report.quantization_bits;
      } catch (const Error& e) {
        cc.error = to_string(e.code());
        ++result.failures;
      }
      result.cameras.push_back(std::move(cc));
    }
  }
  if (ok == 0) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    result.mean_rotation_error_deg = result.mean_translation_error_m = nan;
    result.mean_extrinsic_error_pct = result.mean_cost_bits = result.mean_quantization_bits = nan;
  } else {
    const double n = static_cast<double>(ok);
    result.mean_rotation_error_deg /= n;
    result.mean_translation_error_m /= n;
    result.mean_extrinsic_error_pct /= n;
    result.mean_cost_bits /= n;
    result.mean_quantization_bits /= n;
  }
  return result;
}

std::string to_string(MaskPolicy policy) {
  switch (policy) {
    case MaskPolicy::kNone: return "none";
    case MaskPolicy::kPriority: return "priority";
    case MaskPolicy::kRandom: return "random";
  }
  return "none";
}

MaskPolicy mask_policy_from_string(const std::string& text) {
  if (text == "none") return MaskPolicy::kNone;
  if (text == "priority") return MaskPolicy::kPriority;
  if (text == "random") return MaskPolicy::kRandom;
  throw Error(ErrorCode::kValidation, "unknown mask policy '" + text + "'", "fusion.mask_policy");
}

void FusionTrialConfig::validate() const {
  features.validate();
  require(rate_bits > 0.0, ErrorCode::kValidation, "fusion.rate_bits", "must be > 0");
  require(peak_threshold > 0.0 && peak_threshold < 1.0, ErrorCode::kValidation,
          "fusion.peak_threshold", "must lie in (0, 1)");
  require(min_separation_m >= 0.0, ErrorCode::kValidation, "fusion.min_separation_m",
          "must be >= 0");
  require(match_radius_m > 0.0, ErrorCode::kValidation, "fusion.match_radius_m", "must be > 0");
  require(loss_rate >= 0.0 && loss_rate <= 1.0, ErrorCode::kValidation, "fusion.loss_rate",
          "must lie in [0, 1]");
}

std::vector<fusion::GroundWarp> build_warps(std::span<const CameraModel> fleet,
                                            const scenario::Arena& arena, int stride_px) {
  std::vector<fusion::GroundWarp> warps;
  for (const auto& c : fleet) warps.push_back(fusion::GroundWarp::build(c, arena, stride_px));
  return warps;
}

FusionTrialResult run_fusion_trial(const scenario::ScenarioTrace& trace,
                                   std::span<const CameraModel> fleet,
                                   std::span<const fusion::GroundWarp> warps,
                                   std::span<const std::size_t> subset,
                                   const FusionTrialConfig& cfg, std::uint64_t seed,
                                   const FrameSink& on_frame) {
  cfg.validate();
  require(warps.size() == fleet.size(), ErrorCode::kDomain, "warps", "one warp per camera");
  std::vector<std::size_t> cams(subset.begin(), subset.end());
  if (cams.empty()) {
    for (std::size_t k = 0; k < fleet.size(); ++k) cams.push_back(k);
  }
  for (auto k : cams) {
    require(k < fleet.size(), ErrorCode::kValidation, "fov_subset", "camera index out of range");
  }
  std::vector<fusion::GroundWarp> subset_warps;
  std::span<const fusion::GroundWarp> used = warps;
  if (cams.size() != fleet.size()) {
    for (auto k : cams) subset_warps.push_back(warps[k]);
    used = subset_warps;
  }

  const auto steps = frame_steps(cfg.start_step, cfg.frame_stride, cfg.frames, trace.step_count(),
                                 "fusion.frames");
  Rng mask_rng(derive_seed(seed, kMaskStream));
  const double min_sep_cells = cfg.min_separation_m / trace.arena.cell_m();
  FusionTrialResult out;
  for (int step : steps) {
    std::vector<fusion::FeatureMap> features;
    std::vector<double> priorities;
    for (auto k : cams) {
      features.push_back(fusion::extract_features(fleet[k], static_cast<int>(k), trace, step,
                                                  cfg.rate_bits, cfg.features, seed));
      priorities.push_back(fusion::priority(features.back()));
    }
    std::vector<fusion::PriorityMask> masks;
    switch (cfg.policy) {
      case MaskPolicy::kNone: masks = fusion::assign_masks(priorities, 0.0); break;
      case MaskPolicy::kPriority: masks = fusion::assign_masks(priorities, cfg.loss_rate); break;
      case MaskPolicy::kRandom: masks = fusion::random_masks(priorities, cfg.loss_rate, mask_rng); break;
    }
    const auto map = fusion::fuse(features, masks, used);
    const auto dets = fusion::detect_peaks(map, trace.arena, cfg.peak_threshold, min_sep_cells);
    if (on_frame) on_frame(step, map, dets);
    std::vector<calib::Vec2> truth;
    for (std::size_t idx : trace.active_at_step(step)) {
      truth.push_back(*trace.tracks[idx].position_at_step(step));
    }
    out.moda += fusion::moda(dets, truth, cfg.match_radius_m);
    out.mean_loss_penalty += fusion::loss_penalty(masks, cfg.loss_alpha);
    for (const auto& m : masks) out.comm_cost_bits += m.mask * cfg.rate_bits;
  }
  out.mean_loss_penalty /= static_cast<double>(steps.size());
  out.comm_cost_bits /= static_cast<double>(steps.size());
  return out;
}

void AgeTrialConfig::validate() const {
  cycle.validate();
  require(sampling_interval_s > 0.0, ErrorCode::kValidation, "age.sampling_interval_s",
          "must be > 0");
  require(packet_bits >= 0.0, ErrorCode::kValidation, "age.packet_bits", "must be >= 0");
  require(capacity_bps > 0.0, ErrorCode::kValidation, "age.capacity_bps", "must be > 0");
  require(inference_delay_s >= 0.0, ErrorCode::kValidation, "age.inference_delay_s",
          "must be >= 0");
}

AgeTrialResult run_age_trial(const scenario::ScenarioTrace& trace,
                             std::span<const CameraModel> fleet, std::span<const std::size_t> subset,
                             const AgeTrialConfig& cfg, std::vector<age::AoptReport>* per_step) {
  cfg.validate();
  std::vector<CameraModel> cams;
  if (subset.empty()) {
    cams.assign(fleet.begin(), fleet.end());
  } else {
    for (auto k : subset) {
      require(k < fleet.size(), ErrorCode::kValidation, "fov_subset", "camera index out of range");
      cams.push_back(fleet[k]);
    }
  }
  const auto counts = visible_counts(trace, cams);
  const double tx = cfg.packet_bits / cfg.capacity_bps;
  AgeTrialResult r;
  r.total_delay_s = tx + cfg.inference_delay_s;
  const double interval = std::max(cfg.sampling_interval_s, tx);
  const int n = trace.step_count();
  std::vector<age::AgentAgeInputs> agents(cams.size());
  for (int step = 0; step < n; ++step) {
    for (std::size_t k = 0; k < cams.size(); ++k) {
      agents[k] = {interval, r.total_delay_s, counts[k][step]};
    }
    const auto rep = age::aopt_cycle(agents, cfg.cycle);
    if (per_step) per_step->push_back(rep);
    r.mean_aopt_streaming += rep.aopt_streaming;
    r.mean_aopt_calibration += rep.aopt_calibration;
    r.mean_aopt_cycle += rep.aopt_cycle;
    r.max_aopt_cycle = std::max(r.max_aopt_cycle, rep.aopt_cycle);
    if (rep.idle()) r.idle_fraction += 1.0;
  }
  r.mean_aopt_streaming /= n;
  r.mean_aopt_calibration /= n;
  r.mean_aopt_cycle /= n;
  r.idle_fraction /= n;
  return r;
}

std::vector<std::size_t> parse_subset(const std::string& text, std::size_t fleet_size) {
  const auto t = trim(text);
  std::vector<std::size_t> out;
  if (t == "all") {
    for (std::size_t k = 0; k < fleet_size; ++k) out.push_back(k);
    return out;
  }
  for (const auto& part : split(t, '+')) {
    const auto k = parse_int(trim(part), "fov_subset");
    require(k >= 0 && static_cast<std::size_t>(k) < fleet_size, ErrorCode::kValidation,
            "fov_subset", "camera index " + std::to_string(k) + " out of range");
    for (auto existing : out) {
      require(existing != static_cast<std::size_t>(k), ErrorCode::kValidation, "fov_subset",
              "duplicate camera index");
    }
    out.push_back(static_cast<std::size_t>(k));
  }
  require(!out.empty(), ErrorCode::kValidation, "fov_subset", "empty subset");
  return out;
}

}  // namespace cpsim::experiment
