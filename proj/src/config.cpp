#include "cpsim/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "cpsim/error.hpp"
#include "cpsim/textio.hpp"

namespace cpsim {

using nlohmann::json;

namespace {

// Reads one JSON object, remembering which keys were consumed so leftovers
// can be reported as unknown.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) {
      throw Error(ErrorCode::kValidation, "expected an object", path_.empty() ? "<root>" : path_);
    }
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  double number(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_number()) throw Error(ErrorCode::kValidation, "expected a number", field(key));
    return v.get<double>();
  }

  // Like number() but null stays NaN (an explicit "use the default").
  double optional_number(const std::string& key, double fallback) {
    seen_.insert(key);
    if (!j_.contains(key)) return fallback;
    if (j_.at(key).is_null()) return std::numeric_limits<double>::quiet_NaN();
    return number(key, fallback);
  }

  long long integer(const std::string& key, long long fallback) {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_number_integer()) throw Error(ErrorCode::kValidation, "expected an integer", field(key));
    return v.get<long long>();
  }

  std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback) {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_number_unsigned()) {
      throw Error(ErrorCode::kValidation, "expected a non-negative integer", field(key));
    }
    return v.get<std::uint64_t>();
  }

  std::string text(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_string()) throw Error(ErrorCode::kValidation, "expected a string", field(key));
    return v.get<std::string>();
  }

  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_boolean()) throw Error(ErrorCode::kValidation, "expected true or false", field(key));
    return v.get<bool>();
  }

  calib::Vec3 vec3(const std::string& key, const calib::Vec3& fallback) {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_array() || v.size() != 3 || !v[0].is_number() || !v[1].is_number() ||
        !v[2].is_number()) {
      throw Error(ErrorCode::kValidation, "expected [x, y, z]", field(key));
    }
    return {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw Error(ErrorCode::kValidation, "unknown key", field(key));
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

// Re-raises module validation errors with the config path prefixed.
template <typename F>
void validated(const std::string& prefix, F&& f) {
  try {
    f();
  } catch (const Error& e) {
    if (e.field().find('.') != std::string::npos || e.field().find('[') != std::string::npos) throw;
    throw Error(e.code() == ErrorCode::kDomain ? ErrorCode::kValidation : e.code(),
                prefix + "." + e.what(), prefix + "." + e.field());
  }
}

sched::AccuracyProxy read_proxy(Section& parent, const std::string& key, sched::AccuracyProxy p) {
  if (!parent.has(key)) return p;
  Section s(parent.raw(key), parent.field(key));
  p.gamma_max = s.number("gamma_max", p.gamma_max);
  p.rate_scale_bits = s.number("rate_scale_bits", p.rate_scale_bits);
  p.floor = s.number("floor", p.floor);
  s.finish();
  return p;
}

json proxy_json(const sched::AccuracyProxy& p) {
  return {{"gamma_max", p.gamma_max}, {"rate_scale_bits", p.rate_scale_bits}, {"floor", p.floor}};
}

json nullable(double v) { return std::isnan(v) ? json(nullptr) : json(v); }

json vec3_json(const calib::Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

SweepSpec read_sweep(const json& j, const std::string& path) {
  Section s(j, path);
  SweepSpec spec;
  spec.name = s.text("name", "");
  spec.axis = sweep_axis_from_string(s.text("axis", "budget"));
  if (s.has("values")) {
    const auto& v = s.raw("values");
    if (!v.is_array()) throw Error(ErrorCode::kValidation, "expected an array", s.field("values"));
    for (const auto& x : v) {
      if (x.is_string()) {
        spec.values.push_back(x.get<std::string>());
      } else if (x.is_number()) {
        spec.values.push_back(x.dump());
      } else {
        throw Error(ErrorCode::kValidation, "expected numbers or strings", s.field("values"));
      }
    }
  }
  spec.repetitions = static_cast<int>(s.integer("repetitions", 1));
  spec.target = s.text("target", spec.target);
  if (s.has("budgets_kb")) {
    const auto& v = s.raw("budgets_kb");
    if (!v.is_array()) throw Error(ErrorCode::kValidation, "expected an array", s.field("budgets_kb"));
    for (const auto& x : v) {
      if (!x.is_number()) throw Error(ErrorCode::kValidation, "expected numbers", s.field("budgets_kb"));
      spec.budgets_kb.push_back(x.get<double>());
    }
  }
  s.finish();
  validated(path, [&] { spec.validate(); });
  return spec;
}

}  // namespace

std::string to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::kCapacity: return "capacity";
    case SweepAxis::kSamplingInterval: return "sampling_interval";
    case SweepAxis::kCalibrationInterval: return "calibration_interval";
    case SweepAxis::kBudget: return "budget";
    case SweepAxis::kLossRate: return "loss_rate";
    case SweepAxis::kTopN: return "top_n";
    case SweepAxis::kFovSubset: return "fov_subset";
  }
  return "budget";
}

SweepAxis sweep_axis_from_string(const std::string& text) {
  for (auto a : {SweepAxis::kCapacity, SweepAxis::kSamplingInterval, SweepAxis::kCalibrationInterval,
                 SweepAxis::kBudget, SweepAxis::kLossRate, SweepAxis::kTopN, SweepAxis::kFovSubset}) {
    if (to_string(a) == text) return a;
  }
  throw Error(ErrorCode::kValidation, "unknown sweep axis '" + text + "'", "axis");
}

void SweepSpec::validate() const {
  require(!name.empty(), ErrorCode::kValidation, "name", "must be non-empty");
  require(!values.empty(), ErrorCode::kValidation, "values", "grid must be non-empty");
  require(repetitions >= 1, ErrorCode::kValidation, "repetitions", "must be >= 1");
  require(target == "calibration" || target == "streaming" || target == "latency", ErrorCode::kValidation,
          "target", "must be 'calibration', 'streaming' or 'latency'");
  if (axis != SweepAxis::kFovSubset) {
    for (const auto& v : values) {
      const double x = parse_double(v, "values");
      require(std::isfinite(x), ErrorCode::kValidation, "values", "must be finite");
    }
  }
  for (double b : budgets_kb) require(b > 0.0, ErrorCode::kValidation, "budgets_kb", "must be > 0");
}

void RunConfig::validate() const {
  require(schema_version == kSchemaVersion, ErrorCode::kValidation, "schema_version",
          "unsupported version " + std::to_string(schema_version) + " (expected " +
              std::to_string(kSchemaVersion) + ")");
  require(workers >= 1, ErrorCode::kValidation, "workers", "must be >= 1");
  require(!output_dir.empty(), ErrorCode::kValidation, "output_dir", "must be non-empty");
  validated("scenario", [&] { scenario.validate(); });
  validated("channel", [&] {
    channel.link.validate();
    channel.path_loss.validate();
    require(channel.distance_m > 0.0, ErrorCode::kValidation, "distance_m", "must be > 0");
    require(channel.packet_loss_rate >= 0.0 && channel.packet_loss_rate <= 1.0,
            ErrorCode::kValidation, "packet_loss_rate", "must lie in [0, 1]");
  });
  require(cameras.size() >= 2, ErrorCode::kValidation, "cameras", "need at least two cameras");
  for (std::size_t i = 0; i < cameras.size(); ++i) {
    validated("cameras[" + std::to_string(i) + "]", [&] {
      cameras[i].intrinsics.validate();
      require(cameras[i].image_width_px > 0 && cameras[i].image_height_px > 0,
              ErrorCode::kValidation, "image_width_px", "image size must be positive");
      require((cameras[i].look_at - cameras[i].position).norm() > 0.0, ErrorCode::kValidation,
              "look_at", "must differ from position");
    });
  }
  validated("age", [&] {
    age::CycleConfig{age.calibration_prob, age.calibration_interval_s, age.count_threshold, {}}.validate();
    require(age.sampling_interval_s > 0.0, ErrorCode::kValidation, "sampling_interval_s", "must be > 0");
    require(age.stream_packet_kb >= 0.0, ErrorCode::kValidation, "stream_packet_kb", "must be >= 0");
    require(age.capacity_kbps > 0.0, ErrorCode::kValidation, "capacity_kbps", "must be > 0");
  });
  bounds.validate();
  grid.validate();
  validated("proxies.calibration", [&] { proxies.calibration.validate(); });
  validated("proxies.streaming", [&] { proxies.streaming.validate(); });
  validated("weights", [&] { weights.validate(); });
  validated("calibration", [&] { calibration_trial(*this).validate(); });
  require(calibration.top_n >= 1, ErrorCode::kValidation, "calibration.top_n", "must be >= 1");
  require(calibration.max_bits >= 1, ErrorCode::kValidation, "calibration.max_bits", "must be >= 1");
  require(calibration.frames >= 1 && calibration.frame_stride >= 1 && calibration.epochs >= 1 &&
              calibration.start_step >= 0,
          ErrorCode::kValidation, "calibration.frames", "frames, frame_stride and epochs must be >= 1");
  validated("fusion", [&] { fusion_trial(*this).validate(); });
  require(fusion.frames >= 1 && fusion.frame_stride >= 1 && fusion.start_step >= 0,
          ErrorCode::kValidation, "fusion.frames", "frames and frame_stride must be >= 1");
  require(fusion.temporal_rate_gain > 0.0, ErrorCode::kValidation, "fusion.temporal_rate_gain",
          "must be > 0");
  std::set<std::string> names;
  for (std::size_t i = 0; i < sweeps.size(); ++i) {
    validated("sweeps[" + std::to_string(i) + "]", [&] { sweeps[i].validate(); });
    require(names.insert(sweeps[i].name).second, ErrorCode::kValidation,
            "sweeps[" + std::to_string(i) + "].name", "duplicate sweep name");
  }
}

RunConfig config_from_json(const json& j) {
  RunConfig c;
  Section root(j, "");
  c.schema_version = static_cast<int>(root.integer("schema_version", kSchemaVersion));
  require(c.schema_version == kSchemaVersion, ErrorCode::kValidation, "schema_version",
          "unsupported version " + std::to_string(c.schema_version));
  c.master_seed = root.unsigned_integer("master_seed", c.master_seed);
  c.workers = static_cast<int>(root.integer("workers", c.workers));
  c.output_dir = root.text("output_dir", c.output_dir);

  if (root.has("scenario")) {
    Section s(root.raw("scenario"), "scenario");
    auto& sc = c.scenario;
    sc.arrivals.arrival_rate_per_s = s.number("arrival_rate_per_s", sc.arrivals.arrival_rate_per_s);
    sc.arrivals.dwell_log_mean = s.number("dwell_log_mean", sc.arrivals.dwell_log_mean);
    sc.arrivals.dwell_log_sigma = s.number("dwell_log_sigma", sc.arrivals.dwell_log_sigma);
    sc.duration_s = s.number("duration_s", sc.duration_s);
    sc.time_step_s = s.number("time_step_s", sc.time_step_s);
    sc.motion.walk_speed_m_per_s = s.number("walk_speed_m_per_s", sc.motion.walk_speed_m_per_s);
    if (s.has("arena")) {
      Section a(s.raw("arena"), "scenario.arena");
      const double w = a.number("width_m", sc.arena.width_m);
      const double l = a.number("length_m", sc.arena.length_m);
      const double cell = a.number("cell_m", sc.arena.cell_m());
      a.finish();
      try {
        sc.arena = scenario::Arena::with_cell(w, l, cell);
      } catch (const Error& e) {
        throw Error(ErrorCode::kValidation, e.what(), "scenario.arena.cell_m");
      }
    }
    if (s.has("descriptor")) {
      Section d(s.raw("descriptor"), "scenario.descriptor");
      sc.descriptors.dim = static_cast<int>(d.integer("dim", sc.descriptors.dim));
      sc.descriptors.identity_spread = d.number("identity_spread", sc.descriptors.identity_spread);
      sc.descriptors.view_noise = d.number("view_noise", sc.descriptors.view_noise);
      sc.descriptors.clip = d.number("clip", sc.descriptors.clip);
      d.finish();
    }
    s.finish();
  }

  if (root.has("channel")) {
    Section s(root.raw("channel"), "channel");
    auto& ch = c.channel;
    ch.link.bandwidth_hz = s.number("bandwidth_hz", ch.link.bandwidth_hz);
    ch.link.tx_power_w = s.number("tx_power_w", ch.link.tx_power_w);
    ch.link.noise_psd_w_per_hz = s.number("noise_psd_w_per_hz", ch.link.noise_psd_w_per_hz);
    ch.link.inference_delay_s = s.number("inference_delay_s", ch.link.inference_delay_s);
    ch.distance_m = s.number("distance_m", ch.distance_m);
    ch.packet_loss_rate = s.number("packet_loss_rate", ch.packet_loss_rate);
    auto& pl = ch.path_loss;
    pl.carrier_freq_hz = s.number("carrier_freq_hz", pl.carrier_freq_hz);
    pl.path_loss_exponent = s.number("path_loss_exponent", pl.path_loss_exponent);
    pl.shadowing_sigma_db = s.number("shadowing_sigma_db", pl.shadowing_sigma_db);
    pl.reference_distance_m = s.number("reference_distance_m", pl.reference_distance_m);
    pl.interferer_density_per_100m2 =
        s.number("interferer_density_per_100m2", pl.interferer_density_per_100m2);
    pl.interferer_power_w = s.number("interferer_power_w", pl.interferer_power_w);
    pl.interferer_mean_distance_m = s.number("interferer_mean_distance_m", pl.interferer_mean_distance_m);
    pl.interference_band_hz = s.number("interference_band_hz", pl.interference_band_hz);
    s.finish();
  }

  if (root.has("cameras")) {
    const auto& arr = root.raw("cameras");
    if (!arr.is_array()) throw Error(ErrorCode::kValidation, "expected an array", "cameras");
    c.cameras.clear();
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string path = "cameras[" + std::to_string(i) + "]";
      Section s(arr[i], path);
      experiment::CameraSpec spec;
      spec.position = s.vec3("position", spec.position);
      spec.look_at = s.vec3("look_at", spec.look_at);
      spec.image_width_px = static_cast<int>(s.integer("image_width_px", spec.image_width_px));
      spec.image_height_px = static_cast<int>(s.integer("image_height_px", spec.image_height_px));
      if (s.has("intrinsics")) {
        Section k(s.raw("intrinsics"), path + ".intrinsics");
        spec.intrinsics.fx = k.number("fx", spec.intrinsics.fx);
        spec.intrinsics.fy = k.number("fy", spec.intrinsics.fy);
        spec.intrinsics.cx = k.number("cx", spec.intrinsics.cx);
        spec.intrinsics.cy = k.number("cy", spec.intrinsics.cy);
        k.finish();
      }
      s.finish();
      c.cameras.push_back(spec);
    }
  }

  if (root.has("age")) {
    Section s(root.raw("age"), "age");
    auto& a = c.age;
    a.calibration_prob = s.number("calibration_prob", a.calibration_prob);
    a.calibration_interval_s = s.number("calibration_interval_s", a.calibration_interval_s);
    a.count_threshold = s.number("count_threshold", a.count_threshold);
    a.sampling_interval_s = s.number("sampling_interval_s", a.sampling_interval_s);
    a.stream_packet_kb = s.number("stream_packet_kb", a.stream_packet_kb);
    a.capacity_kbps = s.number("capacity_kbps", a.capacity_kbps);
    s.finish();
  }

  if (root.has("bounds")) {
    Section s(root.raw("bounds"), "bounds");
    auto& b = c.bounds;
    b.bandwidth_min_hz = s.number("bandwidth_min_hz", b.bandwidth_min_hz);
    b.bandwidth_max_hz = s.number("bandwidth_max_hz", b.bandwidth_max_hz);
    b.packet_min_bits = s.number("packet_min_bits", b.packet_min_bits);
    b.packet_max_bits = s.number("packet_max_bits", b.packet_max_bits);
    b.interval_min_s = s.number("interval_min_s", b.interval_min_s);
    b.interval_max_s = s.number("interval_max_s", b.interval_max_s);
    b.calibration_interval_min_s = s.number("calibration_interval_min_s", b.calibration_interval_min_s);
    b.calibration_interval_max_s = s.number("calibration_interval_max_s", b.calibration_interval_max_s);
    s.finish();
  }

  if (root.has("grid")) {
    Section s(root.raw("grid"), "grid");
    c.grid.bandwidth_points = static_cast<int>(s.integer("bandwidth_points", c.grid.bandwidth_points));
    c.grid.packet_points = static_cast<int>(s.integer("packet_points", c.grid.packet_points));
    c.grid.interval_points = static_cast<int>(s.integer("interval_points", c.grid.interval_points));
    s.finish();
  }

  if (root.has("proxies")) {
    Section s(root.raw("proxies"), "proxies");
    c.proxies.calibration = read_proxy(s, "calibration", c.proxies.calibration);
    c.proxies.streaming = read_proxy(s, "streaming", c.proxies.streaming);
    c.proxies.calibration_threshold =
        s.optional_number("calibration_threshold", c.proxies.calibration_threshold);
    c.proxies.streaming_threshold = s.optional_number("streaming_threshold", c.proxies.streaming_threshold);
    s.finish();
  }

  if (root.has("weights")) {
    Section s(root.raw("weights"), "weights");
    c.weights.lambda_ca = s.number("lambda_ca", c.weights.lambda_ca);
    c.weights.lambda_k = s.number("lambda_k", c.weights.lambda_k);
    s.finish();
  }

  if (root.has("calibration")) {
    Section s(root.raw("calibration"), "calibration");
    auto& k = c.calibration;
    k.frames = static_cast<int>(s.integer("frames", k.frames));
    k.frame_stride = static_cast<int>(s.integer("frame_stride", k.frame_stride));
    k.start_step = static_cast<int>(s.integer("start_step", k.start_step));
    k.epochs = static_cast<int>(s.integer("epochs", k.epochs));
    k.pixel_noise_px = s.number("pixel_noise_px", k.pixel_noise_px);
    k.budget_kb = s.number("budget_kb", k.budget_kb);
    k.top_n = static_cast<int>(s.integer("top_n", k.top_n));
    k.max_bits = static_cast<int>(s.integer("max_bits", k.max_bits));
    k.drift_rate_deg_per_s = s.number("drift_rate_deg_per_s", k.drift_rate_deg_per_s);
    k.drift_speed_m_per_s = s.number("drift_speed_m_per_s", k.drift_speed_m_per_s);
    k.calibration_interval_s = s.number("calibration_interval_s", k.calibration_interval_s);
    s.finish();
  }

  if (root.has("fusion")) {
    Section s(root.raw("fusion"), "fusion");
    auto& f = c.fusion;
    f.features.stride_px = static_cast<int>(s.integer("stride_px", f.features.stride_px));
    f.features.target_sigma_m = s.number("target_sigma_m", f.features.target_sigma_m);
    f.features.min_sigma_cells = s.number("min_sigma_cells", f.features.min_sigma_cells);
    f.features.noise_base = s.number("noise_base", f.features.noise_base);
    f.features.noise_floor = s.number("noise_floor", f.features.noise_floor);
    f.rate_kb = s.number("rate_kb", f.rate_kb);
    f.peak_threshold = s.number("peak_threshold", f.peak_threshold);
    f.min_separation_m = s.number("min_separation_m", f.min_separation_m);
    f.match_radius_m = s.number("match_radius_m", f.match_radius_m);
    f.frames = static_cast<int>(s.integer("frames", f.frames));
    f.frame_stride = static_cast<int>(s.integer("frame_stride", f.frame_stride));
    f.start_step = static_cast<int>(s.integer("start_step", f.start_step));
    f.loss_rate = s.number("loss_rate", f.loss_rate);
    try {
      f.mask_policy = experiment::mask_policy_from_string(
          s.text("mask_policy", experiment::to_string(f.mask_policy)));
    } catch (const Error& e) {
      throw Error(ErrorCode::kValidation, e.what(), "fusion.mask_policy");
    }
    f.loss_alpha = s.number("loss_alpha", f.loss_alpha);
    f.temporal_rate_gain = s.number("temporal_rate_gain", f.temporal_rate_gain);
    s.finish();
  }

  if (root.has("sweeps")) {
    const auto& arr = root.raw("sweeps");
    if (!arr.is_array()) throw Error(ErrorCode::kValidation, "expected an array", "sweeps");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      c.sweeps.push_back(read_sweep(arr[i], "sweeps[" + std::to_string(i) + "]"));
    }
  }
  root.finish();
  c.validate();
  return c;
}

json config_to_json(const RunConfig& c) {
  json j;
  j["schema_version"] = c.schema_version;
  j["master_seed"] = c.master_seed;
  j["workers"] = c.workers;
  j["output_dir"] = c.output_dir;
  const auto& sc = c.scenario;
  j["scenario"] = {
      {"arrival_rate_per_s", sc.arrivals.arrival_rate_per_s},
      {"dwell_log_mean", sc.arrivals.dwell_log_mean},
      {"dwell_log_sigma", sc.arrivals.dwell_log_sigma},
      {"duration_s", sc.duration_s},
      {"time_step_s", sc.time_step_s},
      {"walk_speed_m_per_s", sc.motion.walk_speed_m_per_s},
      {"arena", {{"width_m", sc.arena.width_m}, {"length_m", sc.arena.length_m}, {"cell_m", sc.arena.cell_m()}}},
      {"descriptor",
       {{"dim", sc.descriptors.dim},
        {"identity_spread", sc.descriptors.identity_spread},
        {"view_noise", sc.descriptors.view_noise},
        {"clip", sc.descriptors.clip}}},
  };
  const auto& ch = c.channel;
  j["channel"] = {
      {"bandwidth_hz", ch.link.bandwidth_hz},
      {"tx_power_w", ch.link.tx_power_w},
      {"noise_psd_w_per_hz", ch.link.noise_psd_w_per_hz},
      {"inference_delay_s", ch.link.inference_delay_s},
      {"distance_m", ch.distance_m},
      {"packet_loss_rate", ch.packet_loss_rate},
      {"carrier_freq_hz", ch.path_loss.carrier_freq_hz},
      {"path_loss_exponent", ch.path_loss.path_loss_exponent},
      {"shadowing_sigma_db", ch.path_loss.shadowing_sigma_db},
      {"reference_distance_m", ch.path_loss.reference_distance_m},
      {"interferer_density_per_100m2", ch.path_loss.interferer_density_per_100m2},
      {"interferer_power_w", ch.path_loss.interferer_power_w},
      {"interferer_mean_distance_m", ch.path_loss.interferer_mean_distance_m},
      {"interference_band_hz", ch.path_loss.interference_band_hz},
  };
  j["cameras"] = json::array();
  for (const auto& cam : c.cameras) {
    j["cameras"].push_back({
        {"position", vec3_json(cam.position)},
        {"look_at", vec3_json(cam.look_at)},
        {"intrinsics",
         {{"fx", cam.intrinsics.fx}, {"fy", cam.intrinsics.fy}, {"cx", cam.intrinsics.cx}, {"cy", cam.intrinsics.cy}}},
        {"image_width_px", cam.image_width_px},
        {"image_height_px", cam.image_height_px},
    });
  }
  j["age"] = {
      {"calibration_prob", c.age.calibration_prob},
      {"calibration_interval_s", c.age.calibration_interval_s},
      {"count_threshold", c.age.count_threshold},
      {"sampling_interval_s", c.age.sampling_interval_s},
      {"stream_packet_kb", c.age.stream_packet_kb},
      {"capacity_kbps", c.age.capacity_kbps},
  };
  const auto& b = c.bounds;
  j["bounds"] = {
      {"bandwidth_min_hz", b.bandwidth_min_hz},
      {"bandwidth_max_hz", b.bandwidth_max_hz},
      {"packet_min_bits", b.packet_min_bits},
      {"packet_max_bits", b.packet_max_bits},
      {"interval_min_s", b.interval_min_s},
      {"interval_max_s", b.interval_max_s},
      {"calibration_interval_min_s", b.calibration_interval_min_s},
      {"calibration_interval_max_s", b.calibration_interval_max_s},
  };
  j["grid"] = {{"bandwidth_points", c.grid.bandwidth_points},
               {"packet_points", c.grid.packet_points},
               {"interval_points", c.grid.interval_points}};
  j["proxies"] = {
      {"calibration", proxy_json(c.proxies.calibration)},
      {"streaming", proxy_json(c.proxies.streaming)},
      {"calibration_threshold", nullable(c.proxies.calibration_threshold)},
      {"streaming_threshold", nullable(c.proxies.streaming_threshold)},
  };
  j["weights"] = {{"lambda_ca", c.weights.lambda_ca}, {"lambda_k", c.weights.lambda_k}};
  const auto& k = c.calibration;
  j["calibration"] = {
      {"frames", k.frames},
      {"frame_stride", k.frame_stride},
      {"start_step", k.start_step},
      {"epochs", k.epochs},
      {"pixel_noise_px", k.pixel_noise_px},
      {"budget_kb", k.budget_kb},
      {"top_n", k.top_n},
      {"max_bits", k.max_bits},
      {"drift_rate_deg_per_s", k.drift_rate_deg_per_s},
      {"drift_speed_m_per_s", k.drift_speed_m_per_s},
      {"calibration_interval_s", k.calibration_interval_s},
  };
  const auto& f = c.fusion;
  j["fusion"] = {
      {"stride_px", f.features.stride_px},
      {"target_sigma_m", f.features.target_sigma_m},
      {"min_sigma_cells", f.features.min_sigma_cells},
      {"noise_base", f.features.noise_base},
      {"noise_floor", f.features.noise_floor},
      {"rate_kb", f.rate_kb},
      {"peak_threshold", f.peak_threshold},
      {"min_separation_m", f.min_separation_m},
      {"match_radius_m", f.match_radius_m},
      {"frames", f.frames},
      {"frame_stride", f.frame_stride},
      {"start_step", f.start_step},
      {"loss_rate", f.loss_rate},
      {"mask_policy", experiment::to_string(f.mask_policy)},
      {"loss_alpha", f.loss_alpha},
      {"temporal_rate_gain", f.temporal_rate_gain},
  };
  j["sweeps"] = json::array();
  for (const auto& s : c.sweeps) {
    json v = json::array();
    for (const auto& x : s.values) {
      if (s.axis == SweepAxis::kFovSubset) {
        v.push_back(x);
      } else {
        v.push_back(json::parse(x));
      }
    }
    json entry = {{"name", s.name}, {"axis", to_string(s.axis)}, {"values", v},
                  {"repetitions", s.repetitions}, {"target", s.target}};
    entry["budgets_kb"] = s.budgets_kb;
    j["sweeps"].push_back(entry);
  }
  return j;
}

RunConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParse, e.what(), "<config>");
  }
  return config_from_json(j);
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open config file", path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void save_config(const RunConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write config file", path.string());
  out << config_to_json(cfg).dump(2) << '\n';
}

experiment::CalibrationTrialConfig calibration_trial(const RunConfig& cfg) {
  const auto& k = cfg.calibration;
  experiment::CalibrationTrialConfig t;
  t.frames = k.frames;
  t.frame_stride = k.frame_stride;
  t.start_step = k.start_step;
  t.epochs = k.epochs;
  t.pixel_noise_px = k.pixel_noise_px;
  t.options.budget_bits = k.budget_kb * kBitsPerKB;
  t.options.top_n = static_cast<std::size_t>(std::max(1, k.top_n));
  t.options.max_bits = k.max_bits;
  t.options.descriptor_clip = cfg.scenario.descriptors.clip;
  t.drift_rate_deg_per_s = k.drift_rate_deg_per_s;
  t.drift_speed_m_per_s = k.drift_speed_m_per_s;
  t.calibration_interval_s = k.calibration_interval_s;
  return t;
}

sched::AccuracyProxy effective_streaming_proxy(const RunConfig& cfg) {
  auto p = cfg.proxies.streaming;
  p.rate_scale_bits /= cfg.fusion.temporal_rate_gain;
  return p;
}

experiment::FusionTrialConfig fusion_trial(const RunConfig& cfg) {
  const auto& f = cfg.fusion;
  experiment::FusionTrialConfig t;
  t.features = f.features;
  t.features.proxy = effective_streaming_proxy(cfg);
  t.rate_bits = f.rate_kb * kBitsPerKB;
  t.peak_threshold = f.peak_threshold;
  t.min_separation_m = f.min_separation_m;
  t.match_radius_m = f.match_radius_m;
  t.frames = f.frames;
  t.frame_stride = f.frame_stride;
  t.start_step = f.start_step;
  t.loss_rate = f.loss_rate;
  t.policy = f.mask_policy;
  t.loss_alpha = f.loss_alpha;
  return t;
}

experiment::AgeTrialConfig age_trial(const RunConfig& cfg) {
  experiment::AgeTrialConfig t;
  t.cycle.calibration_prob = cfg.age.calibration_prob;
  t.cycle.calibration_interval_s = cfg.age.calibration_interval_s;
  t.cycle.count_threshold = cfg.age.count_threshold;
  t.sampling_interval_s = cfg.age.sampling_interval_s;
  t.packet_bits = cfg.age.stream_packet_kb * kBitsPerKB;
  t.capacity_bps = cfg.age.capacity_kbps * kBitsPerKB;
  t.inference_delay_s = cfg.channel.link.inference_delay_s;
  return t;
}

channel::LinkParams median_link(const RunConfig& cfg) {
  auto link = cfg.channel.link;
  link.channel_gain = channel::median_gain_at(cfg.channel.distance_m, cfg.channel.path_loss);
  return channel::with_interference(link, cfg.channel.path_loss);
}

channel::LinkParams realized_link(const RunConfig& cfg, std::uint64_t seed) {
  auto link = cfg.channel.link;
  Rng rng(seed);
  link.channel_gain = channel::channel_gain_at(cfg.channel.distance_m, cfg.channel.path_loss, rng).gain;
  return channel::with_interference(link, cfg.channel.path_loss);
}

}  // namespace cpsim
