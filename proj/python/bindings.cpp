#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "cpsim/config.hpp"
#include "cpsim/error.hpp"
#include "cpsim/sweep.hpp"

namespace py = pybind11;
using namespace cpsim;

namespace {

// Configs cross the boundary as JSON text so Python sees the same schema as
// the CLI.
RunConfig config_arg(const std::string& json_text) {
  return json_text.empty() ? RunConfig{} : parse_config(json_text);
}

py::dict table_dict(const CsvTable& t) {
  py::dict d;
  d["header"] = t.header;
  d["rows"] = t.rows;
  return d;
}

py::dict solution_dict(const sched::Solution& s) {
  py::dict d;
  d["bandwidth_hz"] = s.bandwidth_hz;
  d["packet_bits"] = s.packet_bits;
  d["interval_s"] = s.interval_s;
  d["objective"] = s.objective;
  d["accuracy"] = s.accuracy;
  d["feasible"] = s.feasible;
  return d;
}

std::uint64_t scene_seed(const RunConfig& cfg) { return derive_seed(derive_seed(cfg.master_seed, 1), 1); }
std::uint64_t trial_seed(const RunConfig& cfg) { return derive_seed(derive_seed(cfg.master_seed, 1), 2); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Collaborative perception simulator core";

  // Raised with .code and .field set from the C++ error.
  static py::handle error_type = PyErr_NewException("cpsim._core.CpsimError", PyExc_RuntimeError, nullptr);
  m.attr("CpsimError") = error_type;
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::reinterpret_borrow<py::object>(error_type)(e.what());
      exc.attr("code") = std::string(to_string(e.code()));
      exc.attr("field") = e.field();
      PyErr_SetObject(error_type.ptr(), exc.ptr());
    }
  });

  m.attr("BITS_PER_KB") = kBitsPerKB;

  m.def("default_config", [] { return config_to_json(RunConfig{}).dump(2); },
        "Default run config as JSON text.");
  m.def("normalize_config", [](const std::string& text) { return config_to_json(parse_config(text)).dump(2); },
        py::arg("config_json"), "Validate a config and return it with every default filled in.");

  m.def(
      "capacity",
      [](double bandwidth_hz, double tx_power_w, double noise_psd, double gain) {
        return channel::capacity({bandwidth_hz, tx_power_w, noise_psd, gain, 0.0});
      },
      py::arg("bandwidth_hz"), py::arg("tx_power_w"), py::arg("noise_psd_w_per_hz"), py::arg("channel_gain"));
  m.def(
      "median_link",
      [](const std::string& cfg) {
        const auto l = median_link(config_arg(cfg));
        py::dict d;
        d["channel_gain"] = l.channel_gain;
        d["snr"] = channel::snr(l);
        d["capacity_bps"] = channel::capacity(l);
        return d;
      },
      py::arg("config_json") = "");

  m.def("aoi", [](double interval, double delay) { return age::aoi({interval, delay, 1}); }, py::arg("interval_s"),
        py::arg("delay_s"));
  m.def(
      "aopt_cycle",
      [](const std::vector<std::tuple<double, double, int>>& agents, double p1, double calibration_interval_s,
         double eps_g) {
        std::vector<age::AgentAgeInputs> a;
        for (const auto& [i, d, g] : agents) a.push_back({i, d, g});
        age::CycleConfig c;
        c.calibration_prob = p1;
        c.calibration_interval_s = calibration_interval_s;
        c.count_threshold = eps_g;
        const auto r = age::aopt_cycle(a, c);
        py::dict d;
        d["aopt_streaming"] = r.aopt_streaming;
        d["aopt_calibration"] = r.aopt_calibration;
        d["aopt_cycle"] = r.aopt_cycle;
        d["k_hat"] = r.bottleneck ? py::cast(*r.bottleneck) : py::none();
        d["g_khat"] = r.g_khat;
        return d;
      },
      py::arg("agents"), py::arg("p1") = 0.1, py::arg("calibration_interval_s") = 1.0, py::arg("eps_g") = 1.0,
      "agents: list of (sampling_interval_s, total_delay_s, target_count).");
  m.def(
      "phase_occupancies",
      [](double rate, double log_mean, double log_sigma, double p1) {
        const auto p = age::phase_occupancies({rate, log_mean, log_sigma}, p1);
        return std::make_tuple(p.idle, p.calibration, p.streaming);
      },
      py::arg("arrival_rate_per_s"), py::arg("dwell_log_mean"), py::arg("dwell_log_sigma"), py::arg("p1"));

  m.def(
      "estimate_pose",
      [](const Eigen::MatrixX2d& image, const Eigen::MatrixX2d& world, const std::array<double, 4>& k) {
        if (image.rows() != world.rows()) throw Error(ErrorCode::kDomain, "point counts differ", "world");
        std::vector<calib::Correspondence> c;
        for (Eigen::Index i = 0; i < image.rows(); ++i) c.push_back({image.row(i).transpose(), world.row(i).transpose(), 0.0});
        const auto h = calib::estimate_homography(c);
        const auto e = calib::recover_extrinsics(h, {k[0], k[1], k[2], k[3]}, c.front().world_point);
        return std::make_tuple(h, e.rotation, e.translation);
      },
      py::arg("image_points"), py::arg("world_points"), py::arg("intrinsics"),
      "Homography and (R, t) from ground-plane correspondences; intrinsics = (fx, fy, cx, cy).");

  m.def(
      "optimize",
      [](const std::string& text) {
        const auto cfg = config_arg(text);
        sched::SubproblemInput in{median_link(cfg), cfg.bounds, cfg.proxies.calibration, cfg.weights,
                                  cfg.age.calibration_prob, cfg.grid, cfg.proxies.calibration_threshold};
        py::dict d;
        d["calibration"] = solution_dict(sched::solve_p2(in));
        in.proxy = effective_streaming_proxy(cfg);
        in.threshold = cfg.proxies.streaming_threshold;
        d["streaming"] = solution_dict(sched::solve_p3(in));
        return d;
      },
      py::arg("config_json") = "");
  m.def(
      "fit_proxy",
      [](const std::vector<std::pair<double, double>>& anchors_kb, bool fit_floor) {
        std::vector<sched::AnchorPoint> a;
        for (const auto& [kb, acc] : anchors_kb) a.push_back({kb * kBitsPerKB, acc});
        const auto f = sched::fit_proxy(a, sched::ProxyKind::kStreaming, fit_floor);
        py::dict d;
        d["gamma_max"] = f.proxy.gamma_max;
        d["rate_scale_kb"] = f.proxy.rate_scale_bits / kBitsPerKB;
        d["floor"] = f.proxy.floor;
        d["max_abs_residual"] = f.max_abs_residual;
        return d;
      },
      py::arg("anchors_kb"), py::arg("fit_floor") = true, "anchors_kb: list of (rate_kb, accuracy).");

  m.def(
      "simulate",
      [](const std::string& text) {
        const auto cfg = config_arg(text);
        std::ostringstream out;
        scenario::write_trace(out, experiment::make_scene(cfg.scenario, scene_seed(cfg)));
        return out.str();
      },
      py::arg("config_json") = "", "Scene trace text for the config's master seed.");
  m.def(
      "calibrate",
      [](const std::string& text) {
        const auto cfg = config_arg(text);
        const auto trace = experiment::make_scene(cfg.scenario, scene_seed(cfg));
        const auto r = experiment::run_calibration_trial(trace, experiment::build_fleet(cfg.cameras),
                                                         calibration_trial(cfg), trial_seed(cfg));
        py::dict d;
        d["rotation_error_deg"] = r.mean_rotation_error_deg;
        d["translation_error_m"] = r.mean_translation_error_m;
        d["extrinsic_error_pct"] = r.mean_extrinsic_error_pct;
        d["failures"] = r.failures;
        return d;
      },
      py::arg("config_json") = "");
  m.def(
      "fuse",
      [](const std::string& text) {
        const auto cfg = config_arg(text);
        const auto trace = experiment::make_scene(cfg.scenario, scene_seed(cfg));
        const auto fleet = experiment::build_fleet(cfg.cameras);
        const auto warps = experiment::build_warps(fleet, trace.arena, cfg.fusion.features.stride_px);
        const auto r = experiment::run_fusion_trial(trace, fleet, warps, {}, fusion_trial(cfg), trial_seed(cfg));
        py::dict d;
        d["moda"] = r.moda.moda_percent;
        d["misses"] = r.moda.misses;
        d["false_positives"] = r.moda.false_positives;
        d["comm_cost_kb"] = r.comm_cost_bits / kBitsPerKB;
        return d;
      },
      py::arg("config_json") = "");

  m.def("sweep_presets", &sweep::preset_names);
  m.def(
      "run_sweep",
      [](const std::string& text, const std::string& preset, const std::vector<std::string>& values, int reps) {
        auto spec = sweep::preset(preset);
        if (!values.empty()) spec.values = values;
        if (reps > 0) spec.repetitions = reps;
        CsvTable t;
        {
          py::gil_scoped_release release;
          t = sweep::run_sweep(config_arg(text), spec);
        }
        return table_dict(t);
      },
      py::arg("config_json"), py::arg("preset"), py::arg("values") = std::vector<std::string>{},
      py::arg("repetitions") = 0, "Run a preset sweep; returns {'header': [...], 'rows': [[...], ...]}.");
}
