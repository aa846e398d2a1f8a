// Command-line driver: simulate, calibrate, optimize, fuse, sweep, report.
#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "cpsim/config.hpp"
#include "cpsim/error.hpp"
#include "cpsim/sweep.hpp"
#include "cpsim/textio.hpp"

namespace fs = std::filesystem;
using namespace cpsim;

namespace {

// Single-run commands use repetition 0's seeds so their output matches the
// first row of the corresponding sweep.
struct Seeds {
  std::uint64_t scene, trial, link;
  explicit Seeds(std::uint64_t master) {
    const auto rep = derive_seed(master, 1);
    scene = derive_seed(rep, 1);
    trial = derive_seed(rep, 2);
    link = derive_seed(rep, 3);
  }
};

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;

  RunConfig load() const {
    RunConfig cfg = config_path.empty() ? RunConfig{} : load_config(config_path);
    if (seed) cfg.master_seed = *seed;
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    cfg.validate();
    return cfg;
  }
};

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::kIo, "cannot open for writing", path.string());
  return f;
}

scenario::ScenarioTrace load_or_make_trace(const RunConfig& cfg, const std::string& trace_path) {
  if (trace_path.empty()) return experiment::make_scene(cfg.scenario, Seeds(cfg.master_seed).scene);
  std::ifstream f(trace_path, std::ios::binary);
  if (!f) throw Error(ErrorCode::kIo, "cannot open trace", trace_path);
  return scenario::read_trace(f);
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  auto f = open_out(path);
  f << j.dump(2) << '\n';
}

nlohmann::json solution_json(const sched::Solution& s) {
  return {{"bandwidth_hz", s.bandwidth_hz}, {"packet_bits", s.packet_bits},
          {"packet_kb", s.packet_bits / kBitsPerKB}, {"interval_s", s.interval_s},
          {"objective", s.objective}, {"accuracy", s.accuracy}, {"feasible", s.feasible}};
}

void write_surface(const fs::path& path, const std::vector<sched::SurfacePoint>& surface) {
  CsvTable t;
  t.header = {"bandwidth_hz", "packet_bits", "interval_s", "objective"};
  for (const auto& p : surface) {
    t.rows.push_back({exact(p.bandwidth_hz), exact(p.packet_bits), exact(p.interval_s), exact(p.objective)});
  }
  auto f = open_out(path);
  t.write(f);
}

// --- simulate -------------------------------------------------------------

int cmd_simulate(const Common& common, const std::string& trace_out) {
  const auto cfg = common.load();
  const auto trace = experiment::make_scene(cfg.scenario, Seeds(cfg.master_seed).scene);
  const fs::path dir = cfg.output_dir;
  const fs::path trace_path = trace_out.empty() ? dir / "trace.txt" : fs::path(trace_out);
  {
    auto f = open_out(trace_path);
    scenario::write_trace(f, trace);
  }

  const auto fleet = experiment::build_fleet(cfg.cameras);
  const auto counts = experiment::visible_counts(trace, fleet);
  CsvTable vis;
  vis.header = {"t", "active"};
  for (std::size_t k = 0; k < fleet.size(); ++k) vis.header.push_back("cam" + std::to_string(k));
  for (int s = 0; s < trace.step_count(); ++s) {
    const double t = s * trace.time_step_s;
    std::vector<std::string> row{number(t), std::to_string(trace.active_at_step(s).size())};
    for (const auto& c : counts) row.push_back(std::to_string(c[s]));
    vis.rows.push_back(std::move(row));
  }
  {
    auto f = open_out(dir / "visible_counts.csv");
    vis.write(f);
  }

  std::vector<age::AoptReport> reports;
  const auto summary = experiment::run_age_trial(trace, fleet, {}, age_trial(cfg), &reports);
  {
    auto f = open_out(dir / "aopt.csv");
    age::write_report_header(f);
    for (std::size_t s = 0; s < reports.size(); ++s) {
      age::write_report_row(f, static_cast<double>(s) * trace.time_step_s, reports[s]);
    }
  }
  std::cout << "tracks=" << trace.tracks.size() << " steps=" << trace.step_count()
            << " mean_active=" << number(scenario::mean_active(trace), 6)
            << " mean_aopt_cycle=" << number(summary.mean_aopt_cycle, 6) << "\n"
            << "wrote " << trace_path.string() << "\n";
  return 0;
}

// --- calibrate ------------------------------------------------------------

int cmd_calibrate(const Common& common, const std::string& trace_path, std::optional<double> budget_kb,
                  std::optional<int> top_n) {
  auto cfg = common.load();
  if (budget_kb) cfg.calibration.budget_kb = *budget_kb;
  if (top_n) cfg.calibration.top_n = *top_n;
  cfg.validate();
  const auto trace = load_or_make_trace(cfg, trace_path);
  const auto fleet = experiment::build_fleet(cfg.cameras);
  const auto r = experiment::run_calibration_trial(trace, fleet, calibration_trial(cfg),
                                                   Seeds(cfg.master_seed).trial);
  CsvTable t;
  t.header = {"camera", "epoch", "reference", "status", "rotation_error_deg", "translation_error_m",
              "extrinsic_error_pct", "quantization_bits", "cost_bits", "keypoints_sent",
              "correspondences", "correct_matches", "shortfall_frames"};
  for (const auto& c : r.cameras) {
    std::vector<std::string> row{std::to_string(c.camera), std::to_string(c.epoch),
                                 std::to_string(c.reference), c.ok ? "ok" : c.error};
    if (c.ok) {
      const auto& p = c.report;
      for (double v : {p.rotation_error_deg, p.translation_error_m, p.extrinsic_error_pct}) row.push_back(number(v));
      for (long long v : {static_cast<long long>(p.quantization_bits), static_cast<long long>(p.cost_bits),
                          static_cast<long long>(p.keypoints_sent), static_cast<long long>(p.correspondences),
                          static_cast<long long>(p.correct_matches), static_cast<long long>(p.shortfall_frames)}) {
        row.push_back(std::to_string(v));
      }
    } else {
      row.resize(t.header.size());
    }
    t.rows.push_back(std::move(row));
  }
  const fs::path out = fs::path(cfg.output_dir) / "calibration.csv";
  auto f = open_out(out);
  t.write(f);
  std::cout << "mean_rotation_error_deg=" << number(r.mean_rotation_error_deg, 6)
            << " mean_translation_error_m=" << number(r.mean_translation_error_m, 6)
            << " failures=" << r.failures << "\nwrote " << out.string() << "\n";
  return 0;
}

// --- optimize -------------------------------------------------------------

int cmd_optimize(const Common& common, bool joint, int step, bool realized) {
  const auto cfg = common.load();
  const Seeds seeds(cfg.master_seed);
  const auto link = realized ? realized_link(cfg, seeds.link) : median_link(cfg);

  sched::SubproblemInput p2{link, cfg.bounds, cfg.proxies.calibration, cfg.weights,
                            cfg.age.calibration_prob, cfg.grid, cfg.proxies.calibration_threshold};
  sched::SubproblemInput p3 = p2;
  p3.proxy = effective_streaming_proxy(cfg);
  p3.threshold = cfg.proxies.streaming_threshold;

  std::vector<sched::SurfacePoint> s2, s3;
  const auto a = sched::solve_p2(p2, &s2);
  const auto b = sched::solve_p3(p3, &s3);
  const fs::path dir = cfg.output_dir;
  write_surface(dir / "p2_surface.csv", s2);
  write_surface(dir / "p3_surface.csv", s3);

  nlohmann::json j = {{"link", {{"bandwidth_hz", link.bandwidth_hz},
                                {"channel_gain", link.channel_gain},
                                {"noise_psd_w_per_hz", link.noise_psd_w_per_hz},
                                {"capacity_bps", channel::capacity(link)}}},
                      {"calibration", solution_json(a)},
                      {"streaming", solution_json(b)}};
  if (joint) {
    const auto trace = experiment::make_scene(cfg.scenario, seeds.scene);
    require(step >= 0 && step < trace.step_count(), ErrorCode::kValidation, "step", "outside the trace");
    const auto counts = experiment::visible_counts(trace, experiment::build_fleet(cfg.cameras));
    std::vector<age::AgentAgeInputs> agents;
    for (const auto& c : counts) agents.push_back({1.0, 0.0, c[step]});
    sched::JointInput in;
    in.link = link;
    in.bounds = cfg.bounds;
    in.calibration_proxy = cfg.proxies.calibration;
    in.streaming_proxy = p3.proxy;
    in.weights = cfg.weights;
    in.p1 = cfg.age.calibration_prob;
    in.calibration_threshold = cfg.proxies.calibration_threshold;
    in.streaming_threshold = cfg.proxies.streaming_threshold;
    const auto js = sched::solve_p1_joint(in, agents, cfg.age.count_threshold);
    j["joint"] = {{"step", step},
                  {"g_khat", js.g_khat},
                  {"objective", js.objective},
                  {"calibration", solution_json(js.calibration)},
                  {"streaming", solution_json(js.streaming)}};
  }
  write_json(dir / "optimize.json", j);
  std::cout << j.dump(2) << "\n";
  return 0;
}

// --- fuse -----------------------------------------------------------------

int cmd_fuse(const Common& common, const std::string& trace_path, const std::string& subset_text,
             const std::string& maps, std::optional<double> loss_rate, const std::string& policy) {
  auto cfg = common.load();
  if (loss_rate) cfg.fusion.loss_rate = *loss_rate;
  if (!policy.empty()) cfg.fusion.mask_policy = experiment::mask_policy_from_string(policy);
  cfg.validate();
  const auto trace = load_or_make_trace(cfg, trace_path);
  const auto fleet = experiment::build_fleet(cfg.cameras);
  const auto subset = subset_text.empty() ? std::vector<std::size_t>{}
                                          : experiment::parse_subset(subset_text, fleet.size());
  const auto warps = experiment::build_warps(fleet, trace.arena, cfg.fusion.features.stride_px);
  const fs::path dir = cfg.output_dir;

  auto det = open_out(dir / "detections.csv");
  fusion::write_detections_header(det);
  bool first = true;
  const auto sink = [&](int step, const fusion::OccupancyMap& map, std::span<const fusion::Detection> d) {
    fusion::write_detections(det, step, d);
    if (maps == "all" || (maps == "first" && first)) {
      auto f = open_out(dir / ("occupancy_" + std::to_string(step) + ".pgm"));
      fusion::write_pgm(f, map);
    }
    first = false;
  };
  const auto r = experiment::run_fusion_trial(trace, fleet, warps, subset, fusion_trial(cfg),
                                              Seeds(cfg.master_seed).trial, sink);
  CsvTable t;
  t.header = {"moda", "true_positives", "misses", "false_positives", "ground_truth", "loss_penalty",
              "comm_cost_kb"};
  t.rows.push_back({number(r.moda.moda_percent), std::to_string(r.moda.true_positives),
                    std::to_string(r.moda.misses), std::to_string(r.moda.false_positives),
                    std::to_string(r.moda.ground_truth_count), number(r.mean_loss_penalty),
                    number(r.comm_cost_bits / kBitsPerKB)});
  auto f = open_out(dir / "fusion_summary.csv");
  t.write(f);
  std::cout << "moda=" << number(r.moda.moda_percent, 6) << " misses=" << r.moda.misses
            << " false_positives=" << r.moda.false_positives << "\n";
  return 0;
}

// --- sweep ----------------------------------------------------------------

int cmd_sweep(const Common& common, const std::vector<std::string>& presets, const std::string& axis,
              bool all, const std::vector<std::string>& values, std::optional<int> reps,
              std::optional<int> workers) {
  auto cfg = common.load();
  if (workers) cfg.workers = *workers;
  std::vector<SweepSpec> specs;
  for (const auto& p : presets) {
    const auto it = std::find_if(cfg.sweeps.begin(), cfg.sweeps.end(), [&](const auto& s) { return s.name == p; });
    specs.push_back(it != cfg.sweeps.end() ? *it : sweep::preset(p));
  }
  if (!axis.empty()) {
    const auto a = sweep_axis_from_string(axis);
    for (const auto& s : sweep::resolve(cfg)) {
      if (s.axis == a) specs.push_back(s);
    }
    if (specs.empty()) {
      SweepSpec s;
      s.name = axis;
      s.axis = a;
      specs.push_back(s);
      require(!values.empty(), ErrorCode::kValidation, "values", "no preset for this axis; pass --values");
    }
  }
  if (all) {
    const auto r = sweep::resolve(cfg);
    specs.insert(specs.end(), r.begin(), r.end());
  }
  require(!specs.empty(), ErrorCode::kValidation, "sweep", "pass --preset, --axis or --all");
  for (auto& s : specs) {
    if (!values.empty()) s.values = values;
    if (reps) s.repetitions = *reps;
    s.validate();
  }
  const auto paths = sweep::run_to_directory(cfg, specs, fs::path(cfg.output_dir) / "sweeps");
  for (const auto& p : paths) std::cout << "wrote " << p.string() << "\n";
  return 0;
}

// --- report ---------------------------------------------------------------

int cmd_report(const std::vector<std::string>& inputs, const std::string& out_dir) {
  std::vector<fs::path> files;
  for (const auto& in : inputs) {
    const fs::path p(in);
    if (fs::is_directory(p)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::directory_iterator(p)) {
        const auto name = e.path().filename().string();
        if (e.path().extension() == ".csv" && name.find("_summary") == std::string::npos) found.push_back(e.path());
      }
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else {
      files.push_back(p);
    }
  }
  require(!files.empty(), ErrorCode::kValidation, "inputs", "no sweep CSVs found");
  for (const auto& path : files) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorCode::kIo, "cannot open sweep CSV", path.string());
    const auto summary = sweep::summarize(CsvTable::read(f));
    const auto name = path.stem().string();
    const fs::path dir = out_dir.empty() ? path.parent_path() : fs::path(out_dir);
    auto o = open_out(dir / (name + "_summary.csv"));
    summary.write(o);
    std::cout << sweep::render(name, summary) << "\n";
  }
  return 0;
}

void print_error(const std::string& code, const std::string& field, const std::string& message) {
  nlohmann::json j = {{"error", {{"code", code}, {"field", field}, {"message", message}}}};
  std::cerr << j.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Collaborative perception simulator"};
  app.require_subcommand(1);
  Common common;
  std::uint64_t seed = 0;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", common.config_path, "Run config (JSON)")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Override master_seed");
    sub->add_option("-o,--out", common.out_dir, "Override output_dir");
  };

  std::string trace_out, trace_in, subset, maps = "first", policy, axis, report_out;
  std::optional<double> budget_kb, loss_rate;
  std::optional<int> top_n, reps, workers;
  std::vector<std::string> presets, values, inputs;
  bool joint = false, all = false, realized = false, list = false;
  int step = 0;

  auto* sim = app.add_subcommand("simulate", "Generate a scene trace, visible counts and per-step AoPT");
  add_common(sim);
  sim->add_option("--trace", trace_out, "Trace path (default <out>/trace.txt)");

  auto* cal = app.add_subcommand("calibrate", "Recalibrate every camera; writes calibration.csv");
  add_common(cal);
  cal->add_option("--trace", trace_in, "Read this trace instead of generating one");
  cal->add_option("--budget-kb", budget_kb, "Calibration budget");
  cal->add_option("--top-n", top_n, "Matches kept per frame");

  auto* opt = app.add_subcommand("optimize", "Solve the calibration and streaming subproblems");
  add_common(opt);
  opt->add_flag("--joint", joint, "Also run the joint reference solver");
  opt->add_option("--step", step, "Trace step whose visible counts feed --joint");
  opt->add_flag("--realized", realized, "Use a shadowing draw instead of the median link");

  auto* fu = app.add_subcommand("fuse", "Fuse camera views and score detections");
  add_common(fu);
  fu->add_option("--trace", trace_in, "Read this trace instead of generating one");
  fu->add_option("--subset", subset, "Cameras, e.g. 0+1+2 or all");
  fu->add_option("--maps", maps, "Occupancy PGMs to write")->check(CLI::IsMember({"none", "first", "all"}));
  fu->add_option("--loss-rate", loss_rate, "Fraction of views lost per frame");
  fu->add_option("--policy", policy, "Mask policy")->check(CLI::IsMember({"none", "priority", "random"}));

  auto* sw = app.add_subcommand("sweep", "Run named sweeps; writes <out>/sweeps/<name>.csv");
  add_common(sw);
  sw->add_option("--preset", presets, "Preset name (repeatable)");
  sw->add_option("--axis", axis, "Every sweep over this axis");
  sw->add_flag("--all", all, "Every sweep in the config, or every preset");
  sw->add_flag("--list", list, "List preset names and exit");
  sw->add_option("--values", values, "Override the grid")->delimiter(',');
  sw->add_option("--reps", reps, "Override repetitions");
  sw->add_option("--workers", workers, "Worker threads");

  auto* rep = app.add_subcommand("report", "Summarize sweep CSVs into tables");
  rep->add_option("inputs", inputs, "Sweep CSVs or directories")->required();
  rep->add_option("-o,--out", report_out, "Where to write <name>_summary.csv (default beside input)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    print_error("usage", "", e.what());
    return 64;
  }
  for (auto* sub : {sim, cal, opt, fu, sw}) {
    if (sub->parsed() && sub->count("--seed")) common.seed = seed;
  }

  try {
    if (*sim) return cmd_simulate(common, trace_out);
    if (*cal) return cmd_calibrate(common, trace_in, budget_kb, top_n);
    if (*opt) return cmd_optimize(common, joint, step, realized);
    if (*fu) return cmd_fuse(common, trace_in, subset, maps, loss_rate, policy);
    if (*sw) {
      if (list) {
        for (const auto& n : sweep::preset_names()) std::cout << n << "\n";
        return 0;
      }
      return cmd_sweep(common, presets, axis, all, values, reps, workers);
    }
    if (*rep) return cmd_report(inputs, report_out);
  } catch (const Error& e) {
    print_error(std::string(to_string(e.code())), e.field(), e.what());
    return 2;
  } catch (const std::exception& e) {
    print_error("internal", "", e.what());
    return 3;
  }
  return 0;
}
