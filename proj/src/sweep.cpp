#include "cpsim/sweep.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "cpsim/error.hpp"

namespace cpsim::sweep {

namespace {

constexpr std::uint64_t kSceneStream = 1;
constexpr std::uint64_t kTrialStream = 2;
constexpr std::uint64_t kLinkStream = 3;

SweepSpec make(std::string name, SweepAxis axis, std::vector<std::string> values, int reps,
               std::string target = "calibration", std::vector<double> budgets = {}) {
  SweepSpec s;
  s.name = std::move(name);
  s.axis = axis;
  s.values = std::move(values);
  s.repetitions = reps;
  s.target = std::move(target);
  s.budgets_kb = std::move(budgets);
  return s;
}

std::string budget_suffix(double kb) { return "_" + number(kb) + "kb"; }

// Everything a point needs that does not depend on the axis value.
struct Context {
  const RunConfig& cfg;
  const SweepSpec& spec;
  std::vector<calib::CameraModel> fleet;
  std::vector<fusion::GroundWarp> warps;
};

bool needs_warps(const SweepSpec& s) {
  return s.axis == SweepAxis::kLossRate || s.axis == SweepAxis::kFovSubset ||
         (s.axis == SweepAxis::kBudget && s.target == "streaming");
}


std::vector<double> calibration_metrics(const experiment::CalibrationTrialResult& r) {
  std::size_t corr = 0, correct = 0;
  for (const auto& c : r.cameras) {
    corr += c.report.correspondences;
    correct += c.report.correct_matches;
  }
  return {r.mean_rotation_error_deg,
          r.mean_translation_error_m,
          r.mean_extrinsic_error_pct,
          r.mean_quantization_bits,
          r.mean_cost_bits / kBitsPerKB,
          corr ? static_cast<double>(correct) / static_cast<double>(corr) : std::nan(""),
          static_cast<double>(r.failures)};
}

std::vector<double> evaluate(const Context& ctx, const std::string& value, int rep) {
  const auto& cfg = ctx.cfg;
  const auto& spec = ctx.spec;
  const std::uint64_t rep_seed = derive_seed(cfg.master_seed, static_cast<std::uint64_t>(rep) + 1);
  const std::uint64_t trial_seed = derive_seed(rep_seed, kTrialStream);
  const auto scene = [&] { return experiment::make_scene(cfg.scenario, derive_seed(rep_seed, kSceneStream)); };
  const auto x = [&] { return parse_double(value, "values"); };

  switch (spec.axis) {
    case SweepAxis::kBudget: {
      if (spec.target == "calibration") {
        auto t = calibration_trial(cfg);
        require(x() > 0.0, ErrorCode::kValidation, "values", "budget must be > 0");
        t.options.budget_bits = x() * kBitsPerKB;
        t.calibration_interval_s = 0.0;
        return calibration_metrics(experiment::run_calibration_trial(scene(), ctx.fleet, t, trial_seed));
      }
      if (spec.target == "latency") {
        const auto link = realized_link(cfg, derive_seed(rep_seed, kLinkStream));
        const double c = channel::capacity(link);
        const double tx = channel::transmission_delay(x() * kBitsPerKB, link);
        return {c / kBitsPerKB, tx * 1e3, link.inference_delay_s * 1e3, (tx + link.inference_delay_s) * 1e3};
      }
      const auto trace = scene();
      auto f = fusion_trial(cfg);
      f.rate_bits = x() * kBitsPerKB;
      const auto fr = experiment::run_fusion_trial(trace, ctx.fleet, ctx.warps, {}, f, trial_seed);
      auto a = age_trial(cfg);
      a.packet_bits = f.rate_bits;
      const auto ar = experiment::run_age_trial(trace, ctx.fleet, {}, a);
      return {fr.moda.moda_percent, static_cast<double>(fr.moda.false_positives),
              static_cast<double>(fr.moda.misses), fr.comm_cost_bits / kBitsPerKB, ar.mean_aopt_cycle,
              ar.total_delay_s};
    }
    case SweepAxis::kTopN: {
      auto t = calibration_trial(cfg);
      const double n = x();
      require(n >= 1.0 && n == std::floor(n), ErrorCode::kValidation, "values", "top_n must be a positive integer");
      t.options.top_n = static_cast<std::size_t>(n);
      t.calibration_interval_s = 0.0;
      return calibration_metrics(experiment::run_calibration_trial(scene(), ctx.fleet, t, trial_seed));
    }
    case SweepAxis::kCalibrationInterval: {
      const auto trace = scene();
      auto t = calibration_trial(cfg);
      t.calibration_interval_s = x();
      require(t.calibration_interval_s >= 0.0, ErrorCode::kValidation, "values", "interval must be >= 0");
      std::vector<double> out;
      const auto budgets = spec.budgets_kb.empty() ? std::vector<double>{cfg.calibration.budget_kb} : spec.budgets_kb;
      for (double b : budgets) {
        t.options.budget_bits = b * kBitsPerKB;
        const auto r = experiment::run_calibration_trial(trace, ctx.fleet, t, trial_seed);
        out.push_back(r.mean_rotation_error_deg);
        out.push_back(r.mean_translation_error_m);
      }
      return out;
    }
    case SweepAxis::kCapacity:
    case SweepAxis::kSamplingInterval: {
      auto a = age_trial(cfg);
      if (spec.axis == SweepAxis::kCapacity) {
        a.capacity_bps = x() * kBitsPerKB;
      } else {
        a.sampling_interval_s = x();
      }
      const auto r = experiment::run_age_trial(scene(), ctx.fleet, {}, a);
      return {r.mean_aopt_cycle,
              r.mean_aopt_streaming,
              r.mean_aopt_calibration,
              r.total_delay_s,
              std::max(a.sampling_interval_s, a.packet_bits / a.capacity_bps),
              r.idle_fraction};
    }
    case SweepAxis::kLossRate: {
      const auto trace = scene();
      auto f = fusion_trial(cfg);
      f.loss_rate = x();
      f.policy = experiment::MaskPolicy::kPriority;
      const auto p = experiment::run_fusion_trial(trace, ctx.fleet, ctx.warps, {}, f, trial_seed);
      f.policy = experiment::MaskPolicy::kRandom;
      const auto r = experiment::run_fusion_trial(trace, ctx.fleet, ctx.warps, {}, f, trial_seed);
      return {p.moda.moda_percent, r.moda.moda_percent, p.moda.moda_percent - r.moda.moda_percent,
              p.mean_loss_penalty, static_cast<double>(fusion::masked_count(ctx.fleet.size(), f.loss_rate))};
    }
    case SweepAxis::kFovSubset: {
      const auto trace = scene();
      const auto subset = experiment::parse_subset(value, ctx.fleet.size());
      const auto counts = experiment::visible_counts(trace, ctx.fleet);
      double sum = 0.0, peak = 0.0, n = 0.0;
      for (auto k : subset) {
        for (int g : counts[k]) {
          sum += g;
          peak = std::max(peak, static_cast<double>(g));
          n += 1.0;
        }
      }
      auto f = fusion_trial(cfg);
      f.policy = experiment::MaskPolicy::kNone;
      const auto fr = experiment::run_fusion_trial(trace, ctx.fleet, ctx.warps, subset, f, trial_seed);
      const auto ar = experiment::run_age_trial(trace, ctx.fleet, subset, age_trial(cfg));
      return {sum / n, peak, cfg.fusion.rate_kb * static_cast<double>(subset.size()), ar.mean_aopt_cycle,
              fr.moda.moda_percent};
    }
  }
  return {};
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? std::nan("") : s / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"calibration_budget", "top_n",    "calibration_interval", "visible_counts", "stream_rate",
          "capacity",           "sampling_interval", "loss_rate",   "latency",        "fov_table"};
}

SweepSpec preset(const std::string& name) {
  using A = SweepAxis;
  if (name == "calibration_budget") return make(name, A::kBudget, {"10", "15", "20", "25", "30"}, 5);
  if (name == "top_n") return make(name, A::kTopN, {"3", "5", "8", "10"}, 5);
  if (name == "calibration_interval") {
    return make(name, A::kCalibrationInterval, {"10", "20", "30", "40", "50", "60"}, 3, "calibration",
                {10.0, 30.0});
  }
  if (name == "visible_counts") return make(name, A::kFovSubset, {"0", "1", "2", "3", "4", "5", "6"}, 3);
  if (name == "stream_rate") {
    return make(name, A::kBudget, {"5", "10", "15", "20", "25", "30"}, 3, "streaming");
  }
  if (name == "capacity") return make(name, A::kCapacity, {"50", "100", "200", "400", "800"}, 10);
  if (name == "sampling_interval") {
    return make(name, A::kSamplingInterval, {"0.5", "1", "1.5", "2", "2.5"}, 10);
  }
  if (name == "loss_rate") return make(name, A::kLossRate, {"0", "0.1", "0.2", "0.3", "0.4"}, 20);
  if (name == "latency") return make(name, A::kBudget, {"10", "15.36", "18.69", "30"}, 10, "latency");
  if (name == "fov_table") return make(name, A::kFovSubset, {"0", "1", "2", "0+1+2", "all"}, 3);
  throw Error(ErrorCode::kValidation, "unknown sweep preset '" + name + "'", "preset");
}

std::vector<SweepSpec> resolve(const RunConfig& cfg) {
  if (!cfg.sweeps.empty()) return cfg.sweeps;
  std::vector<SweepSpec> out;
  for (const auto& n : preset_names()) out.push_back(preset(n));
  return out;
}

std::vector<std::string> metric_columns(const SweepSpec& spec) {
  static const std::vector<std::string> calibration = {
      "rotation_error_deg", "translation_error_m", "extrinsic_error_pct", "quantization_bits",
      "cost_kb",            "correct_match_rate",  "failed_cameras"};
  switch (spec.axis) {
    case SweepAxis::kBudget:
      if (spec.target == "calibration") return calibration;
      if (spec.target == "latency") return {"capacity_kbps", "tx_delay_ms", "inference_delay_ms", "total_delay_ms"};
      return {"moda", "false_positives", "misses", "comm_cost_kb", "aopt_cycle", "total_delay_s"};
    case SweepAxis::kTopN: return calibration;
    case SweepAxis::kCalibrationInterval: {
      std::vector<std::string> cols;
      const auto budgets = spec.budgets_kb.empty() ? std::vector<double>{0.0} : spec.budgets_kb;
      for (double b : budgets) {
        const auto suffix = spec.budgets_kb.empty() ? std::string() : budget_suffix(b);
        cols.push_back("rotation_error_deg" + suffix);
        cols.push_back("translation_error_m" + suffix);
      }
      return cols;
    }
    case SweepAxis::kCapacity:
    case SweepAxis::kSamplingInterval:
      return {"aopt_cycle", "aopt_streaming", "aopt_calibration", "total_delay_s", "effective_interval_s",
              "idle_fraction"};
    case SweepAxis::kLossRate:
      return {"moda_priority", "moda_random", "moda_gain", "loss_penalty", "masked_views"};
    case SweepAxis::kFovSubset:
      return {"mean_visible", "max_visible", "comm_cost_kb", "aopt_cycle", "moda"};
  }
  return {};
}

CsvTable run_sweep(const RunConfig& cfg, const SweepSpec& spec) {
  cfg.validate();
  spec.validate();
  if (spec.axis == SweepAxis::kBudget) {
    require(spec.target == "calibration" || spec.target == "streaming" || spec.target == "latency",
            ErrorCode::kValidation, "target", "unknown budget target");
  }
  Context ctx{cfg, spec, experiment::build_fleet(cfg.cameras), {}};
  if (needs_warps(spec)) {
    ctx.warps = experiment::build_warps(ctx.fleet, cfg.scenario.arena, cfg.fusion.features.stride_px);
  }
  const auto columns = metric_columns(spec);

  const std::size_t n_points = spec.values.size() * static_cast<std::size_t>(spec.repetitions);
  std::vector<std::vector<std::string>> rows(n_points);
  std::atomic<std::size_t> next{0};
  const auto work = [&] {
    for (std::size_t i = next++; i < n_points; i = next++) {
      const auto& value = spec.values[i / spec.repetitions];
      const int rep = static_cast<int>(i % spec.repetitions);
      std::vector<std::string> row{value, std::to_string(rep)};
      try {
        const auto metrics = evaluate(ctx, value, rep);
        row.push_back("ok");
        for (double m : metrics) row.push_back(std::isnan(m) ? std::string() : number(m));
      } catch (const Error& e) {
        row.push_back(std::string(to_string(e.code())));
        row.resize(3 + columns.size());
      } catch (const std::exception&) {
        row.push_back("internal");
        row.resize(3 + columns.size());
      }
      rows[i] = std::move(row);
    }
  };
  const int workers = std::max(1, std::min<int>(cfg.workers, static_cast<int>(n_points)));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  CsvTable table;
  table.header = {"axis_value", "repetition", "status"};
  table.header.insert(table.header.end(), columns.begin(), columns.end());
  table.rows = std::move(rows);
  return table;
}

std::vector<std::filesystem::path> run_to_directory(const RunConfig& cfg,
                                                    const std::vector<SweepSpec>& specs,
                                                    const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create output directory: " + ec.message(), dir.string());
  std::vector<std::filesystem::path> out;
  for (const auto& spec : specs) {
    const auto table = run_sweep(cfg, spec);
    const auto path = dir / (spec.name + ".csv");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorCode::kIo, "cannot write sweep output", path.string());
    table.write(f);
    out.push_back(path);
  }
  return out;
}

CsvTable summarize(const CsvTable& sweep) {
  const auto value_col = sweep.column("axis_value");
  const auto status_col = sweep.column("status");
  std::vector<std::size_t> metric_cols;
  for (std::size_t c = 0; c < sweep.header.size(); ++c) {
    if (c != value_col && c != status_col && sweep.header[c] != "repetition") metric_cols.push_back(c);
  }
  std::vector<std::string> order;
  std::map<std::string, std::vector<std::vector<double>>> values;
  std::map<std::string, std::pair<int, int>> counts;
  for (const auto& row : sweep.rows) {
    const auto& v = row[value_col];
    if (!values.count(v)) {
      order.push_back(v);
      values[v].resize(metric_cols.size());
    }
    if (row[status_col] != "ok") {
      ++counts[v].second;
      continue;
    }
    ++counts[v].first;
    for (std::size_t m = 0; m < metric_cols.size(); ++m) {
      const auto& cell = row[metric_cols[m]];
      if (!cell.empty()) values[v][m].push_back(parse_double(cell, sweep.header[metric_cols[m]]));
    }
  }
  CsvTable out;
  out.header = {"axis_value", "n_ok", "n_failed"};
  for (auto c : metric_cols) {
    out.header.push_back(sweep.header[c] + "_mean");
    out.header.push_back(sweep.header[c] + "_sd");
  }
  for (const auto& v : order) {
    std::vector<std::string> row{v, std::to_string(counts[v].first), std::to_string(counts[v].second)};
    for (const auto& series : values[v]) {
      if (series.empty()) {
        row.emplace_back();
        row.emplace_back();
      } else {
        row.push_back(number(mean_of(series)));
        row.push_back(number(sd_of(series)));
      }
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

std::string render(const std::string& name, const CsvTable& summary) {
  struct Col {
    std::string metric;
    std::string title;
  };
  std::vector<Col> cols;
  std::string first = "value";
  const auto has = [&](const std::string& m) {
    for (const auto& h : summary.header) {
      if (h == m + "_mean") return true;
    }
    return false;
  };
  if (has("tx_delay_ms")) {
    first = "Budget (KB)";
    cols = {{"tx_delay_ms", "Transmission (ms)"}, {"inference_delay_ms", "Inference (ms)"},
            {"total_delay_ms", "Total (ms)"}};
  } else if (has("comm_cost_kb") && has("moda") && has("mean_visible")) {
    first = "Cameras";
    cols = {{"comm_cost_kb", "Comm. cost (KB)"}, {"aopt_cycle", "AoPT"}, {"moda", "MODA (%)"}};
  } else {
    for (std::size_t c = 3; c < summary.header.size(); c += 2) {
      const auto& h = summary.header[c];
      const auto m = h.substr(0, h.size() - 5);
      cols.push_back({m, m});
    }
  }
  std::vector<std::vector<std::string>> cells;
  cells.push_back({first});
  for (const auto& c : cols) cells[0].push_back(c.title);
  for (const auto& row : summary.rows) {
    std::vector<std::string> line{row[0]};
    for (const auto& c : cols) {
      const auto mi = summary.column(c.metric + "_mean");
      const auto si = summary.column(c.metric + "_sd");
      if (row[mi].empty()) {
        line.push_back("-");
        continue;
      }
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.2f ± %.2f", parse_double(row[mi], c.metric),
                    parse_double(row[si], c.metric));
      line.push_back(buf);
    }
    cells.push_back(std::move(line));
  }
  // Column widths in code points so the ± sign does not skew alignment.
  const auto width = [](const std::string& s) {
    std::size_t n = 0;
    for (unsigned char ch : s) n += (ch & 0xC0) != 0x80;
    return n;
  };
  std::vector<std::size_t> w(cells[0].size(), 0);
  for (const auto& line : cells) {
    for (std::size_t i = 0; i < line.size(); ++i) w[i] = std::max(w[i], width(line[i]));
  }
  std::ostringstream out;
  out << name << '\n';
  for (std::size_t r = 0; r < cells.size(); ++r) {
    for (std::size_t i = 0; i < cells[r].size(); ++i) {
      out << (i ? " | " : "") << cells[r][i] << std::string(w[i] - width(cells[r][i]), ' ');
    }
    out << '\n';
    if (r == 0) {
      for (std::size_t i = 0; i < w.size(); ++i) out << (i ? "-+-" : "") << std::string(w[i], '-');
      out << '\n';
    }
  }
  return out.str();
}

}  // namespace cpsim::sweep
