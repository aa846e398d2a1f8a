#include "cpsim/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>

#include "cpsim/error.hpp"
#include "cpsim/textio.hpp"

namespace cpsim::scenario {

namespace {
constexpr std::uint64_t kArrivalStream = 1;
constexpr std::uint64_t kMotionStream = 2;
constexpr std::uint64_t kIdentityStream = 3;
constexpr std::uint64_t kCrowdStream = 4;
constexpr std::uint64_t kSlotStream = 5;

double reflect(double x, double hi) {
  // Fold into [0, hi]; loops only for steps longer than the arena.
  while (x < 0.0 || x > hi) {
    if (x < 0.0) x = -x;
    if (x > hi) x = 2.0 * hi - x;
  }
  return x;
}

struct Interval {
  double begin;
  double end;
};

// Busy periods of the infinite-server system, clipped to [0, horizon].
std::vector<Interval> busy_periods(std::vector<Arrival> arrivals, double horizon) {
  std::sort(arrivals.begin(), arrivals.end(),
            [](const Arrival& a, const Arrival& b) { return a.time_s < b.time_s; });
  std::vector<Interval> merged;
  for (const auto& a : arrivals) {
    const double b = std::max(a.time_s, 0.0);
    const double e = std::min(a.time_s + a.dwell_s, horizon);
    if (e <= b) continue;
    if (!merged.empty() && b <= merged.back().end) {
      merged.back().end = std::max(merged.back().end, e);
    } else {
      merged.push_back({b, e});
    }
  }
  return merged;
}
}  // namespace

void ArrivalModel::validate() const {
  require(arrival_rate_per_s >= 0.0, ErrorCode::kValidation, "arrival_rate_per_s",
          "must be >= 0");
  require(dwell_log_sigma >= 0.0, ErrorCode::kValidation, "dwell_log_sigma", "must be >= 0");
  require(std::isfinite(offered_load(*this)), ErrorCode::kValidation, "dwell_log_mean",
          "offered load must be finite");
}

double offered_load(const ArrivalModel& m) {
  return m.arrival_rate_per_s *
         std::exp(m.dwell_log_mean + 0.5 * m.dwell_log_sigma * m.dwell_log_sigma);
}

bool Arena::contains(const Vec2& p) const {
  return p.x() >= 0.0 && p.x() <= width_m && p.y() >= 0.0 && p.y() <= length_m;
}

Vec2 Arena::cell_centre(int ix, int iy) const {
  const double c = cell_m();
  return {(ix + 0.5) * c, (iy + 0.5) * c};
}

Arena Arena::with_cell(double width_m, double length_m, double cell_m) {
  Arena a;
  a.width_m = width_m;
  a.length_m = length_m;
  a.grid_w = static_cast<int>(std::lround(width_m / cell_m));
  a.grid_h = static_cast<int>(std::lround(length_m / cell_m));
  a.validate();
  return a;
}

void Arena::validate() const {
  require(width_m > 0.0 && length_m > 0.0, ErrorCode::kValidation, "arena",
          "dimensions must be positive");
  require(grid_w > 0 && grid_h > 0, ErrorCode::kValidation, "arena.grid",
          "grid must be non-empty");
  const double cw = width_m / grid_w;
  const double ch = length_m / grid_h;
  require(std::abs(cw - ch) <= 1e-12 * cw, ErrorCode::kValidation, "arena.grid",
          "cells must be square (width/grid_w == length/grid_h)");
}

void DescriptorModel::validate() const {
  require(dim > 0, ErrorCode::kValidation, "descriptor.dim", "must be positive");
  require(identity_spread >= 0.0, ErrorCode::kValidation, "descriptor.identity_spread",
          "must be >= 0");
  require(view_noise >= 0.0, ErrorCode::kValidation, "descriptor.view_noise", "must be >= 0");
  require(clip > 0.0, ErrorCode::kValidation, "descriptor.clip", "must be positive");
}

std::optional<Vec2> TargetTrack::position_at_step(int step) const {
  const int i = step - first_step;
  if (i < 0 || i >= static_cast<int>(positions.size())) return std::nullopt;
  return positions[static_cast<std::size_t>(i)];
}

int ScenarioTrace::step_count() const {
  return static_cast<int>(std::floor(duration_s / time_step_s + 1e-9));
}

int ScenarioTrace::step_at(double t) const {
  const int s = static_cast<int>(std::lround(t / time_step_s));
  return std::clamp(s, 0, std::max(0, step_count() - 1));
}

std::vector<std::size_t> ScenarioTrace::active_at_step(int step) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    if (tracks[i].position_at_step(step)) out.push_back(i);
  }
  return out;
}

int ScenarioTrace::active_count(double t) const {
  int n = 0;
  for (const auto& tr : tracks) {
    if (tr.arrival_time_s <= t && t < tr.departure_time_s()) ++n;
  }
  return n;
}

double warmup_horizon(const ArrivalModel& model) {
  if (model.arrival_rate_per_s <= 0.0) return 0.0;
  return std::exp(model.dwell_log_mean + 4.0 * model.dwell_log_sigma);
}

std::vector<Arrival> sample_arrivals(const ArrivalModel& model, double t0, double t1, Rng& rng) {
  std::vector<Arrival> out;
  if (model.arrival_rate_per_s <= 0.0) return out;
  double t = t0;
  while (true) {
    t += rng.exponential(model.arrival_rate_per_s);
    if (t >= t1) break;
    const double dwell = std::exp(model.dwell_log_mean + model.dwell_log_sigma * rng.normal());
    out.push_back({t, dwell});
  }
  return out;
}

Descriptor identity_descriptor(std::uint64_t seed, int id, const DescriptorModel& model) {
  Rng crowd(derive_seed(seed, kCrowdStream));
  Rng own(derive_seed(derive_seed(seed, kIdentityStream), static_cast<std::uint64_t>(id)));
  Descriptor d(static_cast<std::size_t>(model.dim));
  for (auto& v : d) v = crowd.normal() + model.identity_spread * own.normal();
  return d;
}

ScenarioTrace generate(const ArrivalModel& model, const Arena& arena, double duration_s,
                       double time_step_s, std::uint64_t seed, const MotionModel& motion,
                       const DescriptorModel& descriptors) {
  model.validate();
  arena.validate();
  descriptors.validate();
  require(duration_s > 0.0, ErrorCode::kValidation, "duration_s", "must be positive");
  require(time_step_s > 0.0, ErrorCode::kValidation, "time_step_s", "must be positive");
  require(motion.walk_speed_m_per_s >= 0.0, ErrorCode::kValidation, "walk_speed_m_per_s",
          "must be >= 0");

  ScenarioTrace trace;
  trace.duration_s = duration_s;
  trace.time_step_s = time_step_s;
  trace.rng_seed = seed;
  trace.arena = arena;
  trace.descriptors = descriptors;

  Rng arrivals_rng(derive_seed(seed, kArrivalStream));
  Rng motion_rng(derive_seed(seed, kMotionStream));
  const auto arrivals =
      sample_arrivals(model, -warmup_horizon(model), duration_s, arrivals_rng);

  const int steps = trace.step_count();
  const double walk_sd = motion.walk_speed_m_per_s * time_step_s / std::sqrt(2.0);
  int next_id = 0;
  for (const auto& a : arrivals) {
    if (a.time_s + a.dwell_s <= 0.0) continue;
    TargetTrack track;
    track.id = next_id++;
    track.arrival_time_s = a.time_s;
    track.dwell_s = a.dwell_s;
    int first = std::max(0, static_cast<int>(std::ceil(a.time_s / time_step_s)));
    while (first > 0 && (first - 1) * time_step_s >= a.time_s) --first;
    track.first_step = first;
    Vec2 p(motion_rng.uniform(0.0, arena.width_m), motion_rng.uniform(0.0, arena.length_m));
    for (int s = first; s < steps; ++s) {
      const double t = s * time_step_s;
      if (t < a.time_s) continue;
      if (t >= a.time_s + a.dwell_s) break;
      if (!track.positions.empty()) {
        p.x() = reflect(p.x() + walk_sd * motion_rng.normal(), arena.width_m);
        p.y() = reflect(p.y() + walk_sd * motion_rng.normal(), arena.length_m);
      } else {
        track.first_step = s;
      }
      track.positions.push_back(p);
    }
    track.descriptor = identity_descriptor(seed, track.id, descriptors);
    trace.tracks.push_back(std::move(track));
  }
  return trace;
}

double idle_fraction(const ScenarioTrace& trace) {
  std::vector<Arrival> a;
  a.reserve(trace.tracks.size());
  for (const auto& t : trace.tracks) a.push_back({t.arrival_time_s, t.dwell_s});
  double busy = 0.0;
  for (const auto& iv : busy_periods(std::move(a), trace.duration_s)) busy += iv.end - iv.begin;
  return 1.0 - busy / trace.duration_s;
}

double mean_active(const ScenarioTrace& trace) {
  double total = 0.0;
  for (const auto& t : trace.tracks) {
    const double b = std::max(t.arrival_time_s, 0.0);
    const double e = std::min(t.departure_time_s(), trace.duration_s);
    if (e > b) total += e - b;
  }
  return total / trace.duration_s;
}

int visible_count(const ScenarioTrace& trace, const calib::CameraModel& camera, double t) {
  const int step = trace.step_at(t);
  int n = 0;
  for (const auto& tr : trace.tracks) {
    const auto p = tr.position_at_step(step);
    if (p && calib::visible_pixel(camera, *p)) ++n;
  }
  return n;
}

Descriptor quantize(const Descriptor& values, int bits, double clip) {
  require(bits >= 1, ErrorCode::kDomain, "quantization_bits", "must be >= 1");
  if (bits >= kLosslessBits) return values;
  const double levels = std::ldexp(1.0, bits);
  const double step = 2.0 * clip / levels;
  Descriptor out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double idx = std::clamp(std::floor((values[i] + clip) / step), 0.0, levels - 1.0);
    out[i] = -clip + (idx + 0.5) * step;
  }
  return out;
}

std::optional<Descriptor> observe_descriptor(const ScenarioTrace& trace, const TargetTrack& track,
                                             const calib::CameraModel& camera, int step,
                                             int quantization_bits, Rng& rng) {
  const auto p = track.position_at_step(step);
  if (!p || !calib::visible_pixel(camera, *p)) return std::nullopt;
  Descriptor d = track.descriptor;
  for (auto& v : d) v += trace.descriptors.view_noise * rng.normal();
  return quantize(d, quantization_bits, trace.descriptors.clip);
}

PhaseFractions simulate_phases(const ArrivalModel& model, double calibration_prob,
                               double horizon_s, double slot_s, std::uint64_t seed) {
  model.validate();
  require(calibration_prob >= 0.0 && calibration_prob <= 1.0, ErrorCode::kDomain,
          "calibration_prob", "must lie in [0, 1]");
  require(horizon_s > 0.0 && slot_s > 0.0, ErrorCode::kDomain, "horizon_s",
          "horizon and slot must be positive");
  Rng arrivals_rng(derive_seed(seed, kArrivalStream));
  Rng slot_rng(derive_seed(seed, kSlotStream));
  const auto busy = busy_periods(
      sample_arrivals(model, -warmup_horizon(model), horizon_s, arrivals_rng), horizon_s);

  PhaseFractions f;
  std::size_t k = 0;
  const auto slots = static_cast<std::size_t>(std::ceil(horizon_s / slot_s - 1e-9));
  for (std::size_t i = 0; i < slots; ++i) {
    const double s = static_cast<double>(i) * slot_s;
    const double e = std::min(s + slot_s, horizon_s);
    if (slot_rng.uniform() < calibration_prob) {
      f.calibration += e - s;
      continue;
    }
    while (k < busy.size() && busy[k].end <= s) ++k;
    double busy_time = 0.0;
    for (std::size_t j = k; j < busy.size() && busy[j].begin < e; ++j) {
      busy_time += std::min(e, busy[j].end) - std::max(s, busy[j].begin);
    }
    f.streaming += busy_time;
    f.idle += (e - s) - busy_time;
  }
  f.idle /= horizon_s;
  f.calibration /= horizon_s;
  f.streaming /= horizon_s;
  return f;
}

// ---------------------------------------------------------------------------
// Trace file format, version 1.

namespace {
constexpr const char* kMagic = "cpsim-trace";
constexpr int kTraceVersion = 1;

std::string expect_line(std::istream& in, const std::string& key) {
  std::string line;
  if (!std::getline(in, line)) {
    throw Error(ErrorCode::kParse, "trace: unexpected end of input, wanted '" + key + "'", key);
  }
  const auto sp = line.find(' ');
  if (line.substr(0, sp) != key) {
    throw Error(ErrorCode::kParse, "trace: expected '" + key + "', got '" + line + "'", key);
  }
  return sp == std::string::npos ? std::string() : line.substr(sp + 1);
}
}  // namespace

void write_trace(std::ostream& out, const ScenarioTrace& trace) {
  out << kMagic << ' ' << kTraceVersion << '\n';
  out << "duration_s " << exact(trace.duration_s) << '\n';
  out << "time_step_s " << exact(trace.time_step_s) << '\n';
  out << "rng_seed " << trace.rng_seed << '\n';
  out << "arena " << exact(trace.arena.width_m) << ' ' << exact(trace.arena.length_m) << ' '
      << trace.arena.grid_w << ' ' << trace.arena.grid_h << '\n';
  const auto& d = trace.descriptors;
  out << "descriptor " << d.dim << ' ' << exact(d.identity_spread) << ' ' << exact(d.view_noise)
      << ' ' << exact(d.clip) << '\n';
  out << "tracks " << trace.tracks.size() << '\n';
  for (const auto& t : trace.tracks) {
    out << "track " << t.id << ' ' << exact(t.arrival_time_s) << ' ' << exact(t.dwell_s) << ' '
        << t.first_step << ' ' << t.positions.size() << '\n';
  }
  out << "columns time_s,id,x_m,y_m\n";
  const int steps = trace.step_count();
  for (int s = 0; s < steps; ++s) {
    const std::string time = exact(s * trace.time_step_s);
    for (const auto& t : trace.tracks) {
      if (const auto p = t.position_at_step(s)) {
        out << time << ',' << t.id << ',' << exact(p->x()) << ',' << exact(p->y()) << '\n';
      }
    }
  }
}

ScenarioTrace read_trace(std::istream& in) {
  ScenarioTrace trace;
  {
    const auto version = parse_int(expect_line(in, kMagic), "version");
    if (version != kTraceVersion) {
      throw Error(ErrorCode::kParse, "trace: unsupported version " + std::to_string(version),
                  "version");
    }
  }
  trace.duration_s = parse_double(expect_line(in, "duration_s"), "duration_s");
  trace.time_step_s = parse_double(expect_line(in, "time_step_s"), "time_step_s");
  {
    const std::string s = trim(expect_line(in, "rng_seed"));
    try {
      trace.rng_seed = std::stoull(s);
    } catch (const std::exception&) {
      throw Error(ErrorCode::kParse, "trace: bad rng_seed '" + s + "'", "rng_seed");
    }
  }
  {
    const auto f = split(expect_line(in, "arena"), ' ');
    if (f.size() != 4) throw Error(ErrorCode::kParse, "trace: arena needs 4 fields", "arena");
    trace.arena.width_m = parse_double(f[0], "arena.width_m");
    trace.arena.length_m = parse_double(f[1], "arena.length_m");
    trace.arena.grid_w = static_cast<int>(parse_int(f[2], "arena.grid_w"));
    trace.arena.grid_h = static_cast<int>(parse_int(f[3], "arena.grid_h"));
  }
  {
    const auto f = split(expect_line(in, "descriptor"), ' ');
    if (f.size() != 4) {
      throw Error(ErrorCode::kParse, "trace: descriptor needs 4 fields", "descriptor");
    }
    trace.descriptors.dim = static_cast<int>(parse_int(f[0], "descriptor.dim"));
    trace.descriptors.identity_spread = parse_double(f[1], "descriptor.identity_spread");
    trace.descriptors.view_noise = parse_double(f[2], "descriptor.view_noise");
    trace.descriptors.clip = parse_double(f[3], "descriptor.clip");
  }
  const auto n_tracks = parse_int(expect_line(in, "tracks"), "tracks");
  std::map<int, std::size_t> by_id;
  std::vector<std::size_t> expected_positions;
  for (long long i = 0; i < n_tracks; ++i) {
    const auto f = split(expect_line(in, "track"), ' ');
    if (f.size() != 5) throw Error(ErrorCode::kParse, "trace: track needs 5 fields", "track");
    TargetTrack t;
    t.id = static_cast<int>(parse_int(f[0], "track.id"));
    t.arrival_time_s = parse_double(f[1], "track.arrival_time_s");
    t.dwell_s = parse_double(f[2], "track.dwell_s");
    t.first_step = static_cast<int>(parse_int(f[3], "track.first_step"));
    expected_positions.push_back(static_cast<std::size_t>(parse_int(f[4], "track.positions")));
    t.descriptor = identity_descriptor(trace.rng_seed, t.id, trace.descriptors);
    by_id[t.id] = trace.tracks.size();
    trace.tracks.push_back(std::move(t));
  }
  if (trim(expect_line(in, "columns")) != "time_s,id,x_m,y_m") {
    throw Error(ErrorCode::kParse, "trace: unexpected column layout", "columns");
  }
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 4) throw Error(ErrorCode::kParse, "trace: row needs 4 fields: " + line, "row");
    const double t = parse_double(f[0], "time_s");
    const int id = static_cast<int>(parse_int(f[1], "id"));
    const auto it = by_id.find(id);
    if (it == by_id.end()) {
      throw Error(ErrorCode::kParse, "trace: row for unknown id " + std::to_string(id), "id");
    }
    auto& track = trace.tracks[it->second];
    const int step = static_cast<int>(std::lround(t / trace.time_step_s));
    if (step != track.first_step + static_cast<int>(track.positions.size())) {
      throw Error(ErrorCode::kParse, "trace: non-contiguous rows for id " + std::to_string(id),
                  "time_s");
    }
    track.positions.emplace_back(parse_double(f[2], "x_m"), parse_double(f[3], "y_m"));
  }
  for (std::size_t i = 0; i < trace.tracks.size(); ++i) {
    if (trace.tracks[i].positions.size() != expected_positions[i]) {
      throw Error(ErrorCode::kParse, "trace: position count mismatch for id " +
                                         std::to_string(trace.tracks[i].id),
                  "track.positions");
    }
  }
  return trace;
}

}  // namespace cpsim::scenario
