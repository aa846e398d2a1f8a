#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "cpsim/camera.hpp"
#include "cpsim/random.hpp"

// Seeded synthetic world: Poisson arrivals with log-normal dwell, reflecting
// random-walk motion on the arena floor, per-identity descriptors.
namespace cpsim::scenario {

using calib::Vec2;
using Descriptor = std::vector<double>;

struct ArrivalModel {
  double arrival_rate_per_s = 1.0;  // lambda
  double dwell_log_mean = 0.0;      // mu_S
  double dwell_log_sigma = 0.0;     // sigma_S

  void validate() const;
  bool operator==(const ArrivalModel&) const = default;
};

// rho = lambda exp(mu_S + sigma_S^2 / 2), the mean number of active targets.
double offered_load(const ArrivalModel& model);

struct Arena {
  double width_m = 12.0;
  double length_m = 36.0;
  int grid_w = 480;
  int grid_h = 1440;

  double cell_m() const { return width_m / grid_w; }
  bool contains(const Vec2& p) const;
  Vec2 cell_centre(int ix, int iy) const;
  // Builds an arena whose grid matches `cell_m` exactly; throws otherwise.
  static Arena with_cell(double width_m, double length_m, double cell_m);
  void validate() const;
  bool operator==(const Arena&) const = default;
};

struct MotionModel {
  double walk_speed_m_per_s = 1.4;
  bool operator==(const MotionModel&) const = default;
};

struct DescriptorModel {
  int dim = 128;
  // Identity-specific deviation around a per-run crowd mean.
  double identity_spread = 0.25;
  // Per-observation (view-dependent) noise.
  double view_noise = 0.2;
  // Quantizer range is [-clip, clip] per component.
  double clip = 4.0;

  void validate() const;
  bool operator==(const DescriptorModel&) const = default;
};

struct TargetTrack {
  int id = 0;
  double arrival_time_s = 0.0;  // may be negative: present at the start
  double dwell_s = 0.0;
  int first_step = 0;           // step index of positions[0]
  std::vector<Vec2> positions;  // one per step while active inside [0, duration]
  Descriptor descriptor;

  double departure_time_s() const { return arrival_time_s + dwell_s; }
  std::optional<Vec2> position_at_step(int step) const;
};

struct ScenarioTrace {
  std::vector<TargetTrack> tracks;
  double duration_s = 0.0;
  double time_step_s = 1.0;
  std::uint64_t rng_seed = 0;
  Arena arena;
  DescriptorModel descriptors;

  // Steps are t_i = i * time_step_s for i in [0, step_count()).
  int step_count() const;
  int step_at(double t) const;
  // Indices into `tracks` of targets with a position at `step`.
  std::vector<std::size_t> active_at_step(int step) const;
  // Exact number of targets with arrival <= t < departure.
  int active_count(double t) const;
};

// Generates a trace. Arrivals start at a warm-up offset before t = 0 so the
// population is near steady state from the first step.
ScenarioTrace generate(const ArrivalModel& model, const Arena& arena, double duration_s,
                       double time_step_s, std::uint64_t seed, const MotionModel& motion = {},
                       const DescriptorModel& descriptors = {});

// Arrival/dwell pairs over [t0, t1); shared by generate and simulate_phases.
struct Arrival {
  double time_s;
  double dwell_s;
};
std::vector<Arrival> sample_arrivals(const ArrivalModel& model, double t0, double t1, Rng& rng);
double warmup_horizon(const ArrivalModel& model);

// Deterministic descriptor of an identity, regenerable from (seed, id).
Descriptor identity_descriptor(std::uint64_t seed, int id, const DescriptorModel& model);

// Fraction of [0, duration] during which no target is active.
double idle_fraction(const ScenarioTrace& trace);

// Time-averaged number of active targets over [0, duration].
double mean_active(const ScenarioTrace& trace);

// Number of active targets whose ground position projects into the image.
int visible_count(const ScenarioTrace& trace, const calib::CameraModel& camera, double t);

inline constexpr int kLosslessBits = 32;

// Uniform mid-rise quantizer with 2^bits levels over [-clip, clip].
// bits >= kLosslessBits passes values through unchanged.
Descriptor quantize(const Descriptor& values, int bits, double clip);

// True descriptor plus view noise, then quantized. nullopt when the target is
// not visible from `camera` at `step`.
std::optional<Descriptor> observe_descriptor(const ScenarioTrace& trace, const TargetTrack& track,
                                             const calib::CameraModel& camera, int step,
                                             int quantization_bits, Rng& rng);

// Long-run phase fractions of the idle/calibration/streaming cycle: the
// horizon is cut into slots, each slot is a calibration slot with
// probability p1, and non-calibration time is idle when no target is active.
struct PhaseFractions {
  double idle = 0.0;
  double calibration = 0.0;
  double streaming = 0.0;
};
PhaseFractions simulate_phases(const ArrivalModel& model, double calibration_prob,
                               double horizon_s, double slot_s, std::uint64_t seed);

// Versioned text format; see README. Doubles are written with 17 significant
// digits so a reread reproduces the trace bit for bit.
void write_trace(std::ostream& out, const ScenarioTrace& trace);
ScenarioTrace read_trace(std::istream& in);

}  // namespace cpsim::scenario
