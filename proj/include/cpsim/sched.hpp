#pragma once

#include <limits>
#include <span>
#include <string>
#include <vector>

#include "cpsim/age.hpp"
#include "cpsim/channel.hpp"

// Grid-search schedulers for the calibration and streaming subproblems, the
// joint reference solver, and the rate-accuracy proxies they optimize over.
namespace cpsim::sched {

struct Bounds {
  double bandwidth_min_hz = 0.5e6;
  double bandwidth_max_hz = 2e6;
  double packet_min_bits = 8.0 * 1024 * 8;
  double packet_max_bits = 32.0 * 1024 * 8;
  double interval_min_s = 0.1;
  double interval_max_s = 2.0;
  double calibration_interval_min_s = 1.0;
  double calibration_interval_max_s = 60.0;

  void validate() const;
  bool operator==(const Bounds&) const = default;
};

enum class ProxyKind { kCalibration, kStreaming };

std::string to_string(ProxyKind kind);
ProxyKind proxy_kind_from_string(const std::string& text);

// gamma(D) = floor + (gamma_max - floor)(1 - exp(-D / rate_scale_bits)).
struct AccuracyProxy {
  ProxyKind kind = ProxyKind::kStreaming;
  double gamma_max = 85.0;
  double rate_scale_bits = 6.0 * 1024 * 8;
  double floor = 0.0;

  double operator()(double packet_bits) const;
  // gamma_0 default: floor plus a tenth of the range.
  double default_threshold() const { return floor + 0.1 * (gamma_max - floor); }
  void validate() const;
  bool operator==(const AccuracyProxy&) const = default;
};

struct LagrangeWeights {
  double lambda_ca = 0.0;
  double lambda_k = 0.0;

  void validate() const;
  bool operator==(const LagrangeWeights&) const = default;
};

// Points per axis. Bandwidth and packet size are log-spaced, intervals
// linear. Interval axes are augmented with the constraint envelope
// max(min, D/C) of every (B, D) pair so the active constraint is always
// representable.
struct GridSpec {
  int bandwidth_points = 32;
  int packet_points = 32;
  int interval_points = 32;

  void validate() const;
  bool operator==(const GridSpec&) const = default;
};

std::vector<double> log_grid(double lo, double hi, int n);
std::vector<double> linear_grid(double lo, double hi, int n);

struct Solution {
  double bandwidth_hz = 0.0;
  double packet_bits = 0.0;
  double interval_s = 0.0;  // Delta for streaming, Delta_T for calibration
  double objective = 0.0;
  double accuracy = 0.0;
  bool feasible = false;
};

// Subproblem objectives at a single point, exposed for re-enumeration and
// surface export. `threshold` is gamma_Ca,0 or gamma_MOD,0.
double p2_objective(double packet_bits, double calibration_interval_s, const AccuracyProxy& proxy,
                    double lambda_ca, double threshold, double p1);
double p3_objective(double packet_bits, double interval_s, double bandwidth_hz,
                    const channel::LinkParams& link, const AccuracyProxy& proxy, double lambda_k,
                    double threshold, double p1);

// Capacity of `link` with its bandwidth replaced by `bandwidth_hz`.
double capacity_at(const channel::LinkParams& link, double bandwidth_hz);

struct SurfacePoint {
  double bandwidth_hz;
  double packet_bits;
  double interval_s;
  double objective;
};

struct SubproblemInput {
  channel::LinkParams link;
  Bounds bounds;
  AccuracyProxy proxy;
  LagrangeWeights weights;
  double p1 = 0.1;
  GridSpec grid;
  // NaN selects the proxy default.
  double threshold = std::numeric_limits<double>::quiet_NaN();
};

// Minimize p1 Delta_T - lambda_Ca (gamma_Ca(D) - gamma_Ca,0) subject to
// Delta_T >= max(Delta_T,min, D / C(B)). Ties: smaller Delta_T, then D, then B.
// When `surface` is given, every feasible grid point is appended to it.
Solution solve_p2(const SubproblemInput& in, std::vector<SurfacePoint>* surface = nullptr);

// Minimize (p1/2 + 1) d(D, B) + (1 - p1)/2 Delta - lambda_k (gamma_St(D) -
// gamma_MOD,0) subject to Delta >= max(Delta_min, D / C(B)).
Solution solve_p3(const SubproblemInput& in, std::vector<SurfacePoint>* surface = nullptr);

struct JointInput {
  channel::LinkParams link;
  Bounds bounds;
  AccuracyProxy calibration_proxy{ProxyKind::kCalibration, 100.0, 4.0 * 1024 * 8, 0.0};
  AccuracyProxy streaming_proxy;
  LagrangeWeights weights;
  double p1 = 0.1;
  GridSpec grid{8, 8, 8};
  double calibration_threshold = std::numeric_limits<double>::quiet_NaN();
  double streaming_threshold = std::numeric_limits<double>::quiet_NaN();
};

inline constexpr double kMaxJointGridPoints = 20.0 * 20 * 20 * 20 * 20;

struct JointSolution {
  Solution calibration;  // objective field holds the P2 objective at the point
  Solution streaming;    // objective field holds the P3 objective at the point
  double objective = 0.0;
  int g_khat = 0;
  bool feasible = false;
};

// Exhaustive search over (B, D_Ca, Delta_T, D_St, Delta) with bandwidth
// shared by both phases, minimizing the full cycle objective
//   g (p1/2 Delta_T + (p1/2 + 1) d + (1 - p1)/2 Delta)
//     - g/2 lambda_Ca (gamma_Ca - gamma_Ca,0) - g lambda_k (gamma_St - gamma_MOD,0),
// i.e. g/2 * P2 + g * P3. g is the bottleneck agent's count. Throws
// kGridTooLarge beyond kMaxJointGridPoints base grid points and kInfeasible
// when every agent is filtered out.
JointSolution solve_p1_joint(const JointInput& in, std::span<const age::AgentAgeInputs> agents,
                             double eps_g = 1.0);

// g/2 * P2 + g * P3: the value the joint solver minimizes.
inline double composed_objective(int g, double p2, double p3) { return g / 2.0 * p2 + g * p3; }

struct AnchorPoint {
  double rate_bits;
  double accuracy;
};

struct ProxyFit {
  AccuracyProxy proxy;
  double max_abs_residual = 0.0;
};

// Least-squares fit of the saturating proxy. With two anchors the floor is
// held at `fixed_floor`; with three or more it is fitted as well unless
// `fit_floor` is false. Throws kFit for fewer than two anchors, non-positive
// rates, or anchors that all share one rate.
ProxyFit fit_proxy(std::span<const AnchorPoint> anchors, ProxyKind kind, bool fit_floor = true,
                   double fixed_floor = 0.0);

}  // namespace cpsim::sched
