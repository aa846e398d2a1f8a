#include "cpsim/sched.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "cpsim/error.hpp"

namespace cpsim::sched {

namespace {

void check_range(double lo, double hi, const char* lo_name, const char* hi_name) {
  require(std::isfinite(lo) && lo > 0.0, ErrorCode::kValidation, lo_name, "must be > 0");
  require(std::isfinite(hi) && hi >= lo, ErrorCode::kValidation, hi_name,
          std::string("must be >= ") + lo_name);
}

// Candidate interval values for one (B, D) pair: the envelope itself plus
// every grid value strictly above it. Empty when the envelope exceeds max.
std::vector<double> interval_candidates(const std::vector<double>& grid, double envelope,
                                        double max) {
  std::vector<double> out;
  if (envelope > max) return out;
  out.push_back(envelope);
  for (double v : grid) {
    if (v > envelope) out.push_back(v);
  }
  return out;
}

double threshold_or_default(double t, const AccuracyProxy& p) {
  return std::isnan(t) ? p.default_threshold() : t;
}

// Lexicographic key: objective, then interval, packet, bandwidth.
using Key = std::tuple<double, double, double, double>;

}  // namespace

void Bounds::validate() const {
  check_range(bandwidth_min_hz, bandwidth_max_hz, "bounds.bandwidth_min_hz",
              "bounds.bandwidth_max_hz");
  check_range(packet_min_bits, packet_max_bits, "bounds.packet_min_bits", "bounds.packet_max_bits");
  check_range(interval_min_s, interval_max_s, "bounds.interval_min_s", "bounds.interval_max_s");
  check_range(calibration_interval_min_s, calibration_interval_max_s,
              "bounds.calibration_interval_min_s", "bounds.calibration_interval_max_s");
}

std::string to_string(ProxyKind kind) {
  return kind == ProxyKind::kCalibration ? "calibration" : "streaming";
}

ProxyKind proxy_kind_from_string(const std::string& text) {
  if (text == "calibration") return ProxyKind::kCalibration;
  if (text == "streaming") return ProxyKind::kStreaming;
  throw Error(ErrorCode::kValidation, "unknown proxy kind '" + text + "'", "kind");
}

double AccuracyProxy::operator()(double packet_bits) const {
  return floor + (gamma_max - floor) * (1.0 - std::exp(-packet_bits / rate_scale_bits));
}

void AccuracyProxy::validate() const {
  require(std::isfinite(floor), ErrorCode::kValidation, "floor", "must be finite");
  require(std::isfinite(gamma_max) && gamma_max > floor, ErrorCode::kValidation, "gamma_max",
          "must exceed floor");
  require(std::isfinite(rate_scale_bits) && rate_scale_bits > 0.0, ErrorCode::kValidation,
          "rate_scale_bits", "must be > 0");
}

void LagrangeWeights::validate() const {
  require(lambda_ca >= 0.0, ErrorCode::kValidation, "lambda_ca", "must be >= 0");
  require(lambda_k >= 0.0, ErrorCode::kValidation, "lambda_k", "must be >= 0");
}

void GridSpec::validate() const {
  require(bandwidth_points >= 1, ErrorCode::kValidation, "grid.bandwidth_points", "must be >= 1");
  require(packet_points >= 1, ErrorCode::kValidation, "grid.packet_points", "must be >= 1");
  require(interval_points >= 1, ErrorCode::kValidation, "grid.interval_points", "must be >= 1");
}

std::vector<double> log_grid(double lo, double hi, int n) {
  if (n == 1 || lo == hi) return std::vector<double>(1, lo);
  std::vector<double> out(static_cast<std::size_t>(n));
  const double a = std::log(lo), b = std::log(hi);
  for (int i = 0; i < n; ++i) out[i] = std::exp(a + (b - a) * i / (n - 1));
  out.front() = lo;
  out.back() = hi;
  return out;
}

std::vector<double> linear_grid(double lo, double hi, int n) {
  if (n == 1 || lo == hi) return std::vector<double>(1, lo);
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out[i] = lo + (hi - lo) * i / (n - 1);
  out.back() = hi;
  return out;
}

double capacity_at(const channel::LinkParams& link, double bandwidth_hz) {
  auto l = link;
  l.bandwidth_hz = bandwidth_hz;
  return channel::capacity(l);
}

double p2_objective(double packet_bits, double calibration_interval_s, const AccuracyProxy& proxy,
                    double lambda_ca, double threshold, double p1) {
  return p1 * calibration_interval_s - lambda_ca * (proxy(packet_bits) - threshold);
}

double p3_objective(double packet_bits, double interval_s, double bandwidth_hz,
                    const channel::LinkParams& link, const AccuracyProxy& proxy, double lambda_k,
                    double threshold, double p1) {
  const double d = packet_bits / capacity_at(link, bandwidth_hz) + link.inference_delay_s;
  return (p1 / 2.0 + 1.0) * d + (1.0 - p1) / 2.0 * interval_s -
         lambda_k * (proxy(packet_bits) - threshold);
}

namespace {

enum class Phase { kCalibration, kStreaming };

Solution solve_subproblem(const SubproblemInput& in, Phase phase, std::vector<SurfacePoint>* surface) {
  in.link.validate();
  in.bounds.validate();
  in.proxy.validate();
  in.weights.validate();
  in.grid.validate();
  require(in.p1 >= 0.0 && in.p1 <= 1.0, ErrorCode::kDomain, "p1", "must lie in [0, 1]");

  const auto& b = in.bounds;
  const bool cal = phase == Phase::kCalibration;
  const double lo = cal ? b.calibration_interval_min_s : b.interval_min_s;
  const double hi = cal ? b.calibration_interval_max_s : b.interval_max_s;
  const auto bw = log_grid(b.bandwidth_min_hz, b.bandwidth_max_hz, in.grid.bandwidth_points);
  const auto pk = log_grid(b.packet_min_bits, b.packet_max_bits, in.grid.packet_points);
  const auto iv = linear_grid(lo, hi, in.grid.interval_points);
  const double threshold = threshold_or_default(in.threshold, in.proxy);

  Solution best;
  Key best_key{};
  for (double bandwidth : bw) {
    const double c = capacity_at(in.link, bandwidth);
    if (!(c > 0.0)) continue;
    for (double packet : pk) {
      const double envelope = std::max(lo, packet / c);
      for (double interval : interval_candidates(iv, envelope, hi)) {
        const double obj =
            cal ? p2_objective(packet, interval, in.proxy, in.weights.lambda_ca, threshold, in.p1)
                : p3_objective(packet, interval, bandwidth, in.link, in.proxy, in.weights.lambda_k,
                               threshold, in.p1);
        if (surface) surface->push_back({bandwidth, packet, interval, obj});
        const Key key{obj, interval, packet, bandwidth};
        if (!best.feasible || key < best_key) {
          best_key = key;
          best = {bandwidth, packet, interval, obj, in.proxy(packet), true};
        }
      }
    }
  }
  return best;
}

}  // namespace

Solution solve_p2(const SubproblemInput& in, std::vector<SurfacePoint>* surface) {
  return solve_subproblem(in, Phase::kCalibration, surface);
}

Solution solve_p3(const SubproblemInput& in, std::vector<SurfacePoint>* surface) {
  return solve_subproblem(in, Phase::kStreaming, surface);
}

JointSolution solve_p1_joint(const JointInput& in, std::span<const age::AgentAgeInputs> agents,
                             double eps_g) {
  in.link.validate();
  in.bounds.validate();
  in.calibration_proxy.validate();
  in.streaming_proxy.validate();
  in.weights.validate();
  in.grid.validate();
  require(in.p1 >= 0.0 && in.p1 <= 1.0, ErrorCode::kDomain, "p1", "must lie in [0, 1]");
  const double n_points = static_cast<double>(in.grid.bandwidth_points) * in.grid.packet_points *
                          in.grid.packet_points * in.grid.interval_points * in.grid.interval_points;
  if (n_points > kMaxJointGridPoints) {
    throw Error(ErrorCode::kGridTooLarge,
                "joint search over " + std::to_string(static_cast<long long>(n_points)) +
                    " points exceeds the 20^5 limit",
                "grid");
  }
  const auto st = age::aopt_streaming(agents, eps_g);
  if (st.idle()) {
    throw Error(ErrorCode::kInfeasible, "no agent passes the count threshold", "agents");
  }
  const int g = agents[*st.bottleneck].target_count;

  const auto& b = in.bounds;
  const auto bw = log_grid(b.bandwidth_min_hz, b.bandwidth_max_hz, in.grid.bandwidth_points);
  const auto pk = log_grid(b.packet_min_bits, b.packet_max_bits, in.grid.packet_points);
  const auto iv_t = linear_grid(b.calibration_interval_min_s, b.calibration_interval_max_s,
                                in.grid.interval_points);
  const auto iv = linear_grid(b.interval_min_s, b.interval_max_s, in.grid.interval_points);
  const double th_ca = threshold_or_default(in.calibration_threshold, in.calibration_proxy);
  const double th_st = threshold_or_default(in.streaming_threshold, in.streaming_proxy);

  JointSolution best;
  best.g_khat = g;
  // Key: objective, Delta_T, D_Ca, Delta, D_St, B.
  std::tuple<double, double, double, double, double, double> best_key{};
  for (double bandwidth : bw) {
    const double c = capacity_at(in.link, bandwidth);
    if (!(c > 0.0)) continue;
    for (double d_ca : pk) {
      const auto cands_t =
          interval_candidates(iv_t, std::max(b.calibration_interval_min_s, d_ca / c),
                              b.calibration_interval_max_s);
      for (double delta_t : cands_t) {
        const double o2 = p2_objective(d_ca, delta_t, in.calibration_proxy, in.weights.lambda_ca,
                                       th_ca, in.p1);
        for (double d_st : pk) {
          const auto cands = interval_candidates(iv, std::max(b.interval_min_s, d_st / c),
                                                 b.interval_max_s);
          for (double delta : cands) {
            const double o3 = p3_objective(d_st, delta, bandwidth, in.link, in.streaming_proxy,
                                           in.weights.lambda_k, th_st, in.p1);
            const double obj = composed_objective(g, o2, o3);
            const auto key = std::make_tuple(obj, delta_t, d_ca, delta, d_st, bandwidth);
            if (!best.feasible || key < best_key) {
              best_key = key;
              best.feasible = true;
              best.objective = obj;
              best.calibration = {bandwidth, d_ca, delta_t, o2, in.calibration_proxy(d_ca), true};
              best.streaming = {bandwidth, d_st, delta, o3, in.streaming_proxy(d_st), true};
            }
          }
        }
      }
    }
  }
  return best;
}

namespace {

struct LinearFit {
  double floor;
  double gamma_max;
  double sse;
};

LinearFit linear_part(std::span<const AnchorPoint> anchors, double scale, bool fit_floor,
                      double fixed_floor) {
  double see = 0, seu = 0, suu = 0, sey = 0, suy = 0;
  for (const auto& a : anchors) {
    const double e = std::exp(-a.rate_bits / scale);
    const double u = 1.0 - e;
    see += e * e;
    seu += e * u;
    suu += u * u;
    sey += e * a.accuracy;
    suy += u * a.accuracy;
  }
  LinearFit f{fixed_floor, 0.0, 0.0};
  const double det = see * suu - seu * seu;
  if (fit_floor && std::abs(det) > 1e-300) {
    f.floor = (sey * suu - seu * suy) / det;
    f.gamma_max = (see * suy - seu * sey) / det;
  } else {
    f.gamma_max = suu > 0.0 ? (suy - fixed_floor * seu) / suu : fixed_floor;
  }
  for (const auto& a : anchors) {
    const double e = std::exp(-a.rate_bits / scale);
    const double r = f.floor * e + f.gamma_max * (1.0 - e) - a.accuracy;
    f.sse += r * r;
  }
  return f;
}

}  // namespace

ProxyFit fit_proxy(std::span<const AnchorPoint> anchors, ProxyKind kind, bool fit_floor,
                   double fixed_floor) {
  if (anchors.size() < 2) {
    throw Error(ErrorCode::kFit, "need at least two anchor points", "anchors");
  }
  double lo_rate = anchors.front().rate_bits, hi_rate = lo_rate;
  for (const auto& a : anchors) {
    if (!(a.rate_bits > 0.0) || !std::isfinite(a.accuracy)) {
      throw Error(ErrorCode::kFit, "anchor rates must be positive and accuracies finite",
                  "anchors");
    }
    lo_rate = std::min(lo_rate, a.rate_bits);
    hi_rate = std::max(hi_rate, a.rate_bits);
  }
  if (lo_rate == hi_rate) {
    throw Error(ErrorCode::kFit, "all anchors share one rate", "anchors");
  }
  const bool with_floor = fit_floor && anchors.size() >= 3;

  // Variable projection: the model is linear in (floor, gamma_max) for a
  // fixed scale, so only log(scale) is searched.
  const auto sse = [&](double log_s) {
    return linear_part(anchors, std::exp(log_s), with_floor, fixed_floor).sse;
  };
  const double a0 = std::log(lo_rate / 100.0), a1 = std::log(hi_rate * 100.0);
  constexpr int kScan = 600;
  int best_i = 0;
  double best_v = sse(a0);
  for (int i = 1; i <= kScan; ++i) {
    const double v = sse(a0 + (a1 - a0) * i / kScan);
    if (v < best_v) {
      best_v = v;
      best_i = i;
    }
  }
  double lo = a0 + (a1 - a0) * std::max(0, best_i - 1) / kScan;
  double hi = a0 + (a1 - a0) * std::min(kScan, best_i + 1) / kScan;
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
  double f1 = sse(x1), f2 = sse(x2);
  for (int it = 0; it < 200 && hi - lo > 1e-14; ++it) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - phi * (hi - lo);
      f1 = sse(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + phi * (hi - lo);
      f2 = sse(x2);
    }
  }
  const double scale = std::exp((lo + hi) / 2.0);
  const auto lin = linear_part(anchors, scale, with_floor, fixed_floor);

  ProxyFit fit;
  fit.proxy = {kind, lin.gamma_max, scale, lin.floor};
  if (!(fit.proxy.gamma_max > fit.proxy.floor)) {
    throw Error(ErrorCode::kFit, "anchors do not describe an increasing curve", "anchors");
  }
  for (const auto& a : anchors) {
    fit.max_abs_residual = std::max(fit.max_abs_residual, std::abs(fit.proxy(a.rate_bits) - a.accuracy));
  }
  return fit;
}

}  // namespace cpsim::sched
