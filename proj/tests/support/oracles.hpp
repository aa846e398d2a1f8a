#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "cpsim/calib.hpp"
#include "cpsim/random.hpp"
#include "cpsim/sched.hpp"

// Independent reference implementations used only by the tests.
namespace cpsim::oracle {

// Time-average of the age sawtooth built from explicit (generation,
// delivery) events, integrated piece by piece between deliveries. Periodic
// sampling every `delta` with a fixed delay `d`.
inline double event_average_aoi(double delta, double d, int cycles) {
  struct Event {
    double generated, delivered;
  };
  std::vector<Event> events;
  for (int i = 0; i <= cycles; ++i) events.push_back({i * delta, i * delta + d});
  std::sort(events.begin(), events.end(), [](auto& a, auto& b) { return a.delivered < b.delivered; });
  double area = 0.0;
  double freshest = events.front().generated;
  double t = events.front().delivered;
  for (std::size_t i = 1; i < events.size(); ++i) {
    const double t1 = events[i].delivered;
    const double a0 = t - freshest, a1 = t1 - freshest;
    area += 0.5 * (a0 + a1) * (t1 - t);
    freshest = std::max(freshest, events[i].generated);
    t = t1;
  }
  return area / (t - events.front().delivered);
}

// Minimum-cost assignment by trying every permutation; rows <= cols.
inline double brute_assignment_cost(const Eigen::MatrixXd& cost) {
  std::vector<int> cols(cost.cols());
  std::iota(cols.begin(), cols.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double s = 0.0;
    for (int r = 0; r < cost.rows(); ++r) s += cost(r, cols[r]);
    best = std::min(best, s);
  } while (std::next_permutation(cols.begin(), cols.end()));
  return best;
}

// Every (B, D, interval) in the base grids plus every constraint-envelope
// value, scored through the public point objectives.
struct BruteResult {
  double objective = std::numeric_limits<double>::infinity();
  double bandwidth_hz = 0, packet_bits = 0, interval_s = 0;
};

inline BruteResult brute_subproblem(const sched::SubproblemInput& in, bool streaming) {
  const auto& b = in.bounds;
  const auto bw = sched::log_grid(b.bandwidth_min_hz, b.bandwidth_max_hz, in.grid.bandwidth_points);
  const auto pk = sched::log_grid(b.packet_min_bits, b.packet_max_bits, in.grid.packet_points);
  const double lo = streaming ? b.interval_min_s : b.calibration_interval_min_s;
  const double hi = streaming ? b.interval_max_s : b.calibration_interval_max_s;
  auto iv = sched::linear_grid(lo, hi, in.grid.interval_points);
  for (double B : bw) {
    for (double D : pk) iv.push_back(std::max(lo, D / sched::capacity_at(in.link, B)));
  }
  const double thr = std::isnan(in.threshold) ? in.proxy.default_threshold() : in.threshold;
  const double lambda = streaming ? in.weights.lambda_k : in.weights.lambda_ca;
  BruteResult best;
  for (double B : bw) {
    const double c = sched::capacity_at(in.link, B);
    for (double D : pk) {
      for (double I : iv) {
        if (I < lo || I > hi || I < D / c) continue;
        const double obj = streaming ? sched::p3_objective(D, I, B, in.link, in.proxy, lambda, thr, in.p1)
                                     : sched::p2_objective(D, I, in.proxy, lambda, thr, in.p1);
        if (obj < best.objective) best = {obj, B, D, I};
      }
    }
  }
  return best;
}

// Ground points with their exact pixels in `camera`.
inline std::vector<calib::Correspondence> exact_correspondences(const calib::CameraModel& camera, int n,
                                                                Rng& rng, double x0, double x1, double y0,
                                                                double y1) {
  std::vector<calib::Correspondence> out;
  while (static_cast<int>(out.size()) < n) {
    const calib::Vec2 g(rng.uniform(x0, x1), rng.uniform(y0, y1));
    const auto px = calib::visible_pixel(camera, g);
    if (px) out.push_back({*px, g, 0.0});
  }
  return out;
}

}  // namespace cpsim::oracle
