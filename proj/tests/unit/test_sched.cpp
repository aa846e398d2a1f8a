#include <doctest.h>

#include <cmath>

#include "../support/oracles.hpp"
#include "cpsim/error.hpp"
#include "cpsim/config.hpp"
#include "cpsim/sched.hpp"

using namespace cpsim;
using namespace cpsim::sched;

namespace {

SubproblemInput random_input(Rng& rng, int points) {
  SubproblemInput in;
  in.link.channel_gain = std::exp(rng.uniform(std::log(1e-13), std::log(1e-10)));
  in.link.inference_delay_s = rng.uniform(0.0, 0.2);
  in.proxy = {ProxyKind::kStreaming, rng.uniform(50.0, 100.0), rng.uniform(2.0, 12.0) * 8192, 0.0};
  in.weights = {rng.uniform(0.0, 0.2), rng.uniform(0.0, 0.05)};
  in.p1 = rng.uniform();
  in.grid = {points, points, points};
  return in;
}

}  // namespace

TEST_CASE("grids") {
  const auto g = log_grid(1.0, 1000.0, 4);
  REQUIRE(g.size() == 4);
  CHECK(g.front() == 1.0);
  CHECK(g.back() == 1000.0);
  CHECK(g[1] == doctest::Approx(10.0));
  const auto l = linear_grid(0.1, 2.0, 20);
  CHECK(l.front() == 0.1);
  CHECK(l.back() == 2.0);
  CHECK(l[1] - l[0] == doctest::Approx(0.1));
  CHECK(log_grid(5.0, 9.0, 1) == std::vector<double>{5.0});
}

TEST_CASE("accuracy proxy") {
  const AccuracyProxy p{ProxyKind::kStreaming, 85.0, 8192.0, 5.0};
  CHECK(p(0.0) == doctest::Approx(5.0));
  CHECK(p(8192.0) == doctest::Approx(5.0 + 80.0 * (1 - std::exp(-1.0))));
  CHECK(p(1e12) == doctest::Approx(85.0));
  CHECK(p.default_threshold() == doctest::Approx(13.0));
  CHECK(proxy_kind_from_string(to_string(ProxyKind::kCalibration)) == ProxyKind::kCalibration);
  CHECK_THROWS_AS(proxy_kind_from_string("bogus"), Error);
}

TEST_CASE("subproblem optima match exhaustive re-enumeration") {
  Rng rng(10);
  for (int trial = 0; trial < 30; ++trial) {
    auto in = random_input(rng, 6);
    for (bool streaming : {false, true}) {
      if (!streaming) in.proxy.kind = ProxyKind::kCalibration;
      const auto s = streaming ? solve_p3(in) : solve_p2(in);
      const auto o = oracle::brute_subproblem(in, streaming);
      REQUIRE(s.feasible);
      CHECK(s.objective == doctest::Approx(o.objective).epsilon(1e-12));
      // Constraints hold exactly at the returned point.
      const double c = capacity_at(in.link, s.bandwidth_hz);
      CHECK(s.interval_s >= s.packet_bits / c);
      CHECK(s.bandwidth_hz >= in.bounds.bandwidth_min_hz);
      CHECK(s.bandwidth_hz <= in.bounds.bandwidth_max_hz);
      CHECK(s.packet_bits >= in.bounds.packet_min_bits * (1 - 1e-12));
      CHECK(s.packet_bits <= in.bounds.packet_max_bits * (1 + 1e-12));
    }
  }
}

TEST_CASE("surface covers the returned point") {
  Rng rng(11);
  const auto in = random_input(rng, 5);
  std::vector<SurfacePoint> surface;
  const auto s = solve_p3(in, &surface);
  CHECK(surface.size() >= 125);
  double lo = INFINITY;
  for (const auto& p : surface) lo = std::min(lo, p.objective);
  CHECK(lo == s.objective);
}

TEST_CASE("streaming interval never grows with capacity") {
  Rng rng(12);
  auto in = random_input(rng, 10);
  in.link.inference_delay_s = 0.05;
  double prev = INFINITY;
  for (double gain : {1e-15, 1e-14, 1e-13, 1e-12, 1e-11}) {
    in.link.channel_gain = gain;
    const auto s = solve_p3(in);
    CHECK(s.interval_s <= prev);
    prev = s.interval_s;
  }
}

TEST_CASE("joint solver agrees with the decomposition") {
  Rng rng(13);
  for (int trial = 0; trial < 5; ++trial) {
    const auto base = random_input(rng, 4);
    JointInput j;
    j.link = base.link;
    j.streaming_proxy = base.proxy;
    j.weights = base.weights;
    j.p1 = base.p1;
    j.grid = {4, 4, 4};
    std::vector<age::AgentAgeInputs> agents{{1.0, 0.0, 3}, {1.0, 0.0, 7}};
    const auto js = solve_p1_joint(j, agents);
    REQUIRE(js.feasible);
    CHECK(js.g_khat == 7);
    SubproblemInput p2{j.link, j.bounds, j.calibration_proxy, j.weights, j.p1, j.grid, NAN};
    SubproblemInput p3 = p2;
    p3.proxy = j.streaming_proxy;
    const double composed = composed_objective(7, solve_p2(p2).objective, solve_p3(p3).objective);
    CHECK(js.objective >= composed - 1e-9);
    CHECK(js.objective == doctest::Approx(composed).epsilon(1e-9));
    CHECK(js.calibration.bandwidth_hz == js.streaming.bandwidth_hz);
    CHECK(composed_objective(7, js.calibration.objective, js.streaming.objective) ==
          doctest::Approx(js.objective));
  }
}

TEST_CASE("joint solver edge cases") {
  JointInput j;
  j.p1 = 0.0;
  std::vector<age::AgentAgeInputs> agents{{1.0, 0.0, 2}};
  const auto s = solve_p1_joint(j, agents);
  // Delta_T carries no weight at p1 = 0; the tie-break picks the smallest.
  CHECK(s.calibration.interval_s == j.bounds.calibration_interval_min_s);
  std::vector<age::AgentAgeInputs> idle{{1.0, 0.0, 0}};
  try {
    solve_p1_joint(j, idle);
    FAIL("idle fleet accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInfeasible);
  }
  j.grid = {21, 20, 20};
  try {
    solve_p1_joint(j, agents);
    FAIL("oversized grid accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kGridTooLarge);
  }
}

TEST_CASE("proxy fit recovers known parameters") {
  Rng rng(14);
  for (int trial = 0; trial < 10; ++trial) {
    const AccuracyProxy truth{ProxyKind::kStreaming, rng.uniform(60, 95), rng.uniform(2, 20) * 8192,
                              rng.uniform(0, 20)};
    std::vector<AnchorPoint> anchors;
    for (double kb : {1.0, 3.0, 6.0, 10.0, 16.0, 25.0, 40.0, 64.0}) {
      anchors.push_back({kb * 8192, truth(kb * 8192)});
    }
    const auto f = fit_proxy(anchors, ProxyKind::kStreaming);
    CHECK(f.proxy.gamma_max == doctest::Approx(truth.gamma_max).epsilon(0.01));
    CHECK(f.proxy.rate_scale_bits == doctest::Approx(truth.rate_scale_bits).epsilon(0.01));
    CHECK(f.proxy.floor == doctest::Approx(truth.floor).epsilon(0.01).scale(1.0));
    CHECK(f.max_abs_residual < 1e-3);
  }
}

TEST_CASE("proxy fit on the published single-view and fused anchors") {
  const std::vector<AnchorPoint> single{{15.36 * kBitsPerKB, 63.15}, {18.69 * kBitsPerKB, 64.90}};
  const auto s = fit_proxy(single, ProxyKind::kStreaming);
  CHECK(std::abs(s.proxy(15.36 * kBitsPerKB) - 63.15) < 0.5);
  CHECK(std::abs(s.proxy(18.69 * kBitsPerKB) - 64.90) < 0.5);
  const std::vector<AnchorPoint> fused{{17.07 * kBitsPerKB, 84.14}, {26.62 * kBitsPerKB, 85.86}};
  const auto f = fit_proxy(fused, ProxyKind::kStreaming);
  CHECK(std::abs(f.proxy(17.07 * kBitsPerKB) - 84.14) < 0.5);
  CHECK(f.proxy.gamma_max > s.proxy.gamma_max);
}

TEST_CASE("proxy fit rejects degenerate anchors") {
  const std::vector<AnchorPoint> one{{8192.0, 50.0}};
  const std::vector<AnchorPoint> same{{8192.0, 50.0}, {8192.0, 60.0}};
  const std::vector<AnchorPoint> neg{{-1.0, 50.0}, {8192.0, 60.0}};
  for (const auto* a : {&one, &same, &neg}) {
    try {
      fit_proxy(*a, ProxyKind::kStreaming);
      FAIL("accepted");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kFit);
    }
  }
}
