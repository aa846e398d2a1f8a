#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cpsim/error.hpp"
#include "cpsim/experiment.hpp"
#include "cpsim/fusion.hpp"

using namespace cpsim;
using namespace cpsim::fusion;

namespace {

scenario::Arena coarse_arena() { return scenario::Arena::with_cell(12.0, 36.0, 0.1); }

OccupancyMap blank(int w, int h) {
  OccupancyMap m;
  m.width = w;
  m.height = h;
  m.scores.assign(static_cast<std::size_t>(w) * h, 0.0);
  return m;
}

}  // namespace

TEST_CASE("rate quality and noise") {
  FeatureOptions o;
  CHECK(rate_quality(o.proxy, 0.0) == 0.0);
  CHECK(rate_quality(o.proxy, INFINITY) == 1.0);
  double prev = -1.0;
  for (double kb : {1.0, 5.0, 10.0, 20.0, 40.0}) {
    const double q = rate_quality(o.proxy, kb * 8192);
    CHECK(q > prev);
    CHECK(q <= 1.0);
    prev = q;
  }
  CHECK(noise_std(o, 0.0) == doctest::Approx(o.noise_base + o.noise_floor));
  CHECK(noise_std(o, INFINITY) == doctest::Approx(o.noise_floor));
}

TEST_CASE("feature maps") {
  const auto fleet = experiment::build_fleet(experiment::default_camera_specs());
  const auto trace = experiment::make_scene({}, 5);
  FeatureOptions o;
  const auto a = extract_features(fleet[6], 6, trace, 3, INFINITY, o, 9);
  CHECK(a.width == 240);
  CHECK(a.height == 135);
  CHECK(a.values == extract_features(fleet[6], 6, trace, 3, INFINITY, o, 9).values);
  CHECK(a.values != extract_features(fleet[6], 6, trace, 4, INFINITY, o, 9).values);
  // A visible target's foot point carries a bump near 1.
  for (auto idx : trace.active_at_step(3)) {
    const auto px = calib::visible_pixel(fleet[6], *trace.tracks[idx].position_at_step(3));
    if (!px) continue;
    const int x = std::clamp(static_cast<int>(px->x() / 8), 0, a.width - 1);
    const int y = std::clamp(static_cast<int>(px->y() / 8), 0, a.height - 1);
    double best = 0.0;
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const int xx = std::clamp(x + dx, 0, a.width - 1), yy = std::clamp(y + dy, 0, a.height - 1);
        best = std::max(best, a.at(0, yy, xx));
      }
    CHECK(best > 0.5);
  }
  double s = 0.0;
  for (double v : a.values) s += v;
  CHECK(priority(a) == doctest::Approx(s / a.values.size()));
}

TEST_CASE("mask counts and priority order") {
  CHECK(masked_count(7, 0.0) == 0);
  CHECK(masked_count(7, 0.1) == 1);
  CHECK(masked_count(7, 0.2) == 1);
  CHECK(masked_count(7, 0.3) == 2);
  CHECK(masked_count(7, 0.4) == 3);
  CHECK(masked_count(7, 1.0) == 7);
  const std::vector<double> p{0.5, 0.1, 0.3, 0.1, 0.9};
  const auto m = assign_masks(p, 0.4);  // two views
  CHECK(m[1].mask == 0);
  CHECK(m[3].mask == 0);
  CHECK(m[0].mask + m[2].mask + m[4].mask == 3);
  CHECK(loss_penalty(m, 2.5) == doctest::Approx(5.0));
  Rng a(1), b(1);
  const auto r1 = random_masks(p, 0.4, a);
  const auto r2 = random_masks(p, 0.4, b);
  int masked = 0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    CHECK(r1[k].mask == r2[k].mask);
    masked += 1 - r1[k].mask;
  }
  CHECK(masked == 2);
}

TEST_CASE("random masks are uniform over views") {
  const std::vector<double> p(5, 0.0);
  Rng rng(3);
  std::vector<int> hits(5, 0);
  for (int i = 0; i < 20000; ++i) {
    const auto m = random_masks(p, 0.2, rng);
    for (int k = 0; k < 5; ++k) hits[k] += 1 - m[k].mask;
  }
  for (int h : hits) CHECK(h / 20000.0 == doctest::Approx(0.2).epsilon(0.05));
}

TEST_CASE("fusion normalizes by unmasked views") {
  const auto arena = coarse_arena();
  const auto fleet = experiment::build_fleet(experiment::default_camera_specs());
  const auto trace = experiment::make_scene({}, 6);
  const auto w = GroundWarp::build(fleet[6], arena, 8);
  const auto f = extract_features(fleet[6], 6, trace, 0, 30 * 8192.0, {}, 1);
  const std::vector<FeatureMap> one{f}, two{f, f};
  const std::vector<GroundWarp> w1{w}, w2{w, w};
  const auto m1 = fuse(one, std::vector<PriorityMask>{{0, 1}}, w1);
  const auto m2 = fuse(two, std::vector<PriorityMask>{{0, 1}, {0, 1}}, w2);
  CHECK(m1.scores == m2.scores);
  const auto masked = fuse(two, std::vector<PriorityMask>{{0, 1}, {0, 0}}, w2);
  CHECK(masked.scores == m1.scores);
  const auto none = fuse(one, std::vector<PriorityMask>{{0, 0}}, w1);
  CHECK(none.all_masked);
  CHECK(std::all_of(none.scores.begin(), none.scores.end(), [](double s) { return s == 0.0; }));
  for (std::size_t c = 0; c < m1.scores.size(); ++c) {
    CHECK(m1.scores[c] >= 0.0);
    CHECK(m1.scores[c] <= 1.0);
    if (!w.sees(c)) CHECK(m1.scores[c] == 0.0);
  }
}

TEST_CASE("peak detection with suppression") {
  const auto arena = scenario::Arena::with_cell(1.0, 1.0, 0.1);
  auto m = blank(10, 10);
  auto set = [&](int x, int y, double s) { m.scores[static_cast<std::size_t>(y) * 10 + x] = s; };
  set(2, 2, 0.9);
  set(3, 2, 0.8);  // not a local max
  set(5, 2, 0.7);  // local max, 3 cells away
  set(8, 8, 0.4);  // below threshold
  auto d = detect_peaks(m, arena, 0.5, 1.0);
  REQUIRE(d.size() == 2);
  CHECK(d[0].ix == 2);
  CHECK(d[1].ix == 5);
  d = detect_peaks(m, arena, 0.5, 4.0);
  CHECK(d.size() == 1);
  CHECK(d[0].position.x() == doctest::Approx(0.25));
}

TEST_CASE("moda scoring") {
  const std::vector<calib::Vec2> truth{{0, 0}, {5, 5}};
  std::vector<Detection> det(3);
  det[0].position = {0.1, 0.0};
  det[1].position = {0.3, 0.0};
  det[2].position = {9, 9};
  const auto r = moda(det, truth, 0.5);
  CHECK(r.true_positives == 1);
  CHECK(r.misses == 1);
  CHECK(r.false_positives == 2);
  CHECK(r.moda_percent == doctest::Approx(-50.0));
  ModaReport total;
  total += r;
  total += moda(std::vector<Detection>{}, truth, 0.5);
  CHECK(total.misses == 3);
  CHECK(total.moda_percent == doctest::Approx((1.0 - 5.0 / 4.0) * 100));
  CHECK(moda(std::vector<Detection>{}, std::vector<calib::Vec2>{}, 0.5).moda_percent == 100.0);
}

TEST_CASE("export formats") {
  auto m = blank(3, 2);
  m.scores = {0.0, 0.5, 1.0, 1.0, 0.0, 0.25};
  std::ostringstream pgm;
  write_pgm(pgm, m);
  const auto s = pgm.str();
  CHECK(s.rfind("P5\n3 2\n255\n", 0) == 0);
  CHECK(s.size() == std::string("P5\n3 2\n255\n").size() + 6);
  CHECK(static_cast<unsigned char>(s.back()) == 64);
  std::ostringstream csv;
  write_detections_header(csv);
  Detection d;
  d.position = {1.5, 2.25};
  d.score = 0.75;
  write_detections(csv, 4, std::vector<Detection>{d});
  CHECK(csv.str() == "step,x_m,y_m,score\n4,1.5,2.25,0.75\n");
}

TEST_CASE("fused views beat the best single view") {
  const auto fleet = experiment::build_fleet(experiment::default_camera_specs());
  experiment::SceneConfig sc;
  const auto trace = experiment::make_scene(sc, 21);
  const auto warps = experiment::build_warps(fleet, trace.arena, 8);
  experiment::FusionTrialConfig cfg;
  cfg.frames = 3;
  cfg.policy = experiment::MaskPolicy::kNone;
  const auto all = experiment::run_fusion_trial(trace, fleet, warps, {}, cfg, 4);
  for (std::size_t k = 0; k < fleet.size(); ++k) {
    const std::vector<std::size_t> one{k};
    CHECK(experiment::run_fusion_trial(trace, fleet, warps, one, cfg, 4).moda.moda_percent <
          all.moda.moda_percent);
  }
  CHECK(all.comm_cost_bits == doctest::Approx(7 * cfg.rate_bits));
}
