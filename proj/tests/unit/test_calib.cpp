#include <doctest.h>

#include <cmath>
#include <numbers>

#include "../support/oracles.hpp"
#include "cpsim/error.hpp"
#include "cpsim/calib.hpp"
#include "cpsim/experiment.hpp"

using namespace cpsim;
using namespace cpsim::calib;

namespace {

CameraModel demo_camera() {
  return look_at({1400, 1400, 960, 540}, 1920, 1080, Vec3(-1, 3, 3), Vec3(7, 7, 0));
}

}  // namespace

TEST_CASE("quantization plan") {
  auto p = plan_quantization(128, 10, 30.0 * 8192);
  CHECK(p.bits_per_component == 32);
  CHECK(p.total_cost_bits == 128LL * 10 * 32);
  p = plan_quantization(128, 258, 10.0 * 8192);
  CHECK(p.bits_per_component == 2);  // floor(81920 / 33024)
  CHECK(p.total_cost_bits == 2LL * 128 * 258);
  CHECK(p.total_cost_bits <= 10 * 8192);
  CHECK_THROWS_AS(plan_quantization(128, 1000, 8192.0), Error);
  // Never over budget, and one more bit would be.
  Rng rng(2);
  for (int i = 0; i < 200; ++i) {
    const int n = 1 + static_cast<int>(rng.index(400));
    const double budget = rng.uniform(128.0 * n, 64.0 * 128 * n);
    const auto q = plan_quantization(128, n, budget);
    CHECK(q.total_cost_bits <= budget);
    if (q.bits_per_component < scenario::kLosslessBits) CHECK(128.0 * n * (q.bits_per_component + 1) > budget);
  }
}

TEST_CASE("optimal assignment matches permutation search") {
  Rng rng(3);
  for (int trial = 0; trial < 40; ++trial) {
    const int r = 2 + static_cast<int>(rng.index(5));
    const int c = r + static_cast<int>(rng.index(3));
    Eigen::MatrixXd cost(r, c);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) cost(i, j) = rng.uniform();
    const auto a = optimal_assignment(cost);
    double s = 0.0;
    std::vector<bool> used(c, false);
    for (int i = 0; i < r; ++i) {
      REQUIRE(a[i] >= 0);
      CHECK(!used[a[i]]);
      used[a[i]] = true;
      s += cost(i, a[i]);
    }
    CHECK(s == doctest::Approx(oracle::brute_assignment_cost(cost)).epsilon(1e-12));
    // More rows than columns: every column used once, extra rows unassigned.
    const auto t = optimal_assignment(cost.transpose());
    CHECK(std::count(t.begin(), t.end(), -1) == c - r);
  }
}

TEST_CASE("matching keeps the closest top_n pairs") {
  std::vector<Descriptor> a{{0.0, 0.0}, {5.0, 5.0}, {10.0, 0.0}};
  std::vector<Descriptor> b{{10.1, 0.0}, {0.0, 0.3}, {5.0, 5.2}};
  auto m = match_keypoints(a, b, 2);
  REQUIRE(m.pairs.size() == 2);
  CHECK(m.pairs[0].index_a == 2);
  CHECK(m.pairs[0].index_b == 0);
  CHECK(m.pairs[1].index_a == 1);
  CHECK(m.pairs[0].distance <= m.pairs[1].distance);
  CHECK_FALSE(m.shortfall);
  m = match_keypoints(a, b, 5);
  CHECK(m.pairs.size() == 3);
  CHECK(m.shortfall);
  CHECK_THROWS_AS(match_keypoints(a, {}, 3), Error);
}

TEST_CASE("noiseless homography and pose recovery") {
  const auto cam = demo_camera();
  Rng rng(4);
  for (int n : {4, 6, 30}) {
    const auto corr = oracle::exact_correspondences(cam, n, rng, 0.0, 12.0, 0.0, 14.0);
    const Mat3 h = estimate_homography(corr);
    CHECK(h.norm() == doctest::Approx(1.0));
    const Mat3 g = cam.ground_matrix() / cam.ground_matrix().norm();
    CHECK((h - g * (g(2, 2) < 0 ? -1.0 : 1.0)).norm() < 1e-9);
    const auto e = recover_extrinsics(h, cam.intrinsics, corr[0].world_point);
    CHECK(e.is_valid());
    CHECK(rotation_error_deg(e, cam.extrinsics) < 1e-6);
    CHECK(translation_error_m(e, cam.extrinsics) < 1e-6);
    CHECK(extrinsic_error(e, cam.extrinsics) < 1e-6);
  }
}

// Plain DLT design matrix, used only to show what point conditioning buys.
static double raw_dlt_condition(std::span<const Correspondence> corr) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2 * static_cast<Eigen::Index>(corr.size()), 9);
  for (std::size_t k = 0; k < corr.size(); ++k) {
    const Vec3 x = corr[k].world_point.homogeneous();
    const Vec2 y = corr[k].image_point;
    const auto r = 2 * static_cast<Eigen::Index>(k);
    a.block<1, 3>(r, 0) = -x.transpose();
    a.block<1, 3>(r, 6) = y.x() * x.transpose();
    a.block<1, 3>(r + 1, 3) = -x.transpose();
    a.block<1, 3>(r + 1, 6) = y.y() * x.transpose();
  }
  const Eigen::VectorXd s = Eigen::JacobiSVD<Eigen::MatrixXd>(a).singularValues();
  return s(0) / s(7);
}

TEST_CASE("homography stays accurate in badly scaled coordinates") {
  // Far-off world origin and a large principal point push the raw design
  // matrix towards rank deficiency; the conditioned estimate must not care.
  const auto cam = look_at({1400, 1400, 2.0e4, 1.5e4}, 40000, 30000, Vec3(999, 2003, 3),
                           Vec3(1007, 2007, 0));
  Rng rng(9);
  const auto corr = oracle::exact_correspondences(cam, 12, rng, 1000.0, 1012.0, 2000.0, 2014.0);
  CHECK(raw_dlt_condition(corr) > 1e9);
  const Mat3 h = estimate_homography(corr);
  for (const auto& c : corr) {
    const Vec2 p = (h * c.world_point.homogeneous()).hnormalized();
    CHECK((p - c.image_point).norm() < 1e-6);
  }
}

TEST_CASE("degenerate layouts") {
  const auto cam = demo_camera();
  Rng rng(5);
  auto corr = oracle::exact_correspondences(cam, 3, rng, 0.0, 12.0, 0.0, 14.0);
  CHECK_THROWS_AS(estimate_homography(corr), Error);
  std::vector<Correspondence> line;
  for (int i = 0; i < 6; ++i) {
    const Vec2 g(2.0 + i, 8.0);
    line.push_back({project_ground(cam, g), g, 0.0});
  }
  try {
    estimate_homography(line);
    FAIL("collinear points accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDegenerate);
  }
}

TEST_CASE("rotation error is the geodesic angle") {
  Extrinsics a, b;
  for (double deg : {0.5, 10.0, 90.0, 170.0}) {
    b.rotation = Eigen::AngleAxisd(deg * std::numbers::pi / 180.0, Vec3(1, 2, 3).normalized()).toRotationMatrix();
    CHECK(rotation_error_deg(a, b) == doctest::Approx(deg).epsilon(1e-9));
  }
  b.translation = Vec3(3, 4, 0);
  CHECK(translation_error_m(a, b) == doctest::Approx(5.0));
}

TEST_CASE("drift averages linearly over the interval") {
  const auto cam = demo_camera();
  Rng rng(6);
  const auto d = DriftModel::random(0.1, 0.01, rng);
  CHECK(d.axis.norm() == doctest::Approx(1.0));
  const auto p = d.apply(cam.extrinsics, 0.0);
  CHECK((p.rotation - cam.extrinsics.rotation).norm() < 1e-15);
  const auto later = d.apply(cam.extrinsics, 20.0);
  CHECK(rotation_error_deg(later, cam.extrinsics) == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(translation_error_m(later, cam.extrinsics) == doctest::Approx(0.2).epsilon(1e-9));
  const auto avg = interval_averaged_errors(cam.extrinsics, cam.extrinsics, d, 20.0);
  CHECK(avg.rotation_error_deg == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(avg.translation_error_m == doctest::Approx(0.1).epsilon(1e-6));
  const auto none = interval_averaged_errors(later, cam.extrinsics, d, 0.0);
  CHECK(none.rotation_error_deg == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("end-to-end calibration on the default fleet") {
  const auto fleet = experiment::build_fleet(experiment::default_camera_specs());
  const auto trace = experiment::make_scene({}, 12);
  experiment::CalibrationTrialConfig cfg;
  const auto r = experiment::run_calibration_trial(trace, fleet, cfg, 7);
  CHECK(r.failures == 0);
  CHECK(r.cameras.size() == fleet.size() * cfg.epochs);
  CHECK(r.mean_rotation_error_deg < 5.0);
  CHECK(r.mean_translation_error_m < 2.0);
  for (const auto& c : r.cameras) {
    CHECK(c.reference != c.camera);
    CHECK(c.report.cost_bits <= cfg.options.budget_bits);
    CHECK(c.report.correspondences >= 4);
  }
  // Same seed, same numbers.
  const auto again = experiment::run_calibration_trial(trace, fleet, cfg, 7);
  CHECK(again.mean_rotation_error_deg == r.mean_rotation_error_deg);
  // A tighter budget costs accuracy.
  cfg.options.budget_bits = 10.0 * 8192;
  const auto tight = experiment::run_calibration_trial(trace, fleet, cfg, 7);
  CHECK(tight.mean_quantization_bits < r.mean_quantization_bits);
  CHECK(tight.mean_rotation_error_deg >= r.mean_rotation_error_deg);
}

TEST_CASE("reference selection prefers overlapping views") {
  const auto fleet = experiment::build_fleet(experiment::default_camera_specs());
  const auto trace = experiment::make_scene({}, 13);
  Rng rng(1);
  std::vector<std::vector<FrameObservation>> obs(fleet.size());
  for (int s = 0; s < 40; s += 4) {
    for (std::size_t k = 0; k < fleet.size(); ++k) obs[k].push_back(observe_frame(trace, fleet[k], s, 1.0, rng));
  }
  // Camera 4 watches the far end; camera 0's overlap is with 1 and 6.
  std::vector<std::vector<FrameObservation>> cands{obs[4], obs[6]};
  CHECK(select_reference(cands, obs[0], 4.2) == 1);
}
