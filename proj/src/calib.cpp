#include "cpsim/calib.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "cpsim/error.hpp"

namespace cpsim::calib {

namespace {
constexpr double kDegenerateRatio = 1e-10;

double euclidean(const Descriptor& a, const Descriptor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

// Similarity taking the points to zero centroid and mean distance sqrt(2).
Mat3 hartley_transform(const std::vector<Vec2>& pts) {
  Vec2 c = Vec2::Zero();
  for (const auto& p : pts) c += p;
  c /= static_cast<double>(pts.size());
  double mean_dist = 0.0;
  for (const auto& p : pts) mean_dist += (p - c).norm();
  mean_dist /= static_cast<double>(pts.size());
  if (mean_dist <= 0.0) {
    throw Error(ErrorCode::kDegenerate, "all points coincide", "correspondences");
  }
  const double s = std::numbers::sqrt2 / mean_dist;
  Mat3 t;
  t << s, 0.0, -s * c.x(), 0.0, s, -s * c.y(), 0.0, 0.0, 1.0;
  return t;
}

Mat3 nearest_rotation(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 u = svd.matrixU();
  const Mat3 v = svd.matrixV();
  Mat3 r = u * v.transpose();
  if (r.determinant() < 0.0) {
    u.col(2) *= -1.0;
    r = u * v.transpose();
  }
  return r;
}

Mat3 axis_angle(const Vec3& axis, double angle_rad) {
  return Eigen::AngleAxisd(angle_rad, axis.normalized()).toRotationMatrix();
}
}  // namespace

QuantizationPlan plan_quantization(int dim, int n_keypoints, double budget_bits, int max_bits) {
  require(dim > 0, ErrorCode::kDomain, "descriptor_dim", "must be positive");
  require(n_keypoints > 0, ErrorCode::kDomain, "n_keypoints", "must be positive");
  require(max_bits >= 1, ErrorCode::kDomain, "max_bits", "must be >= 1");
  const double per_bit = static_cast<double>(dim) * n_keypoints;
  if (budget_bits < per_bit) {
    throw Error(ErrorCode::kBudget,
                "budget of " + std::to_string(budget_bits) + " bits cannot carry one bit per "
                "component (" + std::to_string(per_bit) + " needed)",
                "budget_bits");
  }
  QuantizationPlan plan;
  plan.descriptor_dim = dim;
  plan.n_keypoints = n_keypoints;
  plan.bits_per_component =
      static_cast<int>(std::min<double>(max_bits, std::floor(budget_bits / per_bit)));
  plan.total_cost_bits = static_cast<std::int64_t>(plan.bits_per_component) * dim * n_keypoints;
  return plan;
}

std::vector<int> optimal_assignment(const Eigen::MatrixXd& cost) {
  const auto rows = static_cast<int>(cost.rows());
  const auto cols = static_cast<int>(cost.cols());
  if (rows == 0 || cols == 0) return std::vector<int>(static_cast<std::size_t>(rows), -1);
  if (rows > cols) {
    const auto by_col = optimal_assignment(cost.transpose());
    std::vector<int> out(static_cast<std::size_t>(rows), -1);
    for (int j = 0; j < cols; ++j) out[static_cast<std::size_t>(by_col[j])] = j;
    return out;
  }
  // Shortest augmenting path with potentials; 1-based with column 0 as the
  // virtual source.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(rows + 1, 0.0), v(cols + 1, 0.0);
  std::vector<int> p(cols + 1, 0), way(cols + 1, 0);
  for (int i = 1; i <= rows; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(cols + 1, inf);
    std::vector<char> used(cols + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= cols; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= cols; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> out(static_cast<std::size_t>(rows), -1);
  for (int j = 1; j <= cols; ++j) {
    if (p[j] != 0) out[static_cast<std::size_t>(p[j] - 1)] = j - 1;
  }
  return out;
}

MatchResult match_keypoints(std::span<const Descriptor> a, std::span<const Descriptor> b,
                            std::size_t top_n) {
  require(!a.empty() && !b.empty(), ErrorCode::kDomain, "descriptors",
          "both descriptor sets must be non-empty");
  require(top_n >= 1, ErrorCode::kDomain, "top_n", "must be >= 1");
  Eigen::MatrixXd dist(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    require(a[i].size() == b.front().size(), ErrorCode::kDomain, "descriptors",
            "dimension mismatch");
    for (std::size_t j = 0; j < b.size(); ++j) {
      dist(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = euclidean(a[i], b[j]);
    }
  }

  MatchResult result;
  if (std::max(a.size(), b.size()) <= kOptimalMatchLimit) {
    const auto assign = optimal_assignment(dist);
    for (std::size_t i = 0; i < assign.size(); ++i) {
      if (assign[i] < 0) continue;
      const auto j = static_cast<std::size_t>(assign[i]);
      result.pairs.push_back({i, j, dist(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))});
    }
  } else {
    std::vector<MatchPair> all;
    all.reserve(a.size() * b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      for (std::size_t j = 0; j < b.size(); ++j) {
        all.push_back({i, j, dist(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))});
      }
    }
    std::stable_sort(all.begin(), all.end(),
                     [](const MatchPair& x, const MatchPair& y) { return x.distance < y.distance; });
    std::vector<char> used_a(a.size(), 0), used_b(b.size(), 0);
    for (const auto& m : all) {
      if (used_a[m.index_a] || used_b[m.index_b]) continue;
      used_a[m.index_a] = used_b[m.index_b] = 1;
      result.pairs.push_back(m);
    }
  }
  std::stable_sort(result.pairs.begin(), result.pairs.end(),
                   [](const MatchPair& x, const MatchPair& y) { return x.distance < y.distance; });
  result.shortfall = result.pairs.size() < top_n;
  if (result.pairs.size() > top_n) result.pairs.resize(top_n);
  return result;
}

Mat3 estimate_homography(std::span<const Correspondence> correspondences) {
  const std::size_t n = correspondences.size();
  if (n < 4) {
    throw Error(ErrorCode::kDegenerate, "homography needs at least 4 correspondences",
                "correspondences");
  }
  std::vector<Vec2> world, image;
  world.reserve(n);
  image.reserve(n);
  for (const auto& c : correspondences) {
    if (!c.world_point.allFinite() || !c.image_point.allFinite()) {
      throw Error(ErrorCode::kDomain, "non-finite correspondence", "correspondences");
    }
    world.push_back(c.world_point);
    image.push_back(c.image_point);
  }
  const Mat3 tw = hartley_transform(world);
  const Mat3 ti = hartley_transform(image);

  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(std::max<std::size_t>(2 * n, 9)), 9);
  for (std::size_t k = 0; k < n; ++k) {
    const Vec3 x = tw * world[k].homogeneous();
    const Vec3 y = ti * image[k].homogeneous();
    const auto r = static_cast<Eigen::Index>(2 * k);
    a.block<1, 3>(r, 0) = -x.transpose();
    a.block<1, 3>(r, 6) = y.x() * x.transpose();
    a.block<1, 3>(r + 1, 3) = -x.transpose();
    a.block<1, 3>(r + 1, 6) = y.y() * x.transpose();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  if (s(0) <= 0.0 || s(7) / s(0) < kDegenerateRatio) {
    throw Error(ErrorCode::kDegenerate,
                "correspondences do not determine a unique homography (collinear layout?)",
                "correspondences");
  }
  const Eigen::VectorXd h = svd.matrixV().col(8);
  Mat3 hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  Mat3 out = ti.inverse() * hn * tw;
  out /= out.norm();
  if (out(2, 2) < 0.0) out = -out;
  return out;
}

Extrinsics recover_extrinsics(const Mat3& h, const Intrinsics& k, const Vec2& ground_hint) {
  const Mat3 m = k.inverse() * h;
  const double n1 = m.col(0).norm();
  if (!(n1 > 1e-12)) {
    throw Error(ErrorCode::kDegenerate, "homography has a vanishing first column", "homography");
  }
  double scale = 1.0 / n1;
  const Vec3 hint = m.col(0) * ground_hint.x() + m.col(1) * ground_hint.y() + m.col(2);
  if (hint.z() * scale < 0.0) scale = -scale;
  const Vec3 r1 = scale * m.col(0);
  const Vec3 r2 = scale * m.col(1);
  Mat3 r;
  r.col(0) = r1;
  r.col(1) = r2;
  r.col(2) = r1.cross(r2);
  Extrinsics e;
  e.rotation = nearest_rotation(r);
  e.translation = scale * m.col(2);
  return e;
}

double extrinsic_error(const Extrinsics& recovered, const Extrinsics& ground_truth) {
  return (recovered.matrix() - ground_truth.matrix()).norm() / ground_truth.matrix().norm() * 100.0;
}

double rotation_error_deg(const Extrinsics& recovered, const Extrinsics& ground_truth) {
  // ||R1 - R2||_F = 2 sqrt(2) sin(theta / 2); stable for small angles.
  const double chord = (recovered.rotation - ground_truth.rotation).norm() / (2.0 * std::numbers::sqrt2);
  return 2.0 * std::asin(std::min(1.0, chord)) * 180.0 / std::numbers::pi;
}

double translation_error_m(const Extrinsics& recovered, const Extrinsics& ground_truth) {
  return (recovered.translation - ground_truth.translation).norm();
}

FrameObservation observe_frame(const scenario::ScenarioTrace& trace, const CameraModel& camera,
                               int step, double pixel_noise_px, Rng& rng) {
  FrameObservation frame;
  frame.step = step;
  for (const auto& track : trace.tracks) {
    const auto ground = track.position_at_step(step);
    if (!ground) continue;
    const auto px = visible_pixel(camera, *ground);
    if (!px) continue;
    Keypoint kp;
    kp.identity = track.id;
    kp.pixel = *px + Vec2(pixel_noise_px * rng.normal(), pixel_noise_px * rng.normal());
    kp.descriptor = *scenario::observe_descriptor(trace, track, camera, step,
                                                  scenario::kLosslessBits, rng);
    frame.keypoints.push_back(std::move(kp));
  }
  return frame;
}

CalibrationResult calibrate(const Intrinsics& recal_intrinsics, const CameraModel& reference,
                            std::span<const FrameObservation> reference_observations,
                            std::span<const FrameObservation> recal_observations,
                            const CalibrationOptions& options,
                            const std::optional<Extrinsics>& ground_truth) {
  require(reference_observations.size() == recal_observations.size(), ErrorCode::kDomain,
          "observations", "reference and recalibration frame counts differ");
  std::size_t sent = 0;
  int dim = 0;
  for (const auto& f : reference_observations) {
    sent += f.keypoints.size();
    for (const auto& kp : f.keypoints) dim = static_cast<int>(kp.descriptor.size());
  }
  if (sent == 0) {
    throw Error(ErrorCode::kCalibrationInfeasible, "reference camera observed no targets",
                "reference_observations");
  }

  CalibrationResult result;
  const auto plan =
      plan_quantization(dim, static_cast<int>(sent), options.budget_bits, options.max_bits);
  result.report.quantization_bits = plan.bits_per_component;
  result.report.cost_bits = plan.total_cost_bits;
  result.report.keypoints_sent = sent;

  for (std::size_t f = 0; f < reference_observations.size(); ++f) {
    const auto& ref = reference_observations[f];
    const auto& rec = recal_observations[f];
    if (ref.keypoints.empty() || rec.keypoints.empty()) {
      ++result.report.shortfall_frames;
      continue;
    }
    std::vector<Descriptor> ref_desc, rec_desc;
    for (const auto& kp : ref.keypoints) {
      ref_desc.push_back(scenario::quantize(kp.descriptor, plan.bits_per_component,
                                            options.descriptor_clip));
    }
    for (const auto& kp : rec.keypoints) rec_desc.push_back(kp.descriptor);
    const auto matches = match_keypoints(ref_desc, rec_desc, options.top_n);
    if (matches.shortfall) ++result.report.shortfall_frames;
    for (const auto& m : matches.pairs) {
      const auto& rk = ref.keypoints[m.index_a];
      const auto& ck = rec.keypoints[m.index_b];
      result.correspondences.push_back(
          {ck.pixel, ground_from_image(reference, rk.pixel), m.distance});
      if (rk.identity >= 0 && rk.identity == ck.identity) ++result.report.correct_matches;
    }
  }
  result.report.correspondences = result.correspondences.size();
  if (result.correspondences.size() < 4) {
    throw Error(ErrorCode::kCalibrationInfeasible,
                "only " + std::to_string(result.correspondences.size()) +
                    " correspondences after matching; need at least 4",
                "top_n");
  }

  result.homography = estimate_homography(result.correspondences);
  Vec2 centroid = Vec2::Zero();
  for (const auto& c : result.correspondences) centroid += c.world_point;
  centroid /= static_cast<double>(result.correspondences.size());
  result.extrinsics = recover_extrinsics(result.homography, recal_intrinsics, centroid);

  if (ground_truth) {
    result.report.has_ground_truth = true;
    result.report.rotation_error_deg = rotation_error_deg(result.extrinsics, *ground_truth);
    result.report.translation_error_m = translation_error_m(result.extrinsics, *ground_truth);
    result.report.extrinsic_error_pct = extrinsic_error(result.extrinsics, *ground_truth);
  }
  return result;
}

std::size_t select_reference(std::span<const std::vector<FrameObservation>> candidates,
                             std::span<const FrameObservation> recal_observations,
                             double distance_threshold) {
  require(!candidates.empty(), ErrorCode::kDomain, "candidates", "need at least one candidate");
  std::size_t best = 0;
  std::size_t best_count = 0;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    std::size_t count = 0;
    const auto& frames = candidates[c];
    for (std::size_t f = 0; f < std::min(frames.size(), recal_observations.size()); ++f) {
      if (frames[f].keypoints.empty() || recal_observations[f].keypoints.empty()) continue;
      std::vector<Descriptor> a, b;
      for (const auto& kp : frames[f].keypoints) a.push_back(kp.descriptor);
      for (const auto& kp : recal_observations[f].keypoints) b.push_back(kp.descriptor);
      const auto m = match_keypoints(a, b, std::max(a.size(), b.size()));
      for (const auto& p : m.pairs) {
        if (p.distance < distance_threshold) ++count;
      }
    }
    if (count > best_count) {
      best_count = count;
      best = c;
    }
  }
  return best;
}

DriftModel DriftModel::random(double rate_deg_per_s, double speed_m_per_s, Rng& rng) {
  DriftModel d;
  d.rate_deg_per_s = rate_deg_per_s;
  d.speed_m_per_s = speed_m_per_s;
  Vec3 a(rng.normal(), rng.normal(), rng.normal());
  Vec3 b(rng.normal(), rng.normal(), rng.normal());
  d.axis = a.normalized();
  d.direction = b.normalized();
  return d;
}

Extrinsics DriftModel::apply(const Extrinsics& pose, double elapsed_s) const {
  Extrinsics out;
  const double angle = rate_deg_per_s * elapsed_s * std::numbers::pi / 180.0;
  out.rotation = axis_angle(axis, angle) * pose.rotation;
  out.translation = pose.translation + speed_m_per_s * elapsed_s * direction;
  return out;
}

DriftErrors interval_averaged_errors(const Extrinsics& estimate, const Extrinsics& truth_at_calibration,
                                     const DriftModel& drift, double interval_s, int samples) {
  require(interval_s >= 0.0, ErrorCode::kDomain, "calibration_interval_s", "must be >= 0");
  require(samples >= 1, ErrorCode::kDomain, "samples", "must be >= 1");
  DriftErrors e;
  for (int i = 0; i < samples; ++i) {
    const double t = interval_s * (i + 0.5) / samples;
    const Extrinsics truth = drift.apply(truth_at_calibration, t);
    e.rotation_error_deg += rotation_error_deg(estimate, truth);
    e.translation_error_m += translation_error_m(estimate, truth);
    e.extrinsic_error_pct += extrinsic_error(estimate, truth);
  }
  e.rotation_error_deg /= samples;
  e.translation_error_m /= samples;
  e.extrinsic_error_pct /= samples;
  return e;
}

}  // namespace cpsim::calib
