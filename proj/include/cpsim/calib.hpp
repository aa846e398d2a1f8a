#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "cpsim/camera.hpp"
#include "cpsim/random.hpp"
#include "cpsim/scenario.hpp"

// Ground-plane extrinsic self-calibration from descriptor matches shared by a
// reference camera under a bit budget.
namespace cpsim::calib {

using scenario::Descriptor;

struct Correspondence {
  Vec2 image_point;  // pixel in the camera being calibrated
  Vec2 world_point;  // ground-plane metres
  double match_distance = 0.0;
};

struct QuantizationPlan {
  int bits_per_component = 0;
  int descriptor_dim = 0;
  int n_keypoints = 0;
  std::int64_t total_cost_bits = 0;
};

// Largest uniform bit depth q (capped at max_bits) with n * q * dim within the
// budget. Throws kBudget when even one bit per component does not fit.
QuantizationPlan plan_quantization(int dim, int n_keypoints, double budget_bits,
                                   int max_bits = scenario::kLosslessBits);

struct MatchPair {
  std::size_t index_a = 0;
  std::size_t index_b = 0;
  double distance = 0.0;
};

struct MatchResult {
  std::vector<MatchPair> pairs;  // ascending by distance
  bool shortfall = false;        // fewer than top_n pairs were available
};

// Above this many candidates on either side, matching falls back from the
// optimal assignment to greedy mutual-nearest-neighbour.
inline constexpr std::size_t kOptimalMatchLimit = 64;

// Minimum-cost one-to-one assignment of rows to columns (Hungarian method).
// Returns, for each row, its column or -1 when there are more rows than
// columns.
std::vector<int> optimal_assignment(const Eigen::MatrixXd& cost);

// One-to-one Euclidean matching truncated to the top_n closest pairs.
MatchResult match_keypoints(std::span<const Descriptor> a, std::span<const Descriptor> b,
                            std::size_t top_n);

// Normalized DLT from ground points to pixels, ||H||_F = 1 and H(2,2) >= 0.
// Throws kDegenerate for fewer than four points or rank-deficient layouts.
Mat3 estimate_homography(std::span<const Correspondence> correspondences);

// Pose from H = s K [r1 r2 t]. Scale fixes ||r1|| = 1, sign puts
// `ground_hint` in front of the camera, and R is projected to the nearest
// rotation.
Extrinsics recover_extrinsics(const Mat3& h, const Intrinsics& k,
                              const Vec2& ground_hint = Vec2::Zero());

// Relative Frobenius error of [R|t] in percent.
double extrinsic_error(const Extrinsics& recovered, const Extrinsics& ground_truth);
// Geodesic angle between the rotations, degrees.
double rotation_error_deg(const Extrinsics& recovered, const Extrinsics& ground_truth);
// ||t_rec - t_gt||, metres.
double translation_error_m(const Extrinsics& recovered, const Extrinsics& ground_truth);

struct Keypoint {
  Vec2 pixel;
  Descriptor descriptor;
  int identity = -1;  // ground-truth id, evaluation only
};

struct FrameObservation {
  int step = 0;
  std::vector<Keypoint> keypoints;
};

// Every target visible from `camera` at `step`, with Gaussian pixel noise on
// the foot point and an unquantized view-noisy descriptor.
FrameObservation observe_frame(const scenario::ScenarioTrace& trace, const CameraModel& camera,
                               int step, double pixel_noise_px, Rng& rng);

struct CalibrationOptions {
  double budget_bits = 30.0 * 8192.0;
  std::size_t top_n = 5;
  int max_bits = scenario::kLosslessBits;
  double descriptor_clip = 4.0;
};

struct CalibrationReport {
  double rotation_error_deg = 0.0;
  double translation_error_m = 0.0;
  double extrinsic_error_pct = 0.0;
  int quantization_bits = 0;
  std::int64_t cost_bits = 0;
  std::size_t keypoints_sent = 0;
  std::size_t correspondences = 0;
  std::size_t correct_matches = 0;
  std::size_t shortfall_frames = 0;
  bool has_ground_truth = false;
};

struct CalibrationResult {
  Extrinsics extrinsics;
  Mat3 homography = Mat3::Identity();
  std::vector<Correspondence> correspondences;
  CalibrationReport report;
};

// Quantize the reference descriptors to the budget, match each frame against
// the camera being calibrated, lift reference pixels to the ground through
// the reference camera, then solve for the pose. Frames are paired by index.
// Throws kBudget for an infeasible budget and kCalibrationInfeasible when
// fewer than four correspondences survive matching.
CalibrationResult calibrate(const Intrinsics& recal_intrinsics, const CameraModel& reference,
                            std::span<const FrameObservation> reference_observations,
                            std::span<const FrameObservation> recal_observations,
                            const CalibrationOptions& options,
                            const std::optional<Extrinsics>& ground_truth = std::nullopt);

// Index of the candidate reference whose frames produce the most matches
// closer than `distance_threshold` to the recalibrating camera's frames.
std::size_t select_reference(std::span<const std::vector<FrameObservation>> candidates,
                             std::span<const FrameObservation> recal_observations,
                             double distance_threshold);

// Linear pose drift of the true camera after calibration: a rotation about a
// camera-frame axis and a translation along a camera-frame direction.
struct DriftModel {
  double rate_deg_per_s = 0.0;
  double speed_m_per_s = 0.0;
  Vec3 axis = Vec3::UnitZ();
  Vec3 direction = Vec3::UnitX();

  static DriftModel random(double rate_deg_per_s, double speed_m_per_s, Rng& rng);
  Extrinsics apply(const Extrinsics& pose, double elapsed_s) const;
};

struct DriftErrors {
  double rotation_error_deg = 0.0;
  double translation_error_m = 0.0;
  double extrinsic_error_pct = 0.0;
};

// Errors of a fixed estimate against the drifting truth, time-averaged over
// [0, interval_s] (midpoint rule).
DriftErrors interval_averaged_errors(const Extrinsics& estimate, const Extrinsics& truth_at_calibration,
                                     const DriftModel& drift, double interval_s, int samples = 64);

}  // namespace cpsim::calib
