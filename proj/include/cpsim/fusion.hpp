#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "cpsim/camera.hpp"
#include "cpsim/random.hpp"
#include "cpsim/scenario.hpp"
#include "cpsim/sched.hpp"

// Priority-aware multi-view occupancy fusion and MODA scoring.
namespace cpsim::fusion {

using calib::CameraModel;
using calib::Vec2;

struct FeatureMap {
  int agent_id = 0;
  int time_index = 0;
  int channels = 1;
  int height = 0;
  int width = 0;
  std::vector<double> values;  // channel-major, then row-major

  double at(int c, int y, int x) const {
    return values[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
};

struct FeatureOptions {
  int stride_px = 8;
  // Ground-plane spread of a target's footprint; the image bump is
  // f * sigma / depth pixels wide.
  double target_sigma_m = 0.2;
  double min_sigma_cells = 0.75;
  // Noise std = noise_base * (1 - q) + noise_floor, q the normalized proxy
  // accuracy at the stream rate.
  double noise_base = 0.6;
  double noise_floor = 0.02;
  sched::AccuracyProxy proxy;

  void validate() const;
  bool operator==(const FeatureOptions&) const = default;
};

// Normalized accuracy of the proxy at `rate_bits`, in [0, 1].
double rate_quality(const sched::AccuracyProxy& proxy, double rate_bits);
double noise_std(const FeatureOptions& options, double rate_bits);

// Synthetic single-channel detection heat map: unit Gaussian bumps at the
// projected foot points of visible targets plus rate-dependent noise.
// Deterministic in (seed, agent_id, step).
FeatureMap extract_features(const CameraModel& camera, int agent_id,
                            const scenario::ScenarioTrace& trace, int step, double rate_bits,
                            const FeatureOptions& options, std::uint64_t seed);

// Average pooling over all C * H * W values.
double priority(const FeatureMap& feature);

struct PriorityMask {
  double priority = 0.0;
  int mask = 1;
};

// floor(r K + 0.5) lowest-priority views get mask 0; ties go to the lower
// index first.
int masked_count(std::size_t views, double loss_rate);
std::vector<PriorityMask> assign_masks(std::span<const double> priorities, double loss_rate);

// Same count as assign_masks, chosen uniformly at random.
std::vector<PriorityMask> random_masks(std::span<const double> priorities, double loss_rate,
                                       Rng& rng);

// Loss penalty alpha * sum(1 - m); reported, never optimized.
double loss_penalty(std::span<const PriorityMask> masks, double alpha = 1.0);

// Per-camera lookup from ground cells to continuous feature-map coordinates.
struct GroundWarp {
  int grid_w = 0;
  int grid_h = 0;
  int feature_w = 0;
  int feature_h = 0;
  std::vector<float> u;  // NaN: cell not seen by the camera
  std::vector<float> v;

  static GroundWarp build(const CameraModel& camera, const scenario::Arena& arena, int stride_px);
  bool sees(std::size_t cell) const { return u[cell] == u[cell]; }
  // Bilinear sample of channel 0 at a ground cell the camera sees.
  double sample(const FeatureMap& feature, std::size_t cell) const;
};

struct OccupancyMap {
  int width = 0;   // cells along x
  int height = 0;  // cells along y
  std::vector<double> scores;  // row-major over y, in [0, 1]
  bool all_masked = false;

  double at(int ix, int iy) const { return scores[static_cast<std::size_t>(iy) * width + ix]; }
};

// Mask-normalized average of the warped unmasked maps, clipped to [0, 1].
// Cells no unmasked camera sees score 0.
OccupancyMap fuse(std::span<const FeatureMap> features, std::span<const PriorityMask> masks,
                  std::span<const GroundWarp> warps);

struct Detection {
  int ix = 0;
  int iy = 0;
  double score = 0.0;
  Vec2 position;
};

// Local maxima (3x3, ties kept) at or above threshold, then greedy
// non-maximum suppression by descending score.
std::vector<Detection> detect_peaks(const OccupancyMap& map, const scenario::Arena& arena,
                                    double threshold, double min_separation_cells);

struct ModaReport {
  int true_positives = 0;
  int misses = 0;
  int false_positives = 0;
  int ground_truth_count = 0;
  double moda_percent = 0.0;
};

// Greedy closest-pair matching within radius.
ModaReport moda(std::span<const Detection> detections, std::span<const Vec2> ground_truth,
                double match_radius_m);

// Accumulates counts over frames; moda_percent recomputed from the totals.
ModaReport& operator+=(ModaReport& total, const ModaReport& frame);

// 8-bit binary PGM, one pixel per cell, rows in increasing y.
void write_pgm(std::ostream& out, const OccupancyMap& map);
void write_detections_header(std::ostream& out);
void write_detections(std::ostream& out, int step, std::span<const Detection> detections);

}  // namespace cpsim::fusion
