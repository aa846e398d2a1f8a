#include "cpsim/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <tuple>

#include "cpsim/error.hpp"
#include "cpsim/textio.hpp"

namespace cpsim::fusion {

void FeatureOptions::validate() const {
  require(stride_px >= 1, ErrorCode::kValidation, "fusion.stride_px", "must be >= 1");
  require(target_sigma_m > 0.0, ErrorCode::kValidation, "fusion.target_sigma_m", "must be > 0");
  require(min_sigma_cells > 0.0, ErrorCode::kValidation, "fusion.min_sigma_cells", "must be > 0");
  require(noise_base >= 0.0, ErrorCode::kValidation, "fusion.noise_base", "must be >= 0");
  require(noise_floor >= 0.0, ErrorCode::kValidation, "fusion.noise_floor", "must be >= 0");
  proxy.validate();
}

double rate_quality(const sched::AccuracyProxy& proxy, double rate_bits) {
  if (std::isinf(rate_bits)) return 1.0;
  const double q = (proxy(std::max(0.0, rate_bits)) - proxy.floor) / (proxy.gamma_max - proxy.floor);
  return std::clamp(q, 0.0, 1.0);
}

double noise_std(const FeatureOptions& options, double rate_bits) {
  return options.noise_base * (1.0 - rate_quality(options.proxy, rate_bits)) + options.noise_floor;
}

FeatureMap extract_features(const CameraModel& camera, int agent_id,
                            const scenario::ScenarioTrace& trace, int step, double rate_bits,
                            const FeatureOptions& options, std::uint64_t seed) {
  options.validate();
  require(step >= 0 && step < trace.step_count(), ErrorCode::kDomain, "step", "out of range");
  FeatureMap f;
  f.agent_id = agent_id;
  f.time_index = step;
  f.width = (camera.image_width_px + options.stride_px - 1) / options.stride_px;
  f.height = (camera.image_height_px + options.stride_px - 1) / options.stride_px;
  f.values.assign(static_cast<std::size_t>(f.width) * f.height, 0.0);
  const double s = options.stride_px;

  for (std::size_t idx : trace.active_at_step(step)) {
    const Vec2 ground = *trace.tracks[idx].position_at_step(step);
    const auto px = calib::visible_pixel(camera, ground);
    if (!px) continue;
    const double depth = camera.depth(calib::Vec3(ground.x(), ground.y(), 0.0));
    const double sigma =
        std::max(options.min_sigma_cells, camera.intrinsics.fy * options.target_sigma_m / depth / s);
    const double cu = px->x() / s - 0.5;
    const double cv = px->y() / s - 0.5;
    const int r = static_cast<int>(std::ceil(4.0 * sigma));
    const int x0 = std::max(0, static_cast<int>(std::floor(cu)) - r);
    const int x1 = std::min(f.width - 1, static_cast<int>(std::ceil(cu)) + r);
    const int y0 = std::max(0, static_cast<int>(std::floor(cv)) - r);
    const int y1 = std::min(f.height - 1, static_cast<int>(std::ceil(cv)) + r);
    const double inv = 1.0 / (2.0 * sigma * sigma);
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double d2 = (x - cu) * (x - cu) + (y - cv) * (y - cv);
        auto& cell = f.values[static_cast<std::size_t>(y) * f.width + x];
        cell = std::max(cell, std::exp(-d2 * inv));
      }
    }
  }

  const double sd = noise_std(options, rate_bits);
  Rng rng(derive_seed(derive_seed(seed, static_cast<std::uint64_t>(agent_id) + 1),
                      static_cast<std::uint64_t>(step)));
  for (auto& v : f.values) v += sd * rng.normal();
  return f;
}

double priority(const FeatureMap& feature) {
  require(!feature.values.empty(), ErrorCode::kDomain, "feature", "empty feature map");
  double sum = 0.0;
  for (double v : feature.values) sum += v;
  return sum / static_cast<double>(feature.values.size());
}

int masked_count(std::size_t views, double loss_rate) {
  require(loss_rate >= 0.0 && loss_rate <= 1.0, ErrorCode::kDomain, "loss_rate",
          "must lie in [0, 1]");
  return static_cast<int>(std::floor(loss_rate * static_cast<double>(views) + 0.5));
}

std::vector<PriorityMask> assign_masks(std::span<const double> priorities, double loss_rate) {
  const int n_masked = masked_count(priorities.size(), loss_rate);
  std::vector<std::size_t> order(priorities.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return priorities[a] < priorities[b]; });
  std::vector<PriorityMask> out(priorities.size());
  for (std::size_t k = 0; k < priorities.size(); ++k) out[k].priority = priorities[k];
  for (int i = 0; i < n_masked; ++i) out[order[i]].mask = 0;
  return out;
}

std::vector<PriorityMask> random_masks(std::span<const double> priorities, double loss_rate,
                                       Rng& rng) {
  const int n_masked = masked_count(priorities.size(), loss_rate);
  std::vector<std::size_t> order(priorities.size());
  std::iota(order.begin(), order.end(), 0);
  // Partial Fisher-Yates.
  for (int i = 0; i < n_masked; ++i) {
    const auto j = i + rng.index(order.size() - i);
    std::swap(order[i], order[j]);
  }
  std::vector<PriorityMask> out(priorities.size());
  for (std::size_t k = 0; k < priorities.size(); ++k) out[k].priority = priorities[k];
  for (int i = 0; i < n_masked; ++i) out[order[i]].mask = 0;
  return out;
}

double loss_penalty(std::span<const PriorityMask> masks, double alpha) {
  double n = 0.0;
  for (const auto& m : masks) n += 1 - m.mask;
  return alpha * n;
}

GroundWarp GroundWarp::build(const CameraModel& camera, const scenario::Arena& arena,
                             int stride_px) {
  arena.validate();
  require(stride_px >= 1, ErrorCode::kValidation, "stride_px", "must be >= 1");
  GroundWarp w;
  w.grid_w = arena.grid_w;
  w.grid_h = arena.grid_h;
  w.feature_w = (camera.image_width_px + stride_px - 1) / stride_px;
  w.feature_h = (camera.image_height_px + stride_px - 1) / stride_px;
  const std::size_t n = static_cast<std::size_t>(w.grid_w) * w.grid_h;
  w.u.assign(n, std::numeric_limits<float>::quiet_NaN());
  w.v.assign(n, std::numeric_limits<float>::quiet_NaN());
  const double s = stride_px;
  for (int iy = 0; iy < w.grid_h; ++iy) {
    for (int ix = 0; ix < w.grid_w; ++ix) {
      const auto px = calib::visible_pixel(camera, arena.cell_centre(ix, iy));
      if (!px) continue;
      const std::size_t cell = static_cast<std::size_t>(iy) * w.grid_w + ix;
      w.u[cell] = static_cast<float>(std::clamp(px->x() / s - 0.5, 0.0, w.feature_w - 1.0));
      w.v[cell] = static_cast<float>(std::clamp(px->y() / s - 0.5, 0.0, w.feature_h - 1.0));
    }
  }
  return w;
}

double GroundWarp::sample(const FeatureMap& f, std::size_t cell) const {
  const double u0 = u[cell], v0 = v[cell];
  const int x0 = static_cast<int>(u0), y0 = static_cast<int>(v0);
  const int x1 = std::min(x0 + 1, f.width - 1), y1 = std::min(y0 + 1, f.height - 1);
  const double ax = u0 - x0, ay = v0 - y0;
  const auto* row0 = &f.values[static_cast<std::size_t>(y0) * f.width];
  const auto* row1 = &f.values[static_cast<std::size_t>(y1) * f.width];
  return (1 - ay) * ((1 - ax) * row0[x0] + ax * row0[x1]) + ay * ((1 - ax) * row1[x0] + ax * row1[x1]);
}

OccupancyMap fuse(std::span<const FeatureMap> features, std::span<const PriorityMask> masks,
                  std::span<const GroundWarp> warps) {
  require(!warps.empty(), ErrorCode::kDomain, "warps", "need at least one camera");
  require(features.size() == masks.size() && features.size() == warps.size(), ErrorCode::kDomain,
          "features", "features, masks and warps must have equal length");
  OccupancyMap map;
  map.width = warps.front().grid_w;
  map.height = warps.front().grid_h;
  const std::size_t n = static_cast<std::size_t>(map.width) * map.height;
  for (std::size_t k = 0; k < warps.size(); ++k) {
    require(warps[k].grid_w == map.width && warps[k].grid_h == map.height, ErrorCode::kDomain,
            "warps", "ground grids differ");
    require(features[k].width == warps[k].feature_w && features[k].height == warps[k].feature_h,
            ErrorCode::kDomain, "features", "feature dims do not match the warp");
  }
  map.scores.assign(n, 0.0);
  map.all_masked = std::none_of(masks.begin(), masks.end(), [](const auto& m) { return m.mask != 0; });
  if (map.all_masked) return map;

  std::vector<int> count(n, 0);
  for (std::size_t k = 0; k < warps.size(); ++k) {
    if (masks[k].mask == 0) continue;
    for (std::size_t c = 0; c < n; ++c) {
      if (!warps[k].sees(c)) continue;
      map.scores[c] += warps[k].sample(features[k], c);
      ++count[c];
    }
  }
  for (std::size_t c = 0; c < n; ++c) {
    map.scores[c] = count[c] ? std::clamp(map.scores[c] / count[c], 0.0, 1.0) : 0.0;
  }
  return map;
}

std::vector<Detection> detect_peaks(const OccupancyMap& map, const scenario::Arena& arena,
                                    double threshold, double min_separation_cells) {
  require(threshold > 0.0 && threshold < 1.0, ErrorCode::kDomain, "threshold",
          "must lie in (0, 1)");
  std::vector<Detection> cand;
  for (int iy = 0; iy < map.height; ++iy) {
    for (int ix = 0; ix < map.width; ++ix) {
      const double s = map.at(ix, iy);
      if (s < threshold) continue;
      bool peak = true;
      for (int dy = -1; dy <= 1 && peak; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int x = ix + dx, y = iy + dy;
          if ((dx || dy) && x >= 0 && y >= 0 && x < map.width && y < map.height && map.at(x, y) > s) {
            peak = false;
            break;
          }
        }
      }
      if (peak) cand.push_back({ix, iy, s, arena.cell_centre(ix, iy)});
    }
  }
  std::stable_sort(cand.begin(), cand.end(),
                   [](const Detection& a, const Detection& b) { return a.score > b.score; });
  std::vector<Detection> out;
  const double min2 = min_separation_cells * min_separation_cells;
  for (const auto& c : cand) {
    const bool clear = std::none_of(out.begin(), out.end(), [&](const Detection& d) {
      const double dx = c.ix - d.ix, dy = c.iy - d.iy;
      return dx * dx + dy * dy < min2;
    });
    if (clear) out.push_back(c);
  }
  return out;
}

ModaReport moda(std::span<const Detection> detections, std::span<const Vec2> ground_truth,
                double match_radius_m) {
  require(match_radius_m > 0.0, ErrorCode::kDomain, "match_radius_m", "must be > 0");
  std::vector<std::tuple<double, std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < detections.size(); ++i) {
    for (std::size_t j = 0; j < ground_truth.size(); ++j) {
      const double d = (detections[i].position - ground_truth[j]).norm();
      if (d <= match_radius_m) pairs.emplace_back(d, i, j);
    }
  }
  std::sort(pairs.begin(), pairs.end());
  std::vector<char> det_used(detections.size(), 0), gt_used(ground_truth.size(), 0);
  ModaReport r;
  for (const auto& [d, i, j] : pairs) {
    if (det_used[i] || gt_used[j]) continue;
    det_used[i] = gt_used[j] = 1;
    ++r.true_positives;
  }
  r.ground_truth_count = static_cast<int>(ground_truth.size());
  r.misses = r.ground_truth_count - r.true_positives;
  r.false_positives = static_cast<int>(detections.size()) - r.true_positives;
  r.moda_percent =
      (1.0 - static_cast<double>(r.misses + r.false_positives) / std::max(1, r.ground_truth_count)) * 100.0;
  return r;
}

ModaReport& operator+=(ModaReport& total, const ModaReport& frame) {
  total.true_positives += frame.true_positives;
  total.misses += frame.misses;
  total.false_positives += frame.false_positives;
  total.ground_truth_count += frame.ground_truth_count;
  total.moda_percent = (1.0 - static_cast<double>(total.misses + total.false_positives) /
                                  std::max(1, total.ground_truth_count)) *
                       100.0;
  return total;
}

void write_pgm(std::ostream& out, const OccupancyMap& map) {
  out << "P5\n" << map.width << ' ' << map.height << "\n255\n";
  std::string row(static_cast<std::size_t>(map.width), '\0');
  for (int iy = 0; iy < map.height; ++iy) {
    for (int ix = 0; ix < map.width; ++ix) {
      row[ix] = static_cast<char>(static_cast<unsigned char>(std::lround(map.at(ix, iy) * 255.0)));
    }
    out.write(row.data(), static_cast<std::streamsize>(row.size()));
  }
}

void write_detections_header(std::ostream& out) { out << "step,x_m,y_m,score\n"; }

void write_detections(std::ostream& out, int step, std::span<const Detection> detections) {
  for (const auto& d : detections) {
    out << step << ',' << number(d.position.x()) << ',' << number(d.position.y()) << ','
        << number(d.score) << '\n';
  }
}

}  // namespace cpsim::fusion
