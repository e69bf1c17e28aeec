#pragma once

#include "evgrasp/mems/mems.hpp"
#include "evgrasp/servoing/harris.hpp"

#include <cmath>
#include <optional>

namespace evg::servoing {

/// The four event surfaces of the servo front end: all events (SAE,
/// timestamps), corner events (SAFE), target-masked corners (SALE) and the
/// single virtual robust-centroid event (SAVE).
struct EventSurfaces {
  EventStream safe;
  EventStream sale;
  std::optional<Eigen::Vector2d> save;
};

/// Keeps the corner events lying within `radius_px` of any event of the
/// target cluster. An empty result means the object is out of view; that
/// is reported through the empty stream, not an error.
inline EventStream mask_to_object(const EventStream& safe,
                                  const mems::ClusterSet& clusters,
                                  const EventStream& clustered_stream,
                                  int32_t target_id, double radius_px = 6.0) {
  if (target_id < 0 || static_cast<std::size_t>(target_id) >= clusters.num_clusters())
    throw std::invalid_argument("mask_to_object: target id out of range");

  const int w = safe.width, h = safe.height;
  std::vector<uint8_t> mask(static_cast<std::size_t>(w) * h, 0);
  const int r = static_cast<int>(std::ceil(radius_px));
  const double r_sq = radius_px * radius_px;
  for (std::size_t j = 0; j < clusters.labels.size(); ++j) {
    if (clusters.labels[j] != target_id) continue;
    const Event& e = clustered_stream.events[clusters.retained_indices[j]];
    for (int dy = -r; dy <= r; ++dy)
      for (int dx = -r; dx <= r; ++dx) {
        const int x = e.x + dx, y = e.y + dy;
        if (x < 0 || x >= w || y < 0 || y >= h) continue;
        if (dx * dx + dy * dy <= r_sq)
          mask[static_cast<std::size_t>(y) * w + x] = 1;
      }
  }

  EventStream sale;
  sale.width = w;
  sale.height = h;
  for (const Event& e : safe.events)
    if (mask[static_cast<std::size_t>(e.y) * w + e.x]) sale.events.push_back(e);
  return sale;
}

struct HeatmapParams {
  int64_t decay_us = 50000;  // exponential time constant
  int top_k = 4;             // peaks averaged into the virtual event
};

/// Robust centroid over the masked corner events: corners accumulate into
/// an exponentially decaying heatmap (3x3 splat per event), the top_k
/// local maxima are selected and their unweighted mean becomes the SAVE
/// virtual event. Returns nullopt when no corner contributes within the
/// decay window (target lost).
inline std::optional<Eigen::Vector2d> robust_centroid(const EventStream& sale,
                                                      const HeatmapParams& p = {}) {
  if (p.top_k < 1) throw std::invalid_argument("robust_centroid: top_k must be >= 1");
  if (sale.events.empty()) return std::nullopt;

  const int w = sale.width, h = sale.height;
  const int64_t now = sale.events.back().t;
  std::vector<double> heat(static_cast<std::size_t>(w) * h, 0.0);
  constexpr double kSplat[3][3] = {{0.25, 0.5, 0.25}, {0.5, 1.0, 0.5}, {0.25, 0.5, 0.25}};

  double total = 0.0;
  for (const Event& e : sale.events) {
    const double age = static_cast<double>(now - e.t);
    const double wgt = std::exp(-age / static_cast<double>(p.decay_us));
    if (wgt < 1e-6) continue;
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const int x = e.x + dx, y = e.y + dy;
        if (x < 0 || x >= w || y < 0 || y >= h) continue;
        heat[static_cast<std::size_t>(y) * w + x] += wgt * kSplat[dy + 1][dx + 1];
        total += wgt * kSplat[dy + 1][dx + 1];
      }
  }
  if (total <= 0.0) return std::nullopt;

  auto at = [&](int x, int y) { return heat[static_cast<std::size_t>(y) * w + x]; };
  struct Peak {
    double value;
    int x, y;
  };
  std::vector<Peak> peaks;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double v = at(x, y);
      if (v <= 0.0) continue;
      bool is_max = true;
      for (int dy = -1; dy <= 1 && is_max; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const int nx = x + dx, ny = y + dy;
          if (nx < 0 || nx >= w || ny < 0 || ny >= h) continue;
          const double nv = at(nx, ny);
          // Plateau ties resolve to the first pixel in scan order.
          if (nv > v || (nv == v && (ny < y || (ny == y && nx < x)))) {
            is_max = false;
            break;
          }
        }
      if (is_max) peaks.push_back(Peak{v, x, y});
    }
  if (peaks.empty()) return std::nullopt;

  std::stable_sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) {
    return a.value > b.value;
  });
  const std::size_t take = std::min<std::size_t>(p.top_k, peaks.size());
  Eigen::Vector2d save = Eigen::Vector2d::Zero();
  for (std::size_t i = 0; i < take; ++i)
    save += Eigen::Vector2d(peaks[i].x, peaks[i].y);
  return save / static_cast<double>(take);
}

}  // namespace evg::servoing
