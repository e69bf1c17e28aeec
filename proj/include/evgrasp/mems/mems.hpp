#pragma once

#include "evgrasp/core/types.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <unordered_map>
#include <vector>

namespace evg::mems {

inline constexpr int32_t kNoiseLabel = -1;

/// Point in the normalized spatio-temporal clustering space: pixel
/// coordinates plus the timestamp scaled into pixel units.
struct STPoint {
  double x = 0.0;
  double y = 0.0;
  double tau = 0.0;

  [[nodiscard]] Eigen::Vector3d vec() const { return {x, y, tau}; }
};

struct MemsConfig {
  double sigma = 10.0;          // kernel bandwidth, pixels
  double alpha = 0.35;          // shift acceleration, [0, 1)
  int beta = 1;                 // downsampling stride, >= 1
  double time_scale = 0.0;      // kappa, px per ms; <= 0 selects 50 px over the stream span
  double convergence_eps = 0.15;
  int max_iters = 60;
  double mode_merge_radius = 0.0;  // <= 0 selects sigma / 2
  double min_cluster_fraction = 0.01;

  void validate() const {
    if (sigma <= 0.0) throw std::invalid_argument("MemsConfig: sigma must be > 0");
    if (alpha < 0.0 || alpha >= 1.0)
      throw std::invalid_argument("MemsConfig: alpha must be in [0, 1)");
    if (beta < 1) throw std::invalid_argument("MemsConfig: beta must be >= 1");
    if (convergence_eps <= 0.0)
      throw std::invalid_argument("MemsConfig: convergence_eps must be > 0");
    if (max_iters < 1) throw std::invalid_argument("MemsConfig: max_iters must be >= 1");
  }

  [[nodiscard]] double merge_radius() const {
    return mode_merge_radius > 0.0 ? mode_merge_radius : 0.5 * sigma;
  }
};

/// Event-to-cluster assignment over the retained (post-downsampling)
/// events. `retained_indices[i]` is the position of retained event i in
/// the input stream; `labels[i]` its cluster id or kNoiseLabel. Clusters
/// are ordered by descending member count.
struct ClusterSet {
  std::vector<int32_t> labels;
  std::vector<std::size_t> retained_indices;
  std::vector<Eigen::Vector2d> centroids;  // planar, pixels
  std::vector<std::size_t> counts;

  [[nodiscard]] std::size_t num_clusters() const { return centroids.size(); }
};

/// Gaussian kernel value c * exp(-d^2 / (2 sigma^2)) with the 1D
/// normalization constant c = 1 / (sqrt(2 pi) sigma).
inline double gaussian_weight(double d_sq, double sigma) {
  if (d_sq < 0.0) throw std::invalid_argument("gaussian_weight: d_sq must be >= 0");
  if (sigma <= 0.0) throw std::invalid_argument("gaussian_weight: sigma must be > 0");
  const double c = 1.0 / (std::sqrt(2.0 * EIGEN_PI) * sigma);
  return c * std::exp(-d_sq / (2.0 * sigma * sigma));
}

namespace detail {

struct WeightedMean {
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  double total_weight = 0.0;
};

inline WeightedMean weighted_mean(const STPoint& q, std::span<const STPoint> pts,
                                  double sigma) {
  double sx = 0.0, sy = 0.0, st = 0.0, sw = 0.0;
  for (const STPoint& p : pts) {
    const double dx = p.x - q.x;
    const double dy = p.y - q.y;
    const double dt = p.tau - q.tau;
    const double w = gaussian_weight(dx * dx + dy * dy + dt * dt, sigma);
    sx += w * p.x;
    sy += w * p.y;
    st += w * p.tau;
    sw += w;
  }
  WeightedMean out;
  out.total_weight = sw;
  if (sw > 0.0) out.mean = Eigen::Vector3d(sx / sw, sy / sw, st / sw);
  return out;
}

}  // namespace detail

/// Mean-shift vector m(q) = weighted mean of `pts` minus q, with Gaussian
/// weights of bandwidth sigma. Throws std::domain_error when the total
/// weight underflows to zero (query too far from every point).
inline Eigen::Vector3d mean_shift_vector(const STPoint& q,
                                         std::span<const STPoint> pts,
                                         double sigma) {
  if (pts.empty()) throw std::invalid_argument("mean_shift_vector: empty point set");
  const auto wm = detail::weighted_mean(q, pts, sigma);
  if (wm.total_weight <= 0.0)
    throw std::domain_error("mean_shift_vector: zero total weight");
  return wm.mean - q.vec();
}

/// One accelerated shift update: q' = weighted_mean + alpha * m, i.e.
/// q' = q + (1 + alpha) * m. alpha = 0 is the classic mean-shift step.
inline STPoint shift_point(const STPoint& q, std::span<const STPoint> pts,
                           double sigma, double alpha) {
  if (alpha < 0.0 || alpha >= 1.0)
    throw std::invalid_argument("shift_point: alpha must be in [0, 1)");
  const Eigen::Vector3d m = mean_shift_vector(q, pts, sigma);
  const Eigen::Vector3d q_new = (q.vec() + m) + alpha * m;
  return STPoint{q_new.x(), q_new.y(), q_new.z()};
}

/// Keeps events at indices 0, beta, 2*beta, ...
inline EventStream downsample(const EventStream& in, int beta) {
  if (beta < 1) throw std::invalid_argument("downsample: beta must be >= 1");
  if (beta == 1) return in;
  EventStream out;
  out.width = in.width;
  out.height = in.height;
  out.events.reserve((in.events.size() + beta - 1) / beta);
  for (std::size_t i = 0; i < in.events.size(); i += beta)
    out.events.push_back(in.events[i]);
  return out;
}

namespace detail {

// Uniform grid over the normalized (x, y, tau) space with cell edge equal
// to the kernel support radius; neighbor queries scan at most 27 cells.
class NeighborGrid {
 public:
  NeighborGrid(const std::vector<STPoint>& pts, double cell) : pts_(pts), cell_(cell) {
    for (std::size_t i = 0; i < pts.size(); ++i)
      cells_[key(pts[i])].push_back(i);
  }

  // Indices of all points within `radius` of q, ascending.
  void query(const STPoint& q, double radius, std::vector<std::size_t>& out) const {
    out.clear();
    const double radius_sq = radius * radius;
    const int cx0 = coord(q.x - radius), cx1 = coord(q.x + radius);
    const int cy0 = coord(q.y - radius), cy1 = coord(q.y + radius);
    const int ct0 = coord(q.tau - radius), ct1 = coord(q.tau + radius);
    for (int cz = ct0; cz <= ct1; ++cz)
      for (int cy = cy0; cy <= cy1; ++cy)
        for (int cx = cx0; cx <= cx1; ++cx) {
          const auto it = cells_.find(pack(cx, cy, cz));
          if (it == cells_.end()) continue;
          for (std::size_t i : it->second) {
            const double dx = pts_[i].x - q.x;
            const double dy = pts_[i].y - q.y;
            const double dt = pts_[i].tau - q.tau;
            if (dx * dx + dy * dy + dt * dt <= radius_sq) out.push_back(i);
          }
        }
    std::sort(out.begin(), out.end());
  }

 private:
  [[nodiscard]] int coord(double v) const {
    return static_cast<int>(std::floor(v / cell_));
  }
  [[nodiscard]] int64_t key(const STPoint& p) const {
    return pack(coord(p.x), coord(p.y), coord(p.tau));
  }
  static int64_t pack(int cx, int cy, int cz) {
    return (static_cast<int64_t>(cx) & 0x1FFFFF) |
           ((static_cast<int64_t>(cy) & 0x1FFFFF) << 21) |
           ((static_cast<int64_t>(cz) & 0x1FFFFF) << 42);
  }

  const std::vector<STPoint>& pts_;
  double cell_;
  std::unordered_map<int64_t, std::vector<std::size_t>> cells_;
};

}  // namespace detail

/// Normalized clustering coordinates of a stream: tau = kappa * t_ms with
/// t relative to the first event of `full_span_of`.
inline std::vector<STPoint> normalize_events(const EventStream& retained,
                                             int64_t t0_us, double kappa) {
  std::vector<STPoint> pts;
  pts.reserve(retained.events.size());
  for (const Event& e : retained.events)
    pts.push_back(STPoint{static_cast<double>(e.x), static_cast<double>(e.y),
                          kappa * static_cast<double>(e.t - t0_us) * 1e-3});
  return pts;
}

/// Effective kappa for a stream under `cfg`: explicit when set, otherwise
/// chosen so the full stream duration spans 50 px.
inline double effective_time_scale(const EventStream& stream, const MemsConfig& cfg) {
  if (cfg.time_scale > 0.0) return cfg.time_scale;
  const double dur_ms = static_cast<double>(stream.duration_us()) * 1e-3;
  return dur_ms > 0.0 ? 50.0 / dur_ms : 0.0;
}

/// Multi-object spatio-temporal mean-shift segmentation.
///
/// Every retained event seeds a shift trajectory; trajectories run until
/// the shift vector drops below convergence_eps (converged) or max_iters
/// is hit (NOISE). Converged modes are merged greedily, in stream order,
/// when their planar distance is within merge_radius; the temporal
/// coordinate is excluded from merging because modes of one static object
/// spread along the whole observation window. Clusters holding less than
/// min_cluster_fraction of the retained events are relabeled NOISE.
/// Deterministic for a fixed input; `seed` is kept for interface stability
/// and does not affect the stream-order processing used here.
inline ClusterSet segment(const EventStream& stream, const MemsConfig& cfg,
                          uint64_t seed = 0) {
  (void)seed;
  cfg.validate();

  ClusterSet out;
  const EventStream retained = downsample(stream, cfg.beta);
  if (retained.empty())
    throw std::invalid_argument("segment: no events after downsampling");
  for (std::size_t i = 0; i < stream.events.size(); i += cfg.beta)
    out.retained_indices.push_back(i);

  const double kappa = effective_time_scale(stream, cfg);
  const std::vector<STPoint> pts =
      normalize_events(retained, stream.events.front().t, kappa);
  const std::size_t n = pts.size();

  // Kernel support cutoff at 3 sigma: beyond it weights fall below 1.2e-2
  // of the peak and points stop counting as neighbors.
  const double cutoff = 3.0 * cfg.sigma;
  const double cutoff_sq = cutoff * cutoff;
  const detail::NeighborGrid grid(pts, cutoff);

  std::vector<STPoint> modes(n);
  std::vector<bool> converged(n, false);
  std::vector<std::size_t> superset;
  std::vector<STPoint> nbr;

  // Candidates are gathered once around an anchor with `slack` of margin
  // and refreshed only when the query drifts past it; the exact cutoff is
  // re-applied every iteration, so the neighbor set (and accumulation
  // order) stays identical to a full scan in index order.
  const double slack = cfg.sigma;
  auto drift_sq = [](const STPoint& a, const STPoint& b) {
    const double dx = a.x - b.x, dy = a.y - b.y, dt = a.tau - b.tau;
    return dx * dx + dy * dy + dt * dt;
  };

  for (std::size_t j = 0; j < n; ++j) {
    STPoint q = pts[j];
    STPoint anchor = q;
    grid.query(anchor, cutoff + slack, superset);
    for (int it = 0; it < cfg.max_iters; ++it) {
      if (drift_sq(q, anchor) > slack * slack) {
        anchor = q;
        grid.query(anchor, cutoff + slack, superset);
      }
      nbr.clear();
      for (std::size_t i : superset) {
        const double dx = pts[i].x - q.x;
        const double dy = pts[i].y - q.y;
        const double dt = pts[i].tau - q.tau;
        if (dx * dx + dy * dy + dt * dt <= cutoff_sq) nbr.push_back(pts[i]);
      }
      if (nbr.empty()) break;  // drifted away from all mass
      const Eigen::Vector3d m = mean_shift_vector(q, nbr, cfg.sigma);
      const Eigen::Vector3d q_new = (q.vec() + m) + cfg.alpha * m;
      q = STPoint{q_new.x(), q_new.y(), q_new.z()};
      if (m.norm() < cfg.convergence_eps) {
        converged[j] = true;
        break;
      }
    }
    modes[j] = q;
  }

  // Greedy planar mode merging in stream order.
  struct ModeCluster {
    double x, y;
  };
  std::vector<ModeCluster> mode_clusters;
  std::vector<int32_t> label(n, kNoiseLabel);
  const double r_sq = cfg.merge_radius() * cfg.merge_radius();
  for (std::size_t j = 0; j < n; ++j) {
    if (!converged[j]) continue;
    int32_t assigned = kNoiseLabel;
    for (std::size_t c = 0; c < mode_clusters.size(); ++c) {
      const double dx = modes[j].x - mode_clusters[c].x;
      const double dy = modes[j].y - mode_clusters[c].y;
      if (dx * dx + dy * dy <= r_sq) {
        assigned = static_cast<int32_t>(c);
        break;
      }
    }
    if (assigned == kNoiseLabel) {
      assigned = static_cast<int32_t>(mode_clusters.size());
      mode_clusters.push_back(ModeCluster{modes[j].x, modes[j].y});
    }
    label[j] = assigned;
  }

  // Drop undersized clusters, then order by descending membership.
  std::vector<std::size_t> counts(mode_clusters.size(), 0);
  for (std::size_t j = 0; j < n; ++j)
    if (label[j] >= 0) ++counts[label[j]];
  const double min_count = cfg.min_cluster_fraction * static_cast<double>(n);

  std::vector<std::size_t> order;
  for (std::size_t c = 0; c < mode_clusters.size(); ++c)
    if (static_cast<double>(counts[c]) >= min_count) order.push_back(c);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return counts[a] > counts[b]; });

  std::vector<int32_t> remap(mode_clusters.size(), kNoiseLabel);
  for (std::size_t rank = 0; rank < order.size(); ++rank)
    remap[order[rank]] = static_cast<int32_t>(rank);

  out.labels.resize(n, kNoiseLabel);
  out.centroids.assign(order.size(), Eigen::Vector2d::Zero());
  out.counts.assign(order.size(), 0);
  for (std::size_t j = 0; j < n; ++j) {
    const int32_t l = label[j] >= 0 ? remap[label[j]] : kNoiseLabel;
    out.labels[j] = l;
    if (l >= 0) {
      out.centroids[l] += Eigen::Vector2d(retained.events[j].x, retained.events[j].y);
      ++out.counts[l];
    }
  }
  for (std::size_t c = 0; c < out.centroids.size(); ++c)
    out.centroids[c] /= static_cast<double>(out.counts[c]);

  return out;
}

}  // namespace evg::mems
