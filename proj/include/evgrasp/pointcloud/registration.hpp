#pragma once

#include "evgrasp/grasp/grasp.hpp"
#include "evgrasp/pointcloud/filtering.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <optional>

namespace evg {

class RegistrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Similarity map y = c R x + t plus the mean squared residual of the fit.
struct SimilarityTransform {
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t = Eigen::Vector3d::Zero();
  double c = 1.0;
  double mse = 0.0;

  [[nodiscard]] Eigen::Vector3d apply(const Eigen::Vector3d& x) const {
    return c * (R * x) + t;
  }
};

using Correspondences = std::vector<std::pair<std::size_t, std::size_t>>;

/// Least-squares similarity transform mapping source points onto target
/// points under the given correspondence (source index, target index):
/// cross-covariance SVD with the determinant-sign correction that keeps R
/// a proper rotation, scale from the singular values over the source
/// variance. Degenerate sources (zero variance) are rejected.
inline SimilarityTransform register_similarity(const PointCloud& source,
                                               const PointCloud& target,
                                               const Correspondences& pairs) {
  if (pairs.size() < 3)
    throw RegistrationError("register_similarity: need at least 3 correspondences");

  const double n = static_cast<double>(pairs.size());
  Eigen::Vector3d mu_x = Eigen::Vector3d::Zero(), mu_y = Eigen::Vector3d::Zero();
  for (const auto& [si, ti] : pairs) {
    mu_x += source.at(si);
    mu_y += target.at(ti);
  }
  mu_x /= n;
  mu_y /= n;

  double sigma_x_sq = 0.0;
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& [si, ti] : pairs) {
    const Eigen::Vector3d dx = source[si] - mu_x;
    const Eigen::Vector3d dy = target[ti] - mu_y;
    sigma_x_sq += dx.squaredNorm();
    cov += dy * dx.transpose();
  }
  sigma_x_sq /= n;
  cov /= n;
  if (sigma_x_sq < 1e-12)
    throw RegistrationError("register_similarity: degenerate source (zero variance)");

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Vector3d s = Eigen::Vector3d::Ones();
  if (cov.determinant() < 0.0) s.z() = -1.0;

  SimilarityTransform out;
  out.R = svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
  out.c = svd.singularValues().dot(s) / sigma_x_sq;
  out.t = mu_y - out.c * (out.R * mu_x);

  double e2 = 0.0;
  for (const auto& [si, ti] : pairs)
    e2 += (target[ti] - out.apply(source[si])).squaredNorm();
  out.mse = e2 / n;
  return out;
}

/// The inexact registration model: 8 corners of a unit cube centered at
/// the origin, indexed by octant bits (x > 0) | (y > 0) << 1 | (z > 0) << 2.
inline PointCloud unit_cube_model() {
  PointCloud m(8);
  for (int i = 0; i < 8; ++i)
    m[i] = Eigen::Vector3d((i & 1) ? 0.5 : -0.5, (i & 2) ? 0.5 : -0.5,
                           (i & 4) ? 0.5 : -0.5);
  return m;
}

/// Registration of a corner cluster against the unit-cube model plus the
/// object pose quantities the grasp pipeline consumes.
struct ObjectRegistration {
  SimilarityTransform transform;
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();  // transformed model center
  double yaw_deg = 0.0;  // planar principal axis of the registered model
  PointCloud condensed;  // corner representatives used for matching
};

namespace detail {

struct ModelFit {
  SimilarityTransform transform;
  Correspondences pairs;  // (model corner index, condensed point index)
};

inline std::optional<ModelFit> best_octant_match(
    const PointCloud& model, const PointCloud& pts) {
  const Eigen::Vector3d mu = centroid(pts);
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : pts) cov += (p - mu) * (p - mu).transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
  // Columns ordered by descending eigenvalue.
  Eigen::Matrix3d axes;
  axes.col(0) = eig.eigenvectors().col(2);
  axes.col(1) = eig.eigenvectors().col(1);
  axes.col(2) = eig.eigenvectors().col(0);

  std::optional<ModelFit> best;
  // Eigenvector signs are arbitrary; try every sign assignment and keep
  // the lowest-residual fit.
  for (int bits = 0; bits < 8; ++bits) {
    Eigen::Matrix3d basis = axes;
    for (int a = 0; a < 3; ++a)
      if (bits & (1 << a)) basis.col(a) = -basis.col(a);

    Correspondences pairs;
    uint8_t used = 0;
    bool collision = false;
    for (std::size_t i = 0; i < pts.size() && !collision; ++i) {
      const Eigen::Vector3d u = basis.transpose() * (pts[i] - mu);
      const int corner = (u.x() > 0.0 ? 1 : 0) | (u.y() > 0.0 ? 2 : 0) |
                         (u.z() > 0.0 ? 4 : 0);
      if (used & (1 << corner)) {
        collision = true;
        break;
      }
      used |= static_cast<uint8_t>(1 << corner);
      pairs.emplace_back(static_cast<std::size_t>(corner), i);
    }
    if (collision || pairs.size() < 3) continue;
    try {
      SimilarityTransform t = register_similarity(model, pts, pairs);
      if (!best || t.mse < best->transform.mse) best = ModelFit{t, pairs};
    } catch (const RegistrationError&) {
    }
  }
  return best;
}

inline std::optional<ModelFit> best_permutation_match(const PointCloud& model,
                                                      const PointCloud& pts) {
  if (pts.size() > model.size()) return std::nullopt;
  std::optional<ModelFit> best;
  std::vector<std::size_t> assign(pts.size());
  std::vector<bool> used(model.size(), false);

  auto recurse = [&](auto&& self, std::size_t depth) -> void {
    if (depth == pts.size()) {
      Correspondences pairs;
      for (std::size_t i = 0; i < pts.size(); ++i) pairs.emplace_back(assign[i], i);
      try {
        SimilarityTransform t = register_similarity(model, pts, pairs);
        if (!best || t.mse < best->transform.mse) best = ModelFit{t, pairs};
      } catch (const RegistrationError&) {
      }
      return;
    }
    for (std::size_t m = 0; m < model.size(); ++m) {
      if (used[m]) continue;
      used[m] = true;
      assign[depth] = m;
      self(self, depth + 1);
      used[m] = false;
    }
  };
  recurse(recurse, 0);
  return best;
}

// Object yaw from the fitted rotation: each model axis maps to a data
// direction R * e_axis; among the non-vertical ones, the axis with the
// largest planar spread of the corner representatives is the box's long
// planar edge. Spread is measured on the data, so missing corners and
// noisy heights do not flip the choice.
inline std::optional<double> yaw_from_fit(const Eigen::Matrix3d& R,
                                          const PointCloud& pts) {
  double best_spread = -1.0;
  std::optional<Eigen::Vector2d> best_dir;
  for (int axis = 0; axis < 3; ++axis) {
    const Eigen::Vector3d d = R.col(axis);
    const Eigen::Vector2d planar = d.head<2>();
    if (planar.norm() < 0.4) continue;  // maps (near) vertical
    const Eigen::Vector2d u = planar.normalized();
    double lo = 1e18, hi = -1e18;
    for (const auto& p : pts) {
      const double s = u.dot(p.head<2>());
      lo = std::min(lo, s);
      hi = std::max(hi, s);
    }
    if (hi - lo > best_spread) {
      best_spread = hi - lo;
      best_dir = u;
    }
  }
  if (!best_dir) return std::nullopt;
  return wrap_angle_90(rad2deg(std::atan2(best_dir->y(), best_dir->x())));
}

}  // namespace detail

/// Fits the unit-cube model to a corner cluster. Nearby cluster points are
/// condensed into corner representatives first; correspondence comes from
/// octant sign matching around the PCA frame, with an exhaustive
/// assignment search as fallback for ambiguous small clusters. Throws
/// RegistrationError when no usable correspondence exists.
inline ObjectRegistration register_model(const PointCloud& cluster,
                                         const PointCloud& unit_model = unit_cube_model(),
                                         double condense_radius = 0.04) {
  if (cluster.size() < 3)
    throw RegistrationError("register_model: cluster of " +
                            std::to_string(cluster.size()) +
                            " points cannot be matched (need >= 3)");

  // Selection: consolidate pixel-level corner detections into one
  // representative per corner. Box corners live on two height levels, so
  // representatives away from both levels (depth ghosts) are discarded,
  // then near-duplicates on the same level merge, largest support first.
  const std::vector<PointCloud> groups = euclidean_cluster(cluster, condense_radius, 1);
  struct Rep {
    Eigen::Vector3d p;
    std::size_t support;
  };
  std::vector<Rep> reps;
  for (const auto& g : groups) reps.push_back(Rep{centroid(g), g.size()});

  // Corner heights concentrate on two levels; find them as the two
  // heaviest support windows over the representative heights and drop
  // depth ghosts in between or beyond.
  const double level_tol = 0.03;
  auto window_mass = [&](double z0) {
    double m = 0.0;
    for (const auto& r : reps)
      if (std::abs(r.p.z() - z0) <= level_tol) m += static_cast<double>(r.support);
    return m;
  };
  double z_hi = reps.front().p.z(), hi_mass = -1.0;
  for (const auto& r : reps) {
    const double m = window_mass(r.p.z());
    if (m > hi_mass) {
      hi_mass = m;
      z_hi = r.p.z();
    }
  }
  double z_lo = z_hi, lo_mass = -1.0;
  for (const auto& r : reps) {
    if (std::abs(r.p.z() - z_hi) <= 2.0 * level_tol) continue;
    const double m = window_mass(r.p.z());
    if (m > lo_mass) {
      lo_mass = m;
      z_lo = r.p.z();
    }
  }
  {
    std::vector<Rep> on_level;
    for (const auto& r : reps)
      if (std::abs(r.p.z() - z_lo) <= level_tol || std::abs(r.p.z() - z_hi) <= level_tol)
        on_level.push_back(r);
    if (on_level.size() >= 3) reps = std::move(on_level);
  }

  std::stable_sort(reps.begin(), reps.end(),
                   [](const Rep& a, const Rep& b) { return a.support > b.support; });
  PointCloud pts;
  for (const auto& r : reps) {
    bool duplicate = false;
    for (const auto& q : pts)
      if ((q.head<2>() - r.p.head<2>()).norm() < 0.05 &&
          std::abs(q.z() - r.p.z()) < 2.0 * level_tol)
        duplicate = true;
    if (!duplicate) pts.push_back(r.p);
    if (pts.size() == unit_model.size()) break;
  }
  if (pts.size() < 3)
    throw RegistrationError("register_model: fewer than 3 corner representatives");

  std::optional<detail::ModelFit> fit = detail::best_octant_match(unit_model, pts);

  // Octant matching fails (or fits badly) when points straddle the PCA
  // planes; small clusters afford the exhaustive search.
  double scatter = 0.0;
  const Eigen::Vector3d mu = centroid(pts);
  for (const auto& p : pts) scatter += (p - mu).squaredNorm();
  scatter /= static_cast<double>(pts.size());
  if (!fit || fit->transform.mse > 0.05 * scatter) {
    const auto alt = detail::best_permutation_match(unit_model, pts);
    if (alt && (!fit || alt->transform.mse < fit->transform.mse)) fit = alt;
  }
  if (!fit) throw RegistrationError("register_model: no usable correspondence found");
  const double rms_gate = 0.30 * fit->transform.c;
  if (fit->transform.mse > rms_gate * rms_gate)
    throw RegistrationError("register_model: no consistent model fit (rms " +
                            std::to_string(std::sqrt(fit->transform.mse)) + " m)");

  ObjectRegistration out;
  out.transform = fit->transform;
  out.centroid = fit->transform.apply(Eigen::Vector3d::Zero());
  out.condensed = pts;

  if (const auto yaw = detail::yaw_from_fit(fit->transform.R, pts)) {
    out.yaw_deg = *yaw;
  } else {
    // Not enough complete edges: fall back to the footprint axis, or 0
    // when even that is undefined (square footprint).
    std::vector<Eigen::Vector2d> planar;
    for (const auto& p : pts) planar.emplace_back(p.x(), p.y());
    try {
      out.yaw_deg = grasp::principal_axis_deg(planar);
    } catch (const std::exception&) {
      out.yaw_deg = 0.0;
    }
  }
  return out;
}

}  // namespace evg
