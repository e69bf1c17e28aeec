#pragma once

#include "evgrasp/core/types.hpp"

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace evg::grasp {

/// Orientation of the planar principal axis of a point set, degrees in
/// (-90, 90]: the leading eigenvector u1 of the 2x2 covariance, returned
/// as atan2(u1y, u1x). Throws std::domain_error when the covariance is
/// isotropic (no defined axis) and std::invalid_argument on fewer than two
/// distinct points.
inline double principal_axis_deg(std::span<const Eigen::Vector2d> points) {
  if (points.size() < 2)
    throw std::invalid_argument("principal_axis: need at least 2 points");

  Eigen::Vector2d mu = Eigen::Vector2d::Zero();
  for (const auto& p : points) mu += p;
  mu /= static_cast<double>(points.size());

  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (const auto& p : points) {
    const Eigen::Vector2d d = p - mu;
    sxx += d.x() * d.x();
    syy += d.y() * d.y();
    sxy += d.x() * d.y();
  }
  const double n = static_cast<double>(points.size());
  sxx /= n;
  syy /= n;
  sxy /= n;

  const double tr = sxx + syy;
  if (tr <= 0.0)
    throw std::invalid_argument("principal_axis: all points coincide");

  // Closed-form eigenpair of [[sxx, sxy], [sxy, syy]].
  const double half_gap = 0.5 * (sxx - syy);
  const double root = std::sqrt(half_gap * half_gap + sxy * sxy);
  const double lambda1 = 0.5 * tr + root;
  const double lambda2 = 0.5 * tr - root;
  if (lambda1 - lambda2 <= 1e-12 * tr)
    throw std::domain_error("principal_axis: isotropic covariance, orientation undefined");

  // Leading eigenvector; pick the better-conditioned expression.
  Eigen::Vector2d u1;
  if (std::abs(sxy) > 1e-300) {
    u1 = Eigen::Vector2d(lambda1 - syy, sxy);
  } else {
    u1 = sxx >= syy ? Eigen::Vector2d(1.0, 0.0) : Eigen::Vector2d(0.0, 1.0);
  }
  return wrap_angle_90(rad2deg(std::atan2(u1.y(), u1.x())));
}

/// 61-bin histogram over [-90, 90] degrees at 3-degree spacing; bin k has
/// center -90 + 3k.
class OrientationHistogram {
 public:
  static constexpr int kBins = 61;
  static constexpr double kBinWidth = 3.0;

  void add(double theta_deg) {
    ++bins_[bin_index(theta_deg)];
    ++total_;
  }

  /// Wraps into [-90, 90] (a 180-degree period; both endpoints are
  /// representable) and assigns to the nearest bin center, ties toward the
  /// lower bin.
  static int bin_index(double theta_deg) {
    double a = std::fmod(theta_deg, 180.0);
    if (a > 90.0) a -= 180.0;
    if (a < -90.0) a += 180.0;
    int k = static_cast<int>(std::ceil((a + 90.0) / kBinWidth - 0.5));
    return std::clamp(k, 0, kBins - 1);
  }

  static double bin_center(int k) { return -90.0 + kBinWidth * k; }

  /// Center of the most populated bin; ties resolve toward the smaller
  /// absolute angle, negatives first on symmetric ties. Throws when empty.
  [[nodiscard]] double mode_deg() const {
    if (total_ == 0)
      throw std::invalid_argument("OrientationHistogram: no samples");
    int best = -1;
    for (int k = 0; k < kBins; ++k) {
      if (bins_[k] == 0) continue;
      if (best < 0 || bins_[k] > bins_[best]) {
        best = k;
        continue;
      }
      if (bins_[k] == bins_[best]) {
        const double ca = std::abs(bin_center(k));
        const double cb = std::abs(bin_center(best));
        if (ca < cb || (ca == cb && bin_center(k) < bin_center(best))) best = k;
      }
    }
    return bin_center(best);
  }

  [[nodiscard]] std::size_t total() const { return total_; }
  [[nodiscard]] std::size_t count(int k) const { return bins_[k]; }

 private:
  std::array<std::size_t, kBins> bins_{};
  std::size_t total_ = 0;
};

/// Robust orientation of a sample set: histogram vote, maximal bin center.
inline double robust_orientation(std::span<const double> samples_deg) {
  if (samples_deg.empty())
    throw std::invalid_argument("robust_orientation: need at least one sample");
  OrientationHistogram h;
  for (double s : samples_deg) h.add(s);
  return h.mode_deg();
}

/// Two-finger aperture model of the gripper.
struct GripperModel {
  double finger_span = 0.20;  // max opening, meters
  double min_span = 0.02;

  void validate() const {
    if (!(0.0 < min_span && min_span < finger_span))
      throw std::invalid_argument("GripperModel: require 0 < min_span < finger_span");
  }
};

struct GraspPose {
  Eigen::Vector2d center_px = Eigen::Vector2d::Zero();
  Eigen::Vector2d center_m = Eigen::Vector2d::Zero();
  double approach_deg = 0.0;  // (-90, 90]
  double depth_m = 0.0;
  bool feasible = false;
};

/// Grasp at the cluster centroid, approaching perpendicular to the
/// principal axis theta*. Feasible iff the object extent across the grasp
/// axis fits strictly inside the gripper aperture. Infeasible grasps are
/// returned, flagged, never dropped.
inline GraspPose plan_grasp(const Eigen::Vector2d& centroid_px,
                            const Eigen::Vector2d& centroid_m, double theta_deg,
                            double depth_m, double object_extent_m,
                            const GripperModel& gripper) {
  if (depth_m <= 0.0) throw std::invalid_argument("plan_grasp: depth must be > 0");
  gripper.validate();
  GraspPose g;
  g.center_px = centroid_px;
  g.center_m = centroid_m;
  g.approach_deg = wrap_angle_90(theta_deg + 90.0);
  g.depth_m = depth_m;
  g.feasible =
      gripper.min_span < object_extent_m && object_extent_m < gripper.finger_span;
  return g;
}

}  // namespace evg::grasp
