#pragma once

#include "evgrasp/core/types.hpp"

#include <numeric>
#include <span>

namespace evg::evaluation {

/// Error limits on the grasp metrics: position in centimeters, orientation
/// in degrees.
struct Limits {
  double l_p_cm = 2.0;
  double l_r_deg = 15.0;

  void validate() const {
    if (l_p_cm <= 0.0 || l_r_deg <= 0.0)
      throw std::invalid_argument("Limits: must be positive");
  }
};

struct GraspMetrics {
  double e_gp_cm = 0.0;
  double e_gr_deg = 0.0;
  int ss = 0;
  double d_p_cm = 0.0;
  double d_r_deg = 0.0;
  double q_g = 0.0;
};

/// Planar distance (cm) and yaw difference (deg, wrapped to [0, 90] under
/// the two-finger grasp-axis symmetry) between the gripper pose and the
/// object pose.
inline std::pair<double, double> grasp_pose_error(const Pose& gripper,
                                                  const Pose& object) {
  const double e_gp =
      100.0 * (gripper.t.head<2>() - object.t.head<2>()).norm();
  const double e_gr = angle_diff_sym180(gripper.yaw_deg(), object.yaw_deg());
  return {e_gp, e_gr};
}

/// Success sign: 1 iff both grasp errors are within the limits (inclusive).
/// The case split follows the prose definition of a successful grasp; the
/// branch values are chosen so that averaging signs reproduces the
/// published success rates.
inline int success_sign(double e_gp_cm, double e_gr_deg, const Limits& lim = {}) {
  lim.validate();
  return (e_gp_cm <= lim.l_p_cm && e_gr_deg <= lim.l_r_deg) ? 1 : 0;
}

/// Mean of success signs.
inline double success_rate(std::span<const int> signs) {
  if (signs.empty()) throw std::invalid_argument("success_rate: empty sequence");
  const double sum = std::accumulate(signs.begin(), signs.end(), 0.0);
  return sum / static_cast<double>(signs.size());
}

/// Object pose deviation across the grasp: position (cm, vector norm) and
/// yaw (deg, axis-symmetric wrap).
inline std::pair<double, double> object_deviation(const Pose& before,
                                                  const Pose& after) {
  const double d_p = 100.0 * (before.t - after.t).norm();
  const double d_r = angle_diff_sym180(before.yaw_deg(), after.yaw_deg());
  return {d_p, d_r};
}

/// Grasp quality score: 1 - D_P / (2 L_P) - D_R / (2 L_R) when both
/// deviations are within limits, else 0.
inline double grasp_quality(double d_p_cm, double d_r_deg, const Limits& lim = {}) {
  lim.validate();
  if (d_p_cm > lim.l_p_cm || d_r_deg > lim.l_r_deg) return 0.0;
  return 1.0 - d_p_cm / (2.0 * lim.l_p_cm) - d_r_deg / (2.0 * lim.l_r_deg);
}

/// Full metric record for one grasp.
inline GraspMetrics evaluate_grasp(const Pose& gripper, const Pose& object_before,
                                   const Pose& object_after, const Limits& lim = {}) {
  GraspMetrics m;
  std::tie(m.e_gp_cm, m.e_gr_deg) = grasp_pose_error(gripper, object_before);
  m.ss = success_sign(m.e_gp_cm, m.e_gr_deg, lim);
  std::tie(m.d_p_cm, m.d_r_deg) = object_deviation(object_before, object_after);
  m.q_g = grasp_quality(m.d_p_cm, m.d_r_deg, lim);
  return m;
}

}  // namespace evg::evaluation
