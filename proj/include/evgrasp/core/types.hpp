#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace evg {

/// A single brightness-change event: pixel position, timestamp in
/// microseconds and polarity (+1 brightness increase, -1 decrease).
struct Event {
  int32_t x = 0;
  int32_t y = 0;
  int64_t t = 0;  // microseconds
  int8_t p = 1;   // +1 or -1

  friend bool operator==(const Event&, const Event&) = default;
};

/// Ordered (non-decreasing timestamps) sequence of events plus the sensor
/// resolution they were captured at. Default resolution matches the
/// DAVIS346 sensor.
struct EventStream {
  std::vector<Event> events;
  int width = 346;
  int height = 260;

  [[nodiscard]] std::size_t size() const { return events.size(); }
  [[nodiscard]] bool empty() const { return events.empty(); }

  /// Duration between first and last event, microseconds. Zero when fewer
  /// than two events.
  [[nodiscard]] int64_t duration_us() const {
    return events.size() < 2 ? 0 : events.back().t - events.front().t;
  }
};

/// Pinhole camera with intrinsic matrix K and the contrast threshold C of
/// the event sensor (log-intensity units).
struct CameraModel {
  Eigen::Matrix3d K = Eigen::Matrix3d::Identity();
  double contrast_threshold = 0.15;
  int width = 346;
  int height = 260;

  [[nodiscard]] double fx() const { return K(0, 0); }
  [[nodiscard]] double fy() const { return K(1, 1); }
  [[nodiscard]] double cx() const { return K(0, 2); }
  [[nodiscard]] double cy() const { return K(1, 2); }

  void validate() const {
    if (contrast_threshold <= 0.0)
      throw std::invalid_argument("CameraModel: contrast threshold must be > 0");
    if (K(0, 0) <= 0.0 || K(1, 1) <= 0.0)
      throw std::invalid_argument("CameraModel: focal lengths must be > 0");
    if (K(1, 0) != 0.0 || K(2, 0) != 0.0 || K(2, 1) != 0.0)
      throw std::invalid_argument("CameraModel: K must be upper triangular");
    if (width <= 0 || height <= 0)
      throw std::invalid_argument("CameraModel: resolution must be positive");
  }

  /// Convenience constructor for the common fx=fy pinhole.
  static CameraModel make(double f, double cx, double cy, int w, int h,
                          double contrast = 0.15) {
    CameraModel cam;
    cam.K << f, 0, cx, 0, f, cy, 0, 0, 1;
    cam.width = w;
    cam.height = h;
    cam.contrast_threshold = contrast;
    return cam;
  }
};

/// Rigid body pose, stored body-to-world: X_world = R * X_body + t.
/// For a camera, the body frame is the optical frame (z forward, x right,
/// y down); world->camera extrinsics are obtained via inverse().
struct Pose {
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t = Eigen::Vector3d::Zero();

  [[nodiscard]] Pose inverse() const {
    return Pose{R.transpose(), -(R.transpose() * t)};
  }

  /// this ∘ other: first apply `other`, then `this`.
  [[nodiscard]] Pose compose(const Pose& other) const {
    return Pose{R * other.R, R * other.t + t};
  }

  [[nodiscard]] Eigen::Vector3d apply(const Eigen::Vector3d& p) const {
    return R * p + t;
  }

  /// Rotation of the body x-axis about the world z-axis, degrees in
  /// (-180, 180].
  [[nodiscard]] double yaw_deg() const {
    double a = std::atan2(R(1, 0), R(0, 0)) * 180.0 / EIGEN_PI;
    if (a <= -180.0) a += 360.0;
    return a;
  }

  void validate() const {
    if ((R.transpose() * R - Eigen::Matrix3d::Identity()).norm() > 1e-9 ||
        std::abs(R.determinant() - 1.0) > 1e-9)
      throw std::invalid_argument("Pose: R must be a proper rotation");
  }

  static Pose identity() { return Pose{}; }

  /// Pose rotated about world z by yaw (degrees) at position `t`.
  static Pose planar(const Eigen::Vector3d& t, double yaw_deg) {
    Pose p;
    p.R = Eigen::AngleAxisd(yaw_deg * EIGEN_PI / 180.0,
                            Eigen::Vector3d::UnitZ())
              .toRotationMatrix();
    p.t = t;
    return p;
  }
};

/// Timestamped camera poses. Poses between samples are interpolated
/// linearly in translation and spherically in rotation.
class Trajectory {
 public:
  struct Sample {
    int64_t t = 0;  // microseconds
    Pose pose;
  };

  Trajectory() = default;

  explicit Trajectory(std::vector<Sample> samples) : samples_(std::move(samples)) {
    if (samples_.size() < 2)
      throw std::invalid_argument("Trajectory: needs at least 2 samples");
    for (std::size_t i = 1; i < samples_.size(); ++i)
      if (samples_[i].t <= samples_[i - 1].t)
        throw std::invalid_argument("Trajectory: timestamps must be strictly increasing");
  }

  [[nodiscard]] const std::vector<Sample>& samples() const { return samples_; }
  [[nodiscard]] int64_t start_time() const { return samples_.front().t; }
  [[nodiscard]] int64_t end_time() const { return samples_.back().t; }

  [[nodiscard]] bool covers(int64_t t) const {
    return t >= start_time() && t <= end_time();
  }

  /// Interpolated pose at time t (microseconds). Throws std::out_of_range
  /// when t lies outside the sampled span.
  [[nodiscard]] Pose pose_at(int64_t t) const {
    if (!covers(t))
      throw std::out_of_range("Trajectory: query time outside sampled span");
    // Find the segment [i, i+1] containing t.
    std::size_t lo = 0, hi = samples_.size() - 1;
    while (hi - lo > 1) {
      std::size_t mid = (lo + hi) / 2;
      (samples_[mid].t <= t ? lo : hi) = mid;
    }
    const Sample& a = samples_[lo];
    const Sample& b = samples_[hi];
    double u = static_cast<double>(t - a.t) / static_cast<double>(b.t - a.t);
    Eigen::Quaterniond qa(a.pose.R), qb(b.pose.R);
    Pose out;
    out.R = qa.slerp(u, qb).toRotationMatrix();
    out.t = (1.0 - u) * a.pose.t + u * b.pose.t;
    return out;
  }

 private:
  std::vector<Sample> samples_;
};

inline double deg2rad(double d) { return d * EIGEN_PI / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / EIGEN_PI; }

/// Wrap an angle in degrees to (-90, 90] (axis-symmetric orientations).
inline double wrap_angle_90(double deg) {
  double a = std::fmod(deg, 180.0);
  if (a > 90.0) a -= 180.0;
  if (a <= -90.0) a += 180.0;
  return a;
}

/// Absolute angular difference under 180-degree symmetry, result in [0, 90].
inline double angle_diff_sym180(double a_deg, double b_deg) {
  double d = std::abs(std::fmod(a_deg - b_deg, 180.0));
  if (d > 90.0) d = 180.0 - d;
  return d;
}

}  // namespace evg
