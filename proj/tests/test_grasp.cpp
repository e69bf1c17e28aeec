#include "evgrasp/grasp/grasp.hpp"
#include "test_util.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <random>

using namespace evg;
using namespace evg::grasp;

namespace {

std::vector<Eigen::Vector2d> rotated(const std::vector<Eigen::Vector2d>& pts,
                                     double phi_deg) {
  const double c = std::cos(deg2rad(phi_deg)), s = std::sin(deg2rad(phi_deg));
  std::vector<Eigen::Vector2d> out;
  for (const auto& p : pts) out.emplace_back(c * p.x() - s * p.y(), s * p.x() + c * p.y());
  return out;
}

std::vector<Eigen::Vector2d> ellipse_points(double a, double b, int n) {
  std::vector<Eigen::Vector2d> pts;
  for (int i = 0; i < n; ++i) {
    const double ang = 2.0 * EIGEN_PI * i / n;
    pts.emplace_back(a * std::cos(ang), b * std::sin(ang));
  }
  return pts;
}

}  // namespace

TEST_CASE("principal axis of collinear points", "[grasp]") {
  std::vector<Eigen::Vector2d> xs = {{0, 0}, {1, 0}, {2, 0}, {5, 0}};
  CHECK(principal_axis_deg(xs) == Catch::Approx(0.0).margin(1e-12));

  std::vector<Eigen::Vector2d> ys = {{0, 0}, {0, 1}, {0, 3}, {0, 7}};
  CHECK(principal_axis_deg(ys) == Catch::Approx(90.0).margin(1e-12));
}

TEST_CASE("rotated ellipse reports the rotation", "[grasp]") {
  const auto pts = rotated(ellipse_points(4.0, 1.0, 60), 30.0);
  const double got = principal_axis_deg(pts);
  CHECK(std::abs(got - 30.0) < 0.5);

  // Closed-form oracle: 0.5 * atan2(2 sxy, sxx - syy).
  Eigen::Vector2d mu = Eigen::Vector2d::Zero();
  for (const auto& p : pts) mu += p;
  mu /= static_cast<double>(pts.size());
  double sxx = 0, syy = 0, sxy = 0;
  for (const auto& p : pts) {
    sxx += (p.x() - mu.x()) * (p.x() - mu.x());
    syy += (p.y() - mu.y()) * (p.y() - mu.y());
    sxy += (p.x() - mu.x()) * (p.y() - mu.y());
  }
  const double oracle = wrap_angle_90(rad2deg(0.5 * std::atan2(2 * sxy, sxx - syy)));
  CHECK(got == Catch::Approx(oracle).margin(1e-9));
}

TEST_CASE("principal axis rotation equivariance", "[grasp]") {
  std::mt19937_64 rng(61);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    // Anisotropic random set.
    std::vector<Eigen::Vector2d> pts;
    for (int i = 0; i < 12; ++i) pts.emplace_back(3.0 * u(rng), u(rng));
    const double base = principal_axis_deg(pts);
    const double phi = 180.0 * u(rng);
    const double turned = principal_axis_deg(rotated(pts, phi));
    CHECK(angle_diff_sym180(turned, base + phi) < 1e-9);
  }
}

TEST_CASE("principal axis is scale and translation invariant", "[grasp]") {
  const auto pts = rotated(ellipse_points(3.0, 1.0, 40), 72.0);
  const double base = principal_axis_deg(pts);
  std::vector<Eigen::Vector2d> moved;
  for (const auto& p : pts) moved.push_back(2.5 * p + Eigen::Vector2d(100.0, -40.0));
  CHECK(principal_axis_deg(moved) == Catch::Approx(base).margin(1e-9));
}

TEST_CASE("isotropic point sets have no principal axis", "[grasp]") {
  const auto circle = ellipse_points(2.0, 2.0, 64);
  CHECK_THROWS_AS(principal_axis_deg(circle), std::domain_error);
  std::vector<Eigen::Vector2d> one = {{1.0, 1.0}};
  CHECK_THROWS_AS(principal_axis_deg(one), std::invalid_argument);
}

TEST_CASE("robust orientation picks the populated bin", "[grasp]") {
  SECTION("constant samples") {
    std::vector<double> s(10, 45.0);
    CHECK(robust_orientation(s) == Catch::Approx(45.0));
  }
  SECTION("wrapping pulls 91 next to -89") {
    std::vector<double> s = {-89.0, 91.0};
    CHECK(robust_orientation(s) == Catch::Approx(-90.0));
  }
  SECTION("uniform coverage plus one extra at zero") {
    std::vector<double> s;
    for (int k = 0; k < OrientationHistogram::kBins; ++k)
      s.push_back(OrientationHistogram::bin_center(k));
    s.push_back(0.0);
    CHECK(robust_orientation(s) == Catch::Approx(0.0));
  }
}

TEST_CASE("robust orientation always lands on a bin center", "[grasp]") {
  std::mt19937_64 rng(67);
  std::uniform_real_distribution<double> u(-500.0, 500.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> s;
    for (int i = 0; i < 17; ++i) s.push_back(u(rng));
    const double got = robust_orientation(s);
    const double k = (got + 90.0) / 3.0;
    CHECK(std::abs(k - std::round(k)) < 1e-12);
    CHECK(got >= -90.0);
    CHECK(got <= 90.0);
  }
}

TEST_CASE("histogram has 61 bins and preserves totals", "[grasp]") {
  OrientationHistogram h;
  CHECK(OrientationHistogram::kBins == 61);
  std::mt19937_64 rng(71);
  std::uniform_real_distribution<double> u(-90.0, 90.0);
  for (int i = 0; i < 500; ++i) h.add(u(rng));
  std::size_t total = 0;
  for (int k = 0; k < OrientationHistogram::kBins; ++k) total += h.count(k);
  CHECK(total == h.total());
  CHECK(h.total() == 500);
}

TEST_CASE("grasp planning approaches perpendicular to the axis", "[grasp]") {
  GripperModel gripper{0.20, 0.05};

  SECTION("axis at 0 degrees, graspable extent") {
    const auto g = plan_grasp({100, 100}, {0.0, 0.0}, 0.0, 0.9, 0.10, gripper);
    CHECK(g.approach_deg == Catch::Approx(90.0));
    CHECK(g.feasible);
  }
  SECTION("extent beyond the finger span is infeasible but returned") {
    const auto g = plan_grasp({100, 100}, {0.0, 0.0}, 0.0, 0.9, 0.25, gripper);
    CHECK_FALSE(g.feasible);
    CHECK(g.approach_deg == Catch::Approx(90.0));
  }
  SECTION("published box sizes grasp across the 10 cm face") {
    // 15 x 10 x 12 cm box, principal axis along the 15 cm edge.
    const auto g = plan_grasp({120, 90}, {0.1, 0.1}, 20.0, 0.88, 0.10, gripper);
    CHECK(g.feasible);
    CHECK(angle_diff_sym180(g.approach_deg, 20.0) == Catch::Approx(90.0));
  }
  SECTION("perpendicularity holds for arbitrary axes") {
    std::mt19937_64 rng(73);
    std::uniform_real_distribution<double> u(-90.0, 90.0);
    for (int i = 0; i < 50; ++i) {
      const double theta = u(rng);
      const auto g = plan_grasp({0, 0}, {0, 0}, theta, 1.0, 0.1, gripper);
      CHECK(angle_diff_sym180(g.approach_deg, theta) == Catch::Approx(90.0));
    }
  }
}
