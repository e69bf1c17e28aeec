#include "evgrasp/mems/escore.hpp"
#include "evgrasp/mems/mems.hpp"
#include "test_util.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

using namespace evg;
using namespace evg::mems;

namespace {

// Classic sequential mean shift over all points, no spatial index, no
// downsampling shortcuts: the reference the accelerated path must match
// label for label.
ClusterSet reference_segment(const EventStream& stream, const MemsConfig& cfg) {
  const EventStream retained = downsample(stream, cfg.beta);
  const double kappa = effective_time_scale(stream, cfg);
  const std::vector<STPoint> pts =
      normalize_events(retained, stream.events.front().t, kappa);
  const std::size_t n = pts.size();
  const double cutoff_sq = 9.0 * cfg.sigma * cfg.sigma;

  std::vector<STPoint> modes(n);
  std::vector<bool> ok(n, false);
  std::vector<STPoint> nbrs;
  for (std::size_t j = 0; j < n; ++j) {
    STPoint q = pts[j];
    for (int it = 0; it < cfg.max_iters; ++it) {
      nbrs.clear();
      for (std::size_t i = 0; i < n; ++i) {
        const double dx = pts[i].x - q.x;
        const double dy = pts[i].y - q.y;
        const double dt = pts[i].tau - q.tau;
        if (dx * dx + dy * dy + dt * dt <= cutoff_sq) nbrs.push_back(pts[i]);
      }
      if (nbrs.empty()) break;
      const Eigen::Vector3d m = mean_shift_vector(q, nbrs, cfg.sigma);
      const Eigen::Vector3d q_new = (q.vec() + m) + cfg.alpha * m;
      q = STPoint{q_new.x(), q_new.y(), q_new.z()};
      if (m.norm() < cfg.convergence_eps) {
        ok[j] = true;
        break;
      }
    }
    modes[j] = q;
  }

  std::vector<std::pair<double, double>> centers;
  std::vector<int32_t> label(n, kNoiseLabel);
  const double r_sq = cfg.merge_radius() * cfg.merge_radius();
  for (std::size_t j = 0; j < n; ++j) {
    if (!ok[j]) continue;
    int32_t got = kNoiseLabel;
    for (std::size_t c = 0; c < centers.size(); ++c) {
      const double dx = modes[j].x - centers[c].first;
      const double dy = modes[j].y - centers[c].second;
      if (dx * dx + dy * dy <= r_sq) {
        got = static_cast<int32_t>(c);
        break;
      }
    }
    if (got == kNoiseLabel) {
      got = static_cast<int32_t>(centers.size());
      centers.emplace_back(modes[j].x, modes[j].y);
    }
    label[j] = got;
  }

  std::vector<std::size_t> counts(centers.size(), 0);
  for (int32_t l : label)
    if (l >= 0) ++counts[l];
  std::vector<std::size_t> order;
  for (std::size_t c = 0; c < centers.size(); ++c)
    if (static_cast<double>(counts[c]) >= cfg.min_cluster_fraction * n)
      order.push_back(c);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return counts[a] > counts[b]; });
  std::vector<int32_t> remap(centers.size(), kNoiseLabel);
  for (std::size_t r = 0; r < order.size(); ++r)
    remap[order[r]] = static_cast<int32_t>(r);

  ClusterSet out;
  for (std::size_t i = 0; i < stream.events.size(); i += cfg.beta)
    out.retained_indices.push_back(i);
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

}  // namespace

TEST_CASE("gaussian kernel peak and e-fold point", "[mems]") {
  CHECK(gaussian_weight(0.0, 1.0) == Catch::Approx(1.0 / std::sqrt(2.0 * EIGEN_PI)));
  const double sigma = 2.5;
  const double peak = gaussian_weight(0.0, sigma);
  CHECK(gaussian_weight(2.0 * sigma * sigma, sigma) ==
        Catch::Approx(peak * std::exp(-1.0)));
}

TEST_CASE("gaussian kernel matches a long-double oracle", "[mems]") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ds(0.0, 400.0);
  std::uniform_real_distribution<double> dsig(0.5, 20.0);
  for (int i = 0; i < 200; ++i) {
    const double d_sq = ds(rng);
    const double sigma = dsig(rng);
    const long double want =
        expl(-static_cast<long double>(d_sq) /
             (2.0L * static_cast<long double>(sigma) * static_cast<long double>(sigma))) /
        (sqrtl(2.0L * static_cast<long double>(EIGEN_PI)) *
         static_cast<long double>(sigma));
    CHECK(gaussian_weight(d_sq, sigma) ==
          Catch::Approx(static_cast<double>(want)).epsilon(1e-12));
  }
}

TEST_CASE("mean shift vector fixed points", "[mems]") {
  SECTION("coincident single point") {
    const STPoint q{10.0, 20.0, 5.0};
    const std::vector<STPoint> pts = {q};
    CHECK(mean_shift_vector(q, pts, 3.0).norm() == Catch::Approx(0.0).margin(1e-15));
  }
  SECTION("two symmetric points") {
    const STPoint q{0.0, 0.0, 0.0};
    const std::vector<STPoint> pts = {{3.0, -1.0, 2.0}, {-3.0, 1.0, -2.0}};
    CHECK(mean_shift_vector(q, pts, 4.0).norm() == Catch::Approx(0.0).margin(1e-12));
  }
}

TEST_CASE("mean shift vector matches direct summation", "[mems]") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-30.0, 30.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<STPoint> pts(10);
    for (auto& p : pts) p = STPoint{u(rng), u(rng), u(rng)};
    const STPoint q{u(rng), u(rng), u(rng)};
    const double sigma = 8.0;

    long double sx = 0, sy = 0, st = 0, sw = 0;
    for (const auto& p : pts) {
      const long double d_sq = (static_cast<long double>(p.x) - q.x) * (p.x - q.x) +
                               (static_cast<long double>(p.y) - q.y) * (p.y - q.y) +
                               (static_cast<long double>(p.tau) - q.tau) * (p.tau - q.tau);
      const long double w = expl(-d_sq / (2.0L * sigma * sigma));
      sx += w * p.x;
      sy += w * p.y;
      st += w * p.tau;
      sw += w;
    }
    const Eigen::Vector3d want(static_cast<double>(sx / sw) - q.x,
                               static_cast<double>(sy / sw) - q.y,
                               static_cast<double>(st / sw) - q.tau);
    const Eigen::Vector3d got = mean_shift_vector(q, pts, sigma);
    CHECK((got - want).norm() < 1e-9);
  }
}

TEST_CASE("mean shift vector signals zero total weight", "[mems]") {
  const STPoint q{0.0, 0.0, 0.0};
  const std::vector<STPoint> pts = {{1e6, 1e6, 1e6}};
  CHECK_THROWS_AS(mean_shift_vector(q, pts, 1.0), std::domain_error);
}

TEST_CASE("shift point reductions", "[mems]") {
  std::vector<STPoint> pts = {{1.0, 0.0, 0.0}, {5.0, 2.0, 1.0}, {3.0, -4.0, 2.0}};
  const STPoint q{2.0, 1.0, 0.5};
  const double sigma = 5.0;

  SECTION("alpha = 0 lands on the weighted mean") {
    const auto m = mean_shift_vector(q, pts, sigma);
    const auto q1 = shift_point(q, pts, sigma, 0.0);
    CHECK(q1.x == Catch::Approx(q.x + m.x()).margin(1e-12));
    CHECK(q1.y == Catch::Approx(q.y + m.y()).margin(1e-12));
    CHECK(q1.tau == Catch::Approx(q.tau + m.z()).margin(1e-12));
  }

  SECTION("fixed point is preserved under acceleration") {
    const STPoint fixed{4.0, 4.0, 4.0};
    const std::vector<STPoint> sym = {{5.0, 4.0, 4.0}, {3.0, 4.0, 4.0}};
    const auto q1 = shift_point(fixed, sym, sigma, 0.35);
    CHECK(q1.x == Catch::Approx(4.0).margin(1e-12));
    CHECK(q1.y == Catch::Approx(4.0).margin(1e-12));
    CHECK(q1.tau == Catch::Approx(4.0).margin(1e-12));
  }

  SECTION("alpha = 0.5 moves q + 1.5 m on crafted 1-D data") {
    // Two points on the x axis at 0 and 2, query at 1.5, sigma large so
    // weights are w0 = exp(-1.125/2s^2), w1 = exp(-0.125/2s^2).
    const std::vector<STPoint> line = {{0.0, 0.0, 0.0}, {2.0, 0.0, 0.0}};
    const STPoint qq{1.5, 0.0, 0.0};
    const double s = 1.0;
    const double w0 = std::exp(-(1.5 * 1.5) / 2.0);
    const double w1 = std::exp(-(0.5 * 0.5) / 2.0);
    const double mean = (w0 * 0.0 + w1 * 2.0) / (w0 + w1);
    const double m = mean - 1.5;
    const auto q1 = shift_point(qq, line, s, 0.5);
    CHECK(q1.x == Catch::Approx(1.5 + 1.5 * m).epsilon(1e-12));
    CHECK(q1.y == Catch::Approx(0.0).margin(1e-12));
  }
}

TEST_CASE("downsample keeps every beta-th event", "[mems]") {
  EventStream s;
  for (int i = 0; i < 10; ++i) s.events.push_back(Event{i, 0, i * 10, 1});

  SECTION("beta = 1 is the identity") {
    CHECK(downsample(s, 1).events == s.events);
  }
  SECTION("beta = 4 keeps indices 0, 4, 8") {
    const auto d = downsample(s, 4);
    REQUIRE(d.events.size() == 3);
    CHECK(d.events[0].x == 0);
    CHECK(d.events[1].x == 4);
    CHECK(d.events[2].x == 8);
  }
  SECTION("output size is ceil(n / beta)") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
      const int n = static_cast<int>(rng() % 500);
      const int beta = 1 + static_cast<int>(rng() % 9);
      EventStream in;
      for (int i = 0; i < n; ++i) in.events.push_back(Event{0, 0, i, 1});
      CHECK(downsample(in, beta).events.size() ==
            (in.events.size() + beta - 1) / beta);
    }
  }
}

TEST_CASE("two blobs 80 px apart become two clusters", "[mems]") {
  const auto blobs = test::make_blobs({{80.0, 120.0}, {160.0, 120.0}}, 400, 6.0,
                                      100000, 21);
  const auto clusters = segment(blobs.stream, test::blob_config(10.0));
  REQUIRE(clusters.num_clusters() == 2);

  // Cluster centroids sit within a pixel of the generating centers.
  std::vector<Eigen::Vector2d> want = {{80.0, 120.0}, {160.0, 120.0}};
  for (const auto& c : clusters.centroids) {
    const double d = std::min((c - want[0]).norm(), (c - want[1]).norm());
    CHECK(d < 1.0);
  }
}

TEST_CASE("single blob centroid matches the event mean", "[mems]") {
  const auto blobs = test::make_blobs({{100.0, 90.0}}, 500, 5.0, 80000, 33);
  const auto clusters = segment(blobs.stream, test::blob_config(10.0));
  REQUIRE(clusters.num_clusters() == 1);

  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (const auto& e : blobs.stream.events) mean += Eigen::Vector2d(e.x, e.y);
  mean /= static_cast<double>(blobs.stream.events.size());
  CHECK((clusters.centroids[0] - mean).norm() < 1.0);
}

TEST_CASE("segment is deterministic and centroids stay inside member boxes",
          "[mems]") {
  const auto blobs =
      test::make_blobs({{60.0, 60.0}, {200.0, 150.0}, {300.0, 70.0}}, 300, 7.0,
                       90000, 55);
  const auto a = segment(blobs.stream, test::blob_config(10.0), 1);
  const auto b = segment(blobs.stream, test::blob_config(10.0), 2);
  CHECK(a.labels == b.labels);
  CHECK(a.retained_indices == b.retained_indices);

  for (std::size_t c = 0; c < a.num_clusters(); ++c) {
    double x0 = 1e9, x1 = -1e9, y0 = 1e9, y1 = -1e9;
    for (std::size_t j = 0; j < a.labels.size(); ++j) {
      if (a.labels[j] != static_cast<int32_t>(c)) continue;
      const Event& e = blobs.stream.events[a.retained_indices[j]];
      x0 = std::min(x0, double(e.x));
      x1 = std::max(x1, double(e.x));
      y0 = std::min(y0, double(e.y));
      y1 = std::max(y1, double(e.y));
    }
    CHECK(a.centroids[c].x() >= x0);
    CHECK(a.centroids[c].x() <= x1);
    CHECK(a.centroids[c].y() >= y0);
    CHECK(a.centroids[c].y() <= y1);
  }
}

TEST_CASE("translation equivariance of labels and centroids", "[mems]") {
  const auto blobs = test::make_blobs({{70.0, 80.0}, {170.0, 120.0}}, 250, 6.0,
                                      60000, 9);
  const int dx = 15, dy = -10;
  EventStream shifted = blobs.stream;
  for (auto& e : shifted.events) {
    e.x += dx;
    e.y += dy;
  }
  const auto a = segment(blobs.stream, test::blob_config(10.0));
  const auto b = segment(shifted, test::blob_config(10.0));
  REQUIRE(a.num_clusters() == b.num_clusters());
  CHECK(a.labels == b.labels);
  for (std::size_t c = 0; c < a.num_clusters(); ++c) {
    CHECK(b.centroids[c].x() == Catch::Approx(a.centroids[c].x() + dx).margin(1e-6));
    CHECK(b.centroids[c].y() == Catch::Approx(a.centroids[c].y() + dy).margin(1e-6));
  }
}

TEST_CASE("accelerated path reproduces the sequential reference label for label",
          "[mems]") {
  const auto blobs = test::make_blobs({{90.0, 100.0}, {210.0, 140.0}}, 600, 6.5,
                                      120000, 41);
  REQUIRE(blobs.stream.events.size() <= 2000);

  for (double alpha : {0.0, 0.35}) {
    for (int beta : {1, 3}) {
      MemsConfig cfg = test::blob_config(10.0);
      cfg.alpha = alpha;
      cfg.beta = beta;
      const auto got = segment(blobs.stream, cfg);
      const auto want = reference_segment(blobs.stream, cfg);
      CHECK(got.labels == want.labels);
      CHECK(got.retained_indices == want.retained_indices);
      REQUIRE(got.num_clusters() == want.num_clusters());
      for (std::size_t c = 0; c < got.num_clusters(); ++c)
        CHECK((got.centroids[c] - want.centroids[c]).norm() < 1e-12);
    }
  }
}

TEST_CASE("three-box sloshing scene segments with F1 >= 0.95", "[mems]") {
  const Scene scene = test::three_box_scene();
  const auto traj = test::slosh_trajectory(0.0, 0.0, 1.0, 0.02, 9, 120000);
  const auto labeled =
      generate_labeled_events(scene, traj, test::half_camera(0.5), 15000);
  REQUIRE(labeled.stream.events.size() > 1000);

  MemsConfig cfg;
  cfg.sigma = 13.0;
  cfg.alpha = 0.0;
  cfg.beta = 1;
  const auto clusters = segment(labeled.stream, cfg);
  CHECK(clusters.num_clusters() == 3);

  const auto q = clustering_quality(clusters.labels, labeled.labels);
  CHECK(q.f1 >= 0.95);
}

TEST_CASE("e-score of a self comparison is zero", "[mems]") {
  EScoreInputs base{10.0, 0.9, 0.9, 0.9};
  const auto r = e_score(base, base);
  CHECK(r.ere == Catch::Approx(0.0));
  CHECK(r.fre == Catch::Approx(0.0));
  CHECK(r.e_score == Catch::Approx(0.0));
  CHECK(r.lambda1 == Catch::Approx(0.6));
  CHECK(r.lambda2 == Catch::Approx(0.4));
}

TEST_CASE("halved time with unchanged F1 scores 30", "[mems]") {
  EScoreInputs base{10.0, 0.9, 0.9, 0.9};
  EScoreInputs test{5.0, 0.9, 0.9, 0.9};
  const auto r = e_score(base, test, 0.6, 0.4);
  CHECK(r.ere == Catch::Approx(50.0));
  CHECK(r.fre == Catch::Approx(0.0));
  CHECK(r.e_score == Catch::Approx(30.0));
}

TEST_CASE("a drop in F1 yields positive Fre by the literal formula", "[mems]") {
  EScoreInputs base{10.0, 0.8, 0.8, 0.8};
  EScoreInputs test{10.0, 0.6, 0.6, 0.6};
  const auto r = e_score(base, test);
  CHECK(r.fre == Catch::Approx(25.0));
  CHECK(r.fre > 0.0);
}

TEST_CASE("e-score rejects zero baselines", "[mems]") {
  EScoreInputs bad_t{0.0, 0.9, 0.9, 0.9};
  EScoreInputs bad_f{10.0, 0.0, 0.0, 0.0};
  EScoreInputs ok{10.0, 0.9, 0.9, 0.9};
  CHECK_THROWS_AS(e_score(bad_t, ok), std::invalid_argument);
  CHECK_THROWS_AS(e_score(bad_f, ok), std::invalid_argument);
  CHECK_THROWS_AS(e_score(ok, ok, 0.7, 0.4), std::invalid_argument);
}

TEST_CASE("segment rejects an empty stream", "[mems]") {
  EventStream empty;
  CHECK_THROWS_AS(segment(empty, MemsConfig{}), std::invalid_argument);
}
