#include "evgrasp/core/event_io.hpp"
#include "evgrasp/core/geometry.hpp"
#include "evgrasp/core/noise_filter.hpp"
#include "evgrasp/core/simulator.hpp"
#include "test_util.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <tuple>

using namespace evg;

namespace {

// Reference event generator: replays each pixel's full contrast history
// independently, then merges into the canonical (t, y, x) order.
LabeledEventStream reference_simulator(const Scene& scene, const Trajectory& traj,
                                       const CameraModel& cam, int64_t dt_us,
                                       const RenderOptions& opt = {}) {
  std::vector<RenderedView> views;
  std::vector<int64_t> times;
  for (int64_t t = traj.start_time(); t <= traj.end_time(); t += dt_us) {
    views.push_back(render_view(scene, cam, traj.pose_at(t), opt));
    times.push_back(t);
  }

  struct Tmp {
    Event e;
    int32_t label;
  };
  std::vector<Tmp> all;
  const double C = cam.contrast_threshold;
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) {
      const std::size_t i = views[0].idx(x, y);
      double ref = views[0].log_intensity[i];
      for (std::size_t s = 1; s < views.size(); ++s) {
        const double delta = views[s].log_intensity[i] - ref;
        if (std::abs(delta) < C) continue;
        const int count = static_cast<int>(std::floor(std::abs(delta) / C));
        const int8_t pol = delta > 0 ? int8_t{1} : int8_t{-1};
        const int32_t label = views[s].object_id[i] >= 0 ? views[s].object_id[i]
                                                         : views[s - 1].object_id[i];
        for (int c = 0; c < count; ++c)
          all.push_back({Event{x, y, times[s], pol}, label});
        ref += pol * count * C;
      }
    }
  std::stable_sort(all.begin(), all.end(), [](const Tmp& a, const Tmp& b) {
    return std::tie(a.e.t, a.e.y, a.e.x) < std::tie(b.e.t, b.e.y, b.e.x);
  });

  LabeledEventStream out;
  out.stream.width = cam.width;
  out.stream.height = cam.height;
  for (const auto& [e, l] : all) {
    out.stream.events.push_back(e);
    out.labels.push_back(l);
  }
  return out;
}

// Two wide flush slabs covering the whole field of view, top faces exactly
// one contrast threshold apart, with a 1 cm seam of background between
// them. Shading is disabled by the caller so intensity steps stay exactly
// representable.
Scene two_tone_scene() {
  Scene scene;
  scene.background_log_intensity = 0.5;
  scene.objects.push_back(test::make_box(-0.6025, 0.0, {1.195, 0.9, 0.1}, 0.0, 0.5));
  scene.objects.push_back(test::make_box(0.6025, 0.0, {1.195, 0.9, 0.1}, 0.0, 0.75));
  return scene;
}

}  // namespace

TEST_CASE("project_point maps the optical axis to the principal point",
          "[event-core]") {
  const CameraModel cam = test::desk_camera();
  const auto px = project_point({0.0, 0.0, 0.7}, cam, Pose::identity());
  REQUIRE(px.has_value());
  CHECK(px->u == Catch::Approx(cam.cx()));
  CHECK(px->v == Catch::Approx(cam.cy()));
  CHECK(px->depth == Catch::Approx(0.7));
}

TEST_CASE("project_point with unit focal length", "[event-core]") {
  const CameraModel cam = CameraModel::make(1.0, 173.0, 130.0, 346, 260);
  const auto px = project_point({1.0, 0.0, 1.0}, cam, Pose::identity());
  REQUIRE(px.has_value());
  CHECK(px->u == Catch::Approx(cam.cx() + 1.0));
  CHECK(px->v == Catch::Approx(cam.cy()));
}

TEST_CASE("project_point rejects points behind the camera", "[event-core]") {
  const CameraModel cam = test::desk_camera();
  CHECK_FALSE(project_point({0.0, 0.0, -0.5}, cam, Pose::identity()).has_value());
}

TEST_CASE("project_point matches a homogeneous-matrix oracle", "[event-core]") {
  const CameraModel cam = test::desk_camera();
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int tested = 0;
  for (int i = 0; i < 200; ++i) {
    Pose pose;
    pose.R = test::random_rotation(rng);
    pose.t = Eigen::Vector3d(u(rng), u(rng), u(rng));
    const Eigen::Vector3d p(u(rng), u(rng), u(rng));

    // Oracle: 4x4 homogeneous world->camera matrix, multiplied out.
    Eigen::Matrix4d T = Eigen::Matrix4d::Identity();
    T.topLeftCorner<3, 3>() = pose.R.transpose();
    T.topRightCorner<3, 1>() = -pose.R.transpose() * pose.t;
    const Eigen::Vector4d pc = T * p.homogeneous();
    const auto px = project_point(p, cam, pose);
    if (pc.z() <= 0.0) {
      CHECK_FALSE(px.has_value());
      continue;
    }
    const Eigen::Vector3d h = cam.K * pc.head<3>();
    REQUIRE(px.has_value());
    CHECK(px->u == Catch::Approx(h.x() / h.z()).margin(1e-9));
    CHECK(px->v == Catch::Approx(h.y() / h.z()).margin(1e-9));
    CHECK(px->depth == Catch::Approx(pc.z()).margin(1e-12));
    ++tested;
  }
  CHECK(tested > 50);
}

TEST_CASE("unproject inverts project", "[event-core]") {
  const CameraModel cam = test::desk_camera();
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-0.4, 0.4);
  for (int i = 0; i < 100; ++i) {
    const Pose pose = test::downward_pose(u(rng), u(rng), 1.0);
    const Eigen::Vector3d p(u(rng), u(rng), 0.1);
    const auto px = project_point(p, cam, pose);
    REQUIRE(px.has_value());
    const Eigen::Vector3d back = unproject_pixel(px->u, px->v, px->depth, cam, pose);
    CHECK((back - p).norm() < 1e-9);
  }
}

TEST_CASE("static camera over a static scene emits nothing", "[event-core]") {
  Scene scene;
  scene.objects.push_back(test::make_box(0.0, 0.0, {0.15, 0.10, 0.12}, 20.0, 1.0));
  std::vector<Trajectory::Sample> s = {{0, test::downward_pose(0, 0, 1.0)},
                                       {100000, test::downward_pose(0, 0, 1.0)}};
  const auto stream =
      generate_events(scene, Trajectory(std::move(s)), test::desk_camera(), 10000);
  CHECK(stream.events.empty());
}

TEST_CASE("a pixel stepping by exactly +C emits exactly one positive event",
          "[event-core]") {
  // Panning right across the seam, each pixel's log intensity steps from
  // 0.5 (or the 0.5 background seam) to 0.75: one +C step at C = 0.25.
  const CameraModel cam = test::desk_camera(0.25);
  const Scene scene = two_tone_scene();
  RenderOptions opt;
  opt.shade_gain = 0.0;
  const auto traj = test::linear_scan({-0.02, 0.0}, {0.02, 0.0}, 1.0, 5, 40000);
  const auto stream = generate_events(scene, traj, cam, 10000, 0, opt);
  REQUIRE_FALSE(stream.events.empty());
  std::map<std::pair<int, int>, int> per_pixel;
  for (const Event& e : stream.events) {
    CHECK(e.p == 1);
    ++per_pixel[{e.x, e.y}];
  }
  for (const auto& [px, n] : per_pixel) CHECK(n == 1);
}

TEST_CASE("simulator matches the per-pixel reference on a small sensor",
          "[event-core]") {
  CameraModel cam = CameraModel::make(8.0, 4.0, 4.0, 8, 8, 0.2);
  Scene scene;
  scene.background_log_intensity = 0.3;
  scene.objects.push_back(test::make_box(0.0, 0.0, {0.4, 0.3, 0.2}, 15.0, 1.2));
  const auto traj = test::linear_scan({-0.15, -0.05}, {0.15, 0.08}, 1.0, 4, 30000);

  const auto got = generate_labeled_events(scene, traj, cam, 10000);
  const auto want = reference_simulator(scene, traj, cam, 10000);
  REQUIRE(got.stream.events.size() == want.stream.events.size());
  CHECK(got.stream.events == want.stream.events);
  CHECK(got.labels == want.labels);
}

TEST_CASE("event generation is deterministic and in-bounds", "[event-core]") {
  const CameraModel cam = test::desk_camera();
  Scene scene;
  scene.objects.push_back(test::make_box(-0.2, 0.1, {0.15, 0.10, 0.12}, 30.0, 1.0));
  scene.objects.push_back(test::make_box(0.2, -0.1, {0.10, 0.07, 0.08}, -20.0, 1.4));
  const auto traj = test::linear_scan({-0.1, 0.0}, {0.1, 0.0}, 1.0, 6, 50000);

  const auto a = generate_events(scene, traj, cam, 5000, 1);
  const auto b = generate_events(scene, traj, cam, 5000, 99);
  CHECK(a.events == b.events);

  int64_t prev = -1;
  for (const Event& e : a.events) {
    CHECK(e.x >= 0);
    CHECK(e.x < cam.width);
    CHECK(e.y >= 0);
    CHECK(e.y < cam.height);
    CHECK(e.t >= prev);
    prev = e.t;
    CHECK((e.p == 1 || e.p == -1));
  }
}

TEST_CASE("doubling the contrast threshold never increases event count",
          "[event-core]") {
  Scene scene;
  scene.objects.push_back(test::make_box(0.0, 0.0, {0.15, 0.10, 0.12}, 10.0, 1.0));
  const auto traj = test::linear_scan({-0.1, 0.0}, {0.1, 0.0}, 1.0, 6, 50000);
  for (double c : {0.05, 0.1, 0.2}) {
    const auto lo = generate_events(scene, traj, test::desk_camera(c), 10000);
    const auto hi = generate_events(scene, traj, test::desk_camera(2 * c), 10000);
    CHECK(hi.events.size() <= lo.events.size());
  }
}

TEST_CASE("empty trajectory is rejected", "[event-core]") {
  CHECK_THROWS_AS(Trajectory(std::vector<Trajectory::Sample>{}),
                  std::invalid_argument);
}

TEST_CASE("an isolated event is filtered out", "[event-core]") {
  EventStream s;
  s.events.push_back(Event{100, 100, 5000, 1});
  const auto filtered = filter_noise(s, 2000, 1);
  CHECK(filtered.events.empty());
}

TEST_CASE("filter matches the all-pairs reference and keeps dense support",
          "[event-core]") {
  Scene scene;
  scene.objects.push_back(test::make_box(0.0, 0.0, {0.15, 0.10, 0.12}, 25.0, 1.0));
  const auto traj = test::linear_scan({-0.05, 0.0}, {0.05, 0.0}, 1.0, 5, 40000);
  const auto stream = generate_events(scene, traj, test::desk_camera(), 10000);
  REQUIRE(stream.events.size() > 100);

  const int64_t window = 15000;
  const int radius = 1;
  const auto got = filter_noise(stream, window, radius);

  // Reference: all-pairs support check over earlier events.
  EventStream want;
  want.width = stream.width;
  want.height = stream.height;
  for (std::size_t i = 0; i < stream.events.size(); ++i) {
    const Event& e = stream.events[i];
    bool ok = false;
    for (std::size_t j = 0; j < i && !ok; ++j) {
      const Event& o = stream.events[j];
      ok = std::abs(o.x - e.x) <= radius && std::abs(o.y - e.y) <= radius &&
           e.t - o.t <= window;
    }
    if (ok) want.events.push_back(e);
  }
  CHECK(got.events == want.events);

  // Output must be a subsequence of the input.
  std::size_t cursor = 0;
  for (const Event& e : got.events) {
    while (cursor < stream.events.size() && !(stream.events[cursor] == e)) ++cursor;
    REQUIRE(cursor < stream.events.size());
    ++cursor;
  }
}

TEST_CASE("at least 90 percent of injected noise is removed", "[event-core]") {
  Scene scene;
  scene.objects.push_back(test::make_box(0.0, 0.0, {0.15, 0.10, 0.12}, 25.0, 1.0));
  const auto traj = test::linear_scan({-0.05, 0.0}, {0.05, 0.0}, 1.0, 9, 80000);
  const auto clean = generate_labeled_events(scene, traj, test::desk_camera(), 10000);
  const auto noisy = inject_noise(clean, 20000.0, 77);

  std::size_t injected = 0;
  for (int32_t l : noisy.labels) injected += l == -1 ? 1 : 0;
  REQUIRE(injected > 300);

  const auto filtered = filter_noise(noisy.stream, 2000, 1);

  // Surviving noise counted by multiset membership of (t, x, y, p);
  // injection sites are effectively unique at this rate.
  std::multiset<std::tuple<int64_t, int, int, int>> noise_keys;
  for (std::size_t i = 0; i < noisy.labels.size(); ++i)
    if (noisy.labels[i] == -1) {
      const Event& e = noisy.stream.events[i];
      noise_keys.insert({e.t, e.x, e.y, e.p});
    }
  std::size_t surviving = 0;
  for (const Event& e : filtered.events) {
    auto it = noise_keys.find({e.t, e.x, e.y, e.p});
    if (it != noise_keys.end()) {
      ++surviving;
      noise_keys.erase(it);
    }
  }
  CHECK(static_cast<double>(surviving) < 0.10 * static_cast<double>(injected));
}

TEST_CASE("event file round trip", "[event-core]") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "evg_io_test";
  fs::create_directories(dir);

  SECTION("empty stream") {
    EventStream empty;
    write_events(empty, dir / "empty.csv");
    const auto back = read_events(dir / "empty.csv");
    CHECK(back.events.empty());
  }

  SECTION("three events") {
    EventStream s;
    s.events = {Event{0, 0, 0, 1}, Event{12, 7, 100, -1}, Event{345, 259, 100, 1}};
    write_events(s, dir / "three.csv");
    const auto back = read_events(dir / "three.csv");
    CHECK(back.events == s.events);
    CHECK(back.width == s.width);
    CHECK(back.height == s.height);
  }
}

TEST_CASE("parse errors are distinct and carry line numbers", "[event-core]") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "evg_io_test";
  fs::create_directories(dir);

  auto write_file = [&](const std::string& name, const std::string& content) {
    std::ofstream f(dir / name, std::ios::binary);
    f << content;
    return dir / name;
  };

  const auto bad_pol = write_file("pol.csv", "t_us,x,y,p\n10,5,5,0\n");
  try {
    read_events(bad_pol);
    FAIL("expected polarity error");
  } catch (const ParseError& e) {
    CHECK(e.kind() == ParseError::Kind::InvalidPolarity);
    CHECK(e.line() == 2);
    CHECK(std::string(e.what()).find("invalid polarity") != std::string::npos);
  }

  const auto bad_line = write_file("mal.csv", "t_us,x,y,p\n10,5\n");
  try {
    read_events(bad_line);
    FAIL("expected malformed-line error");
  } catch (const ParseError& e) {
    CHECK(e.kind() == ParseError::Kind::MalformedLine);
    CHECK(e.line() == 2);
  }

  const auto bad_t = write_file("mono.csv", "t_us,x,y,p\n10,5,5,1\n5,5,5,1\n");
  try {
    read_events(bad_t);
    FAIL("expected timestamp error");
  } catch (const ParseError& e) {
    CHECK(e.kind() == ParseError::Kind::NonMonotoneTimestamp);
    CHECK(e.line() == 3);
  }

  const auto bad_px = write_file("px.csv", "t_us,x,y,p\n10,999,5,1\n");
  try {
    read_events(bad_px);
    FAIL("expected pixel-range error");
  } catch (const ParseError& e) {
    CHECK(e.kind() == ParseError::Kind::PixelOutOfRange);
    CHECK(e.line() == 2);
  }
}
