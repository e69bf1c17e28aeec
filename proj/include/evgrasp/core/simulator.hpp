#pragma once

#include "evgrasp/core/render.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <utility>

namespace evg {

/// Event stream with per-event ground-truth provenance: the id of the
/// scene object that caused each event (-1 for injected noise).
struct LabeledEventStream {
  EventStream stream;
  std::vector<int32_t> labels;
};

/// Simulates an ideal event sensor along a camera trajectory.
///
/// The scene is rendered at every step of `dt_us`; each pixel keeps a
/// reference log-intensity level and emits floor(|dL|/C) events whenever
/// the rendered level moves at least one contrast threshold C away from
/// it, advancing the reference by the emitted multiple of C. Events of one
/// step share the step timestamp and are ordered by (y, x), which makes
/// the output the canonical (t, y, x) ordering. The result is fully
/// deterministic; `seed` is reserved for stochastic sensor extensions and
/// does not currently alter the output.
inline LabeledEventStream generate_labeled_events(const Scene& scene,
                                                  const Trajectory& traj,
                                                  const CameraModel& cam,
                                                  int64_t dt_us,
                                                  uint64_t seed = 0,
                                                  const RenderOptions& opt = {}) {
  (void)seed;
  if (dt_us <= 0) throw std::invalid_argument("generate_events: dt must be > 0");
  scene.validate();
  cam.validate();

  LabeledEventStream out;
  out.stream.width = cam.width;
  out.stream.height = cam.height;

  const double C = cam.contrast_threshold;
  RenderedView prev = render_view(scene, cam, traj.pose_at(traj.start_time()), opt);
  std::vector<double> ref = prev.log_intensity;

  for (int64_t t = traj.start_time() + dt_us; t <= traj.end_time(); t += dt_us) {
    const RenderedView cur = render_view(scene, cam, traj.pose_at(t), opt);
    for (int y = 0; y < cam.height; ++y) {
      for (int x = 0; x < cam.width; ++x) {
        const std::size_t i = cur.idx(x, y);
        const double delta = cur.log_intensity[i] - ref[i];
        if (std::abs(delta) < C) continue;
        const int count = static_cast<int>(std::floor(std::abs(delta) / C));
        const int8_t pol = delta > 0 ? int8_t{1} : int8_t{-1};
        // Attribute the change to the object now visible, falling back to
        // the one that just left the pixel.
        int32_t label = cur.object_id[i] >= 0 ? cur.object_id[i] : prev.object_id[i];
        for (int k = 0; k < count; ++k) {
          out.stream.events.push_back(Event{x, y, t, pol});
          out.labels.push_back(label);
        }
        ref[i] += pol * count * C;
      }
    }
    prev = cur;
  }
  return out;
}

inline EventStream generate_events(const Scene& scene, const Trajectory& traj,
                                   const CameraModel& cam, int64_t dt_us,
                                   uint64_t seed = 0,
                                   const RenderOptions& opt = {}) {
  return generate_labeled_events(scene, traj, cam, dt_us, seed, opt).stream;
}

/// Adds uniform background-activity noise events at `rate_hz` (whole
/// sensor) across the stream's time span, tagging injected events with
/// label -1. Signal labels, when provided, must align with `in.stream`.
inline LabeledEventStream inject_noise(const LabeledEventStream& in,
                                       double rate_hz, uint64_t seed) {
  if (rate_hz < 0.0) throw std::invalid_argument("inject_noise: rate must be >= 0");
  if (in.stream.events.empty() || rate_hz == 0.0) return in;

  const int64_t t0 = in.stream.events.front().t;
  const int64_t t1 = in.stream.events.back().t;
  const double span_s = static_cast<double>(t1 - t0) * 1e-6;
  const auto n_noise = static_cast<std::size_t>(std::llround(rate_hz * span_s));

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int32_t> dx(0, in.stream.width - 1);
  std::uniform_int_distribution<int32_t> dy(0, in.stream.height - 1);
  std::uniform_int_distribution<int64_t> dt(t0, t1);
  std::bernoulli_distribution dp(0.5);

  std::vector<Event> noise(n_noise);
  for (auto& e : noise)
    e = Event{dx(rng), dy(rng), dt(rng), dp(rng) ? int8_t{1} : int8_t{-1}};
  std::stable_sort(noise.begin(), noise.end(),
                   [](const Event& a, const Event& b) { return a.t < b.t; });

  LabeledEventStream out;
  out.stream.width = in.stream.width;
  out.stream.height = in.stream.height;
  out.stream.events.reserve(in.stream.events.size() + n_noise);
  out.labels.reserve(in.stream.events.size() + n_noise);

  std::size_t si = 0, ni = 0;
  while (si < in.stream.events.size() || ni < noise.size()) {
    const bool take_signal =
        ni >= noise.size() ||
        (si < in.stream.events.size() && in.stream.events[si].t <= noise[ni].t);
    if (take_signal) {
      out.stream.events.push_back(in.stream.events[si]);
      out.labels.push_back(si < in.labels.size() ? in.labels[si] : 0);
      ++si;
    } else {
      out.stream.events.push_back(noise[ni]);
      out.labels.push_back(-1);
      ++ni;
    }
  }
  return out;
}

}  // namespace evg
