#pragma once

#include "evgrasp/core/types.hpp"

#include <limits>
#include <vector>

namespace evg::servoing {

/// Per-pixel latest-event timestamp map (the SAE surface).
class TimestampSurface {
 public:
  TimestampSurface(int width, int height)
      : width_(width), height_(height),
        last_(static_cast<std::size_t>(width) * height,
              std::numeric_limits<int64_t>::min()) {}

  void update(const Event& e) { last_[idx(e.x, e.y)] = e.t; }

  /// 1 when the pixel fired within `window_us` before `now`, else 0.
  [[nodiscard]] int recent(int x, int y, int64_t now, int64_t window_us) const {
    const int64_t t = last_[idx(x, y)];
    return (t != std::numeric_limits<int64_t>::min() && now - t <= window_us) ? 1 : 0;
  }

  [[nodiscard]] int width() const { return width_; }
  [[nodiscard]] int height() const { return height_; }

 private:
  [[nodiscard]] std::size_t idx(int x, int y) const {
    return static_cast<std::size_t>(y) * width_ + x;
  }

  int width_;
  int height_;
  std::vector<int64_t> last_;
};

struct HarrisParams {
  int64_t window_us = 10000;  // recency window of the binary surface
  int patch = 7;              // odd, >= 3
  double k = 0.16;
  // Default calibrated for the filled wedge surfaces a sweeping silhouette
  // leaves behind; isolated thin strokes need a much lower threshold.
  double threshold = 1500.0;

  void validate() const {
    if (patch < 3 || patch % 2 == 0)
      throw std::invalid_argument("HarrisParams: patch must be odd and >= 3");
    if (window_us <= 0)
      throw std::invalid_argument("HarrisParams: window must be > 0");
  }
};

/// Harris response at an event position over the binary recency surface:
/// the surface is smoothed with a 3x3 binomial kernel (rasterized diagonal
/// edges otherwise read as pixel-scale corners), then the Sobel structure
/// tensor over the patch gives det(M) - k * trace(M)^2. Events whose patch
/// leaves the sensor return the lowest response.
inline double harris_response(const TimestampSurface& sae, int ex, int ey,
                              int64_t now, const HarrisParams& p) {
  const int half = p.patch / 2;
  if (ex - half - 2 < 0 || ex + half + 2 >= sae.width() || ey - half - 2 < 0 ||
      ey + half + 2 >= sae.height())
    return -std::numeric_limits<double>::infinity();

  // Binary surface over the patch plus the rings smoothing and Sobel need.
  const int side = p.patch + 4;
  std::array<double, 32 * 32> b{};
  std::array<double, 32 * 32> s{};
  if (side > 32) throw std::invalid_argument("harris_response: patch too large");
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x)
      b[static_cast<std::size_t>(y) * side + x] =
          sae.recent(ex - half - 2 + x, ey - half - 2 + y, now, p.window_us);

  auto bat = [&](int x, int y) { return b[static_cast<std::size_t>(y) * side + x]; };
  for (int y = 1; y < side - 1; ++y)
    for (int x = 1; x < side - 1; ++x)
      s[static_cast<std::size_t>(y) * side + x] =
          (bat(x - 1, y - 1) + 2 * bat(x, y - 1) + bat(x + 1, y - 1) +
           2 * bat(x - 1, y) + 4 * bat(x, y) + 2 * bat(x + 1, y) +
           bat(x - 1, y + 1) + 2 * bat(x, y + 1) + bat(x + 1, y + 1)) /
          16.0;

  auto at = [&](int x, int y) { return s[static_cast<std::size_t>(y) * side + x]; };
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (int y = 2; y < side - 2; ++y)
    for (int x = 2; x < side - 2; ++x) {
      const double gx = (at(x + 1, y - 1) + 2 * at(x + 1, y) + at(x + 1, y + 1)) -
                        (at(x - 1, y - 1) + 2 * at(x - 1, y) + at(x - 1, y + 1));
      const double gy = (at(x - 1, y + 1) + 2 * at(x, y + 1) + at(x + 1, y + 1)) -
                        (at(x - 1, y - 1) + 2 * at(x, y - 1) + at(x + 1, y - 1));
      sxx += gx * gx;
      syy += gy * gy;
      sxy += gx * gy;
    }
  const double det = sxx * syy - sxy * sxy;
  const double tr = sxx + syy;
  return det - p.k * tr * tr;
}

/// Streams events through the SAE and keeps those whose Harris response
/// exceeds the threshold (the SAFE surface). Output events are a
/// subsequence of the input.
inline EventStream harris_corner_events(const EventStream& stream,
                                        const HarrisParams& params = {}) {
  params.validate();
  TimestampSurface sae(stream.width, stream.height);
  EventStream safe;
  safe.width = stream.width;
  safe.height = stream.height;
  for (const Event& e : stream.events) {
    sae.update(e);
    if (harris_response(sae, e.x, e.y, e.t, params) > params.threshold)
      safe.events.push_back(e);
  }
  return safe;
}

}  // namespace evg::servoing
