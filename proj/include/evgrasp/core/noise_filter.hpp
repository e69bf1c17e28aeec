#pragma once

#include "evgrasp/core/types.hpp"

#include <limits>
#include <vector>

namespace evg {

/// Background-activity filter: an event survives iff an earlier event of
/// the stream (in stream order, same timestamp allowed) touched a pixel
/// within `radius_px` during the preceding `window_us`. The per-pixel
/// recency map is updated with every input event, kept or not, so removed
/// events still provide support for their neighbors. The output is a
/// subsequence of the input.
inline EventStream filter_noise(const EventStream& in, int64_t window_us,
                                int radius_px) {
  if (window_us <= 0) throw std::invalid_argument("filter_noise: window must be > 0");
  if (radius_px < 0) throw std::invalid_argument("filter_noise: radius must be >= 0");

  constexpr int64_t kNever = std::numeric_limits<int64_t>::min();
  std::vector<int64_t> last(static_cast<std::size_t>(in.width) * in.height, kNever);

  EventStream out;
  out.width = in.width;
  out.height = in.height;

  for (const Event& e : in.events) {
    bool supported = false;
    const int x0 = std::max(0, e.x - radius_px);
    const int x1 = std::min(in.width - 1, e.x + radius_px);
    const int y0 = std::max(0, e.y - radius_px);
    const int y1 = std::min(in.height - 1, e.y + radius_px);
    for (int y = y0; y <= y1 && !supported; ++y)
      for (int x = x0; x <= x1; ++x) {
        const int64_t lt = last[static_cast<std::size_t>(y) * in.width + x];
        if (lt != kNever && e.t - lt <= window_us) {
          supported = true;
          break;
        }
      }
    if (supported) out.events.push_back(e);
    last[static_cast<std::size_t>(e.y) * in.width + e.x] = e.t;
  }
  return out;
}

}  // namespace evg
