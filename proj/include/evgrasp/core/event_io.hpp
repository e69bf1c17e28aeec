#pragma once

#include "evgrasp/core/types.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

namespace evg {

/// Error raised by the text-format readers; carries the offending line.
class ParseError : public std::runtime_error {
 public:
  enum class Kind { MalformedLine, NonMonotoneTimestamp, PixelOutOfRange, InvalidPolarity, BadHeader, Io };

  ParseError(Kind kind, std::size_t line, const std::string& what)
      : std::runtime_error(what), kind_(kind), line_(line) {}

  [[nodiscard]] Kind kind() const { return kind_; }
  [[nodiscard]] std::size_t line() const { return line_; }

 private:
  Kind kind_;
  std::size_t line_;
};

namespace detail {

inline bool parse_int64(std::string_view s, int64_t& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

}  // namespace detail

inline constexpr std::string_view kEventFileHeader = "t_us,x,y,p";

/// Reads the comma-separated event file format (header `t_us,x,y,p`). The
/// format does not carry the sensor resolution, so the expected resolution
/// is supplied by the caller (DAVIS346 by default) and pixels are range
/// checked against it.
inline EventStream read_events(const std::filesystem::path& path,
                               int width = 346, int height = 260) {
  std::ifstream f(path);
  if (!f) throw ParseError(ParseError::Kind::Io, 0, "cannot open " + path.string());

  EventStream stream;
  stream.width = width;
  stream.height = height;

  std::string line;
  std::size_t line_no = 0;

  if (!std::getline(f, line))
    throw ParseError(ParseError::Kind::BadHeader, 1, "missing header line");
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kEventFileHeader)
    throw ParseError(ParseError::Kind::BadHeader, 1,
                     "bad header, expected '" + std::string(kEventFileHeader) + "'");

  auto fail = [&](ParseError::Kind kind, const std::string& msg) {
    std::ostringstream os;
    os << msg << " at line " << line_no;
    throw ParseError(kind, line_no, os.str());
  };

  int64_t prev_t = std::numeric_limits<int64_t>::min();
  while (std::getline(f, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    const auto fields = detail::split_csv(line);
    int64_t v[4];
    if (fields.size() != 4 || !detail::parse_int64(fields[0], v[0]) ||
        !detail::parse_int64(fields[1], v[1]) ||
        !detail::parse_int64(fields[2], v[2]) ||
        !detail::parse_int64(fields[3], v[3]))
      fail(ParseError::Kind::MalformedLine, "malformed line");
    if (v[0] < 0 || v[0] < prev_t)
      fail(ParseError::Kind::NonMonotoneTimestamp, "non-monotone timestamp");
    if (v[1] < 0 || v[1] >= width || v[2] < 0 || v[2] >= height)
      fail(ParseError::Kind::PixelOutOfRange, "pixel out of range");
    if (v[3] != 1 && v[3] != -1)
      fail(ParseError::Kind::InvalidPolarity, "invalid polarity");

    stream.events.push_back(Event{static_cast<int32_t>(v[1]),
                                  static_cast<int32_t>(v[2]), v[0],
                                  static_cast<int8_t>(v[3])});
    prev_t = v[0];
  }
  return stream;
}

inline void write_events(const EventStream& stream,
                         const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);  // binary: keep LF endings everywhere
  if (!f) throw ParseError(ParseError::Kind::Io, 0, "cannot open " + path.string());
  f << kEventFileHeader << '\n';
  for (const Event& e : stream.events)
    f << e.t << ',' << e.x << ',' << e.y << ',' << static_cast<int>(e.p) << '\n';
}

}  // namespace evg
