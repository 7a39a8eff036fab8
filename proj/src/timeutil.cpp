#include "mobsynth/timeutil.hpp"

#include <charconv>
#include <cstdio>

namespace mobsynth {
namespace {

// Reads an unsigned integer of 1..max_digits digits.
bool read_number(std::string_view s, std::size_t& pos, int max_digits, int& out) {
  const std::size_t start = pos;
  while (pos < s.size() && pos - start < static_cast<std::size_t>(max_digits) && s[pos] >= '0' &&
         s[pos] <= '9')
    ++pos;
  if (pos == start) return false;
  std::from_chars(s.data() + start, s.data() + pos, out);
  return true;
}

bool expect(std::string_view s, std::size_t& pos, std::string_view accepted) {
  if (pos < s.size() && accepted.find(s[pos]) != std::string_view::npos) {
    ++pos;
    return true;
  }
  return false;
}

}  // namespace

std::optional<Timestamp> parse_timestamp(std::string_view text) {
  using namespace std::chrono;
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0;
  std::size_t pos = 0;
  if (!read_number(text, pos, 4, y) || pos != 4 || !expect(text, pos, "-") ||
      !read_number(text, pos, 2, mo) || !expect(text, pos, "-") || !read_number(text, pos, 2, d) ||
      !expect(text, pos, "-T ") || !read_number(text, pos, 2, h) || !expect(text, pos, ":") ||
      !read_number(text, pos, 2, mi))
    return std::nullopt;
  if (expect(text, pos, ":") && !read_number(text, pos, 2, sec)) return std::nullopt;
  if (pos < text.size() && text[pos] == '.') {  // fractional seconds are truncated
    ++pos;
    while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') ++pos;
  }
  expect(text, pos, "Z");
  if (pos != text.size()) return std::nullopt;

  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || sec > 60) return std::nullopt;
  return Timestamp{sys_days{ymd}} + hours{h} + minutes{mi} + seconds{sec};
}

std::string format_timestamp(Timestamp ts) {
  using namespace std::chrono;
  const auto dp = floor<days>(ts);
  const year_month_day ymd{dp};
  const hh_mm_ss tod{ts - dp};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(tod.hours().count()), static_cast<int>(tod.minutes().count()),
                static_cast<int>(tod.seconds().count()));
  return buf;
}

std::int64_t day_number(Timestamp ts) {
  return std::chrono::floor<std::chrono::days>(ts).time_since_epoch().count();
}

int hour_of_day(Timestamp ts) {
  const auto since_midnight = ts - std::chrono::floor<std::chrono::days>(ts);
  return static_cast<int>(std::chrono::duration_cast<std::chrono::hours>(since_midnight).count());
}

int weekday(Timestamp ts) {
  // 1970-01-01 was a Thursday (index 3 with Monday = 0).
  const std::int64_t d = day_number(ts);
  return static_cast<int>(((d + 3) % 7 + 7) % 7);
}

}  // namespace mobsynth
