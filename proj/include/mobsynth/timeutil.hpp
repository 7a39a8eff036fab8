#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace mobsynth {

using Timestamp = std::chrono::sys_seconds;

/// Accepts "YYYY-MM-DD-HH:MM:SS" (fields may be unpadded, as in raw LBS
/// exports) and ISO-8601 "YYYY-MM-DDTHH:MM:SS[Z]" / "YYYY-MM-DD HH:MM:SS".
std::optional<Timestamp> parse_timestamp(std::string_view text);

/// ISO-8601 with a trailing 'Z'.
std::string format_timestamp(Timestamp ts);

/// Days since 1970-01-01 (floor).
std::int64_t day_number(Timestamp ts);
int hour_of_day(Timestamp ts);
/// 0 = Monday ... 6 = Sunday.
int weekday(Timestamp ts);

/// Night hours span 20:00-09:00.
constexpr bool is_night_hour(int hour_of_day) { return hour_of_day >= 20 || hour_of_day < 9; }

}  // namespace mobsynth
