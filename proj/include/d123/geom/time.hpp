#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>

namespace d123 {

// Integer microseconds since the Unix epoch. Floating-point seconds only
// appear at API edges via the helpers below.
using Duration = std::chrono::microseconds;
using TimePoint = std::chrono::time_point<std::chrono::system_clock, Duration>;

inline constexpr TimePoint from_micros(std::int64_t us) { return TimePoint{Duration{us}}; }
inline constexpr std::int64_t to_micros(TimePoint t) { return t.time_since_epoch().count(); }
inline constexpr std::int64_t to_micros(Duration d) { return d.count(); }

inline Duration seconds_to_duration(double seconds) {
  return Duration{static_cast<std::int64_t>(std::llround(seconds * 1e6))};
}
inline TimePoint seconds_to_time(double seconds) { return TimePoint{seconds_to_duration(seconds)}; }
inline double to_seconds(Duration d) { return static_cast<double>(d.count()) * 1e-6; }
inline double to_seconds(TimePoint t) { return to_seconds(t.time_since_epoch()); }

}  // namespace d123
