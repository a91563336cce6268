#pragma once

#include <cstdint>
#include <string>

#include "subcast/errors.hpp"

namespace subcast {

// Toy calendar: 360-day years (12 x 30), four 6-hour samples per day.
// Absolute time is an integer count of 6-hour steps since year 0, day 0, 00:00.
inline constexpr int kStepsPerDay = 4;
inline constexpr int kDaysPerYear = 360;
inline constexpr int kStepsPerYear = kStepsPerDay * kDaysPerYear;  // 1440
inline constexpr int kStepHours = 6;
inline constexpr int kCalendarKeys = kStepsPerYear;  // (day-of-year, hour) pairs

struct ToyDate {
  int year = 0;
  int day_of_year = 0;  // 0..359
  int hour_index = 0;   // 0..3 -> 00/06/12/18
};

inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b) != 0 && ((a < 0) != (b < 0))) --q;
  return q;
}

inline std::int64_t floor_mod(std::int64_t a, std::int64_t b) {
  return a - floor_div(a, b) * b;
}

inline ToyDate to_date(std::int64_t step) {
  ToyDate d;
  d.year = static_cast<int>(floor_div(step, kStepsPerYear));
  const std::int64_t in_year = floor_mod(step, kStepsPerYear);
  d.day_of_year = static_cast<int>(in_year / kStepsPerDay);
  d.hour_index = static_cast<int>(in_year % kStepsPerDay);
  return d;
}

inline std::int64_t to_step(const ToyDate& d) {
  return static_cast<std::int64_t>(d.year) * kStepsPerYear +
         static_cast<std::int64_t>(d.day_of_year) * kStepsPerDay + d.hour_index;
}

inline int year_of(std::int64_t step) { return to_date(step).year; }
inline int day_of_year(std::int64_t step) { return to_date(step).day_of_year; }
inline int hour_index(std::int64_t step) { return to_date(step).hour_index; }

// Calendar key 0..1439 identifying (day-of-year, hour-of-day).
inline int calendar_key(std::int64_t step) {
  return static_cast<int>(floor_mod(step, kStepsPerYear));
}

// Circular day-of-year distance in [0, 180].
inline int doy_distance(int a, int b) {
  int d = a - b;
  while (d < 0) d += kDaysPerYear;
  while (d >= kDaysPerYear) d -= kDaysPerYear;
  return d <= kDaysPerYear / 2 ? d : kDaysPerYear - d;
}

inline std::string format_step(std::int64_t step) {
  const ToyDate d = to_date(step);
  return "y" + std::to_string(d.year) + "d" + std::to_string(d.day_of_year) +
         "h" + std::to_string(d.hour_index * kStepHours);
}

// Uniform 6-hourly time axis: first sample + sample count.
struct TimeAxis {
  std::int64_t start = 0;
  std::int64_t count = 0;

  std::int64_t at(std::int64_t i) const { return start + i; }
  std::int64_t end() const { return start + count; }  // one past last
  bool contains(std::int64_t step) const {
    return step >= start && step < end();
  }
  std::int64_t index_of(std::int64_t step) const {
    if (!contains(step)) {
      throw ConfigError("time " + format_step(step) + " outside axis [" +
                        format_step(start) + ", " + format_step(end() - 1) +
                        "]");
    }
    return step - start;
  }
};

}  // namespace subcast
