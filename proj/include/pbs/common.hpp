#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace pbs {

// Time is discrete at one-minute resolution, counted from the civil epoch
// 1970-01-01 00:00 local time. No timezone or DST handling anywhere.
using Minute = std::int64_t;

constexpr int minutes_per_day = 1440;
constexpr int slice_minutes = 20;
constexpr int slices_per_day = minutes_per_day / slice_minutes;  // 72

enum class DayType : int { weekday = 0, weekend = 1 };

inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

inline std::int64_t day_index(Minute t) { return floor_div(t, minutes_per_day); }
inline int minute_of_day(Minute t) { return static_cast<int>(t - day_index(t) * minutes_per_day); }
inline int slice_of(Minute t) { return minute_of_day(t) / slice_minutes; }

// 1970-01-01 was a Thursday; Monday = 0.
inline int day_of_week(std::int64_t day) {
    std::int64_t d = (day + 3) % 7;
    if (d < 0) d += 7;
    return static_cast<int>(d);
}

inline DayType day_type_of_day(std::int64_t day) {
    return day_of_week(day) >= 5 ? DayType::weekend : DayType::weekday;
}

inline DayType day_type_of(Minute t) { return day_type_of_day(day_index(t)); }

inline const char* day_type_name(DayType w) {
    return w == DayType::weekday ? "weekday" : "weekend";
}

// Civil date helpers (proleptic Gregorian), days since 1970-01-01.
std::int64_t days_from_civil(int y, int m, int d);
void civil_from_days(std::int64_t z, int& y, int& m, int& d);

// "YYYY-MM-DD HH:MM:SS" (seconds optional) -> minutes since epoch. Throws data_error.
Minute parse_timestamp(const std::string& s);
std::string format_timestamp(Minute t);

// Error taxonomy maps to CLI exit codes: usage=1, data=2, runtime/solver=3.
struct usage_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct data_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct solver_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace pbs
