#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>

namespace occuforge {

// Timestamps are civil local time of the data source. They are stored on the
// system_clock axis for arithmetic only; no timezone conversion is applied.
using Timestamp = std::chrono::sys_seconds;
using Date = std::chrono::sys_days;

/// Parses `YYYY-MM-DDTHH:MM[:SS]`. A single space is accepted in place of `T`.
std::optional<Timestamp> parse_timestamp(std::string_view text);

/// Parses `YYYY-MM-DD`.
std::optional<Date> parse_date(std::string_view text);

/// `YYYY-MM-DDTHH:MM`, with `:SS` appended only when the seconds are non-zero.
std::string format_timestamp(Timestamp ts);
std::string format_date(Date d);

/// Sunday = 0, Monday = 1, ..., Saturday = 6.
int day_of_week(Date d);
bool is_weekend(Date d);

inline Date date_of(Timestamp ts) { return std::chrono::floor<std::chrono::days>(ts); }

}  // namespace occuforge
