#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "occuforge/ingest.hpp"

namespace occuforge::features {

using ingest::OccupancySeries;

/// Mean occupancy per slot of day, separately for weekdays (Mon-Fri) and
/// weekends (Sat, Sun). Always computed from a training split.
struct DayTypeProfiles {
    std::vector<double> weekday;
    std::vector<double> weekend;
    std::string charger_id;
    std::string training_range;  // "<first slot start>..<last slot start>"

    std::span<const double> for_date(Date d) const { return is_weekend(d) ? weekend : weekday; }
    int slots_per_day() const { return static_cast<int>(weekday.size()); }
};

/// Throws when the training data lacks either a weekday or a weekend slot.
DayTypeProfiles day_type_profile(const OccupancySeries& train);

/// `slot,weekday_rate,weekend_rate`, slot numbered from 1.
void write_profiles_csv(std::ostream& out, const DayTypeProfiles& profiles);
DayTypeProfiles read_profiles_csv(std::istream& in);

/// One training/evaluation instance anchored at step t of a series.
///   x1: y[t-1], y[t-2], ..., y[t-m]  (most recent first)
///   x2: slot_number/slots_per_day, day_of_week/6, weekend flag, day-type profile
///   y:  y[t], ..., y[t+k-1]
struct Sample {
    std::vector<std::uint8_t> x1;
    std::vector<double> x2;
    std::vector<std::uint8_t> y;
    std::size_t step = 0;
};

struct Dataset {
    std::string charger_id;
    int m = 12;
    int k = 1;
    std::vector<Sample> samples;  // ordered by step, stride 1
};

/// Leading three x2 components for step t: slot number (1-based) scaled by
/// slots per day, day of week (Sunday = 0) / 6, weekend flag.
std::array<double, 3> time_features(const OccupancySeries& series, std::size_t t);

/// Length of x2 for a given slot resolution (147 at 10-minute slots).
inline int context_dim(int slots_per_day) { return 3 + slots_per_day; }

Sample build_sample(const OccupancySeries& series, const DayTypeProfiles& profiles, std::size_t t, int m, int k);

/// Inputs only (y left empty) for forecasting beyond the observed data;
/// t may equal series.size().
Sample build_inference_sample(const OccupancySeries& series, const DayTypeProfiles& profiles, std::size_t t, int m);

/// Every admissible t (m <= t <= len - k) in order.
Dataset build_dataset(const OccupancySeries& series, const DayTypeProfiles& profiles, int m, int k);

}  // namespace occuforge::features
