#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "occuforge/calendar.hpp"

namespace occuforge::ingest {

enum class ChargerClass { slow, fast, rapid };

std::optional<ChargerClass> parse_charger_class(std::string_view text);
std::string_view to_string(ChargerClass c);

/// One plug-in/plug-out event. plug_out > plug_in and energy_kwh >= 0 always hold
/// for sessions returned by parse_sessions.
struct ChargingSession {
    std::string charger_id;
    Timestamp plug_in;
    Timestamp plug_out;
    double energy_kwh = 0.0;
    ChargerClass charger_class = ChargerClass::rapid;

    double duration_minutes() const;
};

/// Maps CSV header names onto session fields. An empty name for `energy` or
/// `charger_class` means the column is absent; `default_class` is then used.
struct ColumnMap {
    std::string charger_id = "charger_id";
    std::string plug_in = "plug_in";
    std::string plug_out = "plug_out";
    std::string energy = "energy_kwh";
    std::string charger_class = "charger_class";
    ChargerClass default_class = ChargerClass::rapid;
};

struct RejectedRow {
    std::size_t row = 0;  // 1-based line number, the header is row 1
    std::string reason;
};

struct ParseResult {
    std::vector<ChargingSession> sessions;
    std::vector<RejectedRow> rejected;
};

/// Reads charging sessions from CSV text with a header row. Rows that fail to
/// parse or violate the session invariants are reported in `rejected`.
/// Throws ConfigError when a mapped mandatory column is missing from the header.
ParseResult parse_sessions(std::istream& csv, const ColumnMap& columns);

/// One line per reject: `row <n>: <reason>`.
void write_reject_report(std::ostream& out, std::span<const RejectedRow> rejected);

/// Canonical CSV (header `charger_id,plug_in,plug_out,energy_kwh,charger_class`),
/// readable by parse_sessions with a default ColumnMap.
void write_sessions_csv(std::ostream& out, std::span<const ChargingSession> sessions);

struct OutlierSplit {
    std::vector<ChargingSession> kept;
    std::vector<ChargingSession> removed;
    double median_minutes = 0.0;
    double sd_minutes = 0.0;
    double threshold_minutes = 0.0;
};

/// Drops sessions whose duration exceeds median + 3 * SD of all input durations.
/// SD is the population standard deviation; both statistics are computed once
/// on the full input. All sessions must share one charger class.
OutlierSplit remove_outliers(std::span<const ChargingSession> sessions);

/// Inclusive range of civil dates.
struct DateRange {
    Date first;
    Date last;

    int days() const { return static_cast<int>((last - first).count()) + 1; }
};

/// The smallest whole-day range containing every session (plug_out at exactly
/// midnight does not extend the range).
DateRange covering_range(std::span<const ChargingSession> sessions);

/// Binary occupancy at a fixed slot width. A series produced by discretize
/// starts at midnight and spans whole days; slices (train/test splits) may
/// start and end mid-day, tracked through `first_slot`.
class OccupancySeries {
public:
    OccupancySeries() = default;
    OccupancySeries(std::string charger_id, Date start_date, int delta_minutes,
                    std::vector<std::uint8_t> states, int first_slot = 0);

    const std::string& charger_id() const { return charger_id_; }
    Date start_date() const { return start_date_; }
    int delta_minutes() const { return delta_minutes_; }
    int slots_per_day() const { return 1440 / delta_minutes_; }
    int first_slot() const { return first_slot_; }

    std::size_t size() const { return states_.size(); }
    bool empty() const { return states_.empty(); }
    std::span<const std::uint8_t> states() const { return states_; }
    std::uint8_t operator[](std::size_t t) const { return states_[t]; }

    /// Calendar accessors for step t (0-based within this series).
    Date day_of(std::size_t t) const;
    int slot_of_day(std::size_t t) const;  // 0-based, 0..slots_per_day-1
    Timestamp slot_start(std::size_t t) const;
    /// Step index of the slot containing `ts`, if it lies inside the series.
    std::optional<std::size_t> step_at(Timestamp ts) const;

    /// States [begin, end) with calendar anchoring preserved.
    OccupancySeries slice(std::size_t begin, std::size_t end) const;

private:
    std::string charger_id_;
    Date start_date_{};
    int delta_minutes_ = 10;
    int first_slot_ = 0;
    std::vector<std::uint8_t> states_;
};

/// y_t = 1 iff some session of `charger_id` overlaps the half-open slot
/// [start + t*delta, start + (t+1)*delta) by a positive length.
OccupancySeries discretize(std::span<const ChargingSession> sessions, const std::string& charger_id,
                           const DateRange& range, int delta_minutes = 10);

struct SplitSeries {
    OccupancySeries train;
    OccupancySeries test;
    double split_fraction = 0.7;
};

/// train = first floor(fraction * len) states, test = the rest.
SplitSeries split_train_test(const OccupancySeries& series, double fraction);

/// Columns `charger_id,timestamp_slot_start,state`, one row per slot.
void write_occupancy_csv(std::ostream& out, std::span<const OccupancySeries> series);

/// Inverse of write_occupancy_csv. Rows of one charger must be consecutive
/// slots; chargers are returned in order of first appearance.
std::vector<OccupancySeries> read_occupancy_csv(std::istream& in, int delta_minutes = 10);

}  // namespace occuforge::ingest
