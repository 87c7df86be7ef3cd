#include <cmath>
#include <istream>
#include <map>
#include <ostream>

#include <fmt/format.h>

#include "csv.hpp"
#include "occuforge/error.hpp"
#include "occuforge/ingest.hpp"

namespace occuforge::ingest {

namespace {

void check_delta(int delta_minutes) {
    if (delta_minutes <= 0 || 1440 % delta_minutes != 0) {
        throw Error(fmt::format("slot width {} minutes does not divide a day", delta_minutes));
    }
}

}  // namespace

OccupancySeries::OccupancySeries(std::string charger_id, Date start_date, int delta_minutes,
                                 std::vector<std::uint8_t> states, int first_slot)
    : charger_id_(std::move(charger_id)),
      start_date_(start_date),
      delta_minutes_(delta_minutes),
      first_slot_(first_slot),
      states_(std::move(states)) {
    check_delta(delta_minutes_);
    if (first_slot_ < 0 || first_slot_ >= slots_per_day()) {
        throw Error(fmt::format("first slot {} outside the day", first_slot_));
    }
    for (auto s : states_) {
        if (s > 1) throw Error("occupancy states must be 0 or 1");
    }
}

Date OccupancySeries::day_of(std::size_t t) const {
    const auto abs = static_cast<std::size_t>(first_slot_) + t;
    return start_date_ + std::chrono::days{static_cast<long>(abs / static_cast<std::size_t>(slots_per_day()))};
}

int OccupancySeries::slot_of_day(std::size_t t) const {
    const auto abs = static_cast<std::size_t>(first_slot_) + t;
    return static_cast<int>(abs % static_cast<std::size_t>(slots_per_day()));
}

Timestamp OccupancySeries::slot_start(std::size_t t) const {
    return Timestamp{day_of(t)} + std::chrono::minutes{slot_of_day(t) * delta_minutes_};
}

std::optional<std::size_t> OccupancySeries::step_at(Timestamp ts) const {
    const Timestamp origin = slot_start(0);
    if (ts < origin) return std::nullopt;
    const auto offset = (ts - origin).count() / (60L * delta_minutes_);
    if (static_cast<std::size_t>(offset) >= states_.size()) return std::nullopt;
    return static_cast<std::size_t>(offset);
}

OccupancySeries OccupancySeries::slice(std::size_t begin, std::size_t end) const {
    if (begin > end || end > states_.size()) throw Error("slice bounds outside the series");
    const Date day = begin < states_.size() ? day_of(begin) : day_of(states_.size() - 1);
    const int slot = begin < states_.size() ? slot_of_day(begin) : slot_of_day(states_.size() - 1);
    return OccupancySeries(charger_id_, day, delta_minutes_,
                           std::vector<std::uint8_t>(states_.begin() + static_cast<long>(begin),
                                                     states_.begin() + static_cast<long>(end)),
                           slot);
}

OccupancySeries discretize(std::span<const ChargingSession> sessions, const std::string& charger_id,
                           const DateRange& range, int delta_minutes) {
    check_delta(delta_minutes);
    if (range.last < range.first) throw Error("date range ends before it starts");
    const int spd = 1440 / delta_minutes;
    const std::size_t len = static_cast<std::size_t>(range.days()) * static_cast<std::size_t>(spd);
    const Timestamp begin{range.first};
    const Timestamp end{range.last + std::chrono::days{1}};
    const long slot_seconds = 60L * delta_minutes;

    std::vector<std::uint8_t> states(len, 0);
    for (const auto& s : sessions) {
        if (s.charger_id != charger_id) continue;
        if (s.plug_in < begin || s.plug_out > end) {
            throw Error(fmt::format("session {} {}..{} lies outside {}..{}", s.charger_id,
                                    format_timestamp(s.plug_in), format_timestamp(s.plug_out),
                                    format_date(range.first), format_date(range.last)));
        }
        const long from = (s.plug_in - begin).count();
        const long to = (s.plug_out - begin).count();
        const long first = from / slot_seconds;
        const long last_excl = (to + slot_seconds - 1) / slot_seconds;
        for (long t = first; t < last_excl; ++t) states[static_cast<std::size_t>(t)] = 1;
    }
    return OccupancySeries(charger_id, range.first, delta_minutes, std::move(states));
}

SplitSeries split_train_test(const OccupancySeries& series, double fraction) {
    if (!(fraction > 0.0 && fraction < 1.0)) {
        throw Error(fmt::format("split fraction {} outside (0, 1)", fraction));
    }
    if (series.empty()) throw Error("cannot split an empty series");
    const auto n_train = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(series.size())));
    return {series.slice(0, n_train), series.slice(n_train, series.size()), fraction};
}

void write_occupancy_csv(std::ostream& out, std::span<const OccupancySeries> series) {
    out << "charger_id,timestamp_slot_start,state\n";
    for (const auto& s : series) {
        for (std::size_t t = 0; t < s.size(); ++t) {
            out << s.charger_id() << ',' << format_timestamp(s.slot_start(t)) << ','
                << static_cast<int>(s[t]) << '\n';
        }
    }
}

std::vector<OccupancySeries> read_occupancy_csv(std::istream& in, int delta_minutes) {
    check_delta(delta_minutes);
    struct Pending {
        Timestamp first;
        Timestamp last;
        std::vector<std::uint8_t> states;
    };
    std::vector<std::string> order;
    std::map<std::string, Pending> pending;

    std::string line;
    if (!std::getline(in, line)) throw FormatError("occupancy CSV is empty");
    const auto header = detail::split_csv_line(line);
    if (header.size() != 3 || header[0] != "charger_id" || header[1] != "timestamp_slot_start" ||
        header[2] != "state") {
        throw FormatError("occupancy CSV header must be charger_id,timestamp_slot_start,state");
    }
    const std::chrono::seconds step{60L * delta_minutes};
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (detail::trim(line).empty()) continue;
        const auto f = detail::split_csv_line(line);
        if (f.size() != 3) throw FormatError(fmt::format("occupancy CSV row {}: expected 3 fields", row));
        auto ts = parse_timestamp(f[1]);
        if (!ts) throw FormatError(fmt::format("occupancy CSV row {}: bad timestamp '{}'", row, f[1]));
        if (f[2] != "0" && f[2] != "1") {
            throw FormatError(fmt::format("occupancy CSV row {}: state must be 0 or 1", row));
        }
        const std::uint8_t state = f[2] == "1" ? 1 : 0;
        auto it = pending.find(f[0]);
        if (it == pending.end()) {
            if ((*ts - Timestamp{date_of(*ts)}).count() % step.count() != 0) {
                throw FormatError(fmt::format("occupancy CSV row {}: timestamp not on a slot boundary", row));
            }
            order.push_back(f[0]);
            pending.emplace(f[0], Pending{*ts, *ts, {state}});
        } else {
            if (*ts != it->second.last + step) {
                throw FormatError(fmt::format("occupancy CSV row {}: slots of '{}' are not consecutive", row, f[0]));
            }
            it->second.last = *ts;
            it->second.states.push_back(state);
        }
    }

    std::vector<OccupancySeries> result;
    for (const auto& id : order) {
        auto& p = pending.at(id);
        const Date day = date_of(p.first);
        const int slot = static_cast<int>((p.first - Timestamp{day}).count() / step.count());
        result.emplace_back(id, day, delta_minutes, std::move(p.states), slot);
    }
    return result;
}

}  // namespace occuforge::ingest
