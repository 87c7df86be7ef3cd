#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>

#include <fmt/format.h>

#include "csv.hpp"
#include "occuforge/error.hpp"
#include "occuforge/ingest.hpp"

namespace occuforge::ingest {

std::optional<ChargerClass> parse_charger_class(std::string_view text) {
    std::string lower(detail::trim(text));
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "slow") return ChargerClass::slow;
    if (lower == "fast") return ChargerClass::fast;
    if (lower == "rapid") return ChargerClass::rapid;
    return std::nullopt;
}

std::string_view to_string(ChargerClass c) {
    switch (c) {
        case ChargerClass::slow: return "slow";
        case ChargerClass::fast: return "fast";
        case ChargerClass::rapid: return "rapid";
    }
    return "rapid";
}

double ChargingSession::duration_minutes() const {
    return static_cast<double>((plug_out - plug_in).count()) / 60.0;
}

namespace {

std::optional<std::size_t> find_column(const std::vector<std::string>& header, const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
}

std::optional<double> parse_double(std::string_view text) {
    text = detail::trim(text);
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(value)) return std::nullopt;
    return value;
}

}  // namespace

ParseResult parse_sessions(std::istream& csv, const ColumnMap& columns) {
    ParseResult result;
    std::string line;
    if (!std::getline(csv, line)) {
        throw ConfigError("sessions CSV has no header row");
    }
    const auto header = detail::split_csv_line(line);

    auto require = [&](const std::string& name, std::string_view role) {
        auto idx = find_column(header, name);
        if (!idx) throw ConfigError(fmt::format("sessions CSV header lacks the {} column '{}'", role, name));
        return *idx;
    };
    const std::size_t id_col = require(columns.charger_id, "charger id");
    const std::size_t in_col = require(columns.plug_in, "plug-in");
    const std::size_t out_col = require(columns.plug_out, "plug-out");
    std::optional<std::size_t> energy_col;
    std::optional<std::size_t> class_col;
    if (!columns.energy.empty()) energy_col = require(columns.energy, "energy");
    if (!columns.charger_class.empty()) class_col = require(columns.charger_class, "charger class");

    std::size_t row = 1;
    while (std::getline(csv, line)) {
        ++row;
        if (detail::trim(line).empty()) continue;
        const auto fields = detail::split_csv_line(line);
        auto reject = [&](std::string reason) { result.rejected.push_back({row, std::move(reason)}); };
        auto field = [&](std::size_t col) -> std::string_view {
            return col < fields.size() ? std::string_view(fields[col]) : std::string_view{};
        };

        if (field(id_col).empty()) { reject("missing charger id"); continue; }
        if (field(in_col).empty()) { reject("missing plug-in time"); continue; }
        if (field(out_col).empty()) { reject("missing plug-out time"); continue; }

        ChargingSession s;
        s.charger_id = std::string(field(id_col));
        auto in = parse_timestamp(field(in_col));
        if (!in) { reject(fmt::format("unparsable plug-in time '{}'", field(in_col))); continue; }
        auto out = parse_timestamp(field(out_col));
        if (!out) { reject(fmt::format("unparsable plug-out time '{}'", field(out_col))); continue; }
        if (*out <= *in) { reject("plug_out <= plug_in"); continue; }
        s.plug_in = *in;
        s.plug_out = *out;

        if (energy_col && !field(*energy_col).empty()) {
            auto e = parse_double(field(*energy_col));
            if (!e) { reject(fmt::format("unparsable energy '{}'", field(*energy_col))); continue; }
            if (*e < 0.0) { reject("energy_kwh < 0"); continue; }
            s.energy_kwh = *e;
        }
        s.charger_class = columns.default_class;
        if (class_col && !field(*class_col).empty()) {
            auto c = parse_charger_class(field(*class_col));
            if (!c) { reject(fmt::format("unknown charger class '{}'", field(*class_col))); continue; }
            s.charger_class = *c;
        }
        result.sessions.push_back(std::move(s));
    }
    return result;
}

void write_reject_report(std::ostream& out, std::span<const RejectedRow> rejected) {
    for (const auto& r : rejected) out << fmt::format("row {}: {}\n", r.row, r.reason);
}

void write_sessions_csv(std::ostream& out, std::span<const ChargingSession> sessions) {
    out << "charger_id,plug_in,plug_out,energy_kwh,charger_class\n";
    for (const auto& s : sessions) {
        out << fmt::format("{},{},{},{},{}\n", s.charger_id, format_timestamp(s.plug_in),
                           format_timestamp(s.plug_out), s.energy_kwh, to_string(s.charger_class));
    }
}

OutlierSplit remove_outliers(std::span<const ChargingSession> sessions) {
    if (sessions.empty()) throw Error("no sessions");
    const ChargerClass cls = sessions.front().charger_class;
    for (const auto& s : sessions) {
        if (s.charger_class != cls) throw Error("remove_outliers expects sessions of a single charger class");
    }

    std::vector<double> durations;
    durations.reserve(sessions.size());
    for (const auto& s : sessions) durations.push_back(s.duration_minutes());

    std::vector<double> sorted = durations;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    const double median = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);

    double mean = 0.0;
    for (double d : durations) mean += d;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double d : durations) ss += (d - mean) * (d - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n));

    OutlierSplit split;
    split.median_minutes = median;
    split.sd_minutes = sd;
    split.threshold_minutes = median + 3.0 * sd;
    for (std::size_t i = 0; i < sessions.size(); ++i) {
        if (durations[i] > split.threshold_minutes) {
            split.removed.push_back(sessions[i]);
        } else {
            split.kept.push_back(sessions[i]);
        }
    }
    return split;
}

DateRange covering_range(std::span<const ChargingSession> sessions) {
    if (sessions.empty()) throw Error("no sessions");
    Date first = date_of(sessions.front().plug_in);
    Date last = first;
    for (const auto& s : sessions) {
        first = std::min(first, date_of(s.plug_in));
        // the last occupied instant is strictly before plug_out
        last = std::max(last, date_of(s.plug_out - std::chrono::seconds{1}));
    }
    return {first, last};
}

}  // namespace occuforge::ingest
