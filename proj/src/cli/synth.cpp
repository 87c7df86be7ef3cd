#include <charconv>
#include <fstream>
#include <istream>
#include <random>

#include <fmt/format.h>

#include "../ingest/csv.hpp"
#include "occuforge/cli.hpp"
#include "occuforge/error.hpp"

namespace occuforge::cli {

using ingest::detail::trim;

namespace {

template <typename T>
T number(std::string_view key, std::string_view text) {
    text = trim(text);
    T value{};
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size()) {
        throw ConfigError(fmt::format("{}: cannot parse '{}'", key, text));
    }
    return value;
}

void check_chain(const DayTypeChain& c, const char* name, int spd) {
    for (double p : {c.p01, c.p10}) {
        if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(fmt::format("{} transition probabilities must lie in [0, 1]", name));
    }
    if (!c.schedule.empty() && static_cast<int>(c.schedule.size()) != spd) {
        throw ConfigError(fmt::format("{} schedule must have {} entries", name, spd));
    }
}

}  // namespace

void SynthSpec::validate() const {
    if (days < 1) throw ConfigError("synth days must be >= 1");
    if (delta_minutes < 1 || 1440 % delta_minutes != 0) throw ConfigError("delta_minutes must divide 1440");
    if (initial_state > 1) throw ConfigError("initial_state must be 0 or 1");
    const int spd = 1440 / delta_minutes;
    check_chain(weekday, "weekday", spd);
    check_chain(weekend, "weekend", spd);
}

OccupancySeries synth_generate(const SynthSpec& spec) {
    spec.validate();
    const int spd = 1440 / spec.delta_minutes;
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<std::uint8_t> states;
    states.reserve(static_cast<std::size_t>(spec.days) * static_cast<std::size_t>(spd));
    std::uint8_t prev = spec.initial_state;
    for (int d = 0; d < spec.days; ++d) {
        const Date day = spec.start_date + std::chrono::days{d};
        const DayTypeChain& chain = is_weekend(day) ? spec.weekend : spec.weekday;
        for (int s = 0; s < spd; ++s) {
            const double draw = u(rng);
            std::uint8_t next;
            if (prev == 0) {
                next = draw < chain.p01 ? 1 : 0;
            } else {
                next = draw < chain.p10 ? 0 : 1;
            }
            if (!chain.schedule.empty() && chain.schedule[static_cast<std::size_t>(s)]) {
                next = *chain.schedule[static_cast<std::size_t>(s)];
            }
            states.push_back(next);
            prev = next;
        }
    }
    return OccupancySeries(spec.charger_id, spec.start_date, spec.delta_minutes, std::move(states));
}

std::vector<std::optional<std::uint8_t>> parse_schedule(std::string_view text, int slots_per_day) {
    std::vector<std::optional<std::uint8_t>> out(static_cast<std::size_t>(slots_per_day));
    for (const auto& item : split_list(text)) {
        const auto dash = item.find('-');
        const auto colon = item.find(':');
        if (dash == std::string::npos || colon == std::string::npos || colon < dash) {
            throw ConfigError(fmt::format("schedule entry '{}' is not first-last:state", item));
        }
        const std::string_view sv = item;
        const int first = number<int>("schedule", sv.substr(0, dash));
        const int last = number<int>("schedule", sv.substr(dash + 1, colon - dash - 1));
        const int state = number<int>("schedule", sv.substr(colon + 1));
        if (first < 0 || last < first || last >= slots_per_day || (state != 0 && state != 1)) {
            throw ConfigError(fmt::format("schedule entry '{}' is out of range", item));
        }
        for (int s = first; s <= last; ++s) out[static_cast<std::size_t>(s)] = static_cast<std::uint8_t>(state);
    }
    return out;
}

SynthSpec parse_synth_spec(std::istream& in) {
    SynthSpec spec;
    std::string weekday_schedule;
    std::string weekend_schedule;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view s = line;
        if (const auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
        s = trim(s);
        if (s.empty()) continue;
        const auto eq = s.find('=');
        if (eq == std::string_view::npos) throw ConfigError(fmt::format("line {}: expected 'key = value'", lineno));
        const std::string key(trim(s.substr(0, eq)));
        const std::string_view v = trim(s.substr(eq + 1));
        if (key == "charger_id") spec.charger_id = v;
        else if (key == "start_date") {
            const auto d = parse_date(v);
            if (!d) throw ConfigError(fmt::format("line {}: bad start_date", lineno));
            spec.start_date = *d;
        } else if (key == "days") spec.days = number<int>(key, v);
        else if (key == "delta_minutes") spec.delta_minutes = number<int>(key, v);
        else if (key == "weekday_p01") spec.weekday.p01 = number<double>(key, v);
        else if (key == "weekday_p10") spec.weekday.p10 = number<double>(key, v);
        else if (key == "weekend_p01") spec.weekend.p01 = number<double>(key, v);
        else if (key == "weekend_p10") spec.weekend.p10 = number<double>(key, v);
        else if (key == "weekday_schedule") weekday_schedule = v;
        else if (key == "weekend_schedule") weekend_schedule = v;
        else if (key == "initial_state") spec.initial_state = static_cast<std::uint8_t>(number<int>(key, v));
        else if (key == "seed") spec.seed = number<std::uint64_t>(key, v);
        else throw ConfigError(fmt::format("line {}: unknown synth key '{}'", lineno, key));
    }
    if (spec.delta_minutes < 1 || 1440 % spec.delta_minutes != 0) throw ConfigError("delta_minutes must divide 1440");
    const int spd = 1440 / spec.delta_minutes;
    if (!weekday_schedule.empty()) spec.weekday.schedule = parse_schedule(weekday_schedule, spd);
    if (!weekend_schedule.empty()) spec.weekend.schedule = parse_schedule(weekend_schedule, spd);
    spec.validate();
    return spec;
}

SynthSpec load_synth_spec(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(fmt::format("cannot open synth spec {}", path.string()));
    return parse_synth_spec(in);
}

}  // namespace occuforge::cli
