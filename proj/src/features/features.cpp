#include <array>
#include <istream>
#include <ostream>

#include <fmt/format.h>

#include "../ingest/csv.hpp"
#include "occuforge/error.hpp"
#include "occuforge/features.hpp"

namespace occuforge::features {

DayTypeProfiles day_type_profile(const OccupancySeries& train) {
    const auto spd = static_cast<std::size_t>(train.slots_per_day());
    std::vector<double> sums[2] = {std::vector<double>(spd, 0.0), std::vector<double>(spd, 0.0)};
    std::vector<std::size_t> counts[2] = {std::vector<std::size_t>(spd, 0), std::vector<std::size_t>(spd, 0)};
    bool seen[2] = {false, false};

    for (std::size_t t = 0; t < train.size(); ++t) {
        const int type = is_weekend(train.day_of(t)) ? 1 : 0;
        const auto slot = static_cast<std::size_t>(train.slot_of_day(t));
        sums[type][slot] += train[t];
        ++counts[type][slot];
        seen[type] = true;
    }
    if (!seen[0] || !seen[1]) {
        throw Error(fmt::format("insufficient day-type coverage in the training data of '{}'", train.charger_id()));
    }

    // A slot never observed for a day type (possible only for partial first or
    // last days) borrows the mean of that day type over all observed slots.
    for (int type = 0; type < 2; ++type) {
        double total = 0.0;
        std::size_t n = 0;
        for (std::size_t s = 0; s < spd; ++s) {
            total += sums[type][s];
            n += counts[type][s];
        }
        const double fallback = total / static_cast<double>(n);
        for (std::size_t s = 0; s < spd; ++s) {
            sums[type][s] = counts[type][s] == 0 ? fallback : sums[type][s] / static_cast<double>(counts[type][s]);
        }
    }

    DayTypeProfiles p;
    p.weekday = std::move(sums[0]);
    p.weekend = std::move(sums[1]);
    p.charger_id = train.charger_id();
    if (!train.empty()) {
        p.training_range = format_timestamp(train.slot_start(0)) + ".." +
                           format_timestamp(train.slot_start(train.size() - 1));
    }
    return p;
}

void write_profiles_csv(std::ostream& out, const DayTypeProfiles& profiles) {
    out << "slot,weekday_rate,weekend_rate\n";
    for (std::size_t s = 0; s < profiles.weekday.size(); ++s) {
        out << fmt::format("{},{},{}\n", s + 1, profiles.weekday[s], profiles.weekend[s]);
    }
}

DayTypeProfiles read_profiles_csv(std::istream& in) {
    DayTypeProfiles p;
    std::string line;
    if (!std::getline(in, line) || ingest::detail::trim(line) != "slot,weekday_rate,weekend_rate") {
        throw FormatError("profile CSV header must be slot,weekday_rate,weekend_rate");
    }
    while (std::getline(in, line)) {
        if (ingest::detail::trim(line).empty()) continue;
        const auto f = ingest::detail::split_csv_line(line);
        if (f.size() != 3) throw FormatError("profile CSV rows need 3 fields");
        try {
            if (std::stoul(f[0]) != p.weekday.size() + 1) throw FormatError("profile CSV slots out of order");
            p.weekday.push_back(std::stod(f[1]));
            p.weekend.push_back(std::stod(f[2]));
        } catch (const std::logic_error&) {
            throw FormatError(fmt::format("profile CSV: cannot parse '{}'", line));
        }
    }
    if (p.weekday.empty()) throw FormatError("profile CSV has no rows");
    return p;
}

std::array<double, 3> time_features(const OccupancySeries& series, std::size_t t) {
    const Date day = series.day_of(t);
    return {static_cast<double>(series.slot_of_day(t) + 1) / series.slots_per_day(),
            day_of_week(day) / 6.0, is_weekend(day) ? 1.0 : 0.0};
}

Sample build_inference_sample(const OccupancySeries& series, const DayTypeProfiles& profiles, std::size_t t, int m) {
    if (m < 1) throw Error("history length m must be positive");
    if (t < static_cast<std::size_t>(m)) {
        throw Error(fmt::format("step {} has fewer than m = {} states of history", t, m));
    }
    if (t > series.size()) throw Error(fmt::format("step {} lies beyond the series end", t));
    if (profiles.slots_per_day() != series.slots_per_day()) {
        throw Error("profile resolution does not match the series");
    }

    Sample s;
    s.step = t;
    s.x1.resize(static_cast<std::size_t>(m));
    for (int j = 0; j < m; ++j) s.x1[static_cast<std::size_t>(j)] = series[t - 1 - static_cast<std::size_t>(j)];

    const auto tf = time_features(series, t);
    const auto profile = profiles.for_date(series.day_of(t));
    s.x2.reserve(tf.size() + profile.size());
    s.x2.insert(s.x2.end(), tf.begin(), tf.end());
    s.x2.insert(s.x2.end(), profile.begin(), profile.end());
    return s;
}

Sample build_sample(const OccupancySeries& series, const DayTypeProfiles& profiles, std::size_t t, int m, int k) {
    if (m < 1 || k < 1) throw Error("history length m and horizon k must be positive");
    if (t < static_cast<std::size_t>(m)) {
        throw Error(fmt::format("step {} has fewer than m = {} states of history", t, m));
    }
    if (t + static_cast<std::size_t>(k) > series.size()) {
        throw Error(fmt::format("target window {}..{} exceeds the series end {}", t, t + static_cast<std::size_t>(k) - 1,
                                series.size() - 1));
    }
    Sample s = build_inference_sample(series, profiles, t, m);
    s.y.assign(series.states().begin() + static_cast<long>(t), series.states().begin() + static_cast<long>(t) + k);
    return s;
}

Dataset build_dataset(const OccupancySeries& series, const DayTypeProfiles& profiles, int m, int k) {
    if (m < 1 || k < 1) throw Error("history length m and horizon k must be positive");
    if (series.size() < static_cast<std::size_t>(m + k)) {
        throw Error(fmt::format("series of length {} is shorter than m + k = {}", series.size(), m + k));
    }
    Dataset d;
    d.charger_id = series.charger_id();
    d.m = m;
    d.k = k;
    const std::size_t last = series.size() - static_cast<std::size_t>(k);
    d.samples.reserve(last - static_cast<std::size_t>(m) + 1);
    for (std::size_t t = static_cast<std::size_t>(m); t <= last; ++t) {
        d.samples.push_back(build_sample(series, profiles, t, m, k));
    }
    return d;
}

}  // namespace occuforge::features
