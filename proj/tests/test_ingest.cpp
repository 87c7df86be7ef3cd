#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "occuforge/error.hpp"
#include "occuforge/ingest.hpp"

using namespace occuforge;
using namespace occuforge::ingest;

namespace {

Timestamp ts(const char* text) { return *parse_timestamp(text); }

ChargingSession session(const char* id, const char* in, const char* out, double kwh = 1.0) {
    return {id, ts(in), ts(out), kwh, ChargerClass::rapid};
}

ChargingSession with_minutes(double minutes) {
    const Timestamp start = ts("2018-03-05T00:00");
    return {"CP", start, start + std::chrono::seconds(static_cast<long>(minutes * 60)), 1.0, ChargerClass::rapid};
}

const std::string kHeader = "charger_id,plug_in,plug_out,energy_kwh,charger_class\n";

}  // namespace

TEST_CASE("calendar helpers") {
    CHECK(format_timestamp(ts("2018-03-05T10:05")) == "2018-03-05T10:05");
    CHECK(format_timestamp(ts("2018-03-05 10:05:30")) == "2018-03-05T10:05:30");
    CHECK_FALSE(parse_timestamp("2018-03-05"));
    CHECK_FALSE(parse_timestamp("2018-13-05T10:05"));
    CHECK(day_of_week(*parse_date("2018-03-04")) == 0);  // Sunday
    CHECK(day_of_week(*parse_date("2018-03-05")) == 1);
    CHECK(is_weekend(*parse_date("2018-03-10")));
    CHECK_FALSE(is_weekend(*parse_date("2018-03-09")));
}

TEST_CASE("parse_sessions maps fields") {
    std::istringstream in(kHeader + "CP001,2018-03-05T10:05,2018-03-05T10:33,11.2,rapid\n");
    const auto r = parse_sessions(in, {});
    REQUIRE(r.sessions.size() == 1);
    CHECK(r.rejected.empty());
    const auto& s = r.sessions[0];
    CHECK(s.charger_id == "CP001");
    CHECK(s.duration_minutes() == doctest::Approx(28.0));
    CHECK(s.energy_kwh == doctest::Approx(11.2));
    CHECK(s.charger_class == ChargerClass::rapid);
}

TEST_CASE("parse_sessions header only") {
    std::istringstream in(kHeader);
    const auto r = parse_sessions(in, {});
    CHECK(r.sessions.empty());
    CHECK(r.rejected.empty());
}

TEST_CASE("parse_sessions reports bad rows with their line numbers") {
    std::istringstream in(kHeader +
                          "CP001,2018-03-05T10:33,2018-03-05T10:05,1,rapid\n"
                          "CP001,yesterday,2018-03-05T10:05,1,rapid\n"
                          ",2018-03-05T10:00,2018-03-05T10:05,1,rapid\n"
                          "CP001,2018-03-05T10:00,2018-03-05T10:05,-3,rapid\n"
                          "CP001,2018-03-05T10:00,2018-03-05T10:05,1,turbo\n"
                          "CP002,2018-03-05T11:00,2018-03-05T11:30,4,fast\n");
    const auto r = parse_sessions(in, {});
    REQUIRE(r.sessions.size() == 1);
    CHECK(r.sessions[0].charger_class == ChargerClass::fast);
    REQUIRE(r.rejected.size() == 5);
    for (std::size_t i = 0; i < r.rejected.size(); ++i) CHECK(r.rejected[i].row == i + 2);
    CHECK(r.rejected[0].reason.find("plug_out") != std::string::npos);

    std::ostringstream report;
    write_reject_report(report, r.rejected);
    const auto text = report.str();
    CHECK(text.rfind("row 2: ", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 5);
}

TEST_CASE("parse_sessions column mapping") {
    ColumnMap map;
    map.charger_id = "Site";
    map.plug_in = "Start";
    map.plug_out = "End";
    map.energy = "";
    map.charger_class = "";
    map.default_class = ChargerClass::fast;
    std::istringstream in("End,Site,Start\n2018-03-05T10:30,X1,2018-03-05T10:00\n");
    const auto r = parse_sessions(in, map);
    REQUIRE(r.sessions.size() == 1);
    CHECK(r.sessions[0].charger_id == "X1");
    CHECK(r.sessions[0].charger_class == ChargerClass::fast);
    CHECK(r.sessions[0].energy_kwh == 0.0);

    std::istringstream missing("Site,Start\nX1,2018-03-05T10:00\n");
    CHECK_THROWS_AS(parse_sessions(missing, map), ConfigError);
}

TEST_CASE("remove_outliers worked example") {
    std::vector<ChargingSession> s;
    for (int i = 0; i < 9; ++i) s.push_back(with_minutes(10));
    s.push_back(with_minutes(100));

    // Independent arithmetic: mean 19, squared deviations 9*81 + 81^2 = 7290,
    // population variance 729, SD 27.
    const auto r = remove_outliers(s);
    CHECK(r.median_minutes == doctest::Approx(10.0));
    CHECK(r.sd_minutes == doctest::Approx(27.0));
    CHECK(r.threshold_minutes == doctest::Approx(91.0));
    REQUIRE(r.removed.size() == 1);
    CHECK(r.removed[0].duration_minutes() == doctest::Approx(100.0));
    CHECK(r.kept.size() == 9);
}

TEST_CASE("remove_outliers edge cases") {
    std::vector<ChargingSession> equal(5, with_minutes(42));
    CHECK(remove_outliers(equal).removed.empty());
    CHECK_THROWS_WITH(remove_outliers(std::vector<ChargingSession>{}), "no sessions");
    auto mixed = equal;
    mixed[0].charger_class = ChargerClass::slow;
    CHECK_THROWS_AS(remove_outliers(mixed), Error);
}

TEST_CASE("remove_outliers partition rule on random durations") {
    std::mt19937_64 rng(5);
    std::lognormal_distribution<double> dur(3.5, 0.8);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<ChargingSession> s;
        for (int i = 0; i < 200; ++i) s.push_back(with_minutes(std::round(dur(rng)) + 1));
        std::vector<double> d;
        for (const auto& x : s) d.push_back(x.duration_minutes());
        std::sort(d.begin(), d.end());
        const double median = (d[99] + d[100]) / 2.0;
        const double mean = std::accumulate(d.begin(), d.end(), 0.0) / 200.0;
        double ss = 0.0;
        for (double v : d) ss += (v - mean) * (v - mean);
        const double threshold = median + 3.0 * std::sqrt(ss / 200.0);

        const auto r = remove_outliers(s);
        CHECK(r.kept.size() + r.removed.size() == s.size());
        for (const auto& x : r.removed) CHECK(x.duration_minutes() > threshold);
        for (const auto& x : r.kept) CHECK(x.duration_minutes() <= threshold);
    }
}

TEST_CASE("discretize overlap rule") {
    const DateRange day{*parse_date("2018-03-05"), *parse_date("2018-03-05")};
    SUBCASE("partial slots") {
        const std::vector s{session("A", "2018-03-05T10:05", "2018-03-05T10:25")};
        const auto series = discretize(s, "A", day);
        CHECK(series.size() == 144);
        CHECK(series[60] == 1);
        CHECK(series[61] == 1);
        CHECK(series[62] == 1);
        CHECK(std::accumulate(series.states().begin(), series.states().end(), 0) == 3);
    }
    SUBCASE("half-open end") {
        const std::vector s{session("A", "2018-03-05T10:00", "2018-03-05T10:10")};
        const auto series = discretize(s, "A", day);
        CHECK(series[60] == 1);
        CHECK(series[61] == 0);
    }
    SUBCASE("other chargers and empty days") {
        const std::vector s{session("B", "2018-03-05T10:00", "2018-03-05T12:10")};
        const auto series = discretize(s, "A", day);
        CHECK(std::all_of(series.states().begin(), series.states().end(), [](auto v) { return v == 0; }));
    }
    SUBCASE("session outside range") {
        const std::vector s{session("A", "2018-03-06T10:00", "2018-03-06T10:10")};
        CHECK_THROWS_WITH_AS(discretize(s, "A", day), doctest::Contains("2018-03-06T10:00"), Error);
    }
    SUBCASE("delta must divide a day") {
        const std::vector s{session("A", "2018-03-05T10:00", "2018-03-05T10:10")};
        CHECK_THROWS(discretize(s, "A", day, 7));
    }
}

TEST_CASE("discretize covers every session minute") {
    std::mt19937_64 rng(9);
    std::uniform_int_distribution<int> start(0, 3 * 1440 - 200);
    std::uniform_int_distribution<int> len(1, 180);
    const Timestamp base = ts("2018-03-05T00:00");
    std::vector<ChargingSession> s;
    for (int i = 0; i < 40; ++i) {
        const int a = start(rng);
        const int sec = std::uniform_int_distribution<int>(0, 59)(rng);
        s.push_back({"A", base + std::chrono::seconds(a * 60 + sec), base + std::chrono::seconds((a + len(rng)) * 60),
                     1.0, ChargerClass::rapid});
    }
    const auto range = covering_range(s);
    const auto series = discretize(s, "A", range);
    CHECK(series.size() % 144 == 0);
    CHECK(series.size() == static_cast<std::size_t>(range.days()) * 144);

    // Enumerate every second-resolution minute start inside each session.
    std::vector<std::uint8_t> expect(series.size(), 0);
    for (const auto& x : s) {
        for (auto t = x.plug_in; t < x.plug_out; t += std::chrono::seconds(1)) {
            const auto slot = (t - std::chrono::sys_seconds(range.first)).count() / 600;
            expect[static_cast<std::size_t>(slot)] = 1;
        }
    }
    CHECK(std::equal(expect.begin(), expect.end(), series.states().begin()));
}

TEST_CASE("session CSV round trip preserves occupancy") {
    const std::vector s{session("A", "2018-03-05T10:05", "2018-03-05T11:33", 3.5),
                        session("A", "2018-03-06T23:50", "2018-03-07T00:20", 7.25)};
    std::stringstream buf;
    write_sessions_csv(buf, s);
    const auto parsed = parse_sessions(buf, {});
    REQUIRE(parsed.rejected.empty());
    const auto range = covering_range(s);
    CHECK(range.days() == 3);
    const auto a = discretize(s, "A", range);
    const auto b = discretize(parsed.sessions, "A", range);
    CHECK(std::equal(a.states().begin(), a.states().end(), b.states().begin(), b.states().end()));
}

TEST_CASE("split_train_test") {
    const std::vector<std::uint8_t> states(13104, 1);
    const OccupancySeries series("A", *parse_date("2018-03-05"), 10, states);
    const auto split = split_train_test(series, 0.7);
    CHECK(split.train.size() == 9172);
    CHECK(split.test.size() == 3932);
    CHECK_THROWS(split_train_test(series, 1.0));
    CHECK_THROWS(split_train_test(series, 0.0));

    std::vector<std::uint8_t> pattern(1000);
    for (std::size_t i = 0; i < pattern.size(); ++i) pattern[i] = (i * 7919) % 3 == 0;
    const OccupancySeries p("A", *parse_date("2018-03-05"), 10, pattern);
    const auto sp = split_train_test(p, 0.7);
    CHECK(sp.train.size() == 700);
    CHECK(sp.test.size() == 300);
    std::vector<std::uint8_t> joined(sp.train.states().begin(), sp.train.states().end());
    joined.insert(joined.end(), sp.test.states().begin(), sp.test.states().end());
    CHECK(joined == pattern);
    // Calendar anchoring survives the mid-day split: step 700 is day 4, slot 124.
    CHECK(sp.test.day_of(0) == *parse_date("2018-03-09"));
    CHECK(sp.test.slot_of_day(0) == 700 % 144);
    CHECK(sp.test.slot_start(0) == p.slot_start(700));
}

TEST_CASE("occupancy CSV round trip") {
    std::vector<std::uint8_t> a(288), b(144);
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = i % 5 == 0;
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = i % 2;
    const std::vector series{OccupancySeries("A", *parse_date("2018-03-05"), 10, a),
                             OccupancySeries("B", *parse_date("2018-03-06"), 10, b)};
    std::stringstream buf;
    write_occupancy_csv(buf, series);
    CHECK(buf.str().rfind("charger_id,timestamp_slot_start,state\nA,2018-03-05T00:00,1\n", 0) == 0);
    const auto back = read_occupancy_csv(buf);
    REQUIRE(back.size() == 2);
    CHECK(back[1].charger_id() == "B");
    CHECK(back[1].start_date() == *parse_date("2018-03-06"));
    CHECK(std::equal(back[0].states().begin(), back[0].states().end(), a.begin(), a.end()));
    CHECK(std::equal(back[1].states().begin(), back[1].states().end(), b.begin(), b.end()));

    std::istringstream gap("charger_id,timestamp_slot_start,state\nA,2018-03-05T00:00,1\nA,2018-03-05T00:20,0\n");
    CHECK_THROWS_AS(read_occupancy_csv(gap), FormatError);
}

TEST_CASE("step_at locates slots") {
    const OccupancySeries s("A", *parse_date("2018-03-05"), 10, std::vector<std::uint8_t>(288));
    CHECK(s.step_at(ts("2018-03-05T00:00")) == 0u);
    CHECK(s.step_at(ts("2018-03-06T10:09")) == 144u + 60u);
    CHECK_FALSE(s.step_at(ts("2018-03-07T00:00")));
    CHECK_FALSE(s.step_at(ts("2018-03-04T23:59")));
}
