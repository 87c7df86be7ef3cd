#include <doctest.h>

#include <random>
#include <sstream>

#include "occuforge/error.hpp"
#include "occuforge/features.hpp"

using namespace occuforge;
using namespace occuforge::features;
using ingest::OccupancySeries;

namespace {

// Starts Monday 2018-03-05.
OccupancySeries random_series(std::size_t days, std::uint64_t seed, double rate = 0.3) {
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution b(rate);
    std::vector<std::uint8_t> s(days * 144);
    for (auto& v : s) v = b(rng);
    return OccupancySeries("A", *parse_date("2018-03-05"), 10, s);
}

}  // namespace

TEST_CASE("profiles match brute-force means") {
    const auto series = random_series(17, 1);
    const auto train = ingest::split_train_test(series, 0.7).train;  // ends mid-day
    const auto p = day_type_profile(train);
    REQUIRE(p.weekday.size() == 144);
    REQUIRE(p.weekend.size() == 144);
    CHECK(p.charger_id == "A");
    for (int slot = 0; slot < 144; ++slot) {
        double sums[2] = {0, 0};
        int counts[2] = {0, 0};
        for (std::size_t t = 0; t < train.size(); ++t) {
            if (t % 144 != static_cast<std::size_t>(slot)) continue;
            const int w = is_weekend(*parse_date("2018-03-05") + std::chrono::days(t / 144)) ? 1 : 0;
            sums[w] += train[t];
            ++counts[w];
        }
        CHECK(p.weekday[slot] == doctest::Approx(sums[0] / counts[0]).epsilon(1e-12));
        CHECK(p.weekend[slot] == doctest::Approx(sums[1] / counts[1]).epsilon(1e-12));
    }
}

TEST_CASE("profile examples") {
    std::vector<std::uint8_t> s(7 * 144);
    for (std::size_t d = 0; d < 7; ++d) {
        for (std::size_t i = 0; i < 144; ++i) s[d * 144 + i] = d >= 5 ? 1 : 0;  // Sat, Sun occupied
    }
    const auto p = day_type_profile(OccupancySeries("A", *parse_date("2018-03-05"), 10, s));
    for (int i = 0; i < 144; ++i) {
        CHECK(p.weekday[i] == 0.0);
        CHECK(p.weekend[i] == 1.0);
    }

    // Friday alternates 1,0,1,0,...; the weekend after it is free.
    std::vector<std::uint8_t> alt(3 * 144, 0);
    for (std::size_t i = 0; i < 144; ++i) alt[i] = i % 2 == 0;
    const auto q = day_type_profile(OccupancySeries("A", *parse_date("2018-03-09"), 10, alt));
    for (int i = 0; i < 144; ++i) CHECK(q.weekday[i] == (i % 2 == 0 ? 1.0 : 0.0));

    const OccupancySeries weekdays_only("A", *parse_date("2018-03-05"), 10, std::vector<std::uint8_t>(5 * 144));
    CHECK_THROWS_WITH(day_type_profile(weekdays_only), doctest::Contains("insufficient day-type coverage"));
}

TEST_CASE("profiles CSV round trip") {
    const auto p = day_type_profile(random_series(14, 3));
    std::stringstream buf;
    write_profiles_csv(buf, p);
    CHECK(buf.str().rfind("slot,weekday_rate,weekend_rate\n1,", 0) == 0);
    const auto q = read_profiles_csv(buf);
    CHECK(q.weekday == p.weekday);
    CHECK(q.weekend == p.weekend);
}

TEST_CASE("sample layout") {
    const auto series = random_series(14, 4);
    const auto p = day_type_profile(series);
    SUBCASE("first slot of Monday") {
        const auto s = build_sample(series, p, 144 * 7, 12, 1);  // Monday 2018-03-12 00:00
        REQUIRE(s.x2.size() == 147);
        CHECK(s.x2[0] == doctest::Approx(1.0 / 144));
        CHECK(s.x2[1] == doctest::Approx(1.0 / 6));
        CHECK(s.x2[2] == 0.0);
        CHECK(std::equal(s.x2.begin() + 3, s.x2.end(), p.weekday.begin()));
    }
    SUBCASE("Saturday selects the weekend profile") {
        const auto s = build_sample(series, p, 144 * 5 + 30, 12, 3);
        CHECK(s.x2[1] == doctest::Approx(1.0));
        CHECK(s.x2[2] == 1.0);
        CHECK(std::equal(s.x2.begin() + 3, s.x2.end(), p.weekend.begin()));
    }
    SUBCASE("Sunday is day zero") {
        const auto s = build_sample(series, p, 144 * 6 + 143, 12, 1);
        CHECK(s.x2[0] == doctest::Approx(1.0));
        CHECK(s.x2[1] == 0.0);
        CHECK(s.x2[2] == 1.0);
    }
    SUBCASE("bounds") {
        CHECK_THROWS_WITH(build_sample(series, p, 5, 12, 1), doctest::Contains("history"));
        CHECK_THROWS(build_sample(series, p, series.size() - 1, 12, 6));
        CHECK_NOTHROW(build_sample(series, p, series.size() - 6, 12, 6));
        const auto inf = build_inference_sample(series, p, series.size(), 12);
        CHECK(inf.y.empty());
        CHECK(inf.x1[0] == series[series.size() - 1]);
    }
}

TEST_CASE("x1 and y copy the series index by index") {
    const auto series = random_series(8, 6);
    const auto p = day_type_profile(series);
    const auto ds = build_dataset(series, p, 12, 5);
    CHECK(ds.samples.size() == series.size() - 12 - 5 + 1);
    std::size_t expect_step = 12;
    for (const auto& s : ds.samples) {
        REQUIRE(s.step == expect_step++);
        REQUIRE(s.x1.size() == 12);
        REQUIRE(s.y.size() == 5);
        for (int j = 0; j < 12; ++j) CHECK(s.x1[j] == series[s.step - 1 - j]);
        for (int j = 0; j < 5; ++j) CHECK(s.y[j] == series[s.step + j]);
        for (double v : s.x2) CHECK((v >= 0.0 && v <= 1.0));
    }
}

TEST_CASE("dataset sizes") {
    const auto whole = random_series(7, 8);
    const auto p = day_type_profile(whole);
    auto prefix = [&](std::size_t n) { return whole.slice(0, n); };
    CHECK(build_dataset(prefix(20), p, 12, 3).samples.size() == 6);
    CHECK(build_dataset(prefix(15), p, 12, 3).samples.size() == 1);
    CHECK_THROWS(build_dataset(prefix(14), p, 12, 3));
}
