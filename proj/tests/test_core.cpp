#include "doctest.h"

#include "floodens/catalog.hpp"
#include "floodens/errors.hpp"
#include "floodens/metrics.hpp"
#include "floodens/scenario.hpp"
#include "test_util.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

using namespace floodens;
using testutil::ts;

TEST_SUITE("core") {

TEST_CASE("time series rejects empty, non-finite and zero-step input") {
    CHECK_THROWS_AS(TimeSeries(0, {}), InvalidSeries);
    CHECK_THROWS_AS(TimeSeries(0, {1.0, std::numeric_limits<double>::quiet_NaN()}), InvalidSeries);
    CHECK_THROWS_AS(TimeSeries(0, {1.0}, 0), InvalidSeries);
    const TimeSeries s(10, {1.0, 2.0, 3.0}, 2);
    CHECK(s.end_hour() == 14);
    CHECK(s.value_at(12) == 2.0);
    CHECK_FALSE(s.value_at(13).has_value());
    CHECK_FALSE(s.value_at(16).has_value());
}

TEST_CASE("align intersects the two extents") {
    std::vector<double> va(11), vb(11);
    std::iota(va.begin(), va.end(), 0.0);
    std::iota(vb.begin(), vb.end(), 100.0);
    const auto a = ts(va, 0);
    const auto b = ts(vb, 5);
    const auto pairs = align(a, b);
    REQUIRE(pairs.size() == 6);
    CHECK(pairs.front().hour == 5);
    CHECK(pairs.back().hour == 10);
    CHECK(pairs.front().a == 5.0);
    CHECK(pairs.front().b == 100.0);

    CHECK(align(a, a).size() == a.size());
    CHECK(align(ts({1, 2, 3, 4, 5}, 0), ts({1, 2, 3, 4, 5}, 10)).empty());
    CHECK_THROWS_AS(align(a, TimeSeries(0, {1.0, 2.0}, 2)), MismatchedStep);
}

TEST_CASE("align is symmetric up to column swap") {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        const auto a = ts(testutil::random_values(rng, 1 + rng.below(20)), static_cast<Hour>(rng.below(10)));
        const auto b = ts(testutil::random_values(rng, 1 + rng.below(20)), static_cast<Hour>(rng.below(10)));
        const auto ab = align(a, b);
        const auto ba = align(b, a);
        REQUIRE(ab.size() == ba.size());
        for (std::size_t i = 0; i < ab.size(); ++i) {
            CHECK(ab[i].hour == ba[i].hour);
            CHECK(ab[i].a == ba[i].b);
            CHECK(ab[i].b == ba[i].a);
        }
    }
}

TEST_CASE("window slices, composes and validates its bounds") {
    const auto s = ts({1, 2, 3, 4, 5, 6, 7, 8}, 100);
    CHECK(window(s, 100, 107) == s);
    const auto one = window(s, 103, 103);
    CHECK(one.size() == 1);
    CHECK(one[0] == 4.0);
    CHECK(window(window(s, 101, 106), 103, 105) == window(s, 103, 105));
    CHECK_THROWS_AS(window(s, 99, 103), OutOfRange);
    CHECK_THROWS_AS(window(s, 105, 103), InvalidArgument);
    CHECK_THROWS_AS(window(TimeSeries(0, {1, 2, 3}, 2), 1, 2), InvalidArgument);
}

TEST_CASE("metric on a window equals the metric on the index slice") {
    Rng rng(11);
    const auto f = ts(testutil::random_values(rng, 30), 0);
    const auto o = ts(testutil::random_values(rng, 30), 0);
    for (int trial = 0; trial < 20; ++trial) {
        const Hour from = static_cast<Hour>(rng.below(15));
        const Hour to = from + 1 + static_cast<Hour>(rng.below(14));
        const auto fv = f.values().subspan(from, to - from + 1);
        const auto ov = o.values().subspan(from, to - from + 1);
        const double direct = mae(TimeSeries(from, {fv.begin(), fv.end()}), TimeSeries(from, {ov.begin(), ov.end()}));
        CHECK(mae(window(f, from, to), window(o, from, to)) == direct);
    }
}

TEST_CASE("number formatting round trips exactly") {
    Rng rng(5);
    for (int i = 0; i < 1000; ++i) {
        const double v = rng.uniform(-1e6, 1e6) * std::pow(10.0, rng.uniform(-10, 10));
        CHECK(parse_number(format_number(v)) == v);
    }
    CHECK_THROWS_AS(parse_number("12abc"), ParseError);
}

TEST_CASE("catalog CSV round trip is value-exact") {
    ScenarioConfig c = standard_benchmark();
    c.days = 6;
    const SourceCatalog cat = generate_catalog(c);

    std::ostringstream obs_text, fc_text;
    write_observations_csv(obs_text, cat.observations());
    write_forecasts_csv(fc_text, cat);

    std::istringstream obs_in(obs_text.str()), fc_in(fc_text.str());
    const TimeSeries obs = read_observations_csv(obs_in);
    ForecastTable table = read_forecasts_csv(fc_in);
    const SourceCatalog back(table.sources, obs, std::move(table.records));
    CHECK(back == cat);
}

TEST_CASE("CSV readers report malformed input") {
    std::istringstream bad_header("time,level\n0,1\n");
    CHECK_THROWS_AS(read_observations_csv(bad_header), ParseError);
    std::istringstream bad_number("hour,level_cm\n0,abc\n");
    CHECK_THROWS_AS(read_observations_csv(bad_number), ParseError);
    std::istringstream gap("hour,level_cm\n0,1\n1,2\n3,4\n");
    CHECK_THROWS_AS(read_observations_csv(gap), DataGap);
    std::istringstream short_row("source_id,issue_hour,lead_hour,level_cm\na,0,0\n");
    CHECK_THROWS_AS(read_forecasts_csv(short_row), ParseError);
}

TEST_CASE("catalog enforces cadence and horizon limits") {
    const TimeSeries obs = constant_series(0, 200, 100.0);
    const TimeSeries f72 = constant_series(0, 72, 100.0);
    CHECK_NOTHROW(SourceCatalog({"a"}, obs, {{"a", 0, 72, f72}}));
    CHECK_THROWS_AS(SourceCatalog({"a"}, obs, {{"a", 3, 72, constant_series(3, 72, 100.0)}}), InvalidArgument);
    CHECK_THROWS_AS(SourceCatalog({"a"}, obs, {{"a", 0, 24, constant_series(0, 24, 100.0)}}), InvalidArgument);
    CHECK_THROWS_AS(SourceCatalog({"a"}, obs, {{"b", 0, 72, f72}}), InvalidArgument);
    CHECK_THROWS_AS(SourceCatalog({"a", "a"}, obs, {}), InvalidArgument);
}

TEST_CASE("stitched series takes the most recent issue per hour") {
    const TimeSeries obs = constant_series(0, 200, 100.0);
    const SourceCatalog cat({"a"}, obs,
                            {{"a", 0, 72, constant_series(0, 72, 1.0)}, {"a", 6, 72, constant_series(6, 72, 2.0)}});
    const auto s = cat.stitched(0, 0, 12);
    REQUIRE(s);
    CHECK(s->start_hour() == 0);
    CHECK(s->size() == 12);
    CHECK((*s)[5] == 1.0);
    CHECK((*s)[6] == 2.0);
    CHECK_FALSE(cat.stitched(0, 100, 200).has_value());
    const auto at = cat.at_issue(6);
    CHECK(at.complete());
    CHECK(at.present_count() == 1);
}

}  // TEST_SUITE
