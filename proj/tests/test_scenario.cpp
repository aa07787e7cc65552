#include "doctest.h"

#include "floodens/anomaly.hpp"
#include "floodens/errors.hpp"
#include "floodens/metrics.hpp"
#include "floodens/peaks.hpp"
#include "floodens/scenario.hpp"
#include "test_util.hpp"

#include <cmath>

using namespace floodens;

namespace {

SourceCorruption source(const std::string& id, double bias = 0.0, int lag = 0) {
    SourceCorruption s;
    s.id = id;
    s.bias_cm = bias;
    s.lag_hours = lag;
    return s;
}

ScenarioConfig plain(int days = 4) {
    ScenarioConfig c;
    c.days = days;
    c.horizon_hours = 72;
    c.sources = {source("a")};
    return c;
}

/// Mean MAE of one source's forecasts against the truth over issues in [from, to).
double source_mae(const SourceCatalog& cat, const std::string& id, Hour from, Hour to) {
    const auto idx = *cat.source_index(id);
    double sum = 0.0;
    int n = 0;
    for (Hour issue : cat.issues()) {
        if (issue < from || issue >= to) {
            continue;
        }
        sum += mae(cat.forecast(idx, issue)->series, cat.observations());
        ++n;
    }
    return sum / n;
}

}  // namespace

TEST_SUITE("scenario") {

TEST_CASE("truth without oscillation or peaks is the base level") {
    const auto truth = generate_truth(plain());
    CHECK(truth.start_hour() == 0);
    CHECK(truth.size() == 96u);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        CHECK(truth[i] == 100.0);
    }
}

TEST_CASE("a single peak event tops out at base plus height") {
    ScenarioConfig c = plain();
    c.peak_schedule = {{48.0, 120.0, 6.0, 0.5}};
    const auto truth = generate_truth(c);
    CHECK(truth[48] == doctest::Approx(220.0));
    const auto peaks = detect_peaks(truth, 160.0);
    REQUIRE(peaks.size() == 1);
    CHECK(peaks[0].T == 48.0);
    CHECK(peaks[0].D == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("generation is deterministic in the seed") {
    const auto c = testutil::small_scenario(3);
    CHECK(generate_catalog(c) == generate_catalog(c));
    auto other = c;
    other.seed = 8;
    CHECK_FALSE(generate_catalog(other) == generate_catalog(c));
}

TEST_CASE("sources draw independent noise streams") {
    // changing one source leaves the others' forecasts unchanged
    const auto c = testutil::small_scenario(3);
    auto changed = c;
    changed.sources[2].noise_sigma_cm = 9.0;
    changed.sources[2].bias_cm = 4.0;
    const auto a = generate_catalog(c);
    const auto b = generate_catalog(changed);
    for (Hour issue : a.issues()) {
        CHECK(a.forecast(0, issue)->series == b.forecast(0, issue)->series);
        CHECK(a.forecast(1, issue)->series == b.forecast(1, issue)->series);
    }
}

TEST_CASE("an uncorrupted source reproduces the truth") {
    ScenarioConfig c = testutil::small_scenario(1);
    c.sources[0] = source("clean");
    const auto cat = generate_catalog(c);
    for (Hour issue : cat.issues()) {
        CHECK(mae(cat.forecast(0, issue)->series, cat.observations()) <= 1e-12);
    }
}

TEST_CASE("bias shifts every sample and lag delays the signal") {
    ScenarioConfig c = testutil::small_scenario(1);
    c.sources = {source("biased", 5.0), source("late", 0.0, 3)};
    const auto cat = generate_catalog(c);
    const auto& obs = cat.observations();
    for (Hour issue : cat.issues()) {
        const auto& b = cat.forecast(0, issue)->series;
        const auto& l = cat.forecast(1, issue)->series;
        CHECK(mae(b, obs) == doctest::Approx(5.0));
        for (std::size_t i = 0; i < l.size(); ++i) {
            const Hour t = l.start_hour() + static_cast<Hour>(i);
            CHECK(l[i] == doctest::Approx(*obs.value_at(std::max<Hour>(t - 3, 0))));
        }
    }
}

TEST_CASE("degradation raises a source's error from the given issue on") {
    ScenarioConfig c = testutil::small_scenario(1);
    c.sources[0].degrade_after_hour = 120;
    c.sources[0].degraded_sigma_cm = 20.0;
    const auto cat = generate_catalog(c);
    const double before = source_mae(cat, "s0", 0, 120);
    const double after = source_mae(cat, "s0", 120, 1000);
    CHECK(after > 4.0 * before);
}

TEST_CASE("standard benchmark shape") {
    const ScenarioConfig c = standard_benchmark();
    CHECK(config_hash(c) == config_hash(standard_benchmark()));
    CHECK(config_hash(c).size() == 16u);
    auto reseeded = c;
    reseeded.seed = 43;
    CHECK(config_hash(reseeded) != config_hash(c));

    const auto cat = generate_catalog(c);
    CHECK(cat.sources() == std::vector<std::string>{"unbiased", "biased", "lagging"});
    CHECK(detect_peaks(cat.observations(), kFloodThresholdCm).size() == 2);
    CHECK(cat.issues().size() == (30u * 24 - 72) / 6 + 1);
}

TEST_CASE("the standard benchmark's degraded source is what the anomaly screen flags") {
    const ScenarioConfig c = standard_benchmark();
    const Hour degrade = *c.sources[2].degrade_after_hour;
    const auto cat = generate_catalog(c);
    const std::size_t per_issue = static_cast<std::size_t>(c.horizon_hours / AnomalyOptions{}.window_hours);
    std::size_t hit = 0, after = 0, false_flags = 0, windows = 0;
    for (Hour issue : cat.issues()) {
        for (const auto& v : detect_anomalies(cat.at_issue(issue))) {
            const std::size_t flagged = v.flagged_hours.size();
            if (v.source_id == "lagging" && issue >= degrade) {
                hit += flagged;
                after += per_issue;
            } else {
                false_flags += flagged;
                windows += per_issue;
            }
        }
    }
    CHECK(static_cast<double>(hit) / static_cast<double>(after) >= 0.8);
    CHECK(static_cast<double>(false_flags) / static_cast<double>(windows) <= 0.05);
}

TEST_CASE("scenario JSON round trip and validation") {
    const ScenarioConfig c = standard_benchmark();
    const nlohmann::json j = c;
    CHECK(j.get<ScenarioConfig>() == c);
    CHECK(config_hash(j.get<ScenarioConfig>()) == config_hash(c));

    auto unknown = j;
    unknown["colour"] = "blue";
    CHECK_THROWS_AS(unknown.get<ScenarioConfig>(), InvalidArgument);
    auto negative = j;
    negative["peak_schedule"][0]["width_hours"] = -1.0;
    CHECK_THROWS_AS(negative.get<ScenarioConfig>(), InvalidArgument);
    auto corr = j;
    corr["noise_corr"] = 1.0;
    CHECK_THROWS_AS(corr.get<ScenarioConfig>(), InvalidArgument);

    ScenarioConfig dup = c;
    dup.sources[1].id = dup.sources[0].id;
    CHECK_THROWS_AS(validate(dup), InvalidArgument);
    ScenarioConfig none = c;
    none.sources.clear();
    CHECK_THROWS_AS(validate(none), InvalidArgument);
}

}  // TEST_SUITE
