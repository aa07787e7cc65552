#include "doctest.h"

#include "floodens/ensemble.hpp"
#include "floodens/errors.hpp"
#include "floodens/peaks.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

#include <algorithm>
#include <cmath>

using namespace floodens;
using testutil::ts;

namespace {

/// Triangle oracle padded with base level to 24 samples.
TimeSeries padded_triangle() {
    auto v = oracle::triangle_series();
    v.resize(24, 100.0);
    return ts(v);
}

/// Smooth bump of height h at hour c on a 100 cm base.
TimeSeries bump(std::size_t n, double c, double h, double width, Hour start = 0) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = (static_cast<double>(i) - c) / width;
        v[i] = 100.0 + h * std::exp(-0.5 * x * x);
    }
    return ts(v, start);
}

std::size_t argmax(const TimeSeries& s) {
    const auto v = s.values();
    return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

TEST_SUITE("peaks") {

TEST_CASE("triangle peak matches the analytic crossings") {
    const oracle::TrianglePeak want;
    const auto peaks = detect_peaks(ts(oracle::triangle_series()), 160.0);
    REQUIRE(peaks.size() == 1);
    const auto& p = peaks[0];
    CHECK(p.H == want.H);
    CHECK(p.T == want.T);
    CHECK(p.T_L == doctest::Approx(want.T_L).epsilon(1e-12));
    CHECK(p.T_R == doctest::Approx(want.T_R).epsilon(1e-12));
    CHECK(p.W == doctest::Approx(want.W).epsilon(1e-12));
    CHECK(p.D == doctest::Approx(want.D).epsilon(1e-12));
    CHECK_FALSE(p.partial);
}

TEST_CASE("no peak below or exactly at the threshold") {
    CHECK(detect_peaks(constant_series(0, 10, 150.0), 160.0).empty());
    CHECK(detect_peaks(ts({100, 160, 160, 160, 100}), 160.0).empty());
}

TEST_CASE("symmetric peak has D one half and boundary peaks are partial") {
    const auto sym = detect_peaks(ts({100, 150, 170, 190, 170, 150, 100}), 160.0);
    REQUIRE(sym.size() == 1);
    CHECK(sym[0].D == doctest::Approx(0.5));
    const auto edge = detect_peaks(ts({200, 180, 150}), 160.0);
    REQUIRE(edge.size() == 1);
    CHECK(edge[0].partial);
    CHECK(edge[0].T_L == 0.0);
}

TEST_CASE("peak invariants over randomized series") {
    Rng rng(59);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto v = testutil::random_values(rng, 2 + rng.below(60), 100.0, 220.0);
        const double thr = rng.uniform(120.0, 200.0);
        for (const auto& p : detect_peaks(ts(v), thr)) {
            CHECK(p.T_L <= p.T);
            CHECK(p.T <= p.T_R);
            CHECK(p.W > 0.0);
            CHECK(p.D >= 0.0);
            CHECK(p.D <= 1.0);
            CHECK(p.H > thr);
        }
    }
}

TEST_CASE("adding a constant to series and threshold only shifts H") {
    Rng rng(61);
    for (int trial = 0; trial < 100; ++trial) {
        auto v = testutil::random_values(rng, 40, 100.0, 220.0);
        const double c = rng.uniform(-50.0, 50.0);
        auto shifted = v;
        for (auto& x : shifted) {
            x += c;
        }
        const auto a = detect_peaks(ts(v), 160.0);
        const auto b = detect_peaks(ts(shifted), 160.0 + c);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(b[i].H == doctest::Approx(a[i].H + c));
            CHECK(b[i].T == a[i].T);
            CHECK(b[i].T_L == doctest::Approx(a[i].T_L));
            CHECK(b[i].T_R == doctest::Approx(a[i].T_R));
        }
    }
}

TEST_CASE("nearest peak within the pairing window") {
    const std::vector<PeakParams> peaks{{200, 10}, {210, 30}};
    CHECK(nearest_peak(peaks, 12) == 0u);
    CHECK(nearest_peak(peaks, 25) == 1u);
    CHECK_FALSE(nearest_peak(peaks, 60).has_value());
}

TEST_CASE("shift_peak on a hand-checked toy") {
    const auto s = padded_triangle();
    const auto p = detect_peaks(s, 160.0).at(0);
    CHECK(shift_peak(s, p, p.T) == s);

    const auto moved = shift_peak(s, p, p.T + 2.0);
    CHECK(argmax(moved) == argmax(s) + 2);
    // samples 5..9 hold the old segment 3..7; 3 and 4 interpolate 140 -> 160
    const std::vector<double> want{100, 120, 140, 140 + 20.0 / 3, 140 + 40.0 / 3, 160, 180, 200, 180, 160};
    for (std::size_t i = 0; i < want.size(); ++i) {
        CHECK(moved[i] == doctest::Approx(want[i]).epsilon(1e-12));
    }
    for (std::size_t i = 10; i < s.size(); ++i) {
        CHECK(moved[i] == s[i]);
    }
    CHECK_THROWS_AS(shift_peak(s, p, p.T + 30.0), ShiftOutOfRange);
    CHECK_THROWS_AS(shift_peak(s, p, p.T - 10.0), ShiftOutOfRange);
}

TEST_CASE("shifting forth and back restores the segment") {
    Rng rng(67);
    for (int trial = 0; trial < 200; ++trial) {
        const auto s = bump(60, rng.uniform(20, 40), rng.uniform(70, 120), rng.uniform(2, 6));
        const auto peaks = detect_peaks(s, 160.0);
        REQUIRE(peaks.size() == 1);
        const auto& p = peaks[0];
        const double k = static_cast<double>(static_cast<int>(rng.below(11)) - 5);
        const auto there = shift_peak(s, p, p.T + k);
        PeakParams moved = p;
        moved.T += k;
        moved.T_L += k;
        moved.T_R += k;
        const auto back = shift_peak(there, moved, p.T);
        for (auto i = static_cast<std::size_t>(std::ceil(p.T_L)); i <= static_cast<std::size_t>(std::floor(p.T_R));
             ++i) {
            CHECK(back[i] == s[i]);
        }
    }
}

TEST_CASE("target peak regression") {
    // observed H is the mean of the two sources' H; other fields follow source a
    std::vector<PeakRecord> archive;
    Rng rng(71);
    for (int i = 0; i < 8; ++i) {
        PeakParams a{rng.uniform(170, 230), rng.uniform(20, 40), 0, 0, rng.uniform(4, 12), rng.uniform(0.2, 0.8)};
        PeakParams b{rng.uniform(170, 230), rng.uniform(20, 40), 0, 0, rng.uniform(4, 12), rng.uniform(0.2, 0.8)};
        PeakParams o{0.5 * (a.H + b.H), a.T, 0, 0, a.W, a.D};
        archive.push_back({{{"a", a}, {"b", b}}, o});
    }
    const PeakParams qa{200, 30, 0, 0, 8, 0.4};
    const PeakParams qb{220, 33, 0, 0, 6, 0.7};
    const std::vector<std::pair<std::string, PeakParams>> query{{"a", qa}, {"b", qb}};
    const PeakParams t = predict_target_peak(query, archive);
    CHECK(t.H == doctest::Approx(210.0).epsilon(1e-6));
    CHECK(t.T == doctest::Approx(30.0).epsilon(1e-6));
    CHECK(t.W == doctest::Approx(8.0).epsilon(1e-6));
    CHECK(t.D == doctest::Approx(0.4).epsilon(1e-6));
    CHECK(t.T_L == doctest::Approx(t.T - t.D * t.W));
    CHECK(t.T_R == doctest::Approx(t.T_L + t.W));

    // identity relation with a single source returns that source's peak
    std::vector<PeakRecord> ident;
    for (const auto& r : archive) {
        ident.push_back({{{"a", r.sources.at("a")}}, r.sources.at("a")});
    }
    const std::vector<std::pair<std::string, PeakParams>> single{{"a", qa}};
    const PeakParams s = predict_target_peak(single, ident);
    CHECK(s.H == doctest::Approx(qa.H));
    CHECK(s.T == doctest::Approx(qa.T));

    CHECK_THROWS_AS(predict_target_peak(query, std::span(archive).first(3)), InsufficientArchive);
}

TEST_CASE("transform hits the target height and time") {
    IssueForecasts f;
    f.issue_hour = 0;
    f.source_ids = {"a", "b"};
    f.series = {bump(72, 30, 80, 4), bump(72, 34, 70, 5)};
    const EnsembleSpec mean{MemberMask::full(2), forms::kLinear, {0.5, 0.5}, 0.0};

    PeakParams target;
    target.H = 200.0;
    target.T = 32.0;
    const auto out = transform_ensemble(f, mean, target, 160.0);
    const auto peaks = detect_peaks(out, 160.0);
    REQUIRE(peaks.size() == 1);
    CHECK(std::abs(peaks[0].H - 200.0) <= 1e-9);
    CHECK(peaks[0].T == 32.0);

    // already aligned at the target with the right height: a fixed point
    IssueForecasts aligned = f;
    aligned.series = {bump(72, 32, 80, 4), bump(72, 32, 80, 4)};
    PeakParams exact;
    exact.H = 180.0;
    exact.T = 32.0;
    const auto same = transform_ensemble(aligned, mean, exact, 160.0);
    const auto plain = evaluate_spec(mean, aligned);
    for (std::size_t i = 0; i < same.size(); ++i) {
        CHECK(same[i] == doctest::Approx(plain[i]).epsilon(1e-12));
    }

    PeakParams low = target;
    low.H = 150.0;
    CHECK_THROWS_AS(transform_ensemble(f, mean, low, 160.0), InvalidArgument);
    IssueForecasts flat = f;
    flat.series[1] = constant_series(0, 72, 100.0);
    CHECK_THROWS_AS(transform_ensemble(flat, mean, target, 160.0), NoPeakInSource);
}

}  // TEST_SUITE
