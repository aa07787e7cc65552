#include "floodens/metrics.hpp"

#include "floodens/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

namespace floodens {

void to_json(nlohmann::json& j, const PeakParams& p) {
    j = nlohmann::json{{"H", p.H}, {"T", p.T}, {"T_L", p.T_L}, {"T_R", p.T_R},
                       {"W", p.W}, {"D", p.D}, {"partial", p.partial}};
}

void from_json(const nlohmann::json& j, PeakParams& p) {
    j.at("H").get_to(p.H);
    j.at("T").get_to(p.T);
    j.at("T_L").get_to(p.T_L);
    j.at("T_R").get_to(p.T_R);
    j.at("W").get_to(p.W);
    j.at("D").get_to(p.D);
    p.partial = j.value("partial", false);
}

namespace {

std::vector<AlignedPair> overlap_or_throw(const TimeSeries& f, const TimeSeries& o) {
    auto pairs = align(f, o);
    if (pairs.empty()) {
        throw EmptyOverlap("forecast and observations do not overlap");
    }
    return pairs;
}

}  // namespace

double mae(const TimeSeries& forecast, const TimeSeries& obs) {
    const auto pairs = overlap_or_throw(forecast, obs);
    double sum = 0.0;
    for (const auto& p : pairs) {
        sum += std::abs(p.a - p.b);
    }
    return sum / static_cast<double>(pairs.size());
}

double rmse(const TimeSeries& forecast, const TimeSeries& obs) {
    const auto pairs = overlap_or_throw(forecast, obs);
    double sum = 0.0;
    for (const auto& p : pairs) {
        sum += (p.a - p.b) * (p.a - p.b);
    }
    return std::sqrt(sum / static_cast<double>(pairs.size()));
}

std::optional<double> wmae(const TimeSeries& forecast, const TimeSeries& obs, double threshold) {
    const auto pairs = overlap_or_throw(forecast, obs);
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& p : pairs) {
        if (p.b > threshold) {
            sum += std::abs(p.a - p.b);
            ++n;
        }
    }
    if (n == 0) {
        return std::nullopt;
    }
    return sum / static_cast<double>(n);
}

double err_stdev(const TimeSeries& forecast, const TimeSeries& obs) {
    const auto pairs = align(forecast, obs);
    if (pairs.size() < 2) {
        throw InsufficientOverlap("error stdev needs at least 2 overlapping samples");
    }
    double mean = 0.0;
    for (const auto& p : pairs) {
        mean += p.a - p.b;
    }
    mean /= static_cast<double>(pairs.size());
    double var = 0.0;
    for (const auto& p : pairs) {
        const double d = (p.a - p.b) - mean;
        var += d * d;
    }
    return std::sqrt(var / static_cast<double>(pairs.size()));
}

double dtw(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) {
        throw EmptySeries("DTW of an empty series");
    }
    const std::size_t n = a.size();
    const std::size_t m = b.size();
    constexpr double inf = std::numeric_limits<double>::infinity();
    // Two rolling rows of the (n+1) x (m+1) cost table.
    std::vector<double> prev(m + 1, inf);
    std::vector<double> cur(m + 1, inf);
    prev[0] = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
        cur[0] = inf;
        for (std::size_t j = 1; j <= m; ++j) {
            const double cost = std::abs(a[i - 1] - b[j - 1]);
            cur[j] = cost + std::min({prev[j - 1], prev[j], cur[j - 1]});
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

double dtw(const TimeSeries& a, const TimeSeries& b) {
    return dtw(a.values(), b.values());
}

std::vector<std::pair<std::size_t, std::size_t>> pair_peaks(std::span<const PeakParams> forecast_peaks,
                                                            std::span<const PeakParams> obs_peaks,
                                                            double window_hours) {
    std::vector<std::tuple<double, std::size_t, std::size_t>> cand;
    for (std::size_t i = 0; i < forecast_peaks.size(); ++i) {
        for (std::size_t j = 0; j < obs_peaks.size(); ++j) {
            const double dt = std::abs(forecast_peaks[i].T - obs_peaks[j].T);
            if (dt <= window_hours) {
                cand.emplace_back(dt, i, j);
            }
        }
    }
    std::sort(cand.begin(), cand.end());
    std::vector<bool> used_f(forecast_peaks.size(), false);
    std::vector<bool> used_o(obs_peaks.size(), false);
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (const auto& [dt, i, j] : cand) {
        if (!used_f[i] && !used_o[j]) {
            used_f[i] = used_o[j] = true;
            out.emplace_back(i, j);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

PeakErrorStats peak_param_errors(std::span<const PeakParams> forecast_peaks,
                                 std::span<const PeakParams> obs_peaks, double window_hours) {
    const auto pairs = pair_peaks(forecast_peaks, obs_peaks, window_hours);
    if (pairs.empty()) {
        throw NoPairs("no forecast peak lies within the pairing window of an observed peak");
    }
    if (pairs.size() < 2) {
        throw InsufficientPairs("peak error stdev needs at least 2 paired peaks");
    }
    auto pop_stdev = [&](auto diff) {
        double mean = 0.0;
        for (const auto& [i, j] : pairs) {
            mean += diff(i, j);
        }
        mean /= static_cast<double>(pairs.size());
        double var = 0.0;
        for (const auto& [i, j] : pairs) {
            const double d = diff(i, j) - mean;
            var += d * d;
        }
        return std::sqrt(var / static_cast<double>(pairs.size()));
    };
    PeakErrorStats stats;
    stats.pairs = pairs.size();
    stats.h_stdev = pop_stdev([&](std::size_t i, std::size_t j) { return forecast_peaks[i].H - obs_peaks[j].H; });
    stats.t_stdev = pop_stdev([&](std::size_t i, std::size_t j) { return forecast_peaks[i].T - obs_peaks[j].T; });
    return stats;
}

MetricReport score(const TimeSeries& forecast, const TimeSeries& obs, double threshold) {
    MetricReport r;
    r.mae = mae(forecast, obs);
    r.rmse = rmse(forecast, obs);
    r.dtw = dtw(forecast, obs);
    r.wmae = wmae(forecast, obs, threshold);
    r.err_stdev = err_stdev(forecast, obs);
    return r;
}

void to_json(nlohmann::json& j, const MetricReport& r) {
    j = nlohmann::json{{"mae", r.mae}, {"rmse", r.rmse}, {"dtw", r.dtw}, {"err_stdev", r.err_stdev}};
    if (r.wmae) {
        j["wmae"] = *r.wmae;
    }
    if (r.h_err) {
        j["h_err"] = *r.h_err;
    }
    if (r.t_err) {
        j["t_err"] = *r.t_err;
    }
}

void from_json(const nlohmann::json& j, MetricReport& r) {
    j.at("mae").get_to(r.mae);
    j.at("rmse").get_to(r.rmse);
    j.at("dtw").get_to(r.dtw);
    j.at("err_stdev").get_to(r.err_stdev);
    auto opt = [&](const char* key) -> std::optional<double> {
        if (j.contains(key)) {
            return j.at(key).get<double>();
        }
        return std::nullopt;
    };
    r.wmae = opt("wmae");
    r.h_err = opt("h_err");
    r.t_err = opt("t_err");
}

}  // namespace floodens
