#include "floodens/anomaly.hpp"

#include "floodens/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace floodens {

namespace {

double median(std::vector<double> v) {
    const std::size_t n = v.size();
    std::sort(v.begin(), v.end());
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct Overlap {
    Hour from;
    Hour to;
    int step;
};

Overlap common_overlap(const std::map<std::string, TimeSeries>& forecasts) {
    const auto& first = forecasts.begin()->second;
    Overlap o{first.start_hour(), first.end_hour(), first.step_hours()};
    for (const auto& [id, s] : forecasts) {
        if (s.step_hours() != o.step || (s.start_hour() - first.start_hour()) % o.step != 0) {
            throw MismatchedStep("source '" + id + "' is not on the common grid");
        }
        o.from = std::max(o.from, s.start_hour());
        o.to = std::min(o.to, s.end_hour());
    }
    if (o.from > o.to) {
        throw EmptyOverlap("sources do not overlap");
    }
    return o;
}

}  // namespace

std::size_t anomaly_window_count(const std::map<std::string, TimeSeries>& forecasts, int window_hours) {
    if (forecasts.empty()) {
        return 0;
    }
    const Overlap o = common_overlap(forecasts);
    const Hour span = o.to - o.from + o.step;
    return static_cast<std::size_t>((span + window_hours - 1) / window_hours);
}

std::vector<AnomalyVerdict> detect_anomalies(const std::map<std::string, TimeSeries>& forecasts,
                                             const AnomalyOptions& options) {
    if (forecasts.size() < 3) {
        throw TooFewSources("anomaly detection needs at least 3 sources, got " + std::to_string(forecasts.size()));
    }
    if (options.window_hours < 1 || options.k < 0.0 || options.min_scale_cm < 0.0) {
        throw InvalidArgument("invalid anomaly options");
    }
    const Overlap o = common_overlap(forecasts);
    const std::size_t n = forecasts.size();

    std::vector<std::string> ids;
    std::vector<std::vector<double>> vals;
    for (const auto& [id, s] : forecasts) {
        ids.push_back(id);
        const TimeSeries cut = window(s, o.from, o.to);
        auto w = cut.values();
        vals.emplace_back(w.begin(), w.end());
    }
    const std::size_t len = vals.front().size();
    const auto per_window = static_cast<std::size_t>(std::max(1, options.window_hours / o.step));

    std::vector<AnomalyVerdict> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i].source_id = ids[i];
    }

    std::vector<std::vector<double>> dist(n, std::vector<double>(n, 0.0));
    for (std::size_t begin = 0; begin < len; begin += per_window) {
        const std::size_t end = std::min(len, begin + per_window);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                double sum = 0.0;
                for (std::size_t t = begin; t < end; ++t) {
                    sum += std::abs(vals[i][t] - vals[j][t]);
                }
                dist[i][j] = dist[j][i] = sum / static_cast<double>(end - begin);
            }
        }
        std::vector<double> scores(n);
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> others;
            for (std::size_t j = 0; j < n; ++j) {
                if (j != i) {
                    others.push_back(dist[i][j]);
                }
            }
            scores[i] = median(std::move(others));
        }
        const double med = median(scores);
        std::vector<double> dev(n);
        for (std::size_t i = 0; i < n; ++i) {
            dev[i] = std::abs(scores[i] - med);
        }
        const double scale = std::max(median(dev), options.min_scale_cm);
        if (!std::isfinite(options.k)) {
            continue;
        }
        const Hour window_hour = o.from + static_cast<Hour>(begin) * o.step;
        for (std::size_t i = 0; i < n; ++i) {
            if (scale > 0.0 && scores[i] > med + options.k * scale) {
                out[i].flagged_hours.push_back(window_hour);
                out[i].scores.push_back((scores[i] - med) / scale);
            } else if (scale == 0.0 && scores[i] > med) {
                // zero floor and zero MAD: any excess is infinitely far out
                out[i].flagged_hours.push_back(window_hour);
                out[i].scores.push_back(std::numeric_limits<double>::max());
            }
        }
    }
    return out;
}

std::vector<AnomalyVerdict> detect_anomalies(const IssueForecasts& forecasts, const AnomalyOptions& options) {
    std::map<std::string, TimeSeries> present;
    for (std::size_t i = 0; i < forecasts.series.size(); ++i) {
        if (forecasts.series[i]) {
            present.emplace(forecasts.source_ids[i], *forecasts.series[i]);
        }
    }
    auto verdicts = detect_anomalies(present, options);
    std::vector<AnomalyVerdict> ordered;
    for (const auto& id : forecasts.source_ids) {
        for (auto& v : verdicts) {
            if (v.source_id == id) {
                ordered.push_back(std::move(v));
            }
        }
    }
    return ordered;
}

}  // namespace floodens
