#pragma once

#include "floodens/catalog.hpp"
#include "floodens/timeseries.hpp"

#include <map>
#include <string>
#include <vector>

namespace floodens {

struct AnomalyOptions {
    int window_hours = 12;
    /// Outlier multiplier on the robust scale.
    double k = 3.0;
    /// Lower bound of the robust scale (cm); keeps a zero MAD from flagging
    /// sources that differ by rounding-level amounts.
    double min_scale_cm = 1.0;
};

/// Windows (identified by their first hour) in which a source lies far from the others.
struct AnomalyVerdict {
    std::string source_id;
    std::vector<Hour> flagged_hours;
    /// Robust z-score (score - median) / scale per flagged window.
    std::vector<double> scores;
};

/**
 * Robust outlier screen over consecutive windows of the sources' common
 * overlap. Per window each source scores the median of its mean absolute
 * distances to every other source; a source is flagged when its score
 * exceeds median(scores) + k * max(MAD(scores), min_scale_cm).
 * Returns one verdict per source (in map order). Needs >= 3 sources.
 */
std::vector<AnomalyVerdict> detect_anomalies(const std::map<std::string, TimeSeries>& forecasts,
                                             const AnomalyOptions& options = {});

/// Same screen over the present sources of one issue, verdicts in catalog order.
std::vector<AnomalyVerdict> detect_anomalies(const IssueForecasts& forecasts, const AnomalyOptions& options = {});

/// Number of windows the screen evaluates on the given forecasts.
std::size_t anomaly_window_count(const std::map<std::string, TimeSeries>& forecasts, int window_hours);

}  // namespace floodens
