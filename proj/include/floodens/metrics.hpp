#pragma once

#include "floodens/peak_params.hpp"
#include "floodens/timeseries.hpp"

#include "json.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace floodens {

/// Default flood threshold at the city gauge (cm).
inline constexpr double kFloodThresholdCm = 160.0;
/// Peaks further apart than this in T are never paired (hours).
inline constexpr double kPeakPairingWindowHours = 12.0;

// All error metrics work on the time overlap of forecast and observations.

double mae(const TimeSeries& forecast, const TimeSeries& obs);
double rmse(const TimeSeries& forecast, const TimeSeries& obs);

/// MAE over the times where the *observed* level is strictly above threshold.
std::optional<double> wmae(const TimeSeries& forecast, const TimeSeries& obs, double threshold);

/// Population standard deviation of forecast - obs. Needs >= 2 overlap samples.
double err_stdev(const TimeSeries& forecast, const TimeSeries& obs);

/**
 * Dynamic time warping distance with |a_i - b_j| step cost, match / insert /
 * delete moves, both ends anchored and no warping window. Not normalised by
 * path length.
 */
double dtw(std::span<const double> a, std::span<const double> b);
double dtw(const TimeSeries& a, const TimeSeries& b);

/// Greedy nearest-T pairing of forecast peaks to observed peaks (|dT| <= window).
/// Returns (forecast index, observed index) pairs.
std::vector<std::pair<std::size_t, std::size_t>> pair_peaks(std::span<const PeakParams> forecast_peaks,
                                                            std::span<const PeakParams> obs_peaks,
                                                            double window_hours = kPeakPairingWindowHours);

struct PeakErrorStats {
    double h_stdev = 0.0;
    double t_stdev = 0.0;
    std::size_t pairs = 0;
};

/// Population stdev of paired H and T differences. Throws NoPairs / InsufficientPairs.
PeakErrorStats peak_param_errors(std::span<const PeakParams> forecast_peaks,
                                 std::span<const PeakParams> obs_peaks,
                                 double window_hours = kPeakPairingWindowHours);

struct MetricReport {
    double mae = 0.0;
    double rmse = 0.0;
    double dtw = 0.0;
    std::optional<double> wmae;
    double err_stdev = 0.0;
    std::optional<double> h_err;
    std::optional<double> t_err;

    friend bool operator==(const MetricReport&, const MetricReport&) = default;
};

/// Every single-series metric for one forecast; peak errors are left absent.
MetricReport score(const TimeSeries& forecast, const TimeSeries& obs, double threshold = kFloodThresholdCm);

void to_json(nlohmann::json& j, const MetricReport& r);
void from_json(const nlohmann::json& j, MetricReport& r);

}  // namespace floodens
