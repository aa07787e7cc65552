#pragma once

#include "floodens/catalog.hpp"
#include "floodens/ensemble.hpp"
#include "floodens/metrics.hpp"
#include "floodens/peak_params.hpp"
#include "floodens/timeseries.hpp"

#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace floodens {

/**
 * One PeakParams per maximal run of samples strictly above `threshold`.
 * Crossings are interpolated linearly between the straddling samples; runs
 * touching either end of the series take the boundary as crossing and are
 * marked partial. Times are hours from the series start.
 */
std::vector<PeakParams> detect_peaks(const TimeSeries& series, double threshold);

/// Index of the peak whose T is nearest `target_T` within `window_hours`.
std::optional<std::size_t> nearest_peak(std::span<const PeakParams> peaks, double target_T,
                                        double window_hours = kPeakPairingWindowHours);

/// Source peaks of one past issue together with the observed peak.
struct PeakRecord {
    std::map<std::string, PeakParams> sources;
    PeakParams observed;
};

/// Narrowest width a predicted peak may take (hours).
inline constexpr double kMinPeakWidthHours = 1.0;

/**
 * Target peak from per-parameter linear regressions of observed H, T, W and D
 * on the sources' corresponding values. Archive records lacking any of the
 * given sources are ignored; at least |sources| + 2 usable records are needed.
 * D is clamped to [0, 1] and W to kMinPeakWidthHours before T_L and T_R are
 * reconstructed.
 */
PeakParams predict_target_peak(std::span<const std::pair<std::string, PeakParams>> source_peaks,
                               std::span<const PeakRecord> archive);

/**
 * Moves the samples inside [peak.T_L, peak.T_R] by round((target_T - T) / step)
 * samples. Samples the segment leaves behind are filled by linear
 * interpolation between their untouched neighbours. Throws ShiftOutOfRange
 * if the moved segment would leave the series.
 */
TimeSeries shift_peak(const TimeSeries& series, const PeakParams& peak, double target_T);

/**
 * Shifts each member's peak nearest the target to target T, evaluates the
 * spec on the shifted members and rescales the combined excursion around
 * target T so that its maximum equals target H:
 * y = thr + (x - thr) * (H - thr) / (max - thr), which leaves the crossings
 * in place. Throws NoPeakInSource / NoCombinedPeak.
 */
TimeSeries transform_ensemble(const IssueForecasts& forecasts, const EnsembleSpec& spec, const PeakParams& target,
                              double threshold, const FormRegistry* registry = nullptr);

}  // namespace floodens
