#include "floodens/peaks.hpp"

#include "floodens/errors.hpp"
#include "floodens/lstsq.hpp"

#include <algorithm>
#include <cmath>

namespace floodens {

std::vector<PeakParams> detect_peaks(const TimeSeries& series, double threshold) {
    const auto v = series.values();
    const std::size_t n = v.size();
    const double step = series.step_hours();
    std::vector<PeakParams> peaks;
    std::size_t i = 0;
    while (i < n) {
        if (!(v[i] > threshold)) {
            ++i;
            continue;
        }
        const std::size_t first = i;
        while (i < n && v[i] > threshold) {
            ++i;
        }
        const std::size_t last = i - 1;

        PeakParams p;
        std::size_t top = first;
        for (std::size_t j = first; j <= last; ++j) {
            if (v[j] > v[top]) {
                top = j;
            }
        }
        p.H = v[top];
        p.T = static_cast<double>(top) * step;
        if (first == 0) {
            p.T_L = 0.0;
            p.partial = true;
        } else {
            const double frac = (threshold - v[first - 1]) / (v[first] - v[first - 1]);
            p.T_L = (static_cast<double>(first - 1) + frac) * step;
        }
        if (last == n - 1) {
            p.T_R = static_cast<double>(last) * step;
            p.partial = true;
        } else {
            const double frac = (v[last] - threshold) / (v[last] - v[last + 1]);
            p.T_R = (static_cast<double>(last) + frac) * step;
        }
        p.W = p.T_R - p.T_L;
        if (p.W <= 0.0) {
            continue;  // a lone sample in a one-sample series has no extent
        }
        p.D = std::clamp((p.T - p.T_L) / p.W, 0.0, 1.0);
        peaks.push_back(p);
    }
    return peaks;
}

std::optional<std::size_t> nearest_peak(std::span<const PeakParams> peaks, double target_T, double window_hours) {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < peaks.size(); ++i) {
        const double dt = std::abs(peaks[i].T - target_T);
        if (dt <= window_hours && (!best || dt < std::abs(peaks[*best].T - target_T))) {
            best = i;
        }
    }
    return best;
}

PeakParams predict_target_peak(std::span<const std::pair<std::string, PeakParams>> source_peaks,
                               std::span<const PeakRecord> archive) {
    if (source_peaks.empty()) {
        throw MissingSourcePeak("no source peaks given");
    }
    std::vector<const PeakRecord*> usable;
    for (const auto& rec : archive) {
        const bool has_all = std::all_of(source_peaks.begin(), source_peaks.end(),
                                         [&](const auto& sp) { return rec.sources.contains(sp.first); });
        if (has_all) {
            usable.push_back(&rec);
        }
    }
    const std::size_t k = source_peaks.size();
    if (usable.size() < k + 2) {
        throw InsufficientArchive("peak regression needs " + std::to_string(k + 2) + " archived peaks, got " +
                                  std::to_string(usable.size()));
    }

    auto regress = [&](double PeakParams::*field) {
        std::vector<std::vector<double>> cols(k);
        std::vector<double> y;
        for (const PeakRecord* rec : usable) {
            for (std::size_t s = 0; s < k; ++s) {
                cols[s].push_back(rec->sources.at(source_peaks[s].first).*field);
            }
            y.push_back(rec->observed.*field);
        }
        const AffineFit fit = fit_affine(cols, y);
        double out = fit.intercept;
        for (std::size_t s = 0; s < k; ++s) {
            out += fit.coefficients[s] * (source_peaks[s].second.*field);
        }
        return out;
    };

    PeakParams p;
    p.H = regress(&PeakParams::H);
    p.T = regress(&PeakParams::T);
    p.W = std::max(regress(&PeakParams::W), kMinPeakWidthHours);
    p.D = std::clamp(regress(&PeakParams::D), 0.0, 1.0);
    p.T_L = p.T - p.D * p.W;
    p.T_R = p.T_L + p.W;
    return p;
}

TimeSeries shift_peak(const TimeSeries& series, const PeakParams& peak, double target_T) {
    const double step = series.step_hours();
    const auto n = static_cast<std::int64_t>(series.size());
    const auto shift = static_cast<std::int64_t>(std::llround((target_T - peak.T) / step));
    if (shift == 0) {
        return series;
    }
    const auto a = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::ceil(peak.T_L / step - 1e-9)));
    const auto b = std::min<std::int64_t>(n - 1, static_cast<std::int64_t>(std::floor(peak.T_R / step + 1e-9)));
    if (a > b) {
        throw InvalidArgument("peak segment holds no samples");
    }
    if (a + shift < 0 || b + shift > n - 1) {
        throw ShiftOutOfRange("shifting the peak by " + std::to_string(shift) + " samples leaves the series");
    }

    const auto v = series.values();
    std::vector<double> out(v.begin(), v.end());
    std::vector<bool> vacated(static_cast<std::size_t>(n), false);
    for (auto i = a; i <= b; ++i) {
        vacated[static_cast<std::size_t>(i)] = true;
    }
    for (auto i = a; i <= b; ++i) {
        out[static_cast<std::size_t>(i + shift)] = v[static_cast<std::size_t>(i)];
        vacated[static_cast<std::size_t>(i + shift)] = false;
    }

    std::int64_t i = 0;
    while (i < n) {
        if (!vacated[static_cast<std::size_t>(i)]) {
            ++i;
            continue;
        }
        const std::int64_t lo = i - 1;
        while (i < n && vacated[static_cast<std::size_t>(i)]) {
            ++i;
        }
        const std::int64_t hi = i;
        for (auto j = lo + 1; j < hi; ++j) {
            double value;
            if (lo < 0) {
                value = out[static_cast<std::size_t>(hi)];
            } else if (hi >= n) {
                value = out[static_cast<std::size_t>(lo)];
            } else {
                const double w = static_cast<double>(j - lo) / static_cast<double>(hi - lo);
                value = out[static_cast<std::size_t>(lo)] * (1.0 - w) + out[static_cast<std::size_t>(hi)] * w;
            }
            out[static_cast<std::size_t>(j)] = value;
        }
    }
    return TimeSeries(series.start_hour(), std::move(out), series.step_hours());
}

TimeSeries transform_ensemble(const IssueForecasts& forecasts, const EnsembleSpec& spec, const PeakParams& target,
                              double threshold, const FormRegistry* registry) {
    if (!(target.H > threshold)) {
        throw InvalidArgument("target peak height must exceed the threshold");
    }
    IssueForecasts shifted = forecasts;
    for (std::size_t idx : spec.member_mask.indices()) {
        if (idx >= forecasts.series.size() || !forecasts.series[idx]) {
            throw MissingMember("member " + std::to_string(idx) + " has no forecast at this issue");
        }
        const TimeSeries& s = *forecasts.series[idx];
        const auto peaks = detect_peaks(s, threshold);
        const auto match = nearest_peak(peaks, target.T);
        if (!match) {
            throw NoPeakInSource("source '" + forecasts.source_ids[idx] + "' has no peak near the target");
        }
        shifted.series[idx] = shift_peak(s, peaks[*match], target.T);
    }

    const TimeSeries combined = evaluate_spec(spec, shifted, registry);
    // the target is timed from the issue; the combined series may start later
    const double offset = static_cast<double>(combined.start_hour() - forecasts.issue_hour);
    const auto peaks = detect_peaks(combined, threshold);
    const auto match = nearest_peak(peaks, target.T - offset);
    if (!match) {
        throw NoCombinedPeak("combined forecast has no peak near the target");
    }
    const PeakParams& p = peaks[*match];
    const double gain = (target.H - threshold) / (p.H - threshold);

    const auto v = combined.values();
    std::vector<double> out(v.begin(), v.end());
    const double step = combined.step_hours();
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double t = static_cast<double>(i) * step;
        if (t >= p.T_L && t <= p.T_R && out[i] > threshold) {
            out[i] = threshold + (out[i] - threshold) * gain;
        }
    }
    return TimeSeries(combined.start_hour(), std::move(out), combined.step_hours());
}

}  // namespace floodens
