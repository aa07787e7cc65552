#pragma once

#include "floodens/catalog.hpp"
#include "floodens/timeseries.hpp"

#include "json.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace floodens {

/// Surge event added to the baseline: Gaussian flanks with left sigma
/// width * D and right sigma width * (1 - D), peaking at center_hour.
struct PeakEvent {
    double center_hour = 0.0;
    double height_cm = 0.0;
    double width_hours = 1.0;
    double asymmetry = 0.5;

    friend bool operator==(const PeakEvent&, const PeakEvent&) = default;
};

/**
 * How one synthetic source distorts the truth:
 * forecast(t) = gain * truth(t - lag) + bias + noise(t), so a positive lag
 * makes the source late. From issues at or after degrade_after_hour the
 * noise sigma becomes degraded_sigma_cm and its lag-one correlation
 * degraded_corr: a broken source is erratic rather than merely offset.
 */
struct SourceCorruption {
    std::string id;
    double bias_cm = 0.0;
    double gain = 1.0;
    int lag_hours = 0;
    double noise_sigma_cm = 0.0;
    std::optional<Hour> degrade_after_hour;
    double degraded_sigma_cm = 0.0;
    double degraded_corr = 0.0;

    friend bool operator==(const SourceCorruption&, const SourceCorruption&) = default;
};

struct ScenarioConfig {
    std::uint64_t seed = 42;
    int days = 30;
    int horizon_hours = 72;
    double base_level_cm = 100.0;
    /// Amplitude of the seeded semi-diurnal oscillation (cm).
    double oscillation_cm = 0.0;
    /// Lag-one autocorrelation of each forecast's noise along its leads.
    double noise_corr = 0.0;
    std::vector<PeakEvent> peak_schedule;
    std::vector<SourceCorruption> sources;

    std::size_t n_sources() const { return sources.size(); }
    Hour length_hours() const { return static_cast<Hour>(days) * 24; }

    friend bool operator==(const ScenarioConfig&, const ScenarioConfig&) = default;
};

/// Throws InvalidArgument describing the first broken constraint.
void validate(const ScenarioConfig& config);

void to_json(nlohmann::json& j, const ScenarioConfig& c);
/// Parses and validates; unknown keys are rejected.
void from_json(const nlohmann::json& j, ScenarioConfig& c);

/// Stable 16-hex-digit FNV-1a hash of the canonical JSON form.
std::string config_hash(const ScenarioConfig& config);

/// Hourly truth over [0, days * 24).
TimeSeries generate_truth(const ScenarioConfig& config);

/**
 * Forecasts of every source at every 6-hourly issue whose horizon fits in the
 * truth, plus the truth as observations. Lookups before the start of the
 * truth use its first value. Each (source, issue) pair draws its noise from
 * its own stream derived from the seed, so the sources are independent of
 * one another's settings.
 */
SourceCatalog generate_source_forecasts(const ScenarioConfig& config, const TimeSeries& truth);

/// Truth and forecasts in one call.
SourceCatalog generate_catalog(const ScenarioConfig& config);

/**
 * Thirty days, two flood peaks and three sources: `unbiased` (noisy),
 * `biased` (offset) and `lagging` (an hour late, then erratic with 30 cm
 * white noise from day 20). Forecast noise is strongly persistent along the
 * leads, so an error seen at the start of a forecast tends to stay.
 */
ScenarioConfig standard_benchmark();

}  // namespace floodens
