#include "floodens/scenario.hpp"

#include "floodens/errors.hpp"
#include "floodens/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <set>

namespace floodens {

namespace {

constexpr double kOscillationPeriodHours = 12.42;
constexpr double kMinFlankSigma = 0.5;

void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> keys, const char* what) {
    if (!j.is_object()) {
        throw InvalidArgument(std::string(what) + " must be a JSON object");
    }
    for (const auto& [key, _] : j.items()) {
        if (std::find_if(keys.begin(), keys.end(), [&](const char* k) { return key == k; }) == keys.end()) {
            throw InvalidArgument("unknown " + std::string(what) + " key '" + key + "'");
        }
    }
}

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    return splitmix(splitmix(splitmix(seed) ^ a) ^ (b * 0x2545f4914f6cdd1dULL));
}

double peak_shape(const PeakEvent& p, double t) {
    const double dt = t - p.center_hour;
    const double sigma = std::max(kMinFlankSigma, p.width_hours * (dt < 0 ? p.asymmetry : 1.0 - p.asymmetry));
    return p.height_cm * std::exp(-0.5 * (dt / sigma) * (dt / sigma));
}

}  // namespace

void validate(const ScenarioConfig& c) {
    if (c.days < 1) {
        throw InvalidArgument("days must be >= 1");
    }
    const CatalogLimits limits;
    if (c.horizon_hours < limits.min_horizon_hours || c.horizon_hours > limits.max_horizon_hours) {
        throw InvalidArgument("horizon_hours must lie in [" + std::to_string(limits.min_horizon_hours) + ", " +
                              std::to_string(limits.max_horizon_hours) + "]");
    }
    if (c.horizon_hours > c.length_hours()) {
        throw InvalidArgument("horizon_hours exceeds the scenario length");
    }
    if (!std::isfinite(c.base_level_cm) || !std::isfinite(c.oscillation_cm) || c.oscillation_cm < 0.0) {
        throw InvalidArgument("base level must be finite and oscillation >= 0");
    }
    if (!(c.noise_corr >= 0.0 && c.noise_corr < 1.0)) {
        throw InvalidArgument("noise_corr must lie in [0, 1)");
    }
    for (const auto& p : c.peak_schedule) {
        if (!(p.width_hours > 0.0) || !std::isfinite(p.width_hours)) {
            throw InvalidArgument("peak widths must be > 0");
        }
        if (!(p.asymmetry >= 0.0 && p.asymmetry <= 1.0)) {
            throw InvalidArgument("peak asymmetry must lie in [0, 1]");
        }
        if (!std::isfinite(p.center_hour) || !std::isfinite(p.height_cm)) {
            throw InvalidArgument("peak center and height must be finite");
        }
    }
    if (c.sources.empty()) {
        throw InvalidArgument("at least one source is required");
    }
    std::set<std::string> ids;
    for (const auto& s : c.sources) {
        if (s.id.empty() || s.id.find_first_of(",\"\n\r") != std::string::npos) {
            throw InvalidArgument("source ids must be non-empty and free of commas, quotes and newlines");
        }
        if (!ids.insert(s.id).second) {
            throw InvalidArgument("duplicate source id '" + s.id + "'");
        }
        if (!(s.noise_sigma_cm >= 0.0) || !(s.degraded_sigma_cm >= 0.0)) {
            throw InvalidArgument("source '" + s.id + "' has a negative sigma");
        }
        if (!std::isfinite(s.bias_cm) || !std::isfinite(s.gain) || !std::isfinite(s.noise_sigma_cm) ||
            !std::isfinite(s.degraded_sigma_cm)) {
            throw InvalidArgument("source '" + s.id + "' has a non-finite parameter");
        }
        if (!(s.degraded_corr >= 0.0 && s.degraded_corr < 1.0)) {
            throw InvalidArgument("source '" + s.id + "' degraded_corr must lie in [0, 1)");
        }
    }
}

void to_json(nlohmann::json& j, const ScenarioConfig& c) {
    nlohmann::json peaks = nlohmann::json::array();
    for (const auto& p : c.peak_schedule) {
        peaks.push_back({{"center_hour", p.center_hour},
                         {"height_cm", p.height_cm},
                         {"width_hours", p.width_hours},
                         {"asymmetry", p.asymmetry}});
    }
    nlohmann::json sources = nlohmann::json::array();
    for (const auto& s : c.sources) {
        nlohmann::json js{{"id", s.id},
                          {"bias_cm", s.bias_cm},
                          {"gain", s.gain},
                          {"lag_hours", s.lag_hours},
                          {"noise_sigma_cm", s.noise_sigma_cm}};
        if (s.degrade_after_hour) {
            js["degrade_after_hour"] = *s.degrade_after_hour;
            js["degraded_sigma_cm"] = s.degraded_sigma_cm;
            js["degraded_corr"] = s.degraded_corr;
        }
        sources.push_back(std::move(js));
    }
    j = nlohmann::json{{"seed", c.seed},
                       {"days", c.days},
                       {"horizon_hours", c.horizon_hours},
                       {"base_level_cm", c.base_level_cm},
                       {"oscillation_cm", c.oscillation_cm},
                       {"noise_corr", c.noise_corr},
                       {"peak_schedule", std::move(peaks)},
                       {"sources", std::move(sources)}};
}

void from_json(const nlohmann::json& j, ScenarioConfig& c) {
    reject_unknown(j,
                   {"seed", "days", "horizon_hours", "base_level_cm", "oscillation_cm", "noise_corr",
                    "peak_schedule", "sources"},
                   "scenario");
    ScenarioConfig out;
    out.seed = j.value("seed", out.seed);
    out.days = j.value("days", out.days);
    out.horizon_hours = j.value("horizon_hours", out.horizon_hours);
    out.base_level_cm = j.value("base_level_cm", out.base_level_cm);
    out.oscillation_cm = j.value("oscillation_cm", out.oscillation_cm);
    out.noise_corr = j.value("noise_corr", out.noise_corr);
    for (const auto& jp : j.value("peak_schedule", nlohmann::json::array())) {
        reject_unknown(jp, {"center_hour", "height_cm", "width_hours", "asymmetry"}, "peak");
        PeakEvent p;
        jp.at("center_hour").get_to(p.center_hour);
        jp.at("height_cm").get_to(p.height_cm);
        jp.at("width_hours").get_to(p.width_hours);
        p.asymmetry = jp.value("asymmetry", p.asymmetry);
        out.peak_schedule.push_back(p);
    }
    for (const auto& js : j.at("sources")) {
        reject_unknown(js,
                       {"id", "bias_cm", "gain", "lag_hours", "noise_sigma_cm", "degrade_after_hour",
                        "degraded_sigma_cm", "degraded_corr"},
                       "source");
        SourceCorruption s;
        js.at("id").get_to(s.id);
        s.bias_cm = js.value("bias_cm", s.bias_cm);
        s.gain = js.value("gain", s.gain);
        s.lag_hours = js.value("lag_hours", s.lag_hours);
        s.noise_sigma_cm = js.value("noise_sigma_cm", s.noise_sigma_cm);
        if (js.contains("degrade_after_hour")) {
            s.degrade_after_hour = js.at("degrade_after_hour").get<Hour>();
            s.degraded_sigma_cm = js.value("degraded_sigma_cm", s.noise_sigma_cm);
            s.degraded_corr = js.value("degraded_corr", s.degraded_corr);
        }
        out.sources.push_back(std::move(s));
    }
    validate(out);
    c = std::move(out);
}

std::string config_hash(const ScenarioConfig& config) {
    const std::string text = nlohmann::json(config).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

TimeSeries generate_truth(const ScenarioConfig& config) {
    validate(config);
    Rng rng(stream_seed(config.seed, 0, 0));
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    std::vector<double> values(static_cast<std::size_t>(config.length_hours()));
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double t = static_cast<double>(i);
        double v = config.base_level_cm;
        for (const auto& p : config.peak_schedule) {
            v += peak_shape(p, t);
        }
        if (config.oscillation_cm > 0.0) {
            v += config.oscillation_cm * std::sin(2.0 * std::numbers::pi * t / kOscillationPeriodHours + phase);
        }
        values[i] = v;
    }
    return TimeSeries(0, std::move(values));
}

SourceCatalog generate_source_forecasts(const ScenarioConfig& config, const TimeSeries& truth) {
    validate(config);
    const CatalogLimits limits;
    const auto truth_values = truth.values();
    auto truth_at = [&](Hour h) {
        const Hour i = std::clamp<Hour>(h - truth.start_hour(), 0, static_cast<Hour>(truth.size()) - 1);
        return truth_values[static_cast<std::size_t>(i)];
    };
    std::vector<std::string> ids;
    std::vector<ForecastRecord> records;
    for (std::size_t s = 0; s < config.sources.size(); ++s) {
        const SourceCorruption& src = config.sources[s];
        ids.push_back(src.id);
        std::uint64_t issue_index = 0;
        for (Hour issue = truth.start_hour(); issue + config.horizon_hours - 1 <= truth.end_hour();
             issue += limits.issue_interval_hours, ++issue_index) {
            const bool degraded = src.degrade_after_hour && issue >= *src.degrade_after_hour;
            const double sigma = degraded ? src.degraded_sigma_cm : src.noise_sigma_cm;
            const double rho = degraded ? src.degraded_corr : config.noise_corr;
            const double innovation = std::sqrt(1.0 - rho * rho);
            Rng rng(stream_seed(config.seed, s + 1, issue_index));
            std::vector<double> values(static_cast<std::size_t>(config.horizon_hours));
            double noise = 0.0;
            for (std::size_t k = 0; k < values.size(); ++k) {
                const double z = rng.normal();
                noise = k == 0 ? z : rho * noise + innovation * z;
                const Hour t = issue + static_cast<Hour>(k);
                values[k] = src.gain * truth_at(t - src.lag_hours) + src.bias_cm + sigma * noise;
            }
            records.push_back({src.id, issue, config.horizon_hours, TimeSeries(issue, std::move(values))});
        }
    }
    return SourceCatalog(std::move(ids), truth, std::move(records), limits);
}

SourceCatalog generate_catalog(const ScenarioConfig& config) {
    return generate_source_forecasts(config, generate_truth(config));
}

ScenarioConfig standard_benchmark() {
    ScenarioConfig c;
    c.seed = 42;
    c.days = 30;
    c.horizon_hours = 72;
    c.base_level_cm = 100.0;
    c.oscillation_cm = 20.0;
    c.noise_corr = 0.998;
    c.peak_schedule = {
        {400.0, 90.0, 14.0, 0.4},
        {600.0, 110.0, 16.0, 0.6},
    };
    SourceCorruption unbiased{"unbiased", 0.0, 1.0, 0, 4.0, std::nullopt, 0.0, 0.0};
    SourceCorruption biased{"biased", 5.0, 1.0, 0, 3.0, std::nullopt, 0.0, 0.0};
    SourceCorruption lagging{"lagging", 0.0, 1.0, 1, 3.0, Hour{480}, 30.0, 0.0};
    c.sources = {unbiased, biased, lagging};
    return c;
}

}  // namespace floodens
