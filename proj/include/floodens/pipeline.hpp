#pragma once

#include "floodens/catalog.hpp"
#include "floodens/ensemble.hpp"
#include "floodens/metrics.hpp"
#include "floodens/scenario.hpp"
#include "floodens/selection.hpp"
#include "floodens/timeseries.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace floodens {

enum class Strategy { LinearAll, BasicRules, SubsetSkill, Conservative, SymregMarkov, PeakTransform };

/// Accepts the plain names and `conservative(<theta>)`; the theta, if any, is stored in `theta`.
Strategy parse_strategy(const std::string& text, std::optional<double>* theta = nullptr);
std::string strategy_name(Strategy s);

/// What the skill model learns to predict from the start discrepancies.
enum class SkillResponse { Dtw, Mae };

struct SymregSettings {
    int population = 40;
    int generations = 8;
    int max_depth = 4;
    /// GP forms kept next to LINEAR for the Markov predictor.
    int max_forms = 3;
    int constant_restarts = 2;
};

struct RunConfig {
    std::optional<ScenarioConfig> scenario;
    std::optional<std::filesystem::path> observations_csv;
    std::optional<std::filesystem::path> forecasts_csv;

    Strategy strategy = Strategy::LinearAll;
    double theta = 0.0;
    double threshold_cm = kFloodThresholdCm;
    int training_window_hours = kDefaultTrainingWindowHours;
    /// History needed before an issue is processed at all.
    int min_history_hours = 48;
    /// Observed hours after the issue available to start-based rules.
    int start_window_hours = kStartWindowHours;
    double anomaly_k = 3.0;
    int anomaly_window_hours = 12;
    /// Drop candidates containing a source flagged in most anomaly windows.
    bool exclude_anomalies = true;
    std::vector<std::string> forms = {forms::kLinear, forms::kMean};
    SkillResponse skill_response = SkillResponse::Dtw;
    /// Most recent verified forecasts per candidate the skill model learns from (0 = all).
    std::size_t skill_archive_size = 0;
    /// Sigma of the log-normal multiplicative noise put on predicted errors.
    double skill_noise = 0.0;
    std::uint64_t seed = 1;
    SymregSettings symreg;

    /// Throws InvalidArgument on the first broken constraint.
    void validate() const;
};

/// Parses a run configuration; relative input paths resolve against `base_dir`.
RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
nlohmann::json run_config_to_json(const RunConfig& config);

/// Catalog named by the configuration (generated or loaded).
SourceCatalog load_run_catalog(const RunConfig& config);

/// Everything decided and measured at one issue.
struct IssueResult {
    Hour issue_hour = 0;
    std::vector<std::string> candidates;
    std::vector<double> predicted_errors;
    std::string chosen;
    bool switched = false;
    std::map<std::string, std::string> class_labels;
    std::vector<std::string> anomalous_sources;
    /// Hours of the chosen forecast with observations.
    std::size_t verified_hours = 0;
    /// Counted in the summary (late enough and fully verified).
    bool scored = false;
    std::optional<MetricReport> score;
    TimeSeries chosen_forecast{0, {0.0}};
    TimeSeries baseline_forecast{0, {0.0}};
    /// Target peak used by the peak transform, when it applied.
    std::optional<PeakParams> target_peak;
};

struct RunResult {
    Strategy strategy = Strategy::LinearAll;
    double theta = 0.0;
    std::string fingerprint;
    std::vector<IssueResult> issues;
    MetricReport summary;
    MetricReport baseline_summary;
    std::size_t scored_issues = 0;
    std::size_t switches = 0;
};

/// Runs the configured strategy over every issue of the catalog in order.
/// Throws DataGap when an issue in the 6-hourly sequence is missing.
RunResult run_pipeline(const SourceCatalog& catalog, const RunConfig& config);

/// Stable digest of the catalog contents.
std::string catalog_fingerprint(const SourceCatalog& catalog);

std::string strategy_label(const RunResult& result);
nlohmann::json report_json(const RunResult& result, const RunConfig& config);
nlohmann::json trace_record(const IssueResult& issue);

/// Writes report.json, trace.jsonl and plot_<issue>.csv into `out_dir`.
void write_run_outputs(const RunResult& result, const SourceCatalog& catalog, const RunConfig& config,
                       const std::filesystem::path& out_dir);

/// Default observation and spread classes used to label issues.
ClassSet default_class_set(double threshold_cm);

}  // namespace floodens
