#pragma once

#include "floodens/timeseries.hpp"

#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace floodens {

/// Half-open value range [lo, hi) carrying a class label.
struct ClassRange {
    std::string label;
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
};

/**
 * Expert-defined classes on the observed level and on ensemble spread.
 * Each list is ascending and contiguous up to +inf with unique labels.
 * Observation classes start at -inf; spread classes may start at 0 since
 * spread is never negative.
 */
struct ClassSet {
    std::vector<ClassRange> explicit_classes;
    std::vector<ClassRange> spread_classes;
};

/// Throws InvalidArgument if a range list is unordered, gapped or has duplicate labels.
void validate(const ClassSet& set);

/// Label of the range holding `value`.
std::string classify(std::span<const ClassRange> ranges, double value);
std::string classify_observation(const ClassSet& set, double obs_value);

/// Mean over time of (max - min) across candidates on their common overlap.
double mean_spread(std::span<const TimeSeries> candidates);
std::string classify_spread(const ClassSet& set, std::span<const TimeSeries> candidates);

/// Start window checked by the basic switching rules (hours).
inline constexpr int kStartWindowHours = 6;
/// Identifier basic_rule_select returns when the ensemble is kept.
inline const std::string kEnsembleChoice = "ensemble";

struct BasicRuleDecision {
    std::string chosen;
    /// 0 = ensemble kept, 1 = ensemble worse than every source, 2 = source
    /// range covers the observation but not the ensemble.
    int rule = 0;
};

/**
 * Keeps the ensemble unless it is further from the start observations than
 * every source (by MAE) or, at the forecast start, the sources' range covers
 * the observed value but not the ensemble. On a switch the source with the
 * lowest start MAE is returned (ties by id).
 */
BasicRuleDecision basic_rule_select(const std::map<std::string, TimeSeries>& sources, const TimeSeries& ensemble,
                                    const TimeSeries& obs_at_start);

/// One past forecast: start discrepancies and the error finally realised.
struct SkillRecord {
    double x1 = 0.0;
    double x2 = 0.0;
    double realized = 0.0;
};

struct SkillModel {
    double intercept = 0.0;
    double b1 = 0.0;
    double b2 = 0.0;

    double predict(double x1, double x2) const { return intercept + b1 * x1 + b2 * x2; }
};

/// Least-squares model of realized error on the two start discrepancies (>= 3 records).
SkillModel fit_skill_model(std::span<const SkillRecord> archive);

/// |candidate - obs| at the first two overlapping samples. Throws NoStartOverlap.
std::pair<double, double> start_discrepancy(const TimeSeries& candidate, const TimeSeries& obs);

double predict_skill(const TimeSeries& candidate, const TimeSeries& obs, std::span<const SkillRecord> archive);

struct PredictedCandidate {
    std::string id;
    std::size_t member_count = 0;
    double predicted_error = 0.0;
};

/// Lowest predicted error; ties go to fewer members, then lexicographic id.
std::string select_min_predicted(std::span<const PredictedCandidate> candidates);

struct SelectionState {
    std::optional<std::string> current_choice;
    /// Relative improvement (cur - best) / cur required before switching.
    double threshold = 0.0;
    std::vector<std::string> winner_history;
    std::vector<std::vector<double>> transition_counts;

    void validate() const;
};

struct ConservativeDecision {
    std::string chosen;
    SelectionState state;
    bool switched = false;
};

/**
 * Hysteresis selection: moves to the best candidate only when there is no
 * current choice, the current choice is no longer offered, or the relative
 * improvement over its predicted error exceeds the state's threshold.
 */
ConservativeDecision conservative_select(const SelectionState& state, std::span<const PredictedCandidate> candidates);

}  // namespace floodens
