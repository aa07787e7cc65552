#include "floodens/selection.hpp"

#include "floodens/errors.hpp"
#include "floodens/lstsq.hpp"
#include "floodens/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace floodens {

namespace {

void validate_ranges(const std::vector<ClassRange>& ranges, bool from_minus_inf, const char* what) {
    if (ranges.empty()) {
        throw InvalidArgument(std::string(what) + " classes are empty");
    }
    std::set<std::string> labels;
    for (std::size_t i = 0; i < ranges.size(); ++i) {
        const auto& r = ranges[i];
        if (!labels.insert(r.label).second) {
            throw InvalidArgument(std::string(what) + " class label '" + r.label + "' is not unique");
        }
        if (!(r.lo < r.hi)) {
            throw InvalidArgument(std::string(what) + " class '" + r.label + "' has an empty range");
        }
        if (i > 0 && ranges[i - 1].hi != r.lo) {
            throw InvalidArgument(std::string(what) + " classes leave a gap or overlap at '" + r.label + "'");
        }
    }
    if (!std::isinf(ranges.back().hi) || ranges.back().hi < 0) {
        throw InvalidArgument(std::string(what) + " classes must extend to +inf");
    }
    const double lo = ranges.front().lo;
    if (from_minus_inf ? !(std::isinf(lo) && lo < 0) : lo > 0.0) {
        throw InvalidArgument(std::string(what) + " classes do not cover the lower end");
    }
}

}  // namespace

void validate(const ClassSet& set) {
    validate_ranges(set.explicit_classes, true, "observation");
    validate_ranges(set.spread_classes, false, "spread");
}

std::string classify(std::span<const ClassRange> ranges, double value) {
    for (const auto& r : ranges) {
        if (value >= r.lo && value < r.hi) {
            return r.label;
        }
    }
    throw InvalidArgument("value not covered by any class");
}

std::string classify_observation(const ClassSet& set, double obs_value) {
    return classify(set.explicit_classes, obs_value);
}

double mean_spread(std::span<const TimeSeries> candidates) {
    if (candidates.size() < 2) {
        throw InsufficientCandidates("spread needs at least 2 candidates");
    }
    const int step = candidates.front().step_hours();
    Hour from = candidates.front().start_hour();
    Hour to = candidates.front().end_hour();
    for (const auto& c : candidates) {
        if (c.step_hours() != step) {
            throw MismatchedStep("candidates on different steps");
        }
        from = std::max(from, c.start_hour());
        to = std::min(to, c.end_hour());
    }
    double sum = 0.0;
    std::size_t n = 0;
    for (Hour h = from; h <= to; h += step) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        bool all = true;
        for (const auto& c : candidates) {
            const auto v = c.value_at(h);
            if (!v) {
                all = false;
                break;
            }
            lo = std::min(lo, *v);
            hi = std::max(hi, *v);
        }
        if (all) {
            sum += hi - lo;
            ++n;
        }
    }
    if (n == 0) {
        throw InsufficientCandidates("candidates have no common overlap");
    }
    return sum / static_cast<double>(n);
}

std::string classify_spread(const ClassSet& set, std::span<const TimeSeries> candidates) {
    return classify(set.spread_classes, mean_spread(candidates));
}

BasicRuleDecision basic_rule_select(const std::map<std::string, TimeSeries>& sources, const TimeSeries& ensemble,
                                    const TimeSeries& obs_at_start) {
    if (align(ensemble, obs_at_start).empty()) {
        throw NoStartObservations("no observations overlap the start of the ensemble forecast");
    }
    if (sources.empty()) {
        return {kEnsembleChoice, 0};
    }
    const double ens_mae = mae(ensemble, obs_at_start);
    std::string best_id;
    double best_mae = std::numeric_limits<double>::infinity();
    double worst_mae = -best_mae;
    for (const auto& [id, s] : sources) {  // map order = lexicographic, so ties keep the smaller id
        const double m = mae(s, obs_at_start);
        if (m < best_mae) {
            best_mae = m;
            best_id = id;
        }
        worst_mae = std::max(worst_mae, m);
    }
    if (ens_mae > worst_mae) {
        return {best_id, 1};
    }

    const Hour start = ensemble.start_hour();
    const auto obs0 = obs_at_start.value_at(start);
    const auto ens0 = ensemble.value_at(start);
    if (obs0 && ens0) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        bool complete = true;
        for (const auto& [_, s] : sources) {
            const auto v = s.value_at(start);
            if (!v) {
                complete = false;
                break;
            }
            lo = std::min(lo, *v);
            hi = std::max(hi, *v);
        }
        if (complete && *obs0 >= lo && *obs0 <= hi && (*ens0 < lo || *ens0 > hi)) {
            return {best_id, 2};
        }
    }
    return {kEnsembleChoice, 0};
}

SkillModel fit_skill_model(std::span<const SkillRecord> archive) {
    if (archive.size() < 3) {
        throw InsufficientArchive("skill model needs at least 3 archived forecasts, got " +
                                  std::to_string(archive.size()));
    }
    std::vector<std::vector<double>> cols(2);
    std::vector<double> y;
    for (const auto& r : archive) {
        cols[0].push_back(r.x1);
        cols[1].push_back(r.x2);
        y.push_back(r.realized);
    }
    const AffineFit f = fit_affine(cols, y);
    return {f.intercept, f.coefficients[0], f.coefficients[1]};
}

std::pair<double, double> start_discrepancy(const TimeSeries& candidate, const TimeSeries& obs) {
    const auto pairs = align(candidate, obs);
    if (pairs.size() < 2 || pairs[0].hour != candidate.start_hour() ||
        pairs[1].hour != candidate.time_at(1)) {
        throw NoStartOverlap("observations do not cover the first two samples of the candidate");
    }
    return {std::abs(pairs[0].a - pairs[0].b), std::abs(pairs[1].a - pairs[1].b)};
}

double predict_skill(const TimeSeries& candidate, const TimeSeries& obs, std::span<const SkillRecord> archive) {
    const SkillModel model = fit_skill_model(archive);
    const auto [x1, x2] = start_discrepancy(candidate, obs);
    return model.predict(x1, x2);
}

namespace {

bool preferred(const PredictedCandidate& a, const PredictedCandidate& b) {
    if (a.predicted_error != b.predicted_error) {
        return a.predicted_error < b.predicted_error;
    }
    if (a.member_count != b.member_count) {
        return a.member_count < b.member_count;
    }
    return a.id < b.id;
}

const PredictedCandidate& best_of(std::span<const PredictedCandidate> candidates) {
    if (candidates.empty()) {
        throw NoCandidates("no candidates to select from");
    }
    const PredictedCandidate* best = &candidates.front();
    for (const auto& c : candidates) {
        if (preferred(c, *best)) {
            best = &c;
        }
    }
    return *best;
}

}  // namespace

std::string select_min_predicted(std::span<const PredictedCandidate> candidates) {
    return best_of(candidates).id;
}

void SelectionState::validate() const {
    if (!(threshold >= 0.0)) {
        throw InvalidArgument("selection threshold must be >= 0");
    }
    for (const auto& row : transition_counts) {
        for (double c : row) {
            if (c < 0.0) {
                throw InvalidArgument("transition counts must be >= 0");
            }
        }
    }
}

ConservativeDecision conservative_select(const SelectionState& state, std::span<const PredictedCandidate> candidates) {
    state.validate();
    const PredictedCandidate& best = best_of(candidates);
    ConservativeDecision out{best.id, state, true};

    const PredictedCandidate* current = nullptr;
    if (state.current_choice) {
        for (const auto& c : candidates) {
            if (c.id == *state.current_choice) {
                current = &c;
                break;
            }
        }
    }
    if (current) {
        const double cur = current->predicted_error;
        double improvement = 0.0;
        if (cur != 0.0) {
            improvement = (cur - best.predicted_error) / std::abs(cur);
        } else if (best.predicted_error < cur) {
            improvement = std::numeric_limits<double>::infinity();
        }
        if (!(improvement > state.threshold)) {
            out.chosen = current->id;
        }
    }
    out.switched = !state.current_choice || out.chosen != *state.current_choice;
    out.state.current_choice = out.chosen;
    return out;
}

}  // namespace floodens
