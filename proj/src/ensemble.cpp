#include "floodens/ensemble.hpp"

#include "floodens/errors.hpp"
#include "floodens/lstsq.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace floodens {

std::vector<std::size_t> MemberMask::indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < 64; ++i) {
        if (contains(i)) {
            out.push_back(i);
        }
    }
    return out;
}

void validate(const EnsembleSpec& spec) {
    for (double c : spec.coefficients) {
        if (!std::isfinite(c)) {
            throw InvalidArgument("ensemble coefficients must be finite");
        }
    }
    if (!std::isfinite(spec.intercept)) {
        throw InvalidArgument("ensemble intercept must be finite");
    }
    if (spec.form_id == forms::kAgnostic) {
        if (!spec.member_mask.empty() || !spec.coefficients.empty()) {
            throw InvalidArgument("AGNOSTIC spec must have an empty mask and no coefficients");
        }
    } else if (spec.form_id == forms::kLinear || spec.form_id == forms::kMean) {
        if (spec.member_mask.count() != spec.coefficients.size()) {
            throw InvalidArgument("linear spec needs one coefficient per member");
        }
    }
}

std::vector<MemberMask> enumerate_subsets(std::size_t n) {
    if (n > kMaxEnumeratedSources) {
        throw InvalidArgument("refusing to enumerate 2^" + std::to_string(n) +
                              " subsets; pass an explicit mask list instead");
    }
    std::vector<MemberMask> masks;
    masks.reserve(std::size_t{1} << n);
    for (std::uint64_t b = 0; b < (std::uint64_t{1} << n); ++b) {
        masks.emplace_back(b);
    }
    std::stable_sort(masks.begin(), masks.end(), [](MemberMask a, MemberMask b) {
        return a.count() != b.count() ? a.count() < b.count() : a.bits() < b.bits();
    });
    return masks;
}

namespace {

struct JointData {
    std::vector<std::vector<double>> columns;
    std::vector<double> obs;
};

/// Samples where every member and the observations are defined.
JointData joint_overlap(std::span<const TimeSeries> members, const TimeSeries& obs) {
    const int step = obs.step_hours();
    Hour from = obs.start_hour();
    Hour to = obs.end_hour();
    for (const auto& m : members) {
        if (m.step_hours() != step) {
            throw MismatchedStep("member and observation steps differ");
        }
        if ((m.start_hour() - obs.start_hour()) % step != 0) {
            throw DegenerateDesign("member is off the observation grid");
        }
        from = std::max(from, m.start_hour());
        to = std::min(to, m.end_hour());
    }
    if (from > to) {
        throw DegenerateDesign("members and observations have no joint overlap");
    }
    JointData d;
    for (const auto& m : members) {
        const TimeSeries cut = window(m, from, to);
        auto w = cut.values();
        d.columns.emplace_back(w.begin(), w.end());
    }
    const TimeSeries cut = window(obs, from, to);
    auto w = cut.values();
    d.obs.assign(w.begin(), w.end());
    return d;
}

}  // namespace

LinearFit fit_linear(std::span<const TimeSeries> members, const TimeSeries& obs) {
    const JointData d = joint_overlap(members, obs);
    if (d.obs.size() < members.size() + 2) {
        throw InsufficientData("linear fit of " + std::to_string(members.size()) + " members needs " +
                               std::to_string(members.size() + 2) + " samples, overlap has " +
                               std::to_string(d.obs.size()));
    }
    const AffineFit f = fit_affine(d.columns, d.obs);
    return {f.coefficients, f.intercept, f.sse, d.obs.size()};
}

LinearFit fit_mean(std::span<const TimeSeries> members, const TimeSeries& obs) {
    if (members.empty()) {
        return fit_linear(members, obs);
    }
    const JointData d = joint_overlap(members, obs);
    if (d.obs.size() < 3) {
        throw InsufficientData("mean fit needs 3 samples");
    }
    std::vector<std::vector<double>> mean_col(1, std::vector<double>(d.obs.size(), 0.0));
    for (const auto& c : d.columns) {
        for (std::size_t t = 0; t < c.size(); ++t) {
            mean_col[0][t] += c[t] / static_cast<double>(d.columns.size());
        }
    }
    const AffineFit f = fit_affine(mean_col, d.obs);
    const double gain = f.coefficients[0];
    return {std::vector<double>(members.size(), gain / static_cast<double>(members.size())), f.intercept, f.sse,
            d.obs.size()};
}

TimeSeries agnostic_forecast(const TimeSeries& obs_history, Hour start_hour, std::size_t length) {
    // TimeSeries cannot be empty, so an empty history never reaches here; the
    // zero-length horizon is the remaining degenerate case.
    if (length == 0) {
        throw InvalidArgument("agnostic forecast over an empty horizon");
    }
    const auto v = obs_history.values();
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    return constant_series(start_hour, length, mean, obs_history.step_hours());
}

EnsembleSpec correct_single(std::size_t source_index, const TimeSeries& member, const TimeSeries& obs_history) {
    const LinearFit f = fit_linear(std::span<const TimeSeries>(&member, 1), obs_history);
    return {MemberMask::single(source_index), forms::kLinear, f.coefficients, f.intercept};
}

namespace {

/// Common grid of the given series, as (start, count, step).
struct Grid {
    Hour start;
    std::size_t count;
    int step;
};

Grid common_grid(const std::vector<const TimeSeries*>& series) {
    const int step = series.front()->step_hours();
    Hour from = series.front()->start_hour();
    Hour to = series.front()->end_hour();
    for (const auto* s : series) {
        if (s->step_hours() != step || (s->start_hour() - from) % step != 0) {
            throw MismatchedStep("member forecasts are not on a common grid");
        }
        from = std::max(from, s->start_hour());
        to = std::min(to, s->end_hour());
    }
    if (from > to) {
        throw EmptyOverlap("member forecasts do not overlap");
    }
    return {from, static_cast<std::size_t>((to - from) / step + 1), step};
}

}  // namespace

TimeSeries evaluate_spec(const EnsembleSpec& spec, const IssueForecasts& forecasts, const FormRegistry* registry) {
    validate(spec);
    if (spec.form_id == forms::kAgnostic) {
        std::vector<const TimeSeries*> present;
        for (const auto& s : forecasts.series) {
            if (s) {
                present.push_back(&*s);
            }
        }
        if (present.empty()) {
            throw MissingMember("no forecast at this issue defines the agnostic grid");
        }
        const Grid g = common_grid(present);
        return constant_series(g.start, g.count, spec.intercept, g.step);
    }

    std::vector<const TimeSeries*> members;
    for (std::size_t i : spec.member_mask.indices()) {
        if (i >= forecasts.series.size() || !forecasts.series[i]) {
            throw MissingMember("mask member " + std::to_string(i) + " has no forecast at issue " +
                                std::to_string(forecasts.issue_hour));
        }
        members.push_back(&*forecasts.series[i]);
    }

    if (spec.form_id == forms::kLinear || spec.form_id == forms::kMean) {
        if (members.empty()) {
            throw MissingMember("linear spec without members");
        }
        const Grid g = common_grid(members);
        std::vector<double> out(g.count, spec.intercept);
        for (std::size_t m = 0; m < members.size(); ++m) {
            const std::size_t offset = *members[m]->index_of(g.start);
            for (std::size_t t = 0; t < g.count; ++t) {
                out[t] += spec.coefficients[m] * (*members[m])[offset + t];
            }
        }
        return TimeSeries(g.start, std::move(out), g.step);
    }

    if (!registry || !registry->contains(spec.form_id)) {
        throw InvalidArgument("unknown ensemble form '" + spec.form_id + "'");
    }
    const ExprForm form = registry->at(spec.form_id).with_constants(spec.coefficients);
    std::map<std::string, TimeSeries> bound;
    for (const auto& name : form.used_variables()) {
        auto idx = forecasts.index_of(name);
        if (!idx || !forecasts.series[*idx]) {
            throw MissingMember("form variable '" + name + "' has no forecast at this issue");
        }
        bound.emplace(name, *forecasts.series[*idx]);
    }
    return evaluate_form(form, bound);
}

std::string candidate_id(const EnsembleSpec& spec, std::span<const std::string> source_ids) {
    std::string id = spec.form_id + "[";
    bool first = true;
    for (std::size_t i : spec.member_mask.indices()) {
        if (!first) {
            id += ',';
        }
        first = false;
        id += i < source_ids.size() ? source_ids[i] : std::to_string(i);
    }
    return id + "]";
}

TrainingWindow training_window(const SourceCatalog& catalog, Hour issue_hour, int hours) {
    TrainingWindow tw;
    tw.source_ids = catalog.sources();
    for (std::size_t i = 0; i < catalog.sources().size(); ++i) {
        tw.sources.push_back(catalog.stitched(i, issue_hour - hours, issue_hour));
    }
    tw.obs = catalog.observed(issue_hour - hours, issue_hour - 1);
    return tw;
}

EnsembleSpec fit_spec(const std::string& form_id, MemberMask mask, const TrainingWindow& training,
                      const FormRegistry* registry) {
    if (!training.obs) {
        throw InsufficientData("no observations in the training window");
    }
    if (mask.empty() && (form_id == forms::kLinear || form_id == forms::kMean || form_id == forms::kAgnostic)) {
        const auto v = training.obs->values();
        const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        return {MemberMask{}, forms::kAgnostic, {}, mean};
    }
    if (form_id == forms::kLinear || form_id == forms::kMean) {
        std::vector<TimeSeries> members;
        for (std::size_t i : mask.indices()) {
            if (i >= training.sources.size() || !training.sources[i]) {
                throw InsufficientData("source " + std::to_string(i) + " has no training history");
            }
            members.push_back(*training.sources[i]);
        }
        const LinearFit f = form_id == forms::kLinear ? fit_linear(members, *training.obs)
                                                      : fit_mean(members, *training.obs);
        return {mask, form_id, f.coefficients, f.intercept};
    }
    if (!registry || !registry->contains(form_id)) {
        throw InvalidArgument("unknown ensemble form '" + form_id + "'");
    }
    const ExprForm& form = registry->at(form_id);
    std::map<std::string, TimeSeries> bound;
    MemberMask form_mask;
    for (const auto& name : form.used_variables()) {
        auto it = std::find(training.source_ids.begin(), training.source_ids.end(), name);
        if (it == training.source_ids.end()) {
            throw InvalidArgument("form '" + form_id + "' references unknown source '" + name + "'");
        }
        const auto idx = static_cast<std::size_t>(it - training.source_ids.begin());
        if (!training.sources[idx]) {
            throw InsufficientData("form variable '" + name + "' has no training history");
        }
        bound.emplace(name, *training.sources[idx]);
        form_mask = MemberMask(form_mask.bits() | MemberMask::single(idx).bits());
    }
    if (form_mask != mask) {
        throw InvalidArgument("form '" + form_id + "' does not apply to the requested mask");
    }
    if (mask.empty()) {
        return fit_spec(forms::kAgnostic, mask, training);
    }
    const ConstantFit fit = fit_constants(form, bound, *training.obs);
    return {mask, form_id, fit.constants, 0.0};
}

MemberMask form_mask(const ExprForm& form, std::span<const std::string> source_ids) {
    MemberMask mask;
    for (const auto& name : form.used_variables()) {
        auto it = std::find(source_ids.begin(), source_ids.end(), name);
        if (it == source_ids.end()) {
            throw InvalidArgument("form references unknown source '" + name + "'");
        }
        mask = MemberMask(mask.bits() | MemberMask::single(static_cast<std::size_t>(it - source_ids.begin())).bits());
    }
    return mask;
}

std::vector<Candidate> build_combinatorial_set(const SourceCatalog& catalog, Hour issue_hour,
                                               std::span<const std::string> form_ids, int training_window_hours,
                                               const FormRegistry* registry) {
    const IssueForecasts at_issue = catalog.at_issue(issue_hour);
    if (at_issue.present_count() == 0) {
        throw NoForecastsAtIssue("no source has a forecast at issue " + std::to_string(issue_hour));
    }
    MemberMask missing;
    for (std::size_t i = 0; i < at_issue.series.size(); ++i) {
        if (!at_issue.series[i]) {
            missing = MemberMask(missing.bits() | MemberMask::single(i).bits());
        }
    }
    const TrainingWindow training = training_window(catalog, issue_hour, training_window_hours);
    const auto masks = enumerate_subsets(catalog.sources().size());

    std::vector<Candidate> out;
    for (const auto& form_id : form_ids) {
        if (form_id == forms::kLinear || form_id == forms::kMean || form_id == forms::kAgnostic) {
            for (MemberMask mask : masks) {
                if (mask.intersects(missing)) {
                    continue;
                }
                if (form_id == forms::kAgnostic && !mask.empty()) {
                    continue;
                }
                EnsembleSpec spec = fit_spec(form_id, mask, training, registry);
                TimeSeries fc = evaluate_spec(spec, at_issue, registry);
                out.push_back({candidate_id(spec, catalog.sources()), std::move(spec), std::move(fc)});
            }
            continue;
        }
        if (!registry || !registry->contains(form_id)) {
            throw InvalidArgument("unknown ensemble form '" + form_id + "'");
        }
        const MemberMask mask = form_mask(registry->at(form_id), catalog.sources());
        if (mask.intersects(missing)) {
            continue;
        }
        EnsembleSpec spec = fit_spec(form_id, mask, training, registry);
        TimeSeries fc = evaluate_spec(spec, at_issue, registry);
        out.push_back({candidate_id(spec, catalog.sources()), std::move(spec), std::move(fc)});
    }
    return out;
}

nlohmann::json spec_to_json(const EnsembleSpec& spec, std::span<const std::string> source_ids) {
    nlohmann::json mask = nlohmann::json::array();
    for (std::size_t i : spec.member_mask.indices()) {
        mask.push_back(source_ids[i]);
    }
    return {{"mask", mask}, {"form", spec.form_id}, {"coefficients", spec.coefficients}, {"intercept", spec.intercept}};
}

EnsembleSpec spec_from_json(const nlohmann::json& j, std::span<const std::string> source_ids) {
    EnsembleSpec spec;
    for (const auto& id : j.at("mask")) {
        auto it = std::find(source_ids.begin(), source_ids.end(), id.get<std::string>());
        if (it == source_ids.end()) {
            throw InvalidArgument("spec references unknown source '" + id.get<std::string>() + "'");
        }
        spec.member_mask = MemberMask(spec.member_mask.bits() |
                                      MemberMask::single(static_cast<std::size_t>(it - source_ids.begin())).bits());
    }
    spec.form_id = j.at("form").get<std::string>();
    spec.coefficients = j.at("coefficients").get<std::vector<double>>();
    spec.intercept = j.at("intercept").get<double>();
    validate(spec);
    return spec;
}

}  // namespace floodens
