#include "floodens/pipeline.hpp"

#include "floodens/anomaly.hpp"
#include "floodens/errors.hpp"
#include "floodens/markov.hpp"
#include "floodens/peaks.hpp"
#include "floodens/random.hpp"
#include "floodens/symreg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <set>
#include <sstream>

namespace floodens {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::vector<std::pair<Strategy, std::string>> kStrategyNames = {
    {Strategy::LinearAll, "linear_all"},       {Strategy::BasicRules, "basic_rules"},
    {Strategy::SubsetSkill, "subset_skill"},   {Strategy::Conservative, "conservative"},
    {Strategy::SymregMarkov, "symreg_markov"}, {Strategy::PeakTransform, "peak_transform"},
};

std::uint64_t fnv1a(std::string_view text, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

void reject_unknown(const json& j, std::initializer_list<const char*> keys, const char* what) {
    if (!j.is_object()) {
        throw InvalidArgument(std::string(what) + " must be a JSON object");
    }
    for (const auto& [key, _] : j.items()) {
        if (std::find_if(keys.begin(), keys.end(), [&](const char* k) { return key == k; }) == keys.end()) {
            throw InvalidArgument("unknown " + std::string(what) + " key '" + key + "'");
        }
    }
}

}  // namespace

Strategy parse_strategy(const std::string& text, std::optional<double>* theta) {
    for (const auto& [s, name] : kStrategyNames) {
        if (text == name) {
            return s;
        }
    }
    const std::string prefix = "conservative(";
    if (text.starts_with(prefix) && text.ends_with(")")) {
        const std::string inner = text.substr(prefix.size(), text.size() - prefix.size() - 1);
        double value = 0.0;
        try {
            value = parse_number(inner);
        } catch (const Error&) {
            throw InvalidArgument("invalid threshold in strategy '" + text + "'");
        }
        if (theta) {
            *theta = value;
        }
        return Strategy::Conservative;
    }
    throw InvalidArgument("unknown strategy '" + text + "'");
}

std::string strategy_name(Strategy s) {
    for (const auto& [strategy, name] : kStrategyNames) {
        if (strategy == s) {
            return name;
        }
    }
    return "unknown";
}

void RunConfig::validate() const {
    const bool files = observations_csv.has_value() || forecasts_csv.has_value();
    if (scenario.has_value() == files) {
        throw InvalidArgument("exactly one input is required: a scenario or observation and forecast files");
    }
    if (files && (!observations_csv || !forecasts_csv)) {
        throw InvalidArgument("file input needs both observations and forecasts");
    }
    if (scenario) {
        floodens::validate(*scenario);
    }
    if (!(theta >= 0.0) || !std::isfinite(theta)) {
        throw InvalidArgument("theta must be a finite value >= 0");
    }
    if (!(threshold_cm > 0.0) || !std::isfinite(threshold_cm)) {
        throw InvalidArgument("threshold must be > 0");
    }
    if (training_window_hours < 1 || min_history_hours < 1) {
        throw InvalidArgument("training window and minimum history must be >= 1 hour");
    }
    if (start_window_hours < 2) {
        throw InvalidArgument("start window must cover at least 2 hours");
    }
    if (!(anomaly_k >= 0.0) || anomaly_window_hours < 1) {
        throw InvalidArgument("anomaly k must be >= 0 and its window >= 1 hour");
    }
    if (forms.empty()) {
        throw InvalidArgument("at least one regression form is required");
    }
    for (const auto& f : forms) {
        if (f != forms::kLinear && f != forms::kMean && f != forms::kAgnostic) {
            throw InvalidArgument("unknown regression form '" + f + "'");
        }
    }
    if (!(skill_noise >= 0.0) || !std::isfinite(skill_noise)) {
        throw InvalidArgument("skill noise must be >= 0");
    }
    if (symreg.population < 2 || symreg.generations < 0 || symreg.max_depth < 1 || symreg.max_forms < 1 ||
        symreg.constant_restarts < 0) {
        throw InvalidArgument("invalid symbolic regression settings");
    }
}

RunConfig run_config_from_json(const json& j, const fs::path& base_dir) {
    reject_unknown(j,
                   {"scenario", "scenario_file", "observations", "forecasts", "strategy", "theta", "threshold_cm",
                    "training_window_hours", "min_history_hours", "start_window_hours", "anomaly_k",
                    "anomaly_window_hours", "exclude_anomalies", "forms", "skill_response", "skill_noise", "skill_archive_size",
                    "seed", "symreg"},
                   "run config");
    RunConfig c;
    auto resolve = [&](const std::string& p) {
        const fs::path path(p);
        return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
    };
    if (j.contains("scenario") && j.contains("scenario_file")) {
        throw InvalidArgument("give either scenario or scenario_file, not both");
    }
    if (j.contains("scenario")) {
        const json& s = j.at("scenario");
        if (s.is_string()) {
            if (s.get<std::string>() != "standard") {
                throw InvalidArgument("the only named scenario is 'standard'");
            }
            c.scenario = standard_benchmark();
        } else {
            c.scenario = s.get<ScenarioConfig>();
        }
    }
    if (j.contains("scenario_file")) {
        const fs::path p = resolve(j.at("scenario_file").get<std::string>());
        std::ifstream in(p);
        if (!in) {
            throw InvalidArgument("cannot read scenario file " + p.string());
        }
        c.scenario = json::parse(in).get<ScenarioConfig>();
    }
    if (j.contains("observations")) {
        c.observations_csv = resolve(j.at("observations").get<std::string>());
    }
    if (j.contains("forecasts")) {
        c.forecasts_csv = resolve(j.at("forecasts").get<std::string>());
    }
    if (j.contains("strategy")) {
        std::optional<double> theta;
        c.strategy = parse_strategy(j.at("strategy").get<std::string>(), &theta);
        if (theta) {
            c.theta = *theta;
        }
    }
    c.theta = j.value("theta", c.theta);
    c.threshold_cm = j.value("threshold_cm", c.threshold_cm);
    c.training_window_hours = j.value("training_window_hours", c.training_window_hours);
    c.min_history_hours = j.value("min_history_hours", c.min_history_hours);
    c.start_window_hours = j.value("start_window_hours", c.start_window_hours);
    c.anomaly_k = j.value("anomaly_k", c.anomaly_k);
    c.anomaly_window_hours = j.value("anomaly_window_hours", c.anomaly_window_hours);
    c.exclude_anomalies = j.value("exclude_anomalies", c.exclude_anomalies);
    c.forms = j.value("forms", c.forms);
    if (j.contains("skill_response")) {
        const auto r = j.at("skill_response").get<std::string>();
        if (r == "dtw") {
            c.skill_response = SkillResponse::Dtw;
        } else if (r == "mae") {
            c.skill_response = SkillResponse::Mae;
        } else {
            throw InvalidArgument("skill_response must be 'dtw' or 'mae'");
        }
    }
    c.skill_noise = j.value("skill_noise", c.skill_noise);
    c.skill_archive_size = j.value("skill_archive_size", c.skill_archive_size);
    c.seed = j.value("seed", c.seed);
    if (j.contains("symreg")) {
        const json& s = j.at("symreg");
        reject_unknown(s, {"population", "generations", "max_depth", "max_forms", "constant_restarts"}, "symreg");
        c.symreg.population = s.value("population", c.symreg.population);
        c.symreg.generations = s.value("generations", c.symreg.generations);
        c.symreg.max_depth = s.value("max_depth", c.symreg.max_depth);
        c.symreg.max_forms = s.value("max_forms", c.symreg.max_forms);
        c.symreg.constant_restarts = s.value("constant_restarts", c.symreg.constant_restarts);
    }
    c.validate();
    return c;
}

json run_config_to_json(const RunConfig& c) {
    json j{{"strategy", strategy_name(c.strategy)},
           {"theta", c.theta},
           {"threshold_cm", c.threshold_cm},
           {"training_window_hours", c.training_window_hours},
           {"min_history_hours", c.min_history_hours},
           {"start_window_hours", c.start_window_hours},
           {"anomaly_k", c.anomaly_k},
           {"anomaly_window_hours", c.anomaly_window_hours},
           {"exclude_anomalies", c.exclude_anomalies},
           {"forms", c.forms},
           {"skill_response", c.skill_response == SkillResponse::Dtw ? "dtw" : "mae"},
           {"skill_noise", c.skill_noise},
           {"skill_archive_size", c.skill_archive_size},
           {"seed", c.seed},
           {"symreg",
            {{"population", c.symreg.population},
             {"generations", c.symreg.generations},
             {"max_depth", c.symreg.max_depth},
             {"max_forms", c.symreg.max_forms},
             {"constant_restarts", c.symreg.constant_restarts}}}};
    if (c.scenario) {
        j["scenario"] = *c.scenario;
    }
    return j;
}

SourceCatalog load_run_catalog(const RunConfig& config) {
    config.validate();
    if (config.scenario) {
        return generate_catalog(*config.scenario);
    }
    return load_catalog(*config.observations_csv, *config.forecasts_csv);
}

std::string catalog_fingerprint(const SourceCatalog& catalog) {
    std::ostringstream obs;
    write_observations_csv(obs, catalog.observations());
    std::ostringstream fc;
    write_forecasts_csv(fc, catalog);
    return hex64(fnv1a(fc.str(), fnv1a(obs.str())));
}

ClassSet default_class_set(double threshold_cm) {
    const double inf = std::numeric_limits<double>::infinity();
    const double elevated = std::min(100.0, threshold_cm / 2.0);
    return ClassSet{
        {{"calm", -inf, elevated}, {"elevated", elevated, threshold_cm}, {"flood", threshold_cm, inf}},
        {{"low", 0.0, 5.0}, {"medium", 5.0, 15.0}, {"high", 15.0, inf}},
    };
}

namespace {

/// Forecasts made at one issue, waiting for their horizon to be observed.
struct PendingIssue {
    Hour issue_hour = 0;
    Hour last_hour = 0;
    std::vector<std::tuple<std::string, TimeSeries, double, double>> skill;  // id, forecast, x1, x2
    std::optional<IssueForecasts> sources;
};

struct Choice {
    std::string id;
    TimeSeries forecast{0, {0.0}};
};

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) {
        s += x;
    }
    return s / static_cast<double>(v.size());
}

double pop_stdev(const std::vector<double>& v) {
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) {
        s += (x - m) * (x - m);
    }
    return std::sqrt(s / static_cast<double>(v.size()));
}

std::vector<PeakParams> complete_peaks(const TimeSeries& s, double threshold) {
    auto peaks = detect_peaks(s, threshold);
    std::erase_if(peaks, [](const PeakParams& p) { return p.partial; });
    return peaks;
}

/// Averages per-issue reports; peak errors pool every paired peak.
MetricReport summarize(const std::vector<const IssueResult*>& issues, bool baseline, const SourceCatalog& catalog,
                       double threshold) {
    MetricReport out;
    if (issues.empty()) {
        return out;
    }
    std::vector<double> mae_v, rmse_v, dtw_v, wmae_v, sd_v, dh, dt;
    for (const IssueResult* r : issues) {
        const TimeSeries& f = baseline ? r->baseline_forecast : r->chosen_forecast;
        const auto obs = catalog.observed(f.start_hour(), f.end_hour());
        const MetricReport m = score(f, *obs, threshold);
        mae_v.push_back(m.mae);
        rmse_v.push_back(m.rmse);
        dtw_v.push_back(m.dtw);
        sd_v.push_back(m.err_stdev);
        if (m.wmae) {
            wmae_v.push_back(*m.wmae);
        }
        const auto fp = complete_peaks(f, threshold);
        const auto op = complete_peaks(*obs, threshold);
        for (const auto& [i, j] : pair_peaks(fp, op)) {
            dh.push_back(fp[i].H - op[j].H);
            dt.push_back(fp[i].T - op[j].T);
        }
    }
    out.mae = mean_of(mae_v);
    out.rmse = mean_of(rmse_v);
    out.dtw = mean_of(dtw_v);
    out.err_stdev = mean_of(sd_v);
    if (!wmae_v.empty()) {
        out.wmae = mean_of(wmae_v);
    }
    if (dh.size() >= 2) {
        out.h_err = pop_stdev(dh);
        out.t_err = pop_stdev(dt);
    }
    return out;
}

class Runner {
public:
    Runner(const SourceCatalog& catalog, const RunConfig& config)
        : catalog_(catalog), config_(config), noise_rng_(config.seed), classes_(default_class_set(config.threshold_cm)) {
        state_.threshold = config.theta;
    }

    RunResult run() {
        const auto issues = catalog_.issues();
        if (issues.empty()) {
            throw DataGap("the catalog holds no forecasts");
        }
        const int interval = catalog_.limits().issue_interval_hours;
        for (std::size_t i = 1; i < issues.size(); ++i) {
            if (issues[i] - issues[i - 1] != interval) {
                throw DataGap("no forecasts issued between hours " + std::to_string(issues[i - 1]) + " and " +
                              std::to_string(issues[i]));
            }
        }
        const Hour first = catalog_.observations().start_hour();
        process_from_ = first + config_.min_history_hours;
        score_from_ = first + config_.training_window_hours;

        RunResult result;
        result.strategy = config_.strategy;
        result.theta = config_.theta;
        result.fingerprint = catalog_fingerprint(catalog_);
        std::optional<std::string> previous;
        for (Hour h : issues) {
            if (h < process_from_) {
                continue;
            }
            IssueResult r = process(h);
            r.switched = previous.has_value() && *previous != r.chosen;
            previous = r.chosen;
            result.switches += r.switched ? 1 : 0;
            result.issues.push_back(std::move(r));
        }

        std::vector<const IssueResult*> scored;
        for (const auto& r : result.issues) {
            if (r.scored) {
                scored.push_back(&r);
            }
        }
        result.scored_issues = scored.size();
        result.summary = summarize(scored, false, catalog_, config_.threshold_cm);
        result.baseline_summary = summarize(scored, true, catalog_, config_.threshold_cm);
        return result;
    }

private:
    IssueResult process(Hour h) {
        IssueResult r;
        r.issue_hour = h;
        const IssueForecasts at = catalog_.at_issue(h);
        const TrainingWindow tw = training_window(catalog_, h, config_.training_window_hours);
        const auto obs_start = catalog_.observed(h, h + config_.start_window_hours - 1);

        absorb_verified(h);
        const Choice baseline = baseline_choice(at, tw);
        r.baseline_forecast = baseline.forecast;
        label(r, at, h);

        Choice chosen = baseline;
        PendingIssue pending{h, h, {}, std::nullopt};
        switch (config_.strategy) {
            case Strategy::LinearAll:
                r.candidates = {baseline.id};
                break;
            case Strategy::BasicRules:
                chosen = basic_rules(r, at, baseline, obs_start);
                break;
            case Strategy::SubsetSkill:
            case Strategy::Conservative:
                chosen = skill_select(r, h, baseline, obs_start, pending);
                break;
            case Strategy::SymregMarkov:
                chosen = symreg_markov(r, h, at, tw, baseline);
                break;
            case Strategy::PeakTransform:
                chosen = peak_transform(r, at, tw, baseline, pending);
                break;
        }
        r.chosen = chosen.id;
        r.chosen_forecast = chosen.forecast;

        Hour last = chosen.forecast.end_hour();
        for (const auto& s : at.series) {
            if (s) {
                last = std::max(last, s->end_hour());
            }
        }
        pending.last_hour = last;
        if (!pending.skill.empty() || pending.sources) {
            pending_.push_back(std::move(pending));
        }

        const auto obs = catalog_.observed(chosen.forecast.start_hour(), chosen.forecast.end_hour());
        if (obs) {
            r.verified_hours = align(chosen.forecast, *obs).size();
            if (r.verified_hours >= 2) {
                r.score = score(chosen.forecast, *obs, config_.threshold_cm);
            }
            const auto base_obs = catalog_.observed(baseline.forecast.start_hour(), baseline.forecast.end_hour());
            r.scored = h >= score_from_ && r.score && r.verified_hours == chosen.forecast.size() && base_obs &&
                       align(baseline.forecast, *base_obs).size() == baseline.forecast.size();
        }
        return r;
    }

    Choice baseline_choice(const IssueForecasts& at, const TrainingWindow& tw) const {
        MemberMask mask;
        for (std::size_t i = 0; i < at.series.size(); ++i) {
            if (at.series[i] && tw.sources[i]) {
                mask = MemberMask(mask.bits() | MemberMask::single(i).bits());
            }
        }
        EnsembleSpec spec;
        try {
            spec = fit_spec(forms::kLinear, mask, tw);
        } catch (const InsufficientData&) {
            spec = fit_spec(forms::kAgnostic, MemberMask{}, tw);
        }
        return {candidate_id(spec, catalog_.sources()), evaluate_spec(spec, at)};
    }

    void label(IssueResult& r, const IssueForecasts& at, Hour h) {
        if (const auto last = catalog_.observations().value_at(h - 1)) {
            r.class_labels["observation"] = classify_observation(classes_, *last);
        }
        std::vector<TimeSeries> present;
        std::map<std::string, TimeSeries> by_id;
        for (std::size_t i = 0; i < at.series.size(); ++i) {
            if (at.series[i]) {
                present.push_back(*at.series[i]);
                by_id.emplace(at.source_ids[i], *at.series[i]);
            }
        }
        if (present.size() >= 2) {
            r.class_labels["spread"] = classify_spread(classes_, present);
        }
        anomalous_ = MemberMask{};
        if (by_id.size() >= 3) {
            const AnomalyOptions opts{config_.anomaly_window_hours, config_.anomaly_k, AnomalyOptions{}.min_scale_cm};
            const std::size_t windows = anomaly_window_count(by_id, config_.anomaly_window_hours);
            for (const auto& v : detect_anomalies(at, opts)) {
                if (2 * v.flagged_hours.size() >= windows && !v.flagged_hours.empty()) {
                    r.anomalous_sources.push_back(v.source_id);
                    anomalous_ = MemberMask(anomalous_.bits() | MemberMask::single(*at.index_of(v.source_id)).bits());
                }
            }
        }
    }

    Choice basic_rules(IssueResult& r, const IssueForecasts& at, const Choice& baseline,
                       const std::optional<TimeSeries>& obs_start) const {
        std::map<std::string, TimeSeries> sources;
        for (std::size_t i = 0; i < at.series.size(); ++i) {
            if (at.series[i]) {
                sources.emplace(at.source_ids[i], *at.series[i]);
            }
        }
        r.candidates.push_back(baseline.id);
        if (!obs_start || align(baseline.forecast, *obs_start).empty()) {
            return baseline;
        }
        r.predicted_errors.push_back(mae(baseline.forecast, *obs_start));
        for (const auto& [id, s] : sources) {
            r.candidates.push_back(id);
            r.predicted_errors.push_back(mae(s, *obs_start));
        }
        const BasicRuleDecision d = basic_rule_select(sources, baseline.forecast, *obs_start);
        if (d.chosen == kEnsembleChoice) {
            return baseline;
        }
        return {d.chosen, sources.at(d.chosen)};
    }

    Choice skill_select(IssueResult& r, Hour h, const Choice& baseline,
                        const std::optional<TimeSeries>& obs_start, PendingIssue& pending) {
        std::vector<Candidate> candidates;
        try {
            candidates = build_combinatorial_set(catalog_, h, config_.forms, config_.training_window_hours);
        } catch (const InsufficientData&) {
            r.candidates = {baseline.id};
            return baseline;
        }
        std::set<std::string> seen;
        std::vector<PredictedCandidate> eligible;
        std::map<std::string, const Candidate*> by_id;
        for (const Candidate& c : candidates) {
            if (!seen.insert(c.id).second) {
                continue;
            }
            if (!obs_start) {
                continue;
            }
            std::pair<double, double> x;
            try {
                x = start_discrepancy(c.forecast, *obs_start);
            } catch (const NoStartOverlap&) {
                continue;
            }
            pending.skill.emplace_back(c.id, c.forecast, x.first, x.second);
            if (config_.exclude_anomalies && c.spec.member_mask.intersects(anomalous_)) {
                continue;
            }
            const auto& archive = archive_[c.id];
            if (archive.size() < 3) {
                continue;
            }
            std::span<const SkillRecord> recent(archive);
            if (config_.skill_archive_size > 0 && recent.size() > config_.skill_archive_size) {
                recent = recent.last(config_.skill_archive_size);
            }
            double predicted = fit_skill_model(recent).predict(x.first, x.second);
            // keep extrapolation from the start discrepancies inside the range seen so far
            const auto [lo, hi] = std::minmax_element(recent.begin(), recent.end(), [](const auto& a, const auto& b) {
                return a.realized < b.realized;
            });
            predicted = std::clamp(predicted, lo->realized, hi->realized);
            if (config_.skill_noise > 0.0) {
                predicted *= std::exp(config_.skill_noise * noise_rng_.normal());
            }
            eligible.push_back({c.id, c.spec.member_mask.count(), predicted});
            by_id.emplace(c.id, &c);
        }
        if (eligible.empty()) {
            r.candidates = {baseline.id};
            return baseline;
        }
        for (const auto& e : eligible) {
            r.candidates.push_back(e.id);
            r.predicted_errors.push_back(e.predicted_error);
        }
        std::string id;
        if (config_.strategy == Strategy::SubsetSkill) {
            id = select_min_predicted(eligible);
        } else {
            ConservativeDecision d = conservative_select(state_, eligible);
            state_ = std::move(d.state);
            id = d.chosen;
        }
        return {id, by_id.at(id)->forecast};
    }

    Choice symreg_markov(IssueResult& r, Hour h, const IssueForecasts& at, const TrainingWindow& tw,
                         const Choice& baseline) {
        if (h < score_from_) {
            r.candidates = {baseline.id};
            return baseline;
        }
        if (form_ids_.empty()) {
            build_forms(at, tw);
        }

        // the winner of the previous issue is known once its first interval is observed
        if (!last_forms_.empty()) {
            std::optional<std::size_t> winner;
            double best = std::numeric_limits<double>::infinity();
            const auto obs = catalog_.observed(last_issue_, h - 1);
            for (std::size_t f = 0; f < last_forms_.size() && obs; ++f) {
                if (!last_forms_[f] || align(*last_forms_[f], *obs).empty()) {
                    continue;
                }
                const double e = mae(*last_forms_[f], *obs);
                if (e < best) {
                    best = e;
                    winner = f;
                }
            }
            if (winner) {
                winners_.push_back(*winner);
            }
        }

        MemberMask full;
        for (std::size_t i = 0; i < at.series.size(); ++i) {
            if (at.series[i] && tw.sources[i]) {
                full = MemberMask(full.bits() | MemberMask::single(i).bits());
            }
        }
        std::vector<std::optional<Choice>> current(form_ids_.size());
        for (std::size_t f = 0; f < form_ids_.size(); ++f) {
            try {
                const MemberMask mask =
                    f == 0 ? full : form_mask(registry_.at(form_ids_[f]), catalog_.sources());
                if (f > 0 && !((mask.bits() & ~full.bits()) == 0)) {
                    continue;
                }
                const EnsembleSpec spec = fit_spec(form_ids_[f], mask, tw, &registry_);
                current[f] = Choice{form_ids_[f] == forms::kLinear ? candidate_id(spec, catalog_.sources())
                                                                   : form_ids_[f],
                                    evaluate_spec(spec, at, &registry_)};
            } catch (const Error&) {
            }
        }
        last_issue_ = h;
        last_forms_.assign(form_ids_.size(), std::nullopt);
        for (std::size_t f = 0; f < current.size(); ++f) {
            if (current[f]) {
                last_forms_[f] = current[f]->forecast;
                r.candidates.push_back(current[f]->id);
            }
        }

        std::size_t predicted = 0;
        if (winners_.size() >= 2) {
            predicted = markov_predict(markov_fit(winners_, form_ids_.size()), winners_.back());
        } else if (winners_.size() == 1) {
            predicted = winners_.back();
        }
        if (!current[predicted]) {
            predicted = 0;
        }
        return current[predicted] ? *current[predicted] : baseline;
    }

    void build_forms(const IssueForecasts& at, const TrainingWindow& tw) {
        form_ids_ = {forms::kLinear};
        std::map<std::string, TimeSeries> training;
        for (std::size_t i = 0; i < at.series.size(); ++i) {
            if (at.series[i] && tw.sources[i]) {
                training.emplace(at.source_ids[i], *tw.sources[i]);
            }
        }
        if (training.empty() || !tw.obs) {
            return;
        }
        GpConfig gp;
        gp.population = config_.symreg.population;
        gp.generations = config_.symreg.generations;
        gp.max_depth = config_.symreg.max_depth;
        gp.seed = config_.seed;
        gp.constant_fit.restarts = config_.symreg.constant_restarts;
        gp.constant_fit.seed = config_.seed;
        const ParetoArchive archive = run_gp(training, *tw.obs, gp);
        std::vector<ArchiveEntry> entries = archive.sorted();
        std::stable_sort(entries.begin(), entries.end(),
                         [](const ArchiveEntry& a, const ArchiveEntry& b) { return a.error < b.error; });
        for (const auto& e : entries) {
            if (static_cast<int>(form_ids_.size()) > config_.symreg.max_forms) {
                break;
            }
            if (e.form.used_variables().empty()) {
                continue;
            }
            const std::string id = "SR" + std::to_string(form_ids_.size());
            registry_.emplace(id, e.form);
            form_ids_.push_back(id);
        }
    }

    Choice peak_transform(IssueResult& r, const IssueForecasts& at, const TrainingWindow& tw,
                          const Choice& baseline, PendingIssue& pending) {
        pending.sources = at;
        r.candidates = {baseline.id};
        MemberMask mask;
        std::vector<std::pair<std::string, const TimeSeries*>> members;
        for (std::size_t i = 0; i < at.series.size(); ++i) {
            if (at.series[i] && tw.sources[i]) {
                mask = MemberMask(mask.bits() | MemberMask::single(i).bits());
                members.emplace_back(at.source_ids[i], &*at.series[i]);
            }
        }
        if (mask.empty()) {
            return baseline;
        }
        try {
            const EnsembleSpec spec = fit_spec(forms::kMean, mask, tw);
            const TimeSeries plain = evaluate_spec(spec, at);
            const auto anchors = complete_peaks(plain, config_.threshold_cm);
            if (anchors.empty()) {
                return baseline;
            }
            const PeakParams& anchor =
                *std::max_element(anchors.begin(), anchors.end(),
                                  [](const PeakParams& a, const PeakParams& b) { return a.H < b.H; });
            std::vector<std::pair<std::string, PeakParams>> source_peaks;
            for (const auto& [id, s] : members) {
                const auto peaks = complete_peaks(*s, config_.threshold_cm);
                const auto match = nearest_peak(peaks, anchor.T);
                if (!match) {
                    return baseline;
                }
                source_peaks.emplace_back(id, peaks[*match]);
            }
            const PeakParams target = predict_target_peak(source_peaks, peak_archive_);
            if (!(target.H > config_.threshold_cm)) {
                return baseline;
            }
            TimeSeries out = transform_ensemble(at, spec, target, config_.threshold_cm);
            r.target_peak = target;
            const std::string id = "PEAK:" + candidate_id(spec, catalog_.sources());
            r.candidates.push_back(id);
            return {id, std::move(out)};
        } catch (const Error&) {
            return baseline;
        }
    }

    /// Moves every pending issue whose horizon is fully observed before `h` into the archives.
    void absorb_verified(Hour h) {
        while (!pending_.empty() && pending_.front().last_hour < h) {
            PendingIssue p = std::move(pending_.front());
            pending_.pop_front();
            const auto obs = catalog_.observed(p.issue_hour, p.last_hour);
            if (!obs) {
                continue;
            }
            for (const auto& [id, forecast, x1, x2] : p.skill) {
                const double realized =
                    config_.skill_response == SkillResponse::Dtw ? dtw(forecast, *obs) : mae(forecast, *obs);
                archive_[id].push_back({x1, x2, realized});
            }
            if (p.sources) {
                archive_peaks(*p.sources, *obs);
            }
        }
    }

    void archive_peaks(const IssueForecasts& at, const TimeSeries& obs) {
        const auto issue_obs = window(obs, at.issue_hour, obs.end_hour());
        for (const auto& op : complete_peaks(issue_obs, config_.threshold_cm)) {
            PeakRecord rec;
            rec.observed = op;
            bool complete = true;
            for (std::size_t i = 0; i < at.series.size(); ++i) {
                if (!at.series[i]) {
                    continue;
                }
                const auto peaks = complete_peaks(*at.series[i], config_.threshold_cm);
                const auto match = nearest_peak(peaks, op.T);
                if (!match) {
                    complete = false;
                    break;
                }
                rec.sources.emplace(at.source_ids[i], peaks[*match]);
            }
            if (complete && !rec.sources.empty()) {
                peak_archive_.push_back(std::move(rec));
            }
        }
    }

    const SourceCatalog& catalog_;
    const RunConfig& config_;
    Rng noise_rng_;
    ClassSet classes_;
    Hour process_from_ = 0;
    Hour score_from_ = 0;

    SelectionState state_;
    MemberMask anomalous_;
    std::deque<PendingIssue> pending_;
    std::map<std::string, std::vector<SkillRecord>> archive_;
    std::vector<PeakRecord> peak_archive_;

    FormRegistry registry_;
    std::vector<std::string> form_ids_;
    std::vector<std::size_t> winners_;
    Hour last_issue_ = 0;
    std::vector<std::optional<TimeSeries>> last_forms_;
};

}  // namespace

RunResult run_pipeline(const SourceCatalog& catalog, const RunConfig& config) {
    config.validate();
    return Runner(catalog, config).run();
}

std::string strategy_label(const RunResult& result) {
    if (result.strategy == Strategy::Conservative) {
        return "conservative(" + format_number(result.theta) + ")";
    }
    return strategy_name(result.strategy);
}

json report_json(const RunResult& result, const RunConfig& config) {
    std::size_t unverified = 0;
    for (const auto& r : result.issues) {
        if (r.verified_hours < r.chosen_forecast.size()) {
            ++unverified;
        }
    }
    json summaries = json::object();
    summaries[strategy_label(result)] = result.summary;
    summaries[strategy_name(Strategy::LinearAll)] = result.baseline_summary;

    json issues{{"processed", result.issues.size()}, {"scored", result.scored_issues}, {"not_fully_verified", unverified}};
    Hour first = 0;
    Hour last = 0;
    bool any = false;
    for (const auto& r : result.issues) {
        if (r.scored) {
            first = any ? first : r.issue_hour;
            last = r.issue_hour;
            any = true;
        }
    }
    if (any) {
        issues["first_scored_hour"] = first;
        issues["last_scored_hour"] = last;
    }

    json cfg = run_config_to_json(config);
    cfg.erase("scenario");
    return json{{"schema", 1},
                {"strategy", strategy_label(result)},
                {"fingerprint", result.fingerprint},
                {"config", std::move(cfg)},
                {"issues", std::move(issues)},
                {"switches", result.switches},
                {"summaries", std::move(summaries)}};
}

json trace_record(const IssueResult& r) {
    json j{{"issue_hour", r.issue_hour},
           {"candidates", r.candidates},
           {"predicted_errors", r.predicted_errors},
           {"chosen", r.chosen},
           {"switched", r.switched},
           {"class_labels", r.class_labels},
           {"anomalous_sources", r.anomalous_sources},
           {"verified_hours", r.verified_hours},
           {"horizon_hours", r.chosen_forecast.size()},
           {"scored", r.scored}};
    if (r.score) {
        j["score"] = *r.score;
    }
    if (r.target_peak) {
        j["target_peak"] = *r.target_peak;
    }
    return j;
}

void write_run_outputs(const RunResult& result, const SourceCatalog& catalog, const RunConfig& config,
                       const fs::path& out_dir) {
    fs::create_directories(out_dir);
    {
        std::ofstream out(out_dir / "report.json");
        out << report_json(result, config).dump(2) << '\n';
    }
    {
        std::ofstream out(out_dir / "trace.jsonl");
        for (const auto& r : result.issues) {
            out << trace_record(r).dump() << '\n';
        }
    }
    const auto& sources = catalog.sources();
    for (const auto& r : result.issues) {
        const IssueForecasts at = catalog.at_issue(r.issue_hour);
        std::ofstream out(out_dir / ("plot_" + std::to_string(r.issue_hour) + ".csv"));
        out << "hour,obs";
        for (const auto& id : sources) {
            out << ',' << id;
        }
        out << ",ensemble,chosen\n";
        auto cell = [&](const std::optional<double>& v) {
            out << ',';
            if (v) {
                out << format_number(*v);
            }
        };
        for (Hour t = r.chosen_forecast.start_hour(); t <= r.chosen_forecast.end_hour();
             t += r.chosen_forecast.step_hours()) {
            out << t;
            cell(catalog.observations().value_at(t));
            for (const auto& s : at.series) {
                cell(s ? s->value_at(t) : std::nullopt);
            }
            cell(r.baseline_forecast.value_at(t));
            cell(r.chosen_forecast.value_at(t));
            out << '\n';
        }
    }
}

}  // namespace floodens
