#pragma once

#include "floodens/catalog.hpp"
#include "floodens/symreg.hpp"
#include "floodens/timeseries.hpp"

#include "json.hpp"

#include <bit>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace floodens {

/// Bit i set means catalog source i is a member.
class MemberMask {
public:
    constexpr MemberMask() = default;
    constexpr explicit MemberMask(std::uint64_t bits) : bits_(bits) {}

    static constexpr MemberMask full(std::size_t n) {
        return MemberMask(n >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << n) - 1);
    }
    static constexpr MemberMask single(std::size_t i) { return MemberMask(std::uint64_t{1} << i); }

    constexpr std::uint64_t bits() const { return bits_; }
    constexpr bool contains(std::size_t i) const { return (bits_ >> i) & 1U; }
    constexpr std::size_t count() const { return static_cast<std::size_t>(std::popcount(bits_)); }
    constexpr bool empty() const { return bits_ == 0; }
    constexpr bool intersects(MemberMask other) const { return (bits_ & other.bits_) != 0; }
    constexpr MemberMask without(std::size_t i) const { return MemberMask(bits_ & ~(std::uint64_t{1} << i)); }

    /// Member indices in ascending order.
    std::vector<std::size_t> indices() const;

    friend constexpr auto operator<=>(MemberMask, MemberMask) = default;

private:
    std::uint64_t bits_ = 0;
};

/// Largest source count for which every subset is enumerated.
inline constexpr std::size_t kMaxEnumeratedSources = 16;
/// Default history used to fit an issue's regressions (hours before issue).
inline constexpr int kDefaultTrainingWindowHours = 240;

namespace forms {
inline const std::string kAgnostic = "AGNOSTIC";
inline const std::string kLinear = "LINEAR";
/// Gain and offset applied to the equal-weight member mean.
inline const std::string kMean = "MEAN";
}  // namespace forms

/**
 * A fitted aggregation of catalog sources. For LINEAR / MEAN the output is
 * intercept + sum c_i * member_i with one coefficient per mask member; for
 * AGNOSTIC (empty mask) it is the constant intercept; for any other form id
 * the coefficients are the constants of the registered expression.
 */
struct EnsembleSpec {
    MemberMask member_mask;
    std::string form_id = forms::kLinear;
    std::vector<double> coefficients;
    double intercept = 0.0;

    friend bool operator==(const EnsembleSpec&, const EnsembleSpec&) = default;
};

/// Throws InvalidArgument if the spec breaks its structural invariants.
void validate(const EnsembleSpec& spec);

/// Registered expression forms by id.
using FormRegistry = std::map<std::string, ExprForm>;

/// All 2^n masks ordered by (popcount, value). Refuses n > kMaxEnumeratedSources.
std::vector<MemberMask> enumerate_subsets(std::size_t n);

struct LinearFit {
    std::vector<double> coefficients;
    double intercept = 0.0;
    double sse = 0.0;
    std::size_t samples = 0;
};

/**
 * Least-squares weights and intercept of members against observations over
 * their joint overlap. Needs |members| + 2 samples; collinear members get the
 * minimum-norm coefficients.
 */
LinearFit fit_linear(std::span<const TimeSeries> members, const TimeSeries& obs);

/// Equal-weight mean of the members with fitted gain and offset.
LinearFit fit_mean(std::span<const TimeSeries> members, const TimeSeries& obs);

/// Constant forecast at the history mean.
TimeSeries agnostic_forecast(const TimeSeries& obs_history, Hour start_hour, std::size_t length);

/// Bias and gain correction of one source.
EnsembleSpec correct_single(std::size_t source_index, const TimeSeries& member, const TimeSeries& obs_history);

/// Output of a spec on the forecasts of one issue. Throws MissingMember.
TimeSeries evaluate_spec(const EnsembleSpec& spec, const IssueForecasts& forecasts,
                         const FormRegistry* registry = nullptr);

struct Candidate {
    std::string id;
    EnsembleSpec spec;
    TimeSeries forecast;
};

/// Stable identifier such as `LINEAR[bsm,hiromb]` or `AGNOSTIC[]`.
std::string candidate_id(const EnsembleSpec& spec, std::span<const std::string> source_ids);

/**
 * Every form x member subset fitted on the training window before the issue
 * and evaluated on that issue's forecasts. Masks touching sources without a
 * forecast at the issue are skipped; an empty mask becomes AGNOSTIC; an
 * expression form yields the single mask of the sources it references.
 */
std::vector<Candidate> build_combinatorial_set(const SourceCatalog& catalog, Hour issue_hour,
                                               std::span<const std::string> form_ids,
                                               int training_window_hours = kDefaultTrainingWindowHours,
                                               const FormRegistry* registry = nullptr);

/// Per-source best-available training series and observations before an issue.
struct TrainingWindow {
    std::vector<std::string> source_ids;
    std::vector<std::optional<TimeSeries>> sources;
    std::optional<TimeSeries> obs;
};

TrainingWindow training_window(const SourceCatalog& catalog, Hour issue_hour, int hours);

/// Fits one spec of the given form and mask on a training window.
EnsembleSpec fit_spec(const std::string& form_id, MemberMask mask, const TrainingWindow& training,
                      const FormRegistry* registry = nullptr);

/// Mask of the catalog sources an expression references.
MemberMask form_mask(const ExprForm& form, std::span<const std::string> source_ids);

nlohmann::json spec_to_json(const EnsembleSpec& spec, std::span<const std::string> source_ids);
EnsembleSpec spec_from_json(const nlohmann::json& j, std::span<const std::string> source_ids);

}  // namespace floodens
