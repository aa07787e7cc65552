#pragma once

#include "floodens/timeseries.hpp"

#include "json.hpp"

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace floodens {

/// Primitive set of aggregation expressions.
enum class Op : std::uint8_t { Var, Const, Add, Sub, Mul, Div, Max, Min };

constexpr bool is_terminal(Op op) { return op == Op::Var || op == Op::Const; }

struct Node {
    Op op = Op::Const;
    int index = 0;  // variable index for Var, constant slot for Const

    friend bool operator==(const Node&, const Node&) = default;
};

/// Magnitude every intermediate result is saturated to.
inline constexpr double kMaxMagnitude = 1e100;
/// Smallest denominator magnitude used by protected division.
inline constexpr double kDivisionClamp = 1e-6;

/**
 * Expression tree stored in prefix order. Var nodes index `variables()`
 * (source ids); Const nodes index `constants()`. All operators are binary.
 */
class ExprForm {
public:
    ExprForm(std::vector<Node> prefix, std::vector<std::string> variables, std::vector<double> constants = {});

    const std::vector<Node>& nodes() const noexcept { return nodes_; }
    const std::vector<std::string>& variables() const noexcept { return variables_; }
    const std::vector<double>& constants() const noexcept { return constants_; }
    ExprForm with_constants(std::vector<double> constants) const;

    /// Levels from root to deepest leaf; a lone terminal has depth 1.
    std::size_t depth() const;
    /// Number of constant slots the tree references (max slot + 1).
    std::size_t constant_slots() const;
    /// Variables actually referenced by the tree, in `variables()` order.
    std::vector<std::string> used_variables() const;

    friend bool operator==(const ExprForm&, const ExprForm&) = default;

private:
    std::vector<Node> nodes_;
    std::vector<std::string> variables_;
    std::vector<double> constants_;
};

/// Prefix S-expression, e.g. `(- (* (* C0 h) b) C1)`.
std::string to_sexpr(const ExprForm& form);
/// Parses an S-expression; n-ary `+ - * max min` fold left into binary nodes.
/// Variables are numbered in order of first appearance; constants start at 0.
ExprForm parse_sexpr(std::string_view text);

/// Node count.
std::size_t complexity(const ExprForm& form);

/// Pointwise value for one sample; `vars` follows `form.variables()`.
double evaluate_point(const ExprForm& form, std::span<const double> vars);

/// Evaluates on column data (one column per form variable, equal lengths).
std::vector<double> evaluate_columns(const ExprForm& form, std::span<const std::vector<double>> columns,
                                     std::size_t length);

/// Pointwise evaluation on the common grid of the referenced sources.
TimeSeries evaluate_form(const ExprForm& form, const std::map<std::string, TimeSeries>& sources);

/// True when the form is affine in every constant slot.
bool is_linear_in_constants(const ExprForm& form);

struct ConstantFitOptions {
    int restarts = 5;
    int iterations = 100;
    double tolerance = 1e-9;
    std::uint64_t seed = 0;
};

struct ConstantFit {
    std::vector<double> constants;
    double sse = 0.0;
};

/**
 * Sample-aligned training data: obs and one column per variable.
 */
struct TrainingSet {
    std::vector<std::string> variables;
    std::vector<std::vector<double>> columns;
    std::vector<double> obs;

    std::size_t size() const noexcept { return obs.size(); }
};

/// Joint overlap of the sources and observations. Throws EmptyOverlap.
TrainingSet make_training_set(const std::map<std::string, TimeSeries>& sources, const TimeSeries& obs);

/// Sum of squared errors of a form with its current constants.
double form_sse(const ExprForm& form, const TrainingSet& data);

/**
 * Constants minimising SSE against the observations. Forms affine in their
 * constants are solved exactly by least squares; others by multi-start
 * coordinate (pattern) search that always includes the all-zero start and
 * the form's current constants.
 */
ConstantFit fit_constants(const ExprForm& form, const TrainingSet& data, const ConstantFitOptions& opts = {});
ConstantFit fit_constants(const ExprForm& form, const std::map<std::string, TimeSeries>& sources,
                          const TimeSeries& obs, const ConstantFitOptions& opts = {});

struct ArchiveEntry {
    ExprForm form;
    double error = 0.0;
    std::size_t complexity = 1;
};

/// Non-dominated set over (error, complexity), both minimised.
class ParetoArchive {
public:
    /// Inserts unless dominated or tied on both objectives with an existing
    /// member; removes members the candidate dominates. Returns true if kept.
    bool insert(ArchiveEntry candidate);

    const std::vector<ArchiveEntry>& entries() const noexcept { return entries_; }
    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }

    /// Members sorted by complexity, then error.
    std::vector<ArchiveEntry> sorted() const;

private:
    std::vector<ArchiveEntry> entries_;
};

bool dominates(const ArchiveEntry& a, const ArchiveEntry& b);

struct GpConfig {
    int population = 200;
    int generations = 50;
    std::uint64_t seed = 1;
    int max_depth = 7;
    int tournament = 4;
    double crossover_rate = 0.8;
    double mutation_rate = 0.2;
    ConstantFitOptions constant_fit{};
};

/// Pareto genetic programming over the given sources.
ParetoArchive run_gp(const std::map<std::string, TimeSeries>& sources, const TimeSeries& obs,
                     const GpConfig& config = {});
ParetoArchive run_gp(const TrainingSet& data, const GpConfig& config = {});

nlohmann::json archive_to_json(const ParetoArchive& archive);

}  // namespace floodens
