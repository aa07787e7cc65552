#include "floodens/symreg.hpp"

#include "floodens/errors.hpp"
#include "floodens/lstsq.hpp"
#include "floodens/random.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <sstream>
#include <unordered_map>

namespace floodens {

namespace {

constexpr std::size_t kArity = 2;

std::size_t subtree_end(const std::vector<Node>& nodes, std::size_t start) {
    std::size_t need = 1;
    std::size_t i = start;
    while (need > 0) {
        if (i >= nodes.size()) {
            throw InvalidArgument("malformed prefix expression");
        }
        need = need - 1 + (is_terminal(nodes[i].op) ? 0 : kArity);
        ++i;
    }
    return i;
}

const char* op_symbol(Op op) {
    switch (op) {
        case Op::Add: return "+";
        case Op::Sub: return "-";
        case Op::Mul: return "*";
        case Op::Div: return "/";
        case Op::Max: return "max";
        case Op::Min: return "min";
        default: return "?";
    }
}

inline double saturate(double v) {
    return std::clamp(v, -kMaxMagnitude, kMaxMagnitude);
}

inline double protected_div(double x, double d) {
    const double mag = std::max(std::abs(d), kDivisionClamp);
    return x / (d < 0.0 ? -mag : mag);
}

inline double apply(Op op, double a, double b) {
    switch (op) {
        case Op::Add: return saturate(a + b);
        case Op::Sub: return saturate(a - b);
        case Op::Mul: return saturate(a * b);
        case Op::Div: return saturate(protected_div(a, b));
        case Op::Max: return std::max(a, b);
        case Op::Min: return std::min(a, b);
        default: return 0.0;
    }
}

/// Vectorised stack evaluator reusing its buffers between calls.
class ColumnEvaluator {
public:
    void run(const std::vector<Node>& nodes, std::span<const std::vector<double>> columns,
             std::span<const double> constants, std::size_t n, std::vector<double>& out) {
        stack_.clear();
        for (std::size_t k = nodes.size(); k-- > 0;) {
            const Node& node = nodes[k];
            if (node.op == Op::Var) {
                auto& buf = acquire(n);
                const auto& col = columns[static_cast<std::size_t>(node.index)];
                std::copy(col.begin(), col.begin() + static_cast<std::ptrdiff_t>(n), buf.begin());
            } else if (node.op == Op::Const) {
                auto& buf = acquire(n);
                std::fill(buf.begin(), buf.end(), constants[static_cast<std::size_t>(node.index)]);
            } else {
                const std::size_t a = stack_[stack_.size() - 1];
                const std::size_t b = stack_[stack_.size() - 2];
                auto& av = pool_[a];
                const auto& bv = pool_[b];
                switch (node.op) {
                    case Op::Add: for (std::size_t t = 0; t < n; ++t) av[t] = saturate(av[t] + bv[t]); break;
                    case Op::Sub: for (std::size_t t = 0; t < n; ++t) av[t] = saturate(av[t] - bv[t]); break;
                    case Op::Mul: for (std::size_t t = 0; t < n; ++t) av[t] = saturate(av[t] * bv[t]); break;
                    case Op::Div: for (std::size_t t = 0; t < n; ++t) av[t] = saturate(protected_div(av[t], bv[t])); break;
                    case Op::Max: for (std::size_t t = 0; t < n; ++t) av[t] = std::max(av[t], bv[t]); break;
                    case Op::Min: for (std::size_t t = 0; t < n; ++t) av[t] = std::min(av[t], bv[t]); break;
                    default: break;
                }
                stack_.pop_back();
                stack_.back() = a;
                free_.push_back(b);
            }
        }
        out.assign(pool_[stack_.back()].begin(), pool_[stack_.back()].end());
        free_.push_back(stack_.back());
        stack_.clear();
    }

private:
    std::vector<double>& acquire(std::size_t n) {
        std::size_t id;
        if (!free_.empty()) {
            id = free_.back();
            free_.pop_back();
        } else {
            id = pool_.size();
            pool_.emplace_back();
        }
        pool_[id].resize(n);
        stack_.push_back(id);
        return pool_[id];
    }

    std::vector<std::vector<double>> pool_;
    std::vector<std::size_t> free_;
    std::vector<std::size_t> stack_;
};

double sse_of(const std::vector<double>& pred, std::span<const double> obs) {
    double sse = 0.0;
    for (std::size_t t = 0; t < obs.size(); ++t) {
        const double r = pred[t] - obs[t];
        sse += r * r;
    }
    return sse;
}

}  // namespace

ExprForm::ExprForm(std::vector<Node> prefix, std::vector<std::string> variables, std::vector<double> constants)
    : nodes_(std::move(prefix)), variables_(std::move(variables)), constants_(std::move(constants)) {
    if (nodes_.empty() || subtree_end(nodes_, 0) != nodes_.size()) {
        throw InvalidArgument("expression is not a single well-formed prefix tree");
    }
    for (const auto& n : nodes_) {
        if (n.op == Op::Var && (n.index < 0 || static_cast<std::size_t>(n.index) >= variables_.size())) {
            throw InvalidArgument("variable index out of range");
        }
        if (n.op == Op::Const && n.index < 0) {
            throw InvalidArgument("negative constant slot");
        }
    }
    if (constants_.size() < constant_slots()) {
        constants_.resize(constant_slots(), 0.0);
    }
    for (double c : constants_) {
        if (!std::isfinite(c)) {
            throw InvalidArgument("non-finite constant");
        }
    }
}

ExprForm ExprForm::with_constants(std::vector<double> constants) const {
    return ExprForm(nodes_, variables_, std::move(constants));
}

std::size_t ExprForm::depth() const {
    // Pending child counts per open level.
    std::vector<std::size_t> open;
    std::size_t best = 0;
    for (const auto& n : nodes_) {
        best = std::max(best, open.size() + 1);
        if (!is_terminal(n.op)) {
            open.push_back(kArity);
            continue;
        }
        while (!open.empty() && --open.back() == 0) {
            open.pop_back();
        }
    }
    return best;
}

std::size_t ExprForm::constant_slots() const {
    std::size_t slots = 0;
    for (const auto& n : nodes_) {
        if (n.op == Op::Const) {
            slots = std::max(slots, static_cast<std::size_t>(n.index) + 1);
        }
    }
    return slots;
}

std::vector<std::string> ExprForm::used_variables() const {
    std::vector<bool> used(variables_.size(), false);
    for (const auto& n : nodes_) {
        if (n.op == Op::Var) {
            used[static_cast<std::size_t>(n.index)] = true;
        }
    }
    std::vector<std::string> out;
    for (std::size_t i = 0; i < used.size(); ++i) {
        if (used[i]) {
            out.push_back(variables_[i]);
        }
    }
    return out;
}

std::string to_sexpr(const ExprForm& form) {
    std::ostringstream os;
    std::vector<std::size_t> open;
    bool first = true;
    for (const auto& n : form.nodes()) {
        if (!first) {
            os << ' ';
        }
        first = false;
        if (n.op == Op::Var) {
            os << form.variables()[static_cast<std::size_t>(n.index)];
        } else if (n.op == Op::Const) {
            os << 'C' << n.index;
        } else {
            os << '(' << op_symbol(n.op);
            open.push_back(kArity);
            continue;
        }
        while (!open.empty() && --open.back() == 0) {
            os << ')';
            open.pop_back();
        }
    }
    return os.str();
}

namespace {

class SexprParser {
public:
    explicit SexprParser(std::string_view text) : text_(text) {}

    ExprForm parse() {
        std::vector<Node> nodes;
        parse_expr(nodes);
        skip_ws();
        if (pos_ != text_.size()) {
            throw ParseError("trailing text in expression");
        }
        return ExprForm(std::move(nodes), variables_);
    }

private:
    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) {
            ++pos_;
        }
    }

    std::string token() {
        skip_ws();
        if (pos_ >= text_.size()) {
            throw ParseError("unexpected end of expression");
        }
        if (text_[pos_] == '(' || text_[pos_] == ')') {
            return std::string(1, text_[pos_++]);
        }
        const std::size_t start = pos_;
        while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_])) &&
               text_[pos_] != '(' && text_[pos_] != ')') {
            ++pos_;
        }
        return std::string(text_.substr(start, pos_ - start));
    }

    void parse_expr(std::vector<Node>& out) {
        const std::string tok = token();
        if (tok == ")") {
            throw ParseError("unexpected ')'");
        }
        if (tok != "(") {
            out.push_back(terminal(tok));
            return;
        }
        const std::string head = token();
        Op op;
        if (head == "+") op = Op::Add;
        else if (head == "-") op = Op::Sub;
        else if (head == "*") op = Op::Mul;
        else if (head == "/") op = Op::Div;
        else if (head == "max") op = Op::Max;
        else if (head == "min") op = Op::Min;
        else throw ParseError("unknown operator '" + head + "'");

        std::vector<std::vector<Node>> args;
        while (true) {
            skip_ws();
            if (pos_ < text_.size() && text_[pos_] == ')') {
                ++pos_;
                break;
            }
            args.emplace_back();
            parse_expr(args.back());
        }
        if (args.size() < 2 || (op == Op::Div && args.size() != 2)) {
            throw ParseError("operator '" + head + "' has the wrong number of arguments");
        }
        // (op a b c) == (op (op a b) c)
        std::vector<Node> folded = std::move(args[0]);
        for (std::size_t i = 1; i < args.size(); ++i) {
            std::vector<Node> next{{op, 0}};
            next.insert(next.end(), folded.begin(), folded.end());
            next.insert(next.end(), args[i].begin(), args[i].end());
            folded = std::move(next);
        }
        out.insert(out.end(), folded.begin(), folded.end());
    }

    Node terminal(const std::string& tok) {
        if (tok.size() > 1 && tok[0] == 'C' &&
            std::all_of(tok.begin() + 1, tok.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
            return {Op::Const, std::stoi(tok.substr(1))};
        }
        if (!std::isalpha(static_cast<unsigned char>(tok[0])) && tok[0] != '_') {
            throw ParseError("invalid terminal '" + tok + "'");
        }
        auto it = std::find(variables_.begin(), variables_.end(), tok);
        if (it == variables_.end()) {
            variables_.push_back(tok);
            return {Op::Var, static_cast<int>(variables_.size() - 1)};
        }
        return {Op::Var, static_cast<int>(it - variables_.begin())};
    }

    std::string_view text_;
    std::size_t pos_ = 0;
    std::vector<std::string> variables_;
};

}  // namespace

ExprForm parse_sexpr(std::string_view text) {
    return SexprParser(text).parse();
}

std::size_t complexity(const ExprForm& form) {
    return form.nodes().size();
}

double evaluate_point(const ExprForm& form, std::span<const double> vars) {
    if (vars.size() != form.variables().size()) {
        throw UnboundVariable("expected " + std::to_string(form.variables().size()) + " variable values");
    }
    std::vector<double> stack;
    const auto& nodes = form.nodes();
    for (std::size_t k = nodes.size(); k-- > 0;) {
        const Node& n = nodes[k];
        if (n.op == Op::Var) {
            stack.push_back(vars[static_cast<std::size_t>(n.index)]);
        } else if (n.op == Op::Const) {
            stack.push_back(form.constants()[static_cast<std::size_t>(n.index)]);
        } else {
            const double a = stack.back();
            stack.pop_back();
            stack.back() = apply(n.op, a, stack.back());
        }
    }
    return stack.back();
}

std::vector<double> evaluate_columns(const ExprForm& form, std::span<const std::vector<double>> columns,
                                     std::size_t length) {
    if (columns.size() != form.variables().size()) {
        throw UnboundVariable("expected one column per form variable");
    }
    for (const auto& c : columns) {
        if (c.size() < length) {
            throw InvalidArgument("column shorter than requested length");
        }
    }
    ColumnEvaluator ev;
    std::vector<double> out;
    ev.run(form.nodes(), columns, form.constants(), length, out);
    return out;
}

TimeSeries evaluate_form(const ExprForm& form, const std::map<std::string, TimeSeries>& sources) {
    const auto used = form.used_variables();
    std::vector<const TimeSeries*> grid_from;
    for (const auto& name : used) {
        auto it = sources.find(name);
        if (it == sources.end()) {
            throw UnboundVariable("variable '" + name + "' has no source series");
        }
        grid_from.push_back(&it->second);
    }
    if (grid_from.empty()) {
        for (const auto& [_, s] : sources) {
            grid_from.push_back(&s);
        }
    }
    if (grid_from.empty()) {
        throw UnboundVariable("no series to define the evaluation grid");
    }
    const int step = grid_from.front()->step_hours();
    Hour from = grid_from.front()->start_hour();
    Hour to = grid_from.front()->end_hour();
    for (const auto* s : grid_from) {
        if (s->step_hours() != step || (s->start_hour() - from) % step != 0) {
            throw MismatchedStep("form sources are not on a common grid");
        }
        from = std::max(from, s->start_hour());
        to = std::min(to, s->end_hour());
    }
    if (from > to) {
        throw EmptyOverlap("form sources do not overlap");
    }
    const auto n = static_cast<std::size_t>((to - from) / step + 1);
    std::vector<std::vector<double>> cols;
    for (const auto& name : form.variables()) {
        if (std::find(used.begin(), used.end(), name) == used.end()) {
            cols.emplace_back(n, 0.0);  // never read
            continue;
        }
        const TimeSeries cut = window(sources.at(name), from, to);
        auto w = cut.values();
        cols.emplace_back(w.begin(), w.end());
    }
    return TimeSeries(from, evaluate_columns(form, cols, n), step);
}

namespace {

struct Affinity {
    bool affine;
    bool depends;
};

Affinity affinity(const std::vector<Node>& nodes, std::size_t& i) {
    const Node n = nodes[i++];
    if (n.op == Op::Const) return {true, true};
    if (n.op == Op::Var) return {true, false};
    const Affinity a = affinity(nodes, i);
    const Affinity b = affinity(nodes, i);
    const bool dep = a.depends || b.depends;
    switch (n.op) {
        case Op::Add:
        case Op::Sub: return {a.affine && b.affine, dep};
        case Op::Mul: return {a.affine && b.affine && !(a.depends && b.depends), dep};
        case Op::Div: return {a.affine && !b.depends, dep};
        default: return {!dep, dep};  // max / min
    }
}

}  // namespace

bool is_linear_in_constants(const ExprForm& form) {
    std::size_t i = 0;
    return affinity(form.nodes(), i).affine;
}

TrainingSet make_training_set(const std::map<std::string, TimeSeries>& sources, const TimeSeries& obs) {
    TrainingSet set;
    const int step = obs.step_hours();
    Hour from = obs.start_hour();
    Hour to = obs.end_hour();
    for (const auto& [name, s] : sources) {
        if (s.step_hours() != step) {
            throw MismatchedStep("source '" + name + "' has a different step");
        }
        if ((s.start_hour() - from) % step != 0) {
            throw EmptyOverlap("source '" + name + "' is off the observation grid");
        }
        from = std::max(from, s.start_hour());
        to = std::min(to, s.end_hour());
    }
    if (from > to) {
        throw EmptyOverlap("sources and observations do not overlap");
    }
    for (const auto& [name, s] : sources) {
        set.variables.push_back(name);
        const TimeSeries cut = window(s, from, to);
        auto w = cut.values();
        set.columns.emplace_back(w.begin(), w.end());
    }
    const TimeSeries cut = window(obs, from, to);
    auto w = cut.values();
    set.obs.assign(w.begin(), w.end());
    return set;
}

namespace {

/// Reorders training columns to follow a form's variable list.
std::vector<std::vector<double>> columns_for(const ExprForm& form, const TrainingSet& data) {
    std::vector<std::vector<double>> cols;
    for (const auto& name : form.variables()) {
        auto it = std::find(data.variables.begin(), data.variables.end(), name);
        if (it == data.variables.end()) {
            const auto used = form.used_variables();
            if (std::find(used.begin(), used.end(), name) != used.end()) {
                throw UnboundVariable("variable '" + name + "' is not in the training set");
            }
            cols.emplace_back(data.size(), 0.0);
            continue;
        }
        cols.push_back(data.columns[static_cast<std::size_t>(it - data.variables.begin())]);
    }
    return cols;
}

bool same_layout(const ExprForm& form, const TrainingSet& data) {
    return form.variables() == data.variables;
}

class SseObjective {
public:
    SseObjective(const ExprForm& form, const TrainingSet& data)
        : nodes_(form.nodes()),
          owned_(same_layout(form, data) ? std::vector<std::vector<double>>{} : columns_for(form, data)),
          columns_(same_layout(form, data) ? std::span<const std::vector<double>>(data.columns)
                                           : std::span<const std::vector<double>>(owned_)),
          obs_(data.obs) {}

    double operator()(std::span<const double> constants) {
        ev_.run(nodes_, columns_, constants, obs_.size(), buf_);
        return sse_of(buf_, obs_);
    }

    const std::vector<double>& predict(std::span<const double> constants) {
        ev_.run(nodes_, columns_, constants, obs_.size(), buf_);
        return buf_;
    }

private:
    const std::vector<Node>& nodes_;
    std::vector<std::vector<double>> owned_;
    std::span<const std::vector<double>> columns_;
    std::span<const double> obs_;
    ColumnEvaluator ev_;
    std::vector<double> buf_;
};

ConstantFit pattern_search(SseObjective& objective, std::vector<double> start, int iterations, double tol) {
    std::vector<double> c = std::move(start);
    std::vector<double> step(c.size());
    for (std::size_t j = 0; j < c.size(); ++j) {
        step[j] = std::max(0.1, 0.1 * std::abs(c[j]));
    }
    double best = objective(c);
    for (int it = 0; it < iterations; ++it) {
        bool moved = false;
        for (std::size_t j = 0; j < c.size(); ++j) {
            const double keep = c[j];
            bool improved = false;
            for (double dir : {1.0, -1.0}) {
                c[j] = keep + dir * step[j];
                const double v = objective(c);
                if (v < best) {
                    best = v;
                    improved = true;
                    break;
                }
            }
            if (improved) {
                step[j] *= 2.0;
                moved = true;
            } else {
                c[j] = keep;
                step[j] *= 0.5;
            }
        }
        bool converged = !moved;
        for (std::size_t j = 0; j < c.size() && converged; ++j) {
            converged = step[j] <= tol * (1.0 + std::abs(c[j]));
        }
        if (converged) {
            break;
        }
    }
    return {c, best};
}

}  // namespace

double form_sse(const ExprForm& form, const TrainingSet& data) {
    SseObjective obj(form, data);
    return obj(form.constants());
}

ConstantFit fit_constants(const ExprForm& form, const TrainingSet& data, const ConstantFitOptions& opts) {
    if (data.size() == 0) {
        throw EmptyOverlap("no training samples");
    }
    SseObjective objective(form, data);
    const std::size_t k = form.constant_slots();
    std::vector<double> zeros(k, 0.0);
    const double zero_sse = objective(zeros);
    if (k == 0) {
        return {{}, zero_sse};
    }

    if (is_linear_in_constants(form)) {
        const std::vector<double> g0 = objective.predict(zeros);
        std::vector<std::vector<double>> basis(k);
        std::vector<double> unit(k, 0.0);
        for (std::size_t s = 0; s < k; ++s) {
            unit[s] = 1.0;
            const auto& gs = objective.predict(unit);
            basis[s].resize(gs.size());
            for (std::size_t t = 0; t < gs.size(); ++t) {
                basis[s][t] = gs[t] - g0[t];
            }
            unit[s] = 0.0;
        }
        std::vector<double> rhs(data.obs.size());
        for (std::size_t t = 0; t < rhs.size(); ++t) {
            rhs[t] = data.obs[t] - g0[t];
        }
        auto c = solve_min_norm(basis, rhs);
        const double sse = objective(c);
        if (std::isfinite(sse) && sse <= zero_sse) {
            return {std::move(c), sse};
        }
        return {zeros, zero_sse};
    }

    Rng rng(opts.seed);
    std::vector<std::vector<double>> starts;
    starts.push_back(zeros);
    std::vector<double> current = form.constants();
    current.resize(k, 0.0);
    if (current != zeros) {
        starts.push_back(current);
    }
    static constexpr double kScales[] = {1.0, 10.0, 100.0};
    for (int r = 0; r < opts.restarts; ++r) {
        std::vector<double> s(k);
        for (auto& v : s) {
            v = rng.normal() * kScales[r % 3];
        }
        starts.push_back(std::move(s));
    }
    ConstantFit best{zeros, zero_sse};
    for (auto& s : starts) {
        auto fit = pattern_search(objective, std::move(s), opts.iterations, opts.tolerance);
        if (fit.sse < best.sse) {
            best = std::move(fit);
        }
    }
    return best;
}

ConstantFit fit_constants(const ExprForm& form, const std::map<std::string, TimeSeries>& sources,
                          const TimeSeries& obs, const ConstantFitOptions& opts) {
    std::map<std::string, TimeSeries> used;
    for (const auto& name : form.used_variables()) {
        auto it = sources.find(name);
        if (it == sources.end()) {
            throw UnboundVariable("variable '" + name + "' has no source series");
        }
        used.emplace(name, it->second);
    }
    return fit_constants(form, make_training_set(used, obs), opts);
}

bool dominates(const ArchiveEntry& a, const ArchiveEntry& b) {
    return a.error <= b.error && a.complexity <= b.complexity &&
           (a.error < b.error || a.complexity < b.complexity);
}

bool ParetoArchive::insert(ArchiveEntry candidate) {
    for (const auto& e : entries_) {
        if (dominates(e, candidate) || (e.error == candidate.error && e.complexity == candidate.complexity)) {
            return false;
        }
    }
    std::erase_if(entries_, [&](const ArchiveEntry& e) { return dominates(candidate, e); });
    entries_.push_back(std::move(candidate));
    return true;
}

std::vector<ArchiveEntry> ParetoArchive::sorted() const {
    auto out = entries_;
    std::stable_sort(out.begin(), out.end(), [](const ArchiveEntry& a, const ArchiveEntry& b) {
        return a.complexity != b.complexity ? a.complexity < b.complexity : a.error < b.error;
    });
    return out;
}

namespace {

struct Gene {
    Op op;
    int var = 0;
    double value = 1.0;
};

using Genome = std::vector<Gene>;

constexpr Op kFunctions[] = {Op::Add, Op::Sub, Op::Mul, Op::Div, Op::Max, Op::Min};

std::size_t genome_end(const Genome& g, std::size_t start) {
    std::size_t need = 1;
    std::size_t i = start;
    while (need > 0) {
        need = need - 1 + (is_terminal(g[i].op) ? 0 : kArity);
        ++i;
    }
    return i;
}

std::size_t genome_depth(const Genome& g) {
    std::vector<std::size_t> open;
    std::size_t best = 0;
    for (const auto& n : g) {
        best = std::max(best, open.size() + 1);
        if (!is_terminal(n.op)) {
            open.push_back(kArity);
            continue;
        }
        while (!open.empty() && --open.back() == 0) {
            open.pop_back();
        }
    }
    return best;
}

ExprForm to_form(const Genome& g, const std::vector<std::string>& vars) {
    std::vector<Node> nodes;
    std::vector<double> consts;
    nodes.reserve(g.size());
    for (const auto& gene : g) {
        if (gene.op == Op::Const) {
            nodes.push_back({Op::Const, static_cast<int>(consts.size())});
            consts.push_back(gene.value);
        } else {
            nodes.push_back({gene.op, gene.op == Op::Var ? gene.var : 0});
        }
    }
    return ExprForm(std::move(nodes), vars, std::move(consts));
}

Genome to_genome(const ExprForm& f) {
    Genome g;
    for (const auto& n : f.nodes()) {
        Gene gene{n.op};
        if (n.op == Op::Var) gene.var = n.index;
        if (n.op == Op::Const) gene.value = f.constants()[static_cast<std::size_t>(n.index)];
        g.push_back(gene);
    }
    return g;
}

class Breeder {
public:
    Breeder(Rng& rng, std::size_t n_vars, int max_depth) : rng_(rng), n_vars_(n_vars), max_depth_(max_depth) {}

    Gene random_terminal() {
        if (rng_.chance(0.7)) {
            return {Op::Var, static_cast<int>(rng_.below(n_vars_)), 1.0};
        }
        return {Op::Const, 0, 1.0};
    }

    void grow(Genome& out, int depth_left, bool full) {
        const bool leaf = depth_left <= 1 || (!full && rng_.chance(0.3));
        if (leaf) {
            out.push_back(random_terminal());
            return;
        }
        out.push_back({kFunctions[rng_.below(std::size(kFunctions))]});
        grow(out, depth_left - 1, full);
        grow(out, depth_left - 1, full);
    }

    Genome crossover(const Genome& a, const Genome& b) {
        for (int attempt = 0; attempt < 5; ++attempt) {
            const std::size_t i = rng_.below(a.size());
            const std::size_t j = rng_.below(b.size());
            Genome child(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(i));
            child.insert(child.end(), b.begin() + static_cast<std::ptrdiff_t>(j),
                         b.begin() + static_cast<std::ptrdiff_t>(genome_end(b, j)));
            child.insert(child.end(), a.begin() + static_cast<std::ptrdiff_t>(genome_end(a, i)), a.end());
            if (static_cast<int>(genome_depth(child)) <= max_depth_) {
                return child;
            }
        }
        return a;
    }

    Genome mutate(const Genome& a) {
        if (rng_.chance(0.5)) {
            Genome child = a;
            const std::size_t i = rng_.below(child.size());
            if (is_terminal(child[i].op)) {
                child[i] = random_terminal();
            } else {
                child[i].op = kFunctions[rng_.below(std::size(kFunctions))];
            }
            return child;
        }
        for (int attempt = 0; attempt < 5; ++attempt) {
            const std::size_t i = rng_.below(a.size());
            Genome sub;
            grow(sub, 1 + static_cast<int>(rng_.below(3)), false);
            Genome child(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(i));
            child.insert(child.end(), sub.begin(), sub.end());
            child.insert(child.end(), a.begin() + static_cast<std::ptrdiff_t>(genome_end(a, i)), a.end());
            if (static_cast<int>(genome_depth(child)) <= max_depth_) {
                return child;
            }
        }
        return a;
    }

private:
    Rng& rng_;
    std::size_t n_vars_;
    int max_depth_;
};

struct Scored {
    Genome genome;
    double sse;
    std::size_t size;
};

bool better(const Scored& a, const Scored& b) {
    return a.sse != b.sse ? a.sse < b.sse : a.size < b.size;
}

}  // namespace

ParetoArchive run_gp(const TrainingSet& data, const GpConfig& config) {
    if (data.size() == 0) {
        throw EmptyOverlap("no training samples for symbolic regression");
    }
    if (data.variables.empty()) {
        throw InvalidArgument("symbolic regression needs at least one source");
    }
    if (config.population < 2 || config.generations < 0 || config.max_depth < 1 || config.tournament < 1) {
        throw InvalidArgument("invalid GP configuration");
    }
    Rng rng(config.seed);
    Breeder breeder(rng, data.variables.size(), config.max_depth);
    const auto pop_size = static_cast<std::size_t>(config.population);

    // Initial population: every lone source, the affine combination of all
    // sources, then ramped half-and-half trees.
    std::vector<Genome> genomes;
    for (std::size_t v = 0; v < data.variables.size(); ++v) {
        genomes.push_back({{Op::Var, static_cast<int>(v)}});
    }
    {
        Genome lin{{Op::Const}};
        for (std::size_t v = 0; v < data.variables.size(); ++v) {
            Genome next{{Op::Add}};
            next.insert(next.end(), lin.begin(), lin.end());
            next.push_back({Op::Mul});
            next.push_back({Op::Const});
            next.push_back({Op::Var, static_cast<int>(v)});
            lin = std::move(next);
        }
        if (static_cast<int>(genome_depth(lin)) <= config.max_depth) {
            genomes.push_back(std::move(lin));
        }
    }
    const int init_max = std::min(config.max_depth, 5);
    for (std::size_t k = 0; genomes.size() < pop_size; ++k) {
        Genome g;
        const int depth = 2 + static_cast<int>(k % static_cast<std::size_t>(std::max(1, init_max - 1)));
        breeder.grow(g, std::min(depth, config.max_depth), k % 2 == 0);
        genomes.push_back(std::move(g));
    }
    genomes.resize(pop_size);

    ParetoArchive archive;
    std::unordered_map<std::string, ConstantFit> cache;

    auto evaluate = [&](std::vector<Genome>& gs) {
        // Seeds are drawn in order before any fitting happens.
        std::vector<std::uint64_t> seeds(gs.size());
        for (auto& s : seeds) {
            s = rng.next();
        }
        std::vector<Scored> scored;
        scored.reserve(gs.size());
        for (std::size_t i = 0; i < gs.size(); ++i) {
            ExprForm form = to_form(gs[i], data.variables);
            const std::string key = to_sexpr(form);
            auto it = cache.find(key);
            if (it == cache.end()) {
                ConstantFitOptions opts = config.constant_fit;
                opts.seed = seeds[i];
                it = cache.emplace(key, fit_constants(form, data, opts)).first;
            }
            ExprForm fitted = form.with_constants(it->second.constants);
            Genome g = to_genome(fitted);
            const double sse = std::isfinite(it->second.sse) ? it->second.sse : std::numeric_limits<double>::max();
            if (std::isfinite(it->second.sse)) {
                archive.insert({fitted, sse, complexity(fitted)});
            }
            scored.push_back({std::move(g), sse, gs[i].size()});
        }
        return scored;
    };

    std::vector<Scored> pop = evaluate(genomes);
    for (int gen = 0; gen < config.generations; ++gen) {
        auto tournament = [&]() -> const Scored& {
            const Scored* best = &pop[rng.below(pop.size())];
            for (int t = 1; t < config.tournament; ++t) {
                const Scored& c = pop[rng.below(pop.size())];
                if (better(c, *best)) {
                    best = &c;
                }
            }
            return *best;
        };
        std::vector<Genome> next;
        for (const auto& e : archive.sorted()) {
            if (next.size() >= pop_size / 10) {
                break;
            }
            next.push_back(to_genome(e.form));
        }
        while (next.size() < pop_size) {
            Genome child;
            if (rng.chance(config.crossover_rate)) {
                const Genome& mother = tournament().genome;
                const Genome& father = tournament().genome;
                child = breeder.crossover(mother, father);
            } else {
                child = tournament().genome;
            }
            if (rng.chance(config.mutation_rate)) {
                child = breeder.mutate(child);
            }
            next.push_back(std::move(child));
        }
        pop = evaluate(next);
    }
    return archive;
}

ParetoArchive run_gp(const std::map<std::string, TimeSeries>& sources, const TimeSeries& obs,
                     const GpConfig& config) {
    return run_gp(make_training_set(sources, obs), config);
}

nlohmann::json archive_to_json(const ParetoArchive& archive) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& e : archive.sorted()) {
        arr.push_back({{"form", to_sexpr(e.form)},
                       {"constants", e.form.constants()},
                       {"error", e.error},
                       {"complexity", e.complexity}});
    }
    return arr;
}

}  // namespace floodens
