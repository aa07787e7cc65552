#include "floodens/markov.hpp"

#include "floodens/errors.hpp"

#include <string>

namespace floodens {

std::vector<std::vector<double>> transition_counts(std::span<const std::size_t> history, std::size_t n_forms) {
    if (n_forms == 0) {
        throw InvalidArgument("transition matrix needs at least one form");
    }
    std::vector<std::vector<double>> counts(n_forms, std::vector<double>(n_forms, 0.0));
    for (std::size_t i = 0; i < history.size(); ++i) {
        if (history[i] >= n_forms) {
            throw UnknownState("form index " + std::to_string(history[i]) + " out of range");
        }
        if (i > 0) {
            counts[history[i - 1]][history[i]] += 1.0;
        }
    }
    return counts;
}

TransitionMatrix markov_fit(std::span<const std::size_t> history, std::size_t n_forms) {
    if (history.size() < 2) {
        throw HistoryTooShort("transition fit needs at least 2 winners, got " + std::to_string(history.size()));
    }
    TransitionMatrix m = transition_counts(history, n_forms);
    for (auto& row : m) {
        double total = 0.0;
        for (double& c : row) {
            c += 1.0;
            total += c;
        }
        for (double& c : row) {
            c /= total;
        }
    }
    return m;
}

std::size_t markov_predict(const TransitionMatrix& matrix, std::size_t last) {
    if (last >= matrix.size() || matrix[last].empty()) {
        throw UnknownState("state " + std::to_string(last) + " is not in the transition matrix");
    }
    const auto& row = matrix[last];
    std::size_t best = 0;
    for (std::size_t j = 1; j < row.size(); ++j) {
        if (row[j] > row[best]) {
            best = j;
        }
    }
    return best;
}

}  // namespace floodens
