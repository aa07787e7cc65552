#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace floodens {

/// Row-stochastic matrix; row i holds P(next | current = i).
using TransitionMatrix = std::vector<std::vector<double>>;

/// Adjacent-pair transition counts of a winner history (form indices < n_forms).
std::vector<std::vector<double>> transition_counts(std::span<const std::size_t> history, std::size_t n_forms);

/// Transition probabilities with add-one smoothing. Needs >= 2 history entries.
TransitionMatrix markov_fit(std::span<const std::size_t> history, std::size_t n_forms);

/// Most probable successor of `last`; ties go to the lowest index. Throws UnknownState.
std::size_t markov_predict(const TransitionMatrix& matrix, std::size_t last);

}  // namespace floodens
