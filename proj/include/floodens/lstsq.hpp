#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace floodens {

/// Result of an ordinary least-squares fit `response ~ intercept + sum c_i * column_i`.
struct AffineFit {
    std::vector<double> coefficients;
    double intercept = 0.0;
    double sse = 0.0;
    std::size_t rank = 0;
};

/**
 * Least squares with a free intercept. The columns are centred, so the
 * intercept never enters the norm; rank-deficient designs resolve to the
 * minimum-norm coefficient vector. All columns must match response length.
 */
AffineFit fit_affine(std::span<const std::vector<double>> columns, std::span<const double> response);

/// Minimum-norm least squares without intercept.
std::vector<double> solve_min_norm(std::span<const std::vector<double>> columns,
                                   std::span<const double> response);

}  // namespace floodens
