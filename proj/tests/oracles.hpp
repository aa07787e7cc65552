#pragma once

// Independent reference implementations the library is checked against.
// They share no code with the library and favour obviousness over speed.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <vector>

namespace oracle {

/// Minimum cost over every monotone warping path, found by explicit enumeration.
inline double dtw_brute_force(const std::vector<double>& a, const std::vector<double>& b) {
    double best = std::numeric_limits<double>::infinity();
    std::function<void(std::size_t, std::size_t, double)> walk = [&](std::size_t i, std::size_t j, double cost) {
        cost += std::abs(a[i] - b[j]);
        if (i + 1 == a.size() && j + 1 == b.size()) {
            best = std::min(best, cost);
            return;
        }
        if (i + 1 < a.size()) {
            walk(i + 1, j, cost);
        }
        if (j + 1 < b.size()) {
            walk(i, j + 1, cost);
        }
        if (i + 1 < a.size() && j + 1 < b.size()) {
            walk(i + 1, j + 1, cost);
        }
    };
    walk(0, 0, 0.0);
    return best;
}

struct NormalSolution {
    std::vector<double> coefficients;
    double intercept = 0.0;
    double sse = 0.0;
};

/**
 * Least squares with intercept through the normal equations (X'X) beta = X'y,
 * solved by Gauss-Jordan elimination with partial pivoting. Only meant for
 * well-conditioned designs.
 */
inline NormalSolution least_squares_normal(const std::vector<std::vector<double>>& columns,
                                           const std::vector<double>& y) {
    const std::size_t p = columns.size() + 1;
    const std::size_t n = y.size();
    auto x = [&](std::size_t row, std::size_t col) { return col == 0 ? 1.0 : columns[col - 1][row]; };
    std::vector<std::vector<double>> m(p, std::vector<double>(p + 1, 0.0));
    for (std::size_t r = 0; r < p; ++r) {
        for (std::size_t c = 0; c < p; ++c) {
            for (std::size_t k = 0; k < n; ++k) {
                m[r][c] += x(k, r) * x(k, c);
            }
        }
        for (std::size_t k = 0; k < n; ++k) {
            m[r][p] += x(k, r) * y[k];
        }
    }
    for (std::size_t col = 0; col < p; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < p; ++r) {
            if (std::abs(m[r][col]) > std::abs(m[pivot][col])) {
                pivot = r;
            }
        }
        std::swap(m[col], m[pivot]);
        for (std::size_t r = 0; r < p; ++r) {
            if (r == col) {
                continue;
            }
            const double f = m[r][col] / m[col][col];
            for (std::size_t c = col; c <= p; ++c) {
                m[r][c] -= f * m[col][c];
            }
        }
    }
    NormalSolution out;
    out.intercept = m[0][p] / m[0][0];
    for (std::size_t i = 1; i < p; ++i) {
        out.coefficients.push_back(m[i][p] / m[i][i]);
    }
    for (std::size_t k = 0; k < n; ++k) {
        double fit = out.intercept;
        for (std::size_t i = 1; i < p; ++i) {
            fit += out.coefficients[i - 1] * x(k, i);
        }
        out.sse += (y[k] - fit) * (y[k] - fit);
    }
    return out;
}

/// Smallest value of f over `steps` evenly spaced points of [lo, hi].
inline double grid_scan_min(const std::function<double(double)>& f, double lo, double hi, int steps) {
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < steps; ++i) {
        const double x = lo + (hi - lo) * i / (steps - 1);
        best = std::min(best, f(x));
    }
    return best;
}

/**
 * Hourly triangle 100 -> 200 over hours 0..5 and back to 100 over 5..10.
 * Against a 160 cm threshold the crossings solve 100 + 20 t = 160 and
 * 200 - 20 (t - 5) = 160, i.e. T_L = 3 and T_R = 7, so W = 4 and D = 0.5.
 */
inline std::vector<double> triangle_series() {
    std::vector<double> v;
    for (int t = 0; t <= 10; ++t) {
        v.push_back(t <= 5 ? 100.0 + 20.0 * t : 200.0 - 20.0 * (t - 5));
    }
    return v;
}

struct TrianglePeak {
    double H = 200.0;
    double T = 5.0;
    double T_L = 3.0;
    double T_R = 7.0;
    double W = 4.0;
    double D = 0.5;
};

}  // namespace oracle
