#include "floodens/lstsq.hpp"

#include "floodens/errors.hpp"

#include <Eigen/Dense>

namespace floodens {

namespace {

constexpr double kRankThreshold = 1e-10;

void check_shape(std::span<const std::vector<double>> columns, std::span<const double> response) {
    if (response.empty()) {
        throw DegenerateDesign("least squares over an empty sample");
    }
    for (const auto& c : columns) {
        if (c.size() != response.size()) {
            throw InvalidArgument("least squares column length mismatch");
        }
    }
}

Eigen::VectorXd min_norm(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, std::size_t* rank) {
    if (a.cols() == 0) {
        if (rank) {
            *rank = 0;
        }
        return {};
    }
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod;
    cod.setThreshold(kRankThreshold);
    cod.compute(a);
    if (rank) {
        *rank = static_cast<std::size_t>(cod.rank());
    }
    return cod.solve(b);
}

}  // namespace

AffineFit fit_affine(std::span<const std::vector<double>> columns, std::span<const double> response) {
    check_shape(columns, response);
    const auto n = static_cast<Eigen::Index>(response.size());
    const auto k = static_cast<Eigen::Index>(columns.size());

    Eigen::Map<const Eigen::VectorXd> y(response.data(), n);
    const double y_mean = y.mean();
    Eigen::MatrixXd x(n, k);
    Eigen::VectorXd x_mean(k);
    for (Eigen::Index j = 0; j < k; ++j) {
        x.col(j) = Eigen::Map<const Eigen::VectorXd>(columns[j].data(), n);
        x_mean(j) = x.col(j).mean();
        x.col(j).array() -= x_mean(j);
    }

    AffineFit fit;
    const Eigen::VectorXd yc = y.array() - y_mean;
    const Eigen::VectorXd c = min_norm(x, yc, &fit.rank);
    fit.coefficients.assign(c.data(), c.data() + c.size());
    fit.intercept = y_mean - (k > 0 ? x_mean.dot(c) : 0.0);

    double sse = 0.0;
    for (Eigen::Index t = 0; t < n; ++t) {
        double pred = fit.intercept;
        for (Eigen::Index j = 0; j < k; ++j) {
            pred += c(j) * columns[j][t];
        }
        const double r = response[t] - pred;
        sse += r * r;
    }
    fit.sse = sse;
    return fit;
}

std::vector<double> solve_min_norm(std::span<const std::vector<double>> columns,
                                   std::span<const double> response) {
    check_shape(columns, response);
    const auto n = static_cast<Eigen::Index>(response.size());
    const auto k = static_cast<Eigen::Index>(columns.size());
    Eigen::MatrixXd x(n, k);
    for (Eigen::Index j = 0; j < k; ++j) {
        x.col(j) = Eigen::Map<const Eigen::VectorXd>(columns[j].data(), n);
    }
    Eigen::Map<const Eigen::VectorXd> y(response.data(), n);
    const Eigen::VectorXd c = min_norm(x, y, nullptr);
    return {c.data(), c.data() + c.size()};
}

}  // namespace floodens
