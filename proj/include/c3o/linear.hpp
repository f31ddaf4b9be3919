#pragma once

#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "c3o/error.hpp"
#include "c3o/feature_matrix.hpp"

namespace c3o {

/// Ordinary least squares with intercept.
struct LinearRegression {
    double intercept = 0.0;
    std::vector<double> coefficients;

    double operator()(std::span<const double> x) const {
        double v = intercept;
        for (std::size_t j = 0; j < coefficients.size(); ++j) v += coefficients[j] * x[j];
        return v;
    }
};

namespace detail {

/// Least squares on a dense design (rows x cols) with intercept. Columns are
/// centered and scaled to unit norm before a complete orthogonal
/// decomposition, which yields the minimum-norm solution (in the scaled
/// basis) when the system is rank deficient. Constant columns get a zero
/// coefficient.
inline LinearRegression least_squares_with_intercept(const Eigen::MatrixXd& design,
                                                     std::span<const double> y) {
    const auto n = design.rows();
    const auto p = design.cols();
    if (n == 0) throw EmptyTrainingSet();

    Eigen::Map<const Eigen::VectorXd> target(y.data(), n);
    const double y_mean = target.mean();
    const Eigen::RowVectorXd x_mean = design.colwise().mean();

    Eigen::MatrixXd centered = design.rowwise() - x_mean;
    Eigen::VectorXd scale = centered.colwise().norm().transpose();
    for (Eigen::Index j = 0; j < p; ++j) {
        // numerically constant column
        if (scale(j) <= 1e-12 * design.col(j).norm() || scale(j) == 0.0) {
            scale(j) = 0.0;
            centered.col(j).setZero();
        } else {
            centered.col(j) /= scale(j);
        }
    }

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    if (p > 0 && n > 1 && scale.maxCoeff() > 0.0) {
        const Eigen::VectorXd yc = target.array() - y_mean;
        Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(centered);
        beta = cod.solve(yc);
    }

    LinearRegression model;
    model.coefficients.resize(static_cast<std::size_t>(p));
    double intercept = y_mean;
    for (Eigen::Index j = 0; j < p; ++j) {
        const double b = scale(j) > 0.0 ? beta(j) / scale(j) : 0.0;
        model.coefficients[static_cast<std::size_t>(j)] = b;
        intercept -= b * x_mean(j);
    }
    model.intercept = intercept;
    return model;
}

}  // namespace detail

/// Fits on every column of `x`.
inline LinearRegression fit_linear(const FeatureMatrix& x, std::span<const double> y) {
    if (x.rows() == 0) throw EmptyTrainingSet();
    if (y.size() != x.rows()) throw PreconditionViolation("fit_linear: target length mismatch");
    Eigen::MatrixXd design(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j) design(i, j) = x(i, j);
    return detail::least_squares_with_intercept(design, y);
}

/// Polynomial in one variable, stored as coefficients of (v / scale)^k.
struct Polynomial {
    std::vector<double> coefficients;  // ascending powers
    double scale = 1.0;

    double operator()(double v) const {
        const double u = v / scale;
        double acc = 0.0;
        for (auto it = coefficients.rbegin(); it != coefficients.rend(); ++it) acc = acc * u + *it;
        return acc;
    }

    std::size_t degree() const noexcept {
        return coefficients.empty() ? 0 : coefficients.size() - 1;
    }
};

/// Least-squares polynomial of the given degree.
inline Polynomial fit_polynomial(std::span<const double> v, std::span<const double> y,
                                 std::size_t degree) {
    if (v.empty()) throw EmptyTrainingSet();
    double scale = 0.0;
    for (const double x : v) scale = std::max(scale, std::abs(x));
    if (scale == 0.0) scale = 1.0;

    Eigen::MatrixXd powers(static_cast<Eigen::Index>(v.size()), static_cast<Eigen::Index>(degree));
    for (std::size_t i = 0; i < v.size(); ++i) {
        double u = 1.0;
        for (std::size_t k = 0; k < degree; ++k) {
            u *= v[i] / scale;
            powers(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = u;
        }
    }
    const auto lin = detail::least_squares_with_intercept(powers, y);
    Polynomial poly;
    poly.scale = scale;
    poly.coefficients.push_back(lin.intercept);
    poly.coefficients.insert(poly.coefficients.end(), lin.coefficients.begin(), lin.coefficients.end());
    return poly;
}

}  // namespace c3o
