#pragma once

// Non-negative least squares, Lawson & Hanson active-set method.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "c3o/error.hpp"

namespace c3o {

struct NnlsResult {
    Eigen::VectorXd x;
    double residual_norm = 0.0;
    int iterations = 0;
    bool converged = true;
};

/// Minimizes ||A x - b|| subject to x >= 0. Columns are rescaled to unit norm
/// internally; the returned solution is in the caller's units.
inline NnlsResult solve_nnls(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                             int max_iterations = 0) {
    const Eigen::Index m = a.rows();
    const Eigen::Index n = a.cols();
    if (m == 0) throw EmptyTrainingSet();
    if (b.size() != m) throw PreconditionViolation("nnls: rhs length mismatch");
    if (max_iterations <= 0) max_iterations = static_cast<int>(30 * std::max<Eigen::Index>(n, 1));

    Eigen::VectorXd col_scale = a.colwise().norm().transpose();
    Eigen::MatrixXd as = a;
    for (Eigen::Index j = 0; j < n; ++j) {
        if (col_scale(j) > 0.0) {
            as.col(j) /= col_scale(j);
        }
    }

    std::vector<bool> passive(static_cast<std::size_t>(n), false);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd w = as.transpose() * (b - as * x);
    const double tol = 10.0 * std::numeric_limits<double>::epsilon() *
                       static_cast<double>(std::max(m, n)) * std::max(1.0, b.norm());

    auto solve_passive = [&](Eigen::VectorXd& z) {
        std::vector<Eigen::Index> idx;
        for (Eigen::Index j = 0; j < n; ++j)
            if (passive[static_cast<std::size_t>(j)]) idx.push_back(j);
        Eigen::MatrixXd sub(m, static_cast<Eigen::Index>(idx.size()));
        for (std::size_t k = 0; k < idx.size(); ++k) sub.col(static_cast<Eigen::Index>(k)) = as.col(idx[k]);
        const Eigen::VectorXd s = sub.completeOrthogonalDecomposition().solve(b);
        z.setZero(n);
        for (std::size_t k = 0; k < idx.size(); ++k) z(idx[k]) = s(static_cast<Eigen::Index>(k));
    };

    NnlsResult result;
    int iter = 0;
    while (iter < max_iterations) {
        // most violated dual constraint among the active (zero) set
        Eigen::Index best = -1;
        double wmax = tol;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (!passive[static_cast<std::size_t>(j)] && col_scale(j) > 0.0 && w(j) > wmax) {
                wmax = w(j);
                best = j;
            }
        }
        if (best < 0) break;
        passive[static_cast<std::size_t>(best)] = true;

        Eigen::VectorXd z;
        while (true) {
            ++iter;
            solve_passive(z);
            bool feasible = true;
            for (Eigen::Index j = 0; j < n; ++j) {
                if (passive[static_cast<std::size_t>(j)] && z(j) <= 0.0) feasible = false;
            }
            if (feasible || iter >= max_iterations) break;

            double alpha = std::numeric_limits<double>::infinity();
            for (Eigen::Index j = 0; j < n; ++j) {
                if (passive[static_cast<std::size_t>(j)] && z(j) <= 0.0) {
                    alpha = std::min(alpha, x(j) / (x(j) - z(j)));
                }
            }
            x += alpha * (z - x);
            for (Eigen::Index j = 0; j < n; ++j) {
                if (passive[static_cast<std::size_t>(j)] && x(j) <= tol) {
                    passive[static_cast<std::size_t>(j)] = false;
                    x(j) = 0.0;
                }
            }
        }
        for (Eigen::Index j = 0; j < n; ++j) {
            x(j) = passive[static_cast<std::size_t>(j)] ? std::max(z(j), 0.0) : 0.0;
        }
        w = as.transpose() * (b - as * x);
    }
    result.converged = iter < max_iterations;
    result.iterations = iter;

    result.x.resize(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        result.x(j) = col_scale(j) > 0.0 ? x(j) / col_scale(j) : 0.0;
    }
    result.residual_norm = (a * result.x - b).norm();
    return result;
}

}  // namespace c3o
