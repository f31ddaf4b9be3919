#pragma once

// Least-squares gradient boosting over depth-limited regression trees.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "c3o/error.hpp"
#include "c3o/feature_matrix.hpp"

namespace c3o {

struct GbmParams {
    int n_rounds = 100;
    double learning_rate = 0.1;
    int max_depth = 3;
    std::size_t min_leaf = 1;
};

/// Binary regression tree; rows go left when x[feature] <= threshold.
class RegressionTree {
public:
    struct Node {
        int feature = -1;  // -1 marks a leaf
        double threshold = 0.0;
        int left = -1;
        int right = -1;
        double value = 0.0;
    };

    double operator()(std::span<const double> x) const {
        int i = 0;
        while (nodes_[static_cast<std::size_t>(i)].feature >= 0) {
            const auto& n = nodes_[static_cast<std::size_t>(i)];
            i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
        }
        return nodes_[static_cast<std::size_t>(i)].value;
    }

    const std::vector<Node>& nodes() const noexcept { return nodes_; }
    std::size_t leaf_count() const {
        return static_cast<std::size_t>(
            std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.feature < 0; }));
    }

    /// Greedy variance-reduction tree on `targets`. `sorted_rows[f]` holds all
    /// row indices ordered by (x[f], row). Ties in gain keep the lowest feature
    /// index, then the lowest threshold.
    static RegressionTree fit(const FeatureMatrix& x, std::span<const double> targets,
                              const std::vector<std::vector<std::size_t>>& sorted_rows,
                              int max_depth, std::size_t min_leaf) {
        RegressionTree tree;
        std::vector<std::size_t> all(x.rows());
        std::iota(all.begin(), all.end(), std::size_t{0});
        std::vector<char> member(x.rows(), 0);
        tree.grow(x, targets, sorted_rows, all, 0, std::max(max_depth, 0), std::max<std::size_t>(min_leaf, 1),
                  member);
        return tree;
    }

private:
    // `rows` is in ascending row order.
    int grow(const FeatureMatrix& x, std::span<const double> targets,
             const std::vector<std::vector<std::size_t>>& sorted_rows,
             const std::vector<std::size_t>& rows, int depth, int max_depth, std::size_t min_leaf,
             std::vector<char>& member) {
        const int id = static_cast<int>(nodes_.size());
        nodes_.emplace_back();

        double sum = 0.0;
        for (const auto r : rows) sum += targets[r];
        const double n = static_cast<double>(rows.size());
        const double mean = sum / n;
        nodes_[static_cast<std::size_t>(id)].value = mean;

        if (depth >= max_depth || rows.size() < 2 * min_leaf) return id;

        double sse = 0.0;
        for (const auto r : rows) sse += (targets[r] - mean) * (targets[r] - mean);
        if (!(sse > 0.0)) return id;

        for (const auto r : rows) member[r] = 1;

        // maximize sL^2/nL + sR^2/nR, equivalently minimize child SSE
        const double parent_score = sum * sum / n;
        double best_gain = 0.0;
        int best_feature = -1;
        double best_threshold = 0.0;
        std::vector<std::size_t> order;
        order.reserve(rows.size());
        for (std::size_t f = 0; f < x.cols(); ++f) {
            order.clear();
            for (const auto r : sorted_rows[f])
                if (member[r]) order.push_back(r);
            double left_sum = 0.0;
            for (std::size_t k = 0; k + 1 < order.size(); ++k) {
                left_sum += targets[order[k]];
                const std::size_t n_left = k + 1;
                const std::size_t n_right = order.size() - n_left;
                if (n_left < min_leaf) continue;
                if (n_right < min_leaf) break;
                const double lo = x(order[k], f);
                const double hi = x(order[k + 1], f);
                if (!(lo < hi)) continue;
                const double right_sum = sum - left_sum;
                const double gain = left_sum * left_sum / static_cast<double>(n_left) +
                                    right_sum * right_sum / static_cast<double>(n_right) -
                                    parent_score;
                if (gain > best_gain) {
                    best_gain = gain;
                    best_feature = static_cast<int>(f);
                    best_threshold = lo + (hi - lo) / 2.0;
                }
            }
        }
        for (const auto r : rows) member[r] = 0;

        // gains below rounding noise of the node's SSE are not real splits
        if (best_feature < 0 || best_gain <= 1e-12 * sse) return id;

        std::vector<std::size_t> left_rows, right_rows;
        for (const auto r : rows) {
            (x(r, static_cast<std::size_t>(best_feature)) <= best_threshold ? left_rows : right_rows)
                .push_back(r);
        }
        const int left = grow(x, targets, sorted_rows, left_rows, depth + 1, max_depth, min_leaf, member);
        const int right = grow(x, targets, sorted_rows, right_rows, depth + 1, max_depth, min_leaf, member);
        auto& node = nodes_[static_cast<std::size_t>(id)];
        node.feature = best_feature;
        node.threshold = best_threshold;
        node.left = left;
        node.right = right;
        return id;
    }

    std::vector<Node> nodes_;
};

class GradientBoosting {
public:
    GradientBoosting() = default;
    GradientBoosting(double base, double learning_rate, std::vector<RegressionTree> trees)
        : base_(base), learning_rate_(learning_rate), trees_(std::move(trees)) {}

    double operator()(std::span<const double> x) const { return predict_rounds(x, trees_.size()); }

    /// Prediction using only the first `rounds` trees.
    double predict_rounds(std::span<const double> x, std::size_t rounds) const {
        double f = base_;
        const auto end = std::min(rounds, trees_.size());
        for (std::size_t t = 0; t < end; ++t) f += learning_rate_ * trees_[t](x);
        return f;
    }

    double base() const noexcept { return base_; }
    double learning_rate() const noexcept { return learning_rate_; }
    const std::vector<RegressionTree>& trees() const noexcept { return trees_; }

private:
    double base_ = 0.0;
    double learning_rate_ = 0.1;
    std::vector<RegressionTree> trees_;
};

/// F_0 = mean(y); each round fits a tree to the residuals y - F_{t-1} and adds
/// learning_rate times its output. Deterministic, no subsampling.
inline GradientBoosting fit_gbm(const FeatureMatrix& x, std::span<const double> y,
                                const GbmParams& params = {}) {
    const std::size_t n = x.rows();
    if (n == 0) throw EmptyTrainingSet();
    if (y.size() != n) throw PreconditionViolation("fit_gbm: target length mismatch");
    if (params.n_rounds < 0 || !(params.learning_rate > 0.0)) {
        throw PreconditionViolation("fit_gbm: n_rounds must be >= 0 and learning_rate > 0");
    }

    double sum = 0.0;
    for (const double v : y) sum += v;
    const double base = sum / static_cast<double>(n);

    std::vector<std::vector<std::size_t>> sorted(x.cols());
    for (std::size_t f = 0; f < x.cols(); ++f) {
        auto& order = sorted[f];
        order.resize(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return x(a, f) < x(b, f); });
    }

    std::vector<double> current(n, base);
    std::vector<double> residual(n);
    std::vector<RegressionTree> trees;
    trees.reserve(static_cast<std::size_t>(params.n_rounds));
    for (int t = 0; t < params.n_rounds; ++t) {
        for (std::size_t i = 0; i < n; ++i) residual[i] = y[i] - current[i];
        auto tree = RegressionTree::fit(x, residual, sorted, params.max_depth, params.min_leaf);
        for (std::size_t i = 0; i < n; ++i) current[i] += params.learning_rate * tree(x.row(i));
        trees.push_back(std::move(tree));
    }
    return GradientBoosting(base, params.learning_rate, std::move(trees));
}

}  // namespace c3o
