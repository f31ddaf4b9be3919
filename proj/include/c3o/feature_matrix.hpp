#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "c3o/error.hpp"

namespace c3o {

enum class ColumnRole { scale_out, numeric_context, one_hot_context };

/// Dense row-major numeric view of a training set. Exactly one column carries
/// the scale-out; the first numeric context column, when present, is the
/// dataset/problem size.
class FeatureMatrix {
public:
    FeatureMatrix() = default;

    FeatureMatrix(std::size_t rows, std::vector<ColumnRole> roles,
                  std::vector<std::string> names, std::vector<double> values,
                  std::uint64_t fingerprint = 0)
        : rows_(rows),
          roles_(std::move(roles)),
          names_(std::move(names)),
          values_(std::move(values)),
          fingerprint_(fingerprint) {
        if (names_.size() != roles_.size()) {
            throw PreconditionViolation("feature matrix: names and roles differ in length");
        }
        if (values_.size() != rows_ * roles_.size()) {
            throw PreconditionViolation("feature matrix: value count does not match shape");
        }
        std::size_t n_scale = 0;
        for (std::size_t c = 0; c < roles_.size(); ++c) {
            if (roles_[c] == ColumnRole::scale_out) {
                scale_out_column_ = c;
                ++n_scale;
            } else if (roles_[c] == ColumnRole::numeric_context && !size_column_) {
                size_column_ = c;
            }
        }
        if (n_scale != 1) {
            throw PreconditionViolation("feature matrix needs exactly one scale-out column");
        }
        for (const double v : values_) {
            if (!std::isfinite(v)) throw PreconditionViolation("feature matrix has non-finite entry");
        }
    }

    /// Single scale-out column plus optional numeric context columns.
    static FeatureMatrix from_columns(std::span<const double> scale_outs,
                                      const std::vector<std::vector<double>>& context = {}) {
        const std::size_t n = scale_outs.size();
        std::vector<ColumnRole> roles{ColumnRole::scale_out};
        std::vector<std::string> names{"instance_count"};
        for (std::size_t j = 0; j < context.size(); ++j) {
            if (context[j].size() != n) throw PreconditionViolation("column length mismatch");
            roles.push_back(ColumnRole::numeric_context);
            names.push_back("x" + std::to_string(j));
        }
        std::vector<double> values;
        values.reserve(n * roles.size());
        for (std::size_t i = 0; i < n; ++i) {
            values.push_back(scale_outs[i]);
            for (const auto& col : context) values.push_back(col[i]);
        }
        return FeatureMatrix(n, std::move(roles), std::move(names), std::move(values));
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return roles_.size(); }
    std::uint64_t fingerprint() const noexcept { return fingerprint_; }
    const std::vector<ColumnRole>& roles() const noexcept { return roles_; }
    const std::vector<std::string>& names() const noexcept { return names_; }
    std::size_t scale_out_column() const noexcept { return scale_out_column_; }
    std::optional<std::size_t> size_column() const noexcept { return size_column_; }

    double operator()(std::size_t r, std::size_t c) const noexcept {
        assert(r < rows_ && c < cols());
        return values_[r * cols() + c];
    }

    std::span<const double> row(std::size_t r) const noexcept {
        return {values_.data() + r * cols(), cols()};
    }

    FeatureMatrix select_rows(std::span<const std::size_t> indices) const {
        std::vector<double> values;
        values.reserve(indices.size() * cols());
        for (const auto r : indices) {
            const auto src = row(r);
            values.insert(values.end(), src.begin(), src.end());
        }
        return FeatureMatrix(indices.size(), roles_, names_, std::move(values), fingerprint_);
    }

private:
    std::size_t rows_ = 0;
    std::vector<ColumnRole> roles_;
    std::vector<std::string> names_;
    std::vector<double> values_;
    std::uint64_t fingerprint_ = 0;
    std::size_t scale_out_column_ = 0;
    std::optional<std::size_t> size_column_;
};

/// One record encoded with a specific encoder, tagged with its fingerprint.
struct EncodedRow {
    std::vector<double> values;
    std::uint64_t fingerprint = 0;
};

}  // namespace c3o
