#pragma once

// Runtime regressors behind one fit/predict contract: gradient boosting (GBM),
// the optimistic scale-out x inputs decomposition (BOM, OGB) and the Ernest
// parametric baseline.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iterator>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "c3o/detail/text.hpp"
#include "c3o/error.hpp"
#include "c3o/feature_matrix.hpp"
#include "c3o/gbm.hpp"
#include "c3o/linear.hpp"
#include "c3o/nnls.hpp"

namespace c3o {

inline constexpr double kMinRuntimeMs = 1.0;

/// Runtimes are positive; raw model output below 1 ms (or NaN) maps to 1 ms.
inline double clamp_runtime(double raw) {
    if (std::isnan(raw) || raw < kMinRuntimeMs) return kMinRuntimeMs;
    return std::min(raw, std::numeric_limits<double>::max());
}

/// Type-erased trained regressor. Immutable; safe for concurrent prediction.
class FittedModel {
public:
    FittedModel() = default;

    template <typename Model>
    FittedModel(std::string id, std::uint64_t fingerprint, Model model)
        : id_(std::move(id)),
          fingerprint_(fingerprint),
          impl_(std::make_shared<Holder<Model>>(std::move(model))) {}

    const std::string& id() const noexcept { return id_; }
    std::uint64_t fingerprint() const noexcept { return fingerprint_; }
    bool valid() const noexcept { return static_cast<bool>(impl_); }

    /// Unclamped model output for an encoded row.
    double raw(std::span<const double> row) const { return impl_->call(row); }

    /// Access to the trained parameters when the concrete type is known.
    template <typename Model>
    const Model* as() const {
        const auto* h = dynamic_cast<const Holder<Model>*>(impl_.get());
        return h ? &h->model : nullptr;
    }

private:
    struct Concept {
        virtual ~Concept() = default;
        virtual double call(std::span<const double> row) const = 0;
    };
    template <typename Model>
    struct Holder final : Concept {
        explicit Holder(Model m) : model(std::move(m)) {}
        double call(std::span<const double> row) const override { return model(row); }
        Model model;
    };

    std::string id_;
    std::uint64_t fingerprint_ = 0;
    std::shared_ptr<const Concept> impl_;
};

inline double predict(const FittedModel& model, const EncodedRow& row) {
    if (row.fingerprint != model.fingerprint()) {
        throw SchemaFingerprintMismatch("record encoding does not match the schema model '" +
                                        model.id() + "' was trained on");
    }
    return clamp_runtime(model.raw(row.values));
}

/// Prediction for row `r` of a matrix produced by the same encoder.
inline double predict(const FittedModel& model, const FeatureMatrix& x, std::size_t r) {
    if (x.fingerprint() != model.fingerprint()) {
        throw SchemaFingerprintMismatch("feature matrix does not match model '" + model.id() + "'");
    }
    return clamp_runtime(model.raw(x.row(r)));
}

// ---------------------------------------------------------------------------
// Scale-out to speedup models

/// Records that agree on every feature except the scale-out.
struct ScaleOutGroup {
    std::vector<double> scale_outs;
    std::vector<double> runtimes;
};

/// ssm_factor(s) = poly(s) / poly(1).
struct PolySpeedup {
    Polynomial poly;
    double at_reference = 1.0;

    double factor(double s) const { return s == 1.0 ? 1.0 : poly(s) / at_reference; }
};

/// ssm_factor(s) = g(s) / g(1) for a boosted 1-D model g.
struct BoostedSpeedup {
    GradientBoosting model;
    double at_reference = 1.0;

    double factor(double s) const {
        if (s == 1.0) return 1.0;
        const double x[1] = {s};
        return model(x) / at_reference;
    }
};

/// Used when no group shows any scale-out variation (boosted SSM only).
struct FlatSpeedup {
    double factor(double) const { return 1.0; }
};

using SpeedupModel = std::variant<FlatSpeedup, PolySpeedup, BoostedSpeedup>;

inline double speedup_factor(const SpeedupModel& m, double s) {
    return std::visit([s](const auto& v) { return v.factor(s); }, m);
}

namespace detail {

struct SpeedupSamples {
    std::vector<double> scale_outs;
    std::vector<double> normalized;
    std::size_t distinct = 0;
};

/// Normalizes every group by its level at one common reference scale-out
/// (the smallest one seen in any qualifying group) and pools the pairs.
/// Groups need not contain the reference: group levels and a shared
/// per-scale-out effect are fit jointly in log space,
///
///     log t_i = a_group(i) + h_s(i),   h_reference = 0,
///
/// and each runtime is divided by exp(a_group). A group observed at the
/// reference on noise-free data gets exactly its runtime there. Groups with
/// a single distinct scale-out are skipped.
inline SpeedupSamples pool_groups(std::span<const ScaleOutGroup> groups) {
    SpeedupSamples out;
    std::vector<const ScaleOutGroup*> used;
    std::set<double> distinct;
    for (const auto& g : groups) {
        if (g.scale_outs.size() != g.runtimes.size()) {
            throw PreconditionViolation("scale-out group: length mismatch");
        }
        if (g.scale_outs.empty()) continue;
        const auto [lo, hi] = std::minmax_element(g.scale_outs.begin(), g.scale_outs.end());
        if (*lo == *hi) continue;
        for (const double t : g.runtimes)
            if (!(t > 0.0) || !std::isfinite(t)) throw PreconditionViolation("scale-out group: non-positive runtime");
        used.push_back(&g);
        distinct.insert(g.scale_outs.begin(), g.scale_outs.end());
    }
    out.distinct = distinct.size();
    if (used.empty()) return out;

    // column layout: one level per group, then one effect per non-reference scale-out
    std::map<double, Eigen::Index> effect_col;
    for (auto it = std::next(distinct.begin()); it != distinct.end(); ++it) {
        effect_col.emplace(*it, static_cast<Eigen::Index>(used.size() + effect_col.size()));
    }
    Eigen::Index n = 0;
    for (const auto* g : used) n += static_cast<Eigen::Index>(g->scale_outs.size());
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(used.size() + effect_col.size()));
    Eigen::VectorXd b(n);
    Eigen::Index row = 0;
    for (std::size_t k = 0; k < used.size(); ++k) {
        for (std::size_t i = 0; i < used[k]->scale_outs.size(); ++i, ++row) {
            a(row, static_cast<Eigen::Index>(k)) = 1.0;
            if (const auto it = effect_col.find(used[k]->scale_outs[i]); it != effect_col.end()) a(row, it->second) = 1.0;
            b(row) = std::log(used[k]->runtimes[i]);
        }
    }
    const Eigen::VectorXd levels = a.completeOrthogonalDecomposition().solve(b);

    for (std::size_t k = 0; k < used.size(); ++k) {
        const double ref = std::exp(levels(static_cast<Eigen::Index>(k)));
        for (std::size_t i = 0; i < used[k]->scale_outs.size(); ++i) {
            out.scale_outs.push_back(used[k]->scale_outs[i]);
            out.normalized.push_back(used[k]->runtimes[i] / ref);
        }
    }
    return out;
}

}  // namespace detail

/// Cubic (or lower, with fewer distinct scale-outs) least-squares fit of the
/// normalized runtime-vs-scale-out curve pooled over all qualifying groups.
inline PolySpeedup fit_poly3_ssm(std::span<const ScaleOutGroup> groups) {
    const auto samples = detail::pool_groups(groups);
    if (samples.distinct < 2) {
        throw InsufficientScaleOutVariation(
            "cubic speedup model needs two records that differ only in scale-out");
    }
    PolySpeedup ssm;
    ssm.poly = fit_polynomial(samples.scale_outs, samples.normalized,
                              std::min<std::size_t>(3, samples.distinct - 1));
    ssm.at_reference = ssm.poly(1.0);
    if (!(ssm.at_reference > 0.0) || !std::isfinite(ssm.at_reference)) {
        throw InsufficientScaleOutVariation("cubic speedup model is not positive at scale-out 1");
    }
    return ssm;
}

/// Single-group convenience overload.
inline PolySpeedup fit_poly3_ssm(std::span<const double> scale_outs, std::span<const double> runtimes) {
    ScaleOutGroup g{{scale_outs.begin(), scale_outs.end()}, {runtimes.begin(), runtimes.end()}};
    return fit_poly3_ssm(std::span<const ScaleOutGroup>(&g, 1));
}

inline SpeedupModel fit_boosted_ssm(std::span<const ScaleOutGroup> groups, const GbmParams& params) {
    const auto samples = detail::pool_groups(groups);
    if (samples.distinct < 2) return FlatSpeedup{};
    const auto x = FeatureMatrix::from_columns(samples.scale_outs);
    BoostedSpeedup ssm{fit_gbm(x, samples.normalized, params), 1.0};
    const double one[1] = {1.0};
    ssm.at_reference = ssm.model(one);
    if (!(ssm.at_reference > 0.0) || !std::isfinite(ssm.at_reference)) return FlatSpeedup{};
    return ssm;
}

// ---------------------------------------------------------------------------
// Optimistic decomposition

enum class IbmKind { linear, gbm };
enum class SsmKind { poly3, gbm };

using InputsModel = std::variant<LinearRegression, GradientBoosting>;

/// prediction(x) = ibm(context(x)) * ssm_factor(scale_out(x)).
struct OptimisticModel {
    InputsModel ibm;
    SpeedupModel ssm;
    std::size_t scale_out_column = 0;

    /// The inputs model evaluated with the scale-out pinned to 1.
    double inputs(std::span<const double> row) const {
        std::vector<double> ctx(row.begin(), row.end());
        ctx[scale_out_column] = 1.0;
        return std::visit([&](const auto& m) { return m(ctx); }, ibm);
    }

    double factor(double s) const { return speedup_factor(ssm, s); }

    double operator()(std::span<const double> row) const {
        return inputs(row) * factor(row[scale_out_column]);
    }
};

namespace detail {

/// Copy of `x` with the scale-out column pinned to the reference value 1.
inline FeatureMatrix at_reference_scale_out(const FeatureMatrix& x) {
    std::vector<double> values;
    values.reserve(x.rows() * x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const auto row = x.row(i);
        values.insert(values.end(), row.begin(), row.end());
        values[i * x.cols() + x.scale_out_column()] = 1.0;
    }
    return FeatureMatrix(x.rows(), x.roles(), x.names(), std::move(values), x.fingerprint());
}

/// Groups row indices by every column except the scale-out.
inline std::vector<std::vector<std::size_t>> groups_except_scale_out(const FeatureMatrix& x) {
    std::map<std::vector<double>, std::vector<std::size_t>> by_key;
    std::vector<const std::vector<std::size_t>*> order;
    for (std::size_t i = 0; i < x.rows(); ++i) {
        std::vector<double> key;
        key.reserve(x.cols() - 1);
        for (std::size_t j = 0; j < x.cols(); ++j)
            if (j != x.scale_out_column()) key.push_back(x(i, j));
        auto [it, inserted] = by_key.try_emplace(std::move(key));
        if (inserted) order.push_back(&it->second);
        it->second.push_back(i);
    }
    std::vector<std::vector<std::size_t>> out;
    out.reserve(order.size());
    for (const auto* g : order) out.push_back(*g);
    return out;
}

}  // namespace detail

/// (1) group rows by every feature except scale-out, (2) fit the speedup
/// model on pooled per-group normalized runtimes, (3) project every runtime
/// to scale-out 1 via runtime / ssm_factor(s), (4) fit the inputs model on
/// the context columns against the projected runtimes.
inline OptimisticModel fit_optimistic(const FeatureMatrix& x, std::span<const double> y,
                                      IbmKind ibm_kind, SsmKind ssm_kind,
                                      const GbmParams& gbm = {}) {
    if (x.rows() == 0) throw EmptyTrainingSet();
    if (y.size() != x.rows()) throw PreconditionViolation("fit_optimistic: target length mismatch");

    const std::size_t sc = x.scale_out_column();
    std::vector<ScaleOutGroup> groups;
    for (const auto& rows : detail::groups_except_scale_out(x)) {
        ScaleOutGroup g;
        for (const auto r : rows) {
            g.scale_outs.push_back(x(r, sc));
            g.runtimes.push_back(y[r]);
        }
        groups.push_back(std::move(g));
    }

    OptimisticModel model;
    model.scale_out_column = sc;
    if (ssm_kind == SsmKind::poly3) {
        model.ssm = fit_poly3_ssm(groups);
    } else {
        model.ssm = fit_boosted_ssm(groups, gbm);
    }

    std::vector<double> projected(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) projected[i] = y[i] / model.factor(x(i, sc));

    // a constant scale-out column gets a zero coefficient and never splits
    const auto ctx = detail::at_reference_scale_out(x);
    if (ibm_kind == IbmKind::linear) {
        model.ibm = fit_linear(ctx, projected);
    } else {
        model.ibm = fit_gbm(ctx, projected, gbm);
    }
    return model;
}

// ---------------------------------------------------------------------------
// Ernest baseline: runtime = theta . [1, size/s, log s, s], theta >= 0

struct ErnestModel {
    std::array<double, 4> theta{};
    std::size_t scale_out_column = 0;
    std::optional<std::size_t> size_column;

    static std::array<double, 4> features(double size, double s) {
        return {1.0, size / s, std::log(s), s};
    }

    double at(double size, double s) const {
        const auto f = features(size, s);
        double v = 0.0;
        for (std::size_t k = 0; k < 4; ++k) v += theta[k] * f[k];
        return v;
    }

    double operator()(std::span<const double> row) const {
        const double size = size_column ? row[*size_column] : 1.0;
        return at(size, row[scale_out_column]);
    }
};

inline ErnestModel fit_ernest(std::span<const double> sizes, std::span<const double> scale_outs,
                              std::span<const double> runtimes) {
    const std::size_t n = runtimes.size();
    if (n == 0) throw EmptyTrainingSet();
    if (sizes.size() != n || scale_outs.size() != n) {
        throw PreconditionViolation("fit_ernest: input lengths differ");
    }
    Eigen::MatrixXd a(static_cast<Eigen::Index>(n), 4);
    Eigen::VectorXd b(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        if (!(scale_outs[i] >= 1.0)) throw PreconditionViolation("fit_ernest: scale-out must be >= 1");
        const auto f = ErnestModel::features(sizes[i], scale_outs[i]);
        for (std::size_t k = 0; k < 4; ++k) a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = f[k];
        b(static_cast<Eigen::Index>(i)) = runtimes[i];
    }
    const auto sol = solve_nnls(a, b);
    ErnestModel m;
    for (std::size_t k = 0; k < 4; ++k) m.theta[k] = sol.x(static_cast<Eigen::Index>(k));
    return m;
}

inline ErnestModel fit_ernest(const FeatureMatrix& x, std::span<const double> y) {
    std::vector<double> sizes(x.rows(), 1.0), scale_outs(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        scale_outs[i] = x(i, x.scale_out_column());
        if (x.size_column()) sizes[i] = x(i, *x.size_column());
    }
    auto m = fit_ernest(sizes, scale_outs, y);
    m.scale_out_column = x.scale_out_column();
    m.size_column = x.size_column();
    return m;
}

// ---------------------------------------------------------------------------
// Registry

using ModelFitter = std::function<FittedModel(const FeatureMatrix&, std::span<const double>)>;

namespace detail {

inline bool is_model_id(std::string_view s) {
    if (s.empty()) return false;
    return std::all_of(s.begin(), s.end(), [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
               c == '_' || c == '-' || c == '.';
    });
}

}  // namespace detail

namespace model_ids {
inline constexpr std::string_view gbm = "GBM";
inline constexpr std::string_view bom = "BOM";
inline constexpr std::string_view ogb = "OGB";
inline constexpr std::string_view ernest = "ERNEST";
}  // namespace model_ids

inline ModelFitter gbm_fitter(std::string id, GbmParams params = {}) {
    return [id = std::move(id), params](const FeatureMatrix& x, std::span<const double> y) {
        return FittedModel(id, x.fingerprint(), fit_gbm(x, y, params));
    };
}

inline ModelFitter optimistic_fitter(std::string id, IbmKind ibm, SsmKind ssm, GbmParams params = {}) {
    return [id = std::move(id), ibm, ssm, params](const FeatureMatrix& x, std::span<const double> y) {
        return FittedModel(id, x.fingerprint(), fit_optimistic(x, y, ibm, ssm, params));
    };
}

inline ModelFitter ernest_fitter(std::string id) {
    return [id = std::move(id)](const FeatureMatrix& x, std::span<const double> y) {
        return FittedModel(id, x.fingerprint(), fit_ernest(x, y));
    };
}

inline ModelFitter linear_fitter(std::string id) {
    return [id = std::move(id)](const FeatureMatrix& x, std::span<const double> y) {
        return FittedModel(id, x.fingerprint(), fit_linear(x, y));
    };
}

/// Model ids mapped to fitters, in a fixed order that doubles as the
/// tie-break order for model selection: built-ins first, then custom models
/// in registration (manifest) order.
class ModelRegistry {
public:
    static ModelRegistry with_builtins() {
        ModelRegistry r;
        r.add(std::string(model_ids::gbm), gbm_fitter(std::string(model_ids::gbm)));
        r.add(std::string(model_ids::bom),
              optimistic_fitter(std::string(model_ids::bom), IbmKind::linear, SsmKind::poly3));
        r.add(std::string(model_ids::ogb),
              optimistic_fitter(std::string(model_ids::ogb), IbmKind::gbm, SsmKind::gbm));
        r.add(std::string(model_ids::ernest), ernest_fitter(std::string(model_ids::ernest)));
        return r;
    }

    void add(std::string id, ModelFitter fitter) {
        if (!detail::is_model_id(id)) throw InputError("invalid model id '" + id + "'");
        if (contains(id)) throw InputError("model id '" + id + "' registered twice");
        ids_.push_back(id);
        fitters_.emplace(std::move(id), std::move(fitter));
    }

    bool contains(std::string_view id) const { return fitters_.find(std::string(id)) != fitters_.end(); }

    const ModelFitter& fitter(std::string_view id) const {
        const auto it = fitters_.find(std::string(id));
        if (it == fitters_.end()) throw InputError("unknown model id '" + std::string(id) + "'");
        return it->second;
    }

    FittedModel fit(std::string_view id, const FeatureMatrix& x, std::span<const double> y) const {
        return fitter(id)(x, y);
    }

    const std::vector<std::string>& ids() const noexcept { return ids_; }

    std::size_t rank(std::string_view id) const {
        const auto it = std::find(ids_.begin(), ids_.end(), id);
        if (it == ids_.end()) throw InputError("unknown model id '" + std::string(id) + "'");
        return static_cast<std::size_t>(it - ids_.begin());
    }

    /// Registers custom models from a manifest. One model per line:
    ///
    ///     <id> <base> [key=value ...]
    ///
    /// with base one of gbm, bom, ogb, ernest, linear and keys n_rounds,
    /// learning_rate, max_depth, min_leaf for the boosted bases. '#' starts a
    /// comment.
    void load_manifest(std::string_view text) {
        std::size_t line_no = 0;
        for (auto line : detail::lines(text)) {
            ++line_no;
            if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
            line = detail::trim(line);
            if (line.empty()) continue;
            std::vector<std::string_view> tokens;
            for (auto t : detail::split(line, ' ')) {
                for (auto u : detail::split(t, '\t')) {
                    if (!u.empty()) tokens.push_back(u);
                }
            }
            const auto where = "manifest line " + std::to_string(line_no) + ": ";
            if (tokens.size() < 2) throw InputError(where + "expected '<id> <base> [key=value ...]'");
            const std::string id(tokens[0]);
            const auto base = tokens[1];
            GbmParams params;
            for (std::size_t k = 2; k < tokens.size(); ++k) {
                const auto eq = tokens[k].find('=');
                if (eq == std::string_view::npos) throw InputError(where + "bad option '" + std::string(tokens[k]) + "'");
                const auto key = tokens[k].substr(0, eq);
                const auto value = detail::parse_double(tokens[k].substr(eq + 1));
                if (!value) throw InputError(where + "option '" + std::string(key) + "' needs a number");
                if (key == "n_rounds" && *value >= 0) {
                    params.n_rounds = static_cast<int>(*value);
                } else if (key == "learning_rate" && *value > 0 && *value <= 1) {
                    params.learning_rate = *value;
                } else if (key == "max_depth" && *value >= 0) {
                    params.max_depth = static_cast<int>(*value);
                } else if (key == "min_leaf" && *value >= 1) {
                    params.min_leaf = static_cast<std::size_t>(*value);
                } else {
                    throw InputError(where + "unknown or out-of-range option '" + std::string(tokens[k]) + "'");
                }
            }
            if (base == "gbm") {
                add(id, gbm_fitter(id, params));
            } else if (base == "bom") {
                add(id, optimistic_fitter(id, IbmKind::linear, SsmKind::poly3, params));
            } else if (base == "ogb") {
                add(id, optimistic_fitter(id, IbmKind::gbm, SsmKind::gbm, params));
            } else if (base == "ernest") {
                add(id, ernest_fitter(id));
            } else if (base == "linear") {
                add(id, linear_fitter(id));
            } else {
                throw InputError(where + "unknown base model '" + std::string(base) + "'");
            }
        }
    }

private:
    std::vector<std::string> ids_;
    std::map<std::string, ModelFitter> fitters_;
};

}  // namespace c3o
