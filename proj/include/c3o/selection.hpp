#pragma once

// Leave-one-out cross-validation of candidate models and dynamic model
// selection.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "c3o/dataset.hpp"
#include "c3o/detail/text.hpp"
#include "c3o/error.hpp"
#include "c3o/models.hpp"

namespace c3o {

inline constexpr std::uint64_t kDefaultCvSeed = 0x5eed;

/// Limits on the number of leave-one-out splits. With max_splits = 0 and no
/// time budget every record is held out once.
struct CvCap {
    std::size_t max_splits = 0;
    std::optional<std::chrono::milliseconds> time_budget;
    std::uint64_t seed = kDefaultCvSeed;
};

struct CvReport {
    std::string model_id;
    std::vector<std::size_t> held_out;      // record index per split
    std::vector<double> actual;             // ms
    std::vector<double> predicted;          // ms
    std::vector<double> signed_errors;      // actual - predicted, ms
    double mape = 0.0;                      // fraction
    double mu = 0.0;                        // ms
    double sigma = 0.0;                     // ms, population convention
    std::size_t n_splits = 0;
    std::size_t fallback_splits = 0;        // splits scored with the mean predictor
    std::uint64_t seed = kDefaultCvSeed;
};

/// Mean absolute percentage error as a fraction.
inline double mape(std::span<const double> actual, std::span<const double> predicted) {
    if (actual.size() != predicted.size()) throw PreconditionViolation("mape: length mismatch");
    if (actual.empty()) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < actual.size(); ++i) acc += std::abs(actual[i] - predicted[i]) / actual[i];
    return acc / static_cast<double>(actual.size());
}

/// Fills mape/mu/sigma/n_splits from the per-split vectors.
inline void summarize(CvReport& report) {
    const auto n = report.signed_errors.size();
    report.n_splits = n;
    if (n == 0) {
        report.mape = report.mu = report.sigma = 0.0;
        return;
    }
    report.mape = mape(report.actual, report.predicted);
    double sum = 0.0;
    for (const double e : report.signed_errors) sum += e;
    report.mu = sum / static_cast<double>(n);
    double ss = 0.0;
    for (const double e : report.signed_errors) ss += (e - report.mu) * (e - report.mu);
    report.sigma = std::sqrt(ss / static_cast<double>(n));
}

namespace detail {

/// Held-out indices: all of 0..n-1, or a seeded subsample of max_splits of
/// them, returned in ascending order.
inline std::vector<std::size_t> split_indices(std::size_t n, const CvCap& cap) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (cap.max_splits == 0 || cap.max_splits >= n) return idx;
    std::mt19937_64 rng(cap.seed);
    for (std::size_t i = 0; i < cap.max_splits; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(cap.max_splits);
    std::sort(idx.begin(), idx.end());
    return idx;
}

inline double mean_of(std::span<const double> v) {
    double s = 0.0;
    for (const double x : v) s += x;
    return s / static_cast<double>(v.size());
}

}  // namespace detail

/// Leave-one-out cross-validation on an encoded matrix. A split whose fit
/// fails with a library error is scored with mean(training y).
inline CvReport cross_validate(std::string_view model_id, const ModelFitter& fitter,
                               const FeatureMatrix& x, std::span<const double> y, const CvCap& cap = {}) {
    const std::size_t n = x.rows();
    if (n < 2) throw TooFewRecords("cross-validation needs at least 2 records, got " + std::to_string(n));
    if (y.size() != n) throw PreconditionViolation("cross_validate: target length mismatch");

    CvReport report;
    report.model_id = std::string(model_id);
    report.seed = cap.seed;
    const auto start = std::chrono::steady_clock::now();

    std::vector<std::size_t> train_rows;
    std::vector<double> train_y;
    train_rows.reserve(n - 1);
    train_y.reserve(n - 1);
    for (const auto held : detail::split_indices(n, cap)) {
        if (cap.time_budget && report.held_out.size() >= 2 &&
            std::chrono::steady_clock::now() - start > *cap.time_budget) {
            break;
        }
        train_rows.clear();
        train_y.clear();
        for (std::size_t i = 0; i < n; ++i) {
            if (i == held) continue;
            train_rows.push_back(i);
            train_y.push_back(y[i]);
        }
        double predicted = 0.0;
        try {
            const auto model = fitter(x.select_rows(train_rows), train_y);
            predicted = predict(model, x, held);
        } catch (const Error&) {
            predicted = clamp_runtime(detail::mean_of(train_y));
            ++report.fallback_splits;
        }
        report.held_out.push_back(held);
        report.actual.push_back(y[held]);
        report.predicted.push_back(predicted);
        report.signed_errors.push_back(y[held] - predicted);
    }
    summarize(report);
    return report;
}

inline CvReport cross_validate(const ModelRegistry& registry, std::string_view model_id,
                               const TrainingSet& ts, const CvCap& cap = {}) {
    if (ts.size() < 2) {
        throw TooFewRecords("cross-validation needs at least 2 records, got " + std::to_string(ts.size()));
    }
    const Encoder encoder(ts);
    const auto x = encoder.encode(ts);
    const auto y = ts.runtimes();
    return cross_validate(model_id, registry.fitter(model_id), x, y, cap);
}

struct Selection {
    std::string model_id;
    CvReport report;
    std::vector<CvReport> candidates;  // in registry order
};

namespace detail {

inline std::vector<std::string> ordered_candidates(const ModelRegistry& registry,
                                                   std::span<const std::string> candidates) {
    if (candidates.empty()) throw PreconditionViolation("model selection needs at least one candidate");
    std::vector<std::string> ordered(candidates.begin(), candidates.end());
    for (const auto& id : ordered) (void)registry.rank(id);
    std::stable_sort(ordered.begin(), ordered.end(), [&](const std::string& a, const std::string& b) {
        return registry.rank(a) < registry.rank(b);
    });
    ordered.erase(std::unique(ordered.begin(), ordered.end()), ordered.end());
    return ordered;
}

}  // namespace detail

/// Cross-validates every candidate and picks the minimum MAPE. Exact ties go
/// to the candidate registered first.
inline Selection select_model(const ModelRegistry& registry, std::span<const std::string> candidates,
                              const FeatureMatrix& x, std::span<const double> y, const CvCap& cap = {}) {
    Selection sel;
    for (const auto& id : detail::ordered_candidates(registry, candidates)) {
        sel.candidates.push_back(cross_validate(id, registry.fitter(id), x, y, cap));
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < sel.candidates.size(); ++i) {
        if (sel.candidates[i].mape < sel.candidates[best].mape) best = i;
    }
    sel.model_id = sel.candidates[best].model_id;
    sel.report = sel.candidates[best];
    return sel;
}

inline Selection select_model(const ModelRegistry& registry, std::span<const std::string> candidates,
                              const TrainingSet& ts, const CvCap& cap = {}) {
    if (ts.size() < 2) {
        throw TooFewRecords("model selection needs at least 2 records, got " + std::to_string(ts.size()));
    }
    const Encoder encoder(ts);
    const auto x = encoder.encode(ts);
    const auto y = ts.runtimes();
    return select_model(registry, candidates, x, y, cap);
}

/// (mu, sigma) of the signed cross-validation errors.
inline std::pair<double, double> error_quantile_inputs(const CvReport& report) {
    if (report.signed_errors.size() < 2) {
        throw TooFewSplits("error statistics need at least 2 cross-validation splits");
    }
    CvReport copy = report;
    summarize(copy);
    return {copy.mu, copy.sigma};
}

inline std::string cv_report_tsv_header() { return "model_id\tn_splits\tmu\tsigma\tmape"; }

inline std::string cv_report_tsv_row(const CvReport& r) {
    return r.model_id + "\t" + std::to_string(r.n_splits) + "\t" + detail::format_double(r.mu) + "\t" +
           detail::format_double(r.sigma) + "\t" + detail::format_double(r.mape);
}

/// Header plus one row per report.
inline std::string cv_reports_tsv(std::span<const CvReport> reports) {
    std::string out = cv_report_tsv_header() + "\n";
    for (const auto& r : reports) out += cv_report_tsv_row(r) + "\n";
    return out;
}

/// The composed predictor: selects a model by cross-validation, then refits
/// it on all training records.
class RuntimePredictor {
public:
    RuntimePredictor(const ModelRegistry& registry, std::span<const std::string> candidates,
                     const TrainingSet& ts, const CvCap& cap = {})
        : encoder_(ts) {
        if (ts.empty()) throw EmptyTrainingSet();
        const auto x = encoder_.encode(ts);
        const auto y = ts.runtimes();
        if (ts.size() >= 2) {
            selection_ = select_model(registry, candidates, x, y, cap);
            // refit in order of cross-validation accuracy; the first that fits wins
            std::vector<const CvReport*> ranked;
            for (const auto& r : selection_.candidates) ranked.push_back(&r);
            std::stable_sort(ranked.begin(), ranked.end(),
                             [](const CvReport* a, const CvReport* b) { return a->mape < b->mape; });
            for (const auto* r : ranked) {
                try {
                    model_ = registry.fit(r->model_id, x, y);
                    selection_.model_id = r->model_id;
                    selection_.report = *r;
                    return;
                } catch (const Error&) {
                }
            }
        }
        // one record or every candidate failed: mean predictor
        mean_ = detail::mean_of(y);
        selection_.model_id = "MEAN";
        selection_.report.model_id = "MEAN";
    }

    const std::string& model_id() const noexcept { return selection_.model_id; }
    const CvReport& report() const noexcept { return selection_.report; }
    const Selection& selection() const noexcept { return selection_; }
    const Encoder& encoder() const noexcept { return encoder_; }

    double predict(const RuntimeRecord& r) const {
        if (!model_.valid()) return clamp_runtime(mean_);
        return c3o::predict(model_, encoder_.encode(r));
    }

private:
    Encoder encoder_;
    Selection selection_;
    FittedModel model_;
    double mean_ = 0.0;
};

}  // namespace c3o
