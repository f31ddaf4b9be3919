#pragma once

// Retrain-and-compare gate for contributed runtime data.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "c3o/dataset.hpp"
#include "c3o/error.hpp"
#include "c3o/selection.hpp"

namespace c3o {

inline constexpr double kDefaultRejectThreshold = 0.10;
inline constexpr std::uint64_t kDefaultHoldoutSeed = 0x7e57;

struct ContributionVerdict {
    bool accepted = false;
    double baseline_mape = 0.0;
    double candidate_mape = 0.0;
    double threshold = kDefaultRejectThreshold;
    std::string affected_model;  // model chosen after including the contribution
    std::string baseline_model;
    std::uint64_t holdout_seed = kDefaultHoldoutSeed;
    std::size_t test_records = 0;
};

/// accepted <=> candidate <= baseline * (1 + threshold)
inline bool accept_contribution(double baseline_mape, double candidate_mape, double threshold) {
    return candidate_mape <= baseline_mape * (1.0 + threshold);
}

/// Existing-record indices forming the held-out test set: a seeded 25% (at
/// least one record), ascending.
inline std::vector<std::size_t> holdout_indices(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::shuffle(idx.begin(), idx.end(), std::mt19937_64(seed));
    idx.resize(std::max<std::size_t>(1, n / 4));
    std::sort(idx.begin(), idx.end());
    return idx;
}

namespace detail {

inline double holdout_mape(const RuntimePredictor& predictor, const TrainingSet& test) {
    std::vector<double> actual, predicted;
    for (const auto& r : test.records()) {
        actual.push_back(r.gross_runtime_ms);
        predicted.push_back(predictor.predict(r));
    }
    return mape(actual, predicted);
}

}  // namespace detail

/// Holds out 25% of `existing`; fits the selected predictor on the rest with
/// and without the contribution and compares MAPE on the held-out records.
inline ContributionVerdict validate_contribution(const ModelRegistry& registry, const TrainingSet& existing,
                                                 std::span<const RuntimeRecord> contribution,
                                                 std::span<const std::string> candidates,
                                                 double threshold = kDefaultRejectThreshold,
                                                 const CvCap& cap = {},
                                                 std::uint64_t holdout_seed = kDefaultHoldoutSeed) {
    if (contribution.empty()) throw PreconditionViolation("contribution is empty");
    if (existing.size() < 4) {
        throw TooFewRecords("validation needs at least 4 existing records, got " + std::to_string(existing.size()));
    }
    if (threshold < 0.0) throw InputError("threshold must be non-negative");
    for (const auto& r : contribution) check_conforms(r, existing.schema());

    const auto test_idx = holdout_indices(existing.size(), holdout_seed);
    std::vector<std::size_t> train_idx;
    for (std::size_t i = 0, k = 0; i < existing.size(); ++i) {
        if (k < test_idx.size() && test_idx[k] == i) {
            ++k;
        } else {
            train_idx.push_back(i);
        }
    }
    const auto test = existing.subset(test_idx);
    const auto base_train = existing.subset(train_idx);
    const auto cand_train = base_train.with_appended(contribution);

    const RuntimePredictor baseline(registry, candidates, base_train, cap);
    const RuntimePredictor candidate(registry, candidates, cand_train, cap);

    ContributionVerdict v;
    v.baseline_mape = detail::holdout_mape(baseline, test);
    v.candidate_mape = detail::holdout_mape(candidate, test);
    v.threshold = threshold;
    v.accepted = accept_contribution(v.baseline_mape, v.candidate_mape, threshold);
    v.affected_model = candidate.model_id();
    v.baseline_model = baseline.model_id();
    v.holdout_seed = holdout_seed;
    v.test_records = test.size();
    return v;
}

inline std::string verdict_tsv_header() {
    return "accepted\tbaseline_mape\tcandidate_mape\tthreshold\taffected_model\tholdout_seed";
}

/// One TSV row, no trailing newline.
inline std::string verdict_tsv_row(const ContributionVerdict& v) {
    return std::string(v.accepted ? "1" : "0") + "\t" + detail::format_double(v.baseline_mape) + "\t" +
           detail::format_double(v.candidate_mape) + "\t" + detail::format_double(v.threshold) + "\t" +
           v.affected_model + "\t" + std::to_string(v.holdout_seed);
}

}  // namespace c3o
