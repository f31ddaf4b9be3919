#include <gtest/gtest.h>

#include "c3o/synth.hpp"
#include "c3o/validation.hpp"

using namespace c3o;

namespace {

CvCap small_cap() {
    CvCap cap;
    cap.max_splits = 10;
    return cap;
}

TrainingSet noise_free(std::string_view job, std::size_t n, std::uint64_t seed) {
    auto p = make_profile(job);
    p.noise_rel = 0.0;
    return synth_generate(p, n, seed);
}

std::vector<RuntimeRecord> records_of(const TrainingSet& ts, std::size_t from, std::size_t count) {
    return {ts.records().begin() + static_cast<std::ptrdiff_t>(from),
            ts.records().begin() + static_cast<std::ptrdiff_t>(from + count)};
}

}  // namespace

TEST(AcceptRule, RelativeGrowth) {
    EXPECT_TRUE(accept_contribution(0.10, 0.11, 0.10));
    EXPECT_FALSE(accept_contribution(0.10, 0.1101, 0.10));
    EXPECT_TRUE(accept_contribution(0.10, 0.05, 0.0));
    EXPECT_TRUE(accept_contribution(0.0, 0.0, 0.0));
}

TEST(Holdout, QuarterOfRecordsAtLeastOne) {
    EXPECT_EQ(holdout_indices(4, 1).size(), 1u);
    EXPECT_EQ(holdout_indices(7, 1).size(), 1u);
    EXPECT_EQ(holdout_indices(40, 1).size(), 10u);
    EXPECT_EQ(holdout_indices(40, 5), holdout_indices(40, 5));
    EXPECT_NE(holdout_indices(40, 5), holdout_indices(40, 6));
    const auto idx = holdout_indices(40, 5);
    EXPECT_TRUE(std::is_sorted(idx.begin(), idx.end()));
    EXPECT_LT(idx.back(), 40u);
}

TEST(ValidateContribution, DuplicatesAreAccepted) {
    const auto reg = ModelRegistry::with_builtins();
    const auto existing = noise_free("grep", 40, 11);
    const auto dup = records_of(existing, 0, 10);
    const auto v = validate_contribution(reg, existing, dup, reg.ids(), 0.10, small_cap());
    EXPECT_TRUE(v.accepted);
    EXPECT_EQ(v.test_records, 10u);
}

TEST(ValidateContribution, CorruptedRuntimesAreRejected) {
    const auto reg = ModelRegistry::with_builtins();
    const auto existing = noise_free("sort", 40, 12);
    auto bad = records_of(noise_free("sort", 15, 99), 0, 15);
    for (auto& r : bad) r.gross_runtime_ms *= 100.0;
    const auto v = validate_contribution(reg, existing, bad, reg.ids(), 0.10, small_cap());
    EXPECT_FALSE(v.accepted);
    EXPECT_GT(v.candidate_mape, v.baseline_mape * 1.1);
}

TEST(ValidateContribution, Preconditions) {
    const auto reg = ModelRegistry::with_builtins();
    const auto existing = noise_free("sort", 20, 1);
    const std::vector<RuntimeRecord> none;
    EXPECT_THROW((void)validate_contribution(reg, existing, none, reg.ids()), PreconditionViolation);
    const auto tiny = existing.subset(std::vector<std::size_t>{0, 1, 2});
    EXPECT_THROW((void)validate_contribution(reg, tiny, records_of(existing, 5, 1), reg.ids()), TooFewRecords);
    const std::vector<RuntimeRecord> wrong{{"m5.xlarge", 2, {1.0, 2.0}, 100.0}};
    EXPECT_THROW((void)validate_contribution(reg, existing, wrong, reg.ids()), SchemaMismatch);
    EXPECT_THROW((void)validate_contribution(reg, existing, records_of(existing, 0, 1), reg.ids(), -0.1),
                 InputError);
}

TEST(ValidateContribution, DeterministicAndMonotoneInThreshold) {
    const auto reg = ModelRegistry::with_builtins();
    const auto existing = synth_generate(make_profile("kmeans"), 40, 3);
    auto extra = records_of(synth_generate(make_profile("kmeans"), 10, 4), 0, 10);
    for (auto& r : extra) r.gross_runtime_ms *= 1.3;
    const auto a = validate_contribution(reg, existing, extra, reg.ids(), 0.05, small_cap(), 77);
    const auto b = validate_contribution(reg, existing, extra, reg.ids(), 0.05, small_cap(), 77);
    EXPECT_EQ(verdict_tsv_row(a), verdict_tsv_row(b));
    EXPECT_EQ(a.holdout_seed, 77u);
    bool was_accepted = false;
    for (const double theta : {0.0, 0.01, 0.05, 0.1, 0.5, 1.0, 10.0}) {
        const auto v = validate_contribution(reg, existing, extra, reg.ids(), theta, small_cap(), 77);
        EXPECT_EQ(v.baseline_mape, a.baseline_mape);
        EXPECT_EQ(v.candidate_mape, a.candidate_mape);
        if (was_accepted) EXPECT_TRUE(v.accepted) << theta;
        was_accepted = v.accepted;
    }
    EXPECT_TRUE(was_accepted);
}

TEST(ValidateContribution, TestSetIsDrawnFromExistingOnly) {
    const auto reg = ModelRegistry::with_builtins();
    const auto existing = noise_free("sort", 24, 5);
    const auto extra = records_of(noise_free("sort", 6, 50), 0, 6);
    const auto v = validate_contribution(reg, existing, extra, reg.ids(), 0.1, small_cap(), 31);
    const auto test_idx = holdout_indices(existing.size(), 31);
    std::vector<std::size_t> train_idx;
    for (std::size_t i = 0; i < existing.size(); ++i)
        if (!std::binary_search(test_idx.begin(), test_idx.end(), i)) train_idx.push_back(i);
    const auto test = existing.subset(test_idx);
    const RuntimePredictor candidate(reg, reg.ids(), existing.subset(train_idx).with_appended(extra), small_cap());
    std::vector<double> actual, predicted;
    for (const auto& r : test.records()) {
        actual.push_back(r.gross_runtime_ms);
        predicted.push_back(candidate.predict(r));
    }
    EXPECT_EQ(v.test_records, 6u);
    EXPECT_EQ(v.candidate_mape, mape(actual, predicted));
}

TEST(VerdictTsv, Layout) {
    ContributionVerdict v;
    v.accepted = true;
    v.baseline_mape = 0.25;
    v.candidate_mape = 0.125;
    v.affected_model = "OGB";
    v.holdout_seed = 9;
    EXPECT_EQ(verdict_tsv_header(), "accepted\tbaseline_mape\tcandidate_mape\tthreshold\taffected_model\tholdout_seed");
    EXPECT_EQ(verdict_tsv_row(v), "1\t0.25\t0.125\t0.1\tOGB\t9");
}
