#include <gtest/gtest.h>

#include <random>

#include "c3o/selection.hpp"
#include "oracles.hpp"

using namespace c3o;

namespace {

JobSchema sized() { return JobSchema("job", {{"data_size", FeatureKind::numeric}}); }

TrainingSet make_set(const std::vector<std::pair<int, double>>& s_size, double (*f)(double, double)) {
    std::vector<RuntimeRecord> rs;
    for (const auto& [s, size] : s_size) rs.push_back({"m5.xlarge", s, {size}, f(size, s)});
    return TrainingSet(sized(), std::move(rs));
}

ModelFitter constant_fitter(std::string id, double value) {
    return [id = std::move(id), value](const FeatureMatrix& x, std::span<const double>) {
        return FittedModel(id, x.fingerprint(), [value](std::span<const double>) { return value; });
    };
}

CvReport report_of(std::vector<double> errors) {
    CvReport r;
    r.signed_errors = std::move(errors);
    return r;
}

}  // namespace

TEST(CrossValidate, ConstantRuntimeScoresZero) {
    const auto ts = make_set({{4, 1}, {4, 2}, {4, 3}}, [](double, double) { return 100.0; });
    const auto reg = ModelRegistry::with_builtins();
    for (const auto& id : reg.ids()) {
        const auto r = cross_validate(reg, id, ts);
        EXPECT_EQ(r.n_splits, 3u) << id;
        EXPECT_EQ(r.mape, 0.0) << id;
        for (const double e : r.signed_errors) EXPECT_EQ(e, 0.0) << id;
    }
    // BOM cannot fit a single scale-out: every split falls back to the mean
    EXPECT_EQ(cross_validate(reg, "BOM", ts).fallback_splits, 3u);
}

TEST(CrossValidate, FiveGbmSplitsMatchHandRun) {
    const auto ts = make_set({{2, 10}, {4, 10}, {8, 20}, {2, 30}, {6, 25}},
                             [](double size, double s) { return 1000.0 * size / s + 50.0 * s; });
    CvCap cap;
    cap.max_splits = 5;
    const auto r = cross_validate(ModelRegistry::with_builtins(), "GBM", ts, cap);
    ASSERT_EQ(r.n_splits, 5u);
    EXPECT_EQ(r.fallback_splits, 0u);
    for (std::size_t held = 0; held < 5; ++held) {
        std::vector<std::vector<double>> x;
        std::vector<double> y;
        for (std::size_t i = 0; i < 5; ++i) {
            if (i == held) continue;
            x.push_back({static_cast<double>(ts[i].instance_count), std::get<double>(ts[i].context[0])});
            y.push_back(ts[i].gross_runtime_ms);
        }
        EXPECT_EQ(x.size(), 4u);
        const auto model = oracle::boost(x, y, 100, 0.1, 3, 1);
        const double expected = model.eval({static_cast<double>(ts[held].instance_count),
                                            std::get<double>(ts[held].context[0])});
        EXPECT_EQ(r.held_out[held], held);
        EXPECT_NEAR(r.predicted[held], expected, 1e-9 * expected);
        EXPECT_DOUBLE_EQ(r.signed_errors[held], ts[held].gross_runtime_ms - r.predicted[held]);
    }
}

TEST(CrossValidate, OneRecordIsTooFew) {
    const auto ts = make_set({{2, 10}}, [](double, double) { return 5.0; });
    EXPECT_THROW((void)cross_validate(ModelRegistry::with_builtins(), "GBM", ts), TooFewRecords);
    const std::vector<std::string> ids{"GBM"};
    EXPECT_THROW((void)select_model(ModelRegistry::with_builtins(), ids, ts), TooFewRecords);
}

TEST(CrossValidate, SubsampleIsSeededAndSorted) {
    std::vector<std::pair<int, double>> grid;
    for (int s = 1; s <= 8; ++s)
        for (double size : {1.0, 2.0, 3.0, 4.0, 5.0}) grid.push_back({s, size});
    const auto ts = make_set(grid, [](double size, double s) { return 100.0 * size / s; });
    CvCap cap;
    cap.max_splits = 7;
    const auto reg = ModelRegistry::with_builtins();
    const auto a = cross_validate(reg, "OGB", ts, cap);
    const auto b = cross_validate(reg, "OGB", ts, cap);
    EXPECT_EQ(a.n_splits, 7u);
    EXPECT_EQ(a.held_out, b.held_out);
    EXPECT_EQ(a.signed_errors, b.signed_errors);
    EXPECT_TRUE(std::is_sorted(a.held_out.begin(), a.held_out.end()));
    cap.seed = 99;
    EXPECT_NE(cross_validate(reg, "OGB", ts, cap).held_out, a.held_out);
}

TEST(CrossValidate, DuplicateOnlyAddsItsOwnSplit) {
    const auto ts = make_set({{2, 10}, {4, 10}, {8, 20}, {2, 30}}, [](double size, double s) { return size / s; });
    const RuntimeRecord extra = ts[2];
    const auto dup = ts.with_appended(std::span<const RuntimeRecord>(&extra, 1));
    const auto reg = ModelRegistry::with_builtins();
    auto before = cross_validate(reg, "GBM", ts).held_out;
    before.push_back(ts.size());
    EXPECT_EQ(cross_validate(reg, "GBM", dup).held_out, before);
}

TEST(CrossValidate, TimeBudgetStillRunsTwoSplits) {
    std::vector<std::pair<int, double>> grid;
    for (int i = 0; i < 30; ++i) grid.push_back({1 + i % 6, 1.0 + i});
    const auto ts = make_set(grid, [](double size, double s) { return size / s + 1.0; });
    CvCap cap;
    cap.time_budget = std::chrono::milliseconds(0);
    EXPECT_GE(cross_validate(ModelRegistry::with_builtins(), "GBM", ts, cap).n_splits, 2u);
}

TEST(SelectModel, PicksSmallestError) {
    ModelRegistry reg;
    reg.add("A", constant_fitter("A", 105.0));
    reg.add("B", constant_fitter("B", 102.0));
    const auto ts = make_set({{2, 1}, {4, 2}, {8, 3}}, [](double, double) { return 100.0; });
    const std::vector<std::string> ids{"B", "A"};
    const auto sel = select_model(reg, ids, ts);
    EXPECT_EQ(sel.model_id, "B");
    EXPECT_NEAR(sel.report.mape, 0.02, 1e-12);
    ASSERT_EQ(sel.candidates.size(), 2u);
    EXPECT_EQ(sel.candidates[0].model_id, "A");
}

TEST(SelectModel, TieGoesToEarlierRegistration) {
    ModelRegistry reg;
    reg.add("FIRST", constant_fitter("FIRST", 90.0));
    reg.add("SECOND", constant_fitter("SECOND", 110.0));
    const auto ts = make_set({{2, 1}, {4, 2}}, [](double, double) { return 100.0; });
    const std::vector<std::string> ids{"SECOND", "FIRST"};
    EXPECT_EQ(select_model(reg, ids, ts).model_id, "FIRST");
}

TEST(SelectModel, ErnestLosesWhereItsFeaturesCannotReach) {
    std::vector<std::pair<int, double>> grid;
    for (const int s : {2, 4, 6, 8, 10})
        for (const double size : {10.0, 20.0, 30.0, 40.0}) grid.push_back({s, size});
    const auto ts = make_set(grid, [](double size, double s) { return 100.0 * size * size / s; });
    const auto reg = ModelRegistry::with_builtins();
    const auto sel = select_model(reg, reg.ids(), ts);
    EXPECT_TRUE(sel.model_id == "BOM" || sel.model_id == "OGB") << sel.model_id;
    double best_optimistic = 1e300, ernest = 0.0;
    for (const auto& c : sel.candidates) {
        if (c.model_id == "ERNEST") ernest = c.mape;
        if (c.model_id == "BOM" || c.model_id == "OGB") best_optimistic = std::min(best_optimistic, c.mape);
    }
    EXPECT_GT(ernest, best_optimistic);
}

TEST(SelectModel, SelectedMapeIsTheMinimum) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> size(1.0, 50.0);
    std::uniform_int_distribution<int> so(1, 12);
    std::lognormal_distribution<double> noise(0.0, 0.1);
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<RuntimeRecord> rs;
        for (int i = 0; i < 15; ++i) {
            const double z = size(rng);
            const int s = so(rng);
            rs.push_back({"m", s, {z}, 1000.0 * z / s * noise(rng)});
        }
        const TrainingSet ts(sized(), rs);
        const auto reg = ModelRegistry::with_builtins();
        const auto sel = select_model(reg, reg.ids(), ts);
        double lo = 1e300;
        for (const auto& c : sel.candidates) lo = std::min(lo, c.mape);
        EXPECT_EQ(sel.report.mape, lo);
        EXPECT_EQ(RuntimePredictor(reg, reg.ids(), ts).model_id(), sel.model_id);
    }
}

TEST(ErrorQuantileInputs, PopulationStatistics) {
    auto [mu, sigma] = error_quantile_inputs(report_of({-10, 10}));
    EXPECT_EQ(mu, 0.0);
    EXPECT_EQ(sigma, 10.0);
    std::tie(mu, sigma) = error_quantile_inputs(report_of({0, 0, 0}));
    EXPECT_EQ(mu, 0.0);
    EXPECT_EQ(sigma, 0.0);
    std::tie(mu, sigma) = error_quantile_inputs(report_of({1, 2, 3, 4}));
    EXPECT_DOUBLE_EQ(mu, 2.5);
    EXPECT_NEAR(sigma, 1.118034, 1e-6);
    EXPECT_THROW((void)error_quantile_inputs(report_of({5})), TooFewSplits);
}

TEST(RuntimePredictor, SingleRecordFallsBackToMean) {
    const auto ts = make_set({{4, 10}}, [](double, double) { return 250.0; });
    const auto reg = ModelRegistry::with_builtins();
    const RuntimePredictor p(reg, reg.ids(), ts);
    EXPECT_EQ(p.model_id(), "MEAN");
    EXPECT_EQ(p.predict(ts[0]), 250.0);
}

TEST(CvReportTsv, HeaderAndRow) {
    auto r = report_of({1, 2, 3, 4});
    r.model_id = "GBM";
    r.actual = {10, 10, 10, 10};
    r.predicted = {9, 8, 7, 6};
    summarize(r);
    EXPECT_EQ(cv_reports_tsv(std::span<const CvReport>(&r, 1)),
              "model_id\tn_splits\tmu\tsigma\tmape\nGBM\t4\t2.5\t1.118033988749895\t0.25\n");
}
