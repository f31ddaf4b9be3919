#include <gtest/gtest.h>

#include <random>

#include "c3o/dataset.hpp"
#include "c3o/models.hpp"
#include "oracles.hpp"

using namespace c3o;

namespace {

struct Xy {
    FeatureMatrix x;
    std::vector<double> y;
};

/// Rows (s, size) with runtime f(size, s).
template <typename F>
Xy grid(const std::vector<double>& scale_outs, const std::vector<double>& sizes, F f) {
    std::vector<double> s, size, y;
    for (const double sz : sizes) {
        for (const double so : scale_outs) {
            s.push_back(so);
            size.push_back(sz);
            y.push_back(f(sz, so));
        }
    }
    return {FeatureMatrix::from_columns(s, {size}), y};
}

double mape_of(const std::vector<double>& a, const std::vector<double>& p) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - p[i]) / a[i];
    return s / static_cast<double>(a.size());
}

}  // namespace

TEST(Clamp, RawNegativeBecomesOneMs) {
    EXPECT_EQ(clamp_runtime(-5.0), 1.0);
    EXPECT_EQ(clamp_runtime(0.5), 1.0);
    EXPECT_EQ(clamp_runtime(std::nan("")), 1.0);
    EXPECT_EQ(clamp_runtime(42.0), 42.0);
    const FittedModel m("NEG", 0, [](std::span<const double>) { return -5.0; });
    EXPECT_EQ(predict(m, EncodedRow{{1.0}, 0}), 1.0);
}

TEST(Predict, FingerprintMismatchThrows) {
    const auto data = grid({1, 2}, {1}, [](double, double s) { return 10.0 * s; });
    const FeatureMatrix tagged(data.x.rows(), data.x.roles(), data.x.names(),
                               {data.x.row(0)[0], data.x.row(0)[1], data.x.row(1)[0], data.x.row(1)[1]}, 77);
    const auto m = gbm_fitter("GBM")(tagged, data.y);
    EXPECT_THROW((void)predict(m, EncodedRow{{1.0, 1.0}, 78}), SchemaFingerprintMismatch);
    EXPECT_NO_THROW((void)predict(m, EncodedRow{{1.0, 1.0}, 77}));
}

TEST(GbmModel, ConstantRuntimeEverywhere) {
    const auto d = grid({2, 4, 8}, {1, 2}, [](double, double) { return 300000.0; });
    const auto m = ModelRegistry::with_builtins().fit("GBM", d.x, d.y);
    EXPECT_EQ(predict(m, EncodedRow{{5.0, 77.0}, 0}), 300000.0);
}

TEST(PolySpeedup, InverseScaleOutIsExactHalfAtTwo) {
    const std::vector<double> s{1, 2, 4, 8};
    const std::vector<double> t{800, 400, 200, 100};
    const auto ssm = fit_poly3_ssm(s, t);
    const auto o = oracle::polyfit(s, {1, 0.5, 0.25, 0.125}, 3);
    EXPECT_NEAR(ssm.factor(2), 0.5, 1e-6);
    EXPECT_NEAR(ssm.factor(3), oracle::polyval(o, 3) / oracle::polyval(o, 1), 1e-9);
    EXPECT_EQ(ssm.factor(1), 1.0);
}

TEST(PolySpeedup, ConstantRuntimeIsFlat) {
    const auto ssm = fit_poly3_ssm(std::vector<double>{2, 4, 6, 8}, std::vector<double>{50, 50, 50, 50});
    for (const double s : {1.0, 2.0, 5.0, 12.0}) EXPECT_NEAR(ssm.factor(s), 1.0, 1e-12);
}

TEST(PolySpeedup, DegreeFollowsDistinctScaleOuts) {
    EXPECT_EQ(fit_poly3_ssm(std::vector<double>{2, 4}, std::vector<double>{10, 6}).poly.degree(), 1u);
    EXPECT_EQ(fit_poly3_ssm(std::vector<double>{2, 4, 8}, std::vector<double>{10, 6, 4}).poly.degree(), 2u);
    EXPECT_EQ(fit_poly3_ssm(std::vector<double>{2, 3, 4, 8, 9}, std::vector<double>{10, 7, 6, 4, 3.9}).poly.degree(),
              3u);
}

TEST(PolySpeedup, NoScaleOutVariationFails) {
    const std::vector<ScaleOutGroup> groups{{{4, 4}, {10, 11}}, {{8}, {5}}};
    EXPECT_THROW((void)fit_poly3_ssm(groups), InsufficientScaleOutVariation);
    const auto d = grid({4}, {1, 2, 3}, [](double size, double) { return 10.0 * size; });
    EXPECT_THROW((void)ModelRegistry::with_builtins().fit("BOM", d.x, d.y), InsufficientScaleOutVariation);
}

TEST(PoolGroups, MisalignedGroupsShareOneReference) {
    // group A seen at {2,4}, group B at {4,8}; runtime = level / s
    const std::vector<ScaleOutGroup> groups{{{2, 4}, {50, 25}}, {{4, 8}, {100, 50}}};
    const auto pooled = detail::pool_groups(groups);
    ASSERT_EQ(pooled.normalized.size(), 4u);
    EXPECT_EQ(pooled.distinct, 3u);
    EXPECT_NEAR(pooled.normalized[0], 1.0, 1e-12);
    EXPECT_NEAR(pooled.normalized[1], 0.5, 1e-12);
    EXPECT_NEAR(pooled.normalized[2], 0.5, 1e-12);
    EXPECT_NEAR(pooled.normalized[3], 0.25, 1e-12);
}

TEST(Optimistic, BomRecoversMultiplicativeTruth) {
    auto truth = [](double size, double s) { return size * (1.0 / s + 0.1); };
    const auto train = grid({2, 3, 4, 5, 6}, {10, 20, 30, 40}, truth);
    const auto m = ModelRegistry::with_builtins().fit("BOM", train.x, train.y);
    std::vector<double> a, p;
    for (const double size : {15.0, 25.0, 35.0}) {
        for (const double s : {2.5, 3.5, 4.5, 5.5}) {
            a.push_back(truth(size, s));
            p.push_back(predict(m, EncodedRow{{s, size}, 0}));
        }
    }
    EXPECT_LT(mape_of(a, p), 0.02);
}

TEST(Optimistic, AllAtScaleOutOneReducesToInputsModel) {
    const auto d = grid({1}, {1, 2, 3, 4}, [](double size, double) { return 100.0 * size; });
    const auto ogb = fit_optimistic(d.x, d.y, IbmKind::gbm, SsmKind::gbm);
    EXPECT_TRUE(std::holds_alternative<FlatSpeedup>(ogb.ssm));
    const auto ibm = fit_gbm(detail::at_reference_scale_out(d.x), d.y);
    for (std::size_t i = 0; i < d.x.rows(); ++i) {
        EXPECT_EQ(ogb(d.x.row(i)), ibm(d.x.row(i)));
        const std::vector<double> elsewhere{7.0, d.x(i, 1)};
        EXPECT_EQ(ogb(elsewhere), ogb(d.x.row(i)));
    }
}

TEST(Optimistic, PredictionIsInputsTimesFactor) {
    const auto d = grid({2, 4, 8}, {10, 20, 30}, [](double size, double s) { return size * 1000.0 / s + 30.0; });
    for (const auto ibm : {IbmKind::linear, IbmKind::gbm}) {
        for (const auto ssm : {SsmKind::poly3, SsmKind::gbm}) {
            const auto m = fit_optimistic(d.x, d.y, ibm, ssm);
            EXPECT_EQ(m.factor(1.0), 1.0);
            for (const double s : {1.0, 3.0, 8.0}) {
                const std::vector<double> row{s, 17.0};
                EXPECT_EQ(m(row), m.inputs(row) * speedup_factor(m.ssm, s));
                const std::vector<double> pinned{1.0, 17.0};
                EXPECT_EQ(m.inputs(row), m(pinned));
            }
        }
    }
}

TEST(Optimistic, ScaleEquivariance) {
    std::mt19937_64 rng(4);
    std::lognormal_distribution<double> noise(0.0, 0.05);
    const auto d = grid({2, 4, 6, 8}, {10, 20, 30}, [&](double size, double s) { return size * 500.0 / s * noise(rng); });
    std::vector<double> scaled(d.y);
    for (auto& v : scaled) v *= 8.0;  // power of two keeps the arithmetic exact
    for (const auto& id : {"BOM", "OGB"}) {
        const auto reg = ModelRegistry::with_builtins();
        const auto a = reg.fit(id, d.x, d.y);
        const auto b = reg.fit(id, d.x, scaled);
        for (const double s : {2.0, 3.0, 8.0}) {
            const std::vector<double> row{s, 25.0};
            EXPECT_NEAR(b.raw(row) / 8.0, a.raw(row), 1e-9 * std::abs(a.raw(row))) << id;
        }
    }
}

TEST(Ernest, RecoversPlantedTheta) {
    const std::vector<double> size{10, 10, 20, 20, 30, 30};
    const std::vector<double> s{1, 4, 2, 8, 3, 6};
    std::vector<double> y;
    for (std::size_t i = 0; i < s.size(); ++i) y.push_back(10.0 + 2.0 * size[i] / s[i]);
    const auto m = fit_ernest(size, s, y);
    EXPECT_NEAR(m.theta[0], 10.0, 1e-6);
    EXPECT_NEAR(m.theta[1], 2.0, 1e-6);
    EXPECT_NEAR(m.theta[2], 0.0, 1e-6);
    EXPECT_NEAR(m.theta[3], 0.0, 1e-6);
}

TEST(Ernest, ConstantRuntime) {
    const auto m = fit_ernest(std::vector<double>{1, 2, 3, 4}, std::vector<double>{1, 2, 4, 8},
                              std::vector<double>{70, 70, 70, 70});
    EXPECT_NEAR(m.theta[0], 70.0, 1e-9);
    for (int k = 1; k < 4; ++k) EXPECT_NEAR(m.theta[k], 0.0, 1e-9);
}

TEST(Ernest, NonNegativeAndNoWorseThanZero) {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(1.0, 100.0);
    std::uniform_int_distribution<int> so(1, 16);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> size, s, y;
        for (int i = 0; i < 10; ++i) {
            size.push_back(u(rng));
            s.push_back(so(rng));
            y.push_back(u(rng));
        }
        const auto m = fit_ernest(size, s, y);
        double res = 0.0, zero = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) {
            EXPECT_GE(m.theta[i % 4], 0.0);
            res += std::pow(y[i] - m.at(size[i], s[i]), 2);
            zero += y[i] * y[i];
        }
        EXPECT_LE(res, zero + 1e-9);
    }
}

TEST(Registry, BuiltinOrderAndManifest) {
    auto reg = ModelRegistry::with_builtins();
    EXPECT_EQ(reg.ids(), (std::vector<std::string>{"GBM", "BOM", "OGB", "ERNEST"}));
    reg.load_manifest("# extra models\nGBM_DEEP gbm n_rounds=20 max_depth=5\nLIN linear\n");
    EXPECT_EQ(reg.ids().back(), "LIN");
    EXPECT_EQ(reg.rank("GBM_DEEP"), 4u);
    EXPECT_THROW(reg.add("GBM", gbm_fitter("GBM")), InputError);
    EXPECT_THROW(reg.load_manifest("X mystery\n"), InputError);
    EXPECT_THROW(reg.load_manifest("Y gbm depth=3\n"), InputError);
    EXPECT_THROW((void)reg.fit("NOPE", FeatureMatrix::from_columns(std::vector<double>{1}), std::vector<double>{1}),
                 InputError);
}

TEST(Registry, FitsAreBitIdentical) {
    const auto d = grid({2, 4, 6, 8}, {10, 20, 30}, [](double size, double s) { return size * 500.0 / s + s; });
    const auto reg = ModelRegistry::with_builtins();
    for (const auto& id : reg.ids()) {
        const auto a = reg.fit(id, d.x, d.y);
        const auto b = reg.fit(id, d.x, d.y);
        for (std::size_t i = 0; i < d.x.rows(); ++i) EXPECT_EQ(a.raw(d.x.row(i)), b.raw(d.x.row(i))) << id;
    }
}
