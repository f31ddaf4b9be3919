#include <gtest/gtest.h>

#include <cmath>

#include "c3o/synth.hpp"

using namespace c3o;

TEST(Profiles, ContextAritiesAndPositivity) {
    const std::map<std::string, std::size_t> arity{{"sort", 1}, {"grep", 2}, {"sgd", 3}, {"kmeans", 3}, {"pagerank", 3}};
    for (const auto& name : profile_names()) {
        const auto p = make_profile(name);
        EXPECT_EQ(p.name, name);
        EXPECT_EQ(p.context.size(), arity.at(name)) << name;
        EXPECT_EQ(p.schema().size_feature(), 0u);
        // walk the whole grid
        std::vector<std::size_t> at(p.context.size(), 0);
        for (;;) {
            std::vector<double> ctx;
            for (std::size_t j = 0; j < at.size(); ++j) ctx.push_back(p.context[j].values[at[j]]);
            for (const int s : p.scale_outs) {
                const double t = p.ground_truth(ctx, s);
                EXPECT_TRUE(std::isfinite(t) && t > 0.0) << name;
            }
            std::size_t j = 0;
            while (j < at.size() && ++at[j] == p.context[j].values.size()) at[j++] = 0;
            if (j == at.size()) break;
        }
    }
    EXPECT_THROW((void)make_profile("wordcount"), InputError);
}

TEST(SynthGenerate, NoiseFreeRecordMatchesGroundTruth) {
    for (const auto& name : profile_names()) {
        auto p = make_profile(name);
        p.noise_rel = 0.0;
        const auto ts = synth_generate(p, 1, 42);
        ASSERT_EQ(ts.size(), 1u);
        EXPECT_EQ(ts[0].gross_runtime_ms, p.runtime(ts[0])) << name;
    }
}

TEST(SynthGenerate, SameSeedSameSet) {
    const auto p = make_profile("kmeans");
    const auto a = synth_generate(p, 50, 9);
    EXPECT_EQ(serialize_tsv(a), serialize_tsv(synth_generate(p, 50, 9)));
    EXPECT_NE(serialize_tsv(a), serialize_tsv(synth_generate(p, 50, 10)));
}

TEST(SynthGenerate, NoiseLevelOnSort) {
    const auto p = make_profile("sort");
    const auto ts = synth_generate(p, 500, 2024);
    double sum = 0.0, ss = 0.0;
    for (const auto& r : ts.records()) {
        const double rel = r.gross_runtime_ms / p.runtime(r) - 1.0;
        sum += rel;
        ss += rel * rel;
    }
    const double n = static_cast<double>(ts.size());
    const double sd = std::sqrt(ss / n - (sum / n) * (sum / n));
    EXPECT_GE(sd, 0.015);
    EXPECT_LE(sd, 0.025);
}

TEST(SynthGenerate, MedianOfFiveShrinksNoise) {
    auto p = make_profile("sort");
    p.median_of_5 = true;
    const auto ts = synth_generate(p, 500, 2024);
    double ss = 0.0;
    for (const auto& r : ts.records()) ss += std::pow(std::log(r.gross_runtime_ms / p.runtime(r)), 2);
    EXPECT_LT(std::sqrt(ss / 500.0), 0.017);
}

TEST(SynthGenerate, ValuesComeFromTheGrid) {
    const auto p = make_profile("pagerank");
    const auto ts = synth_generate(p, 100, 5);
    for (const auto& r : ts.records()) {
        EXPECT_NE(std::find(p.scale_outs.begin(), p.scale_outs.end(), r.instance_count), p.scale_outs.end());
        for (std::size_t j = 0; j < p.context.size(); ++j) {
            const auto& v = p.context[j].values;
            EXPECT_NE(std::find(v.begin(), v.end(), std::get<double>(r.context[j])), v.end());
        }
    }
}
