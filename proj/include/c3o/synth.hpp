#pragma once

// Synthetic ground-truth workloads standing in for measured job executions.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "c3o/dataset.hpp"
#include "c3o/error.hpp"

namespace c3o {

/// Discrete levels a context feature is sampled from.
struct ParameterGrid {
    std::string name;
    std::vector<double> values;
};

/// A job's declared domain and ground-truth runtime. The first context
/// feature is the dataset/problem size. Runtimes are in milliseconds.
struct JobProfile {
    std::string name;
    std::string machine_type = "m5.xlarge";
    std::vector<int> scale_outs;
    std::vector<ParameterGrid> context;
    std::function<double(std::span<const double> context, double scale_out)> ground_truth;
    double noise_rel = 0.02;    // std of the multiplicative log-normal noise
    bool median_of_5 = false;   // record the median of five noisy runs

    JobSchema schema() const {
        std::vector<ContextFeature> features;
        for (const auto& p : context) features.push_back({p.name, FeatureKind::numeric});
        return JobSchema(name, std::move(features));
    }

    double runtime(const RuntimeRecord& r) const {
        std::vector<double> ctx;
        for (const auto& v : r.context) ctx.push_back(std::get<double>(v));
        return ground_truth(ctx, static_cast<double>(r.instance_count));
    }
};

inline std::vector<std::string> profile_names() { return {"sort", "grep", "sgd", "kmeans", "pagerank"}; }

/// Default profiles. Ranges follow the published job overview (input sizes,
/// parameter ranges, number of context features); each 3+2 job uses three
/// levels per context feature so that a few hundred records cover the grid.
///
///   sort      a*size*(1/s + b*ln s)
///   grep      a*size*(1/s)*(1 + b*hit_ratio)
///   sgd       a*size*iters/s + c*iters          (step_size has no effect)
///   kmeans    a*size*k*iters_eff(conv)/s
///   pagerank  a*(links/s + b*pages*conv_iters(conv))
inline JobProfile make_profile(std::string_view name) {
    constexpr double GB = 1e9;
    constexpr double MB = 1e6;
    JobProfile p;
    p.name = std::string(name);
    p.scale_outs = {2, 4, 6, 8, 10, 12};
    if (name == "sort") {
        p.context = {{"data_size", {10 * GB, 12 * GB, 14 * GB, 16 * GB, 18 * GB, 20 * GB}}};
        p.ground_truth = [](std::span<const double> c, double s) {
            return 30000.0 * (c[0] / GB) * (1.0 / s + 0.05 * std::log(s));
        };
    } else if (name == "grep") {
        p.context = {{"data_size", {10 * GB, 12 * GB, 14 * GB, 16 * GB, 18 * GB, 20 * GB}},
                     {"hit_ratio", {0.01, 0.05, 0.1, 0.2, 0.4}}};
        p.ground_truth = [](std::span<const double> c, double s) {
            return 20000.0 * (c[0] / GB) * (1.0 / s) * (1.0 + 2.0 * c[1]);
        };
    } else if (name == "sgd") {
        p.context = {{"data_size", {10 * GB, 20 * GB, 30 * GB}},
                     {"iterations", {25, 50, 75, 100}},
                     {"step_size", {0.01, 0.1, 1.0}}};
        p.ground_truth = [](std::span<const double> c, double s) {
            return 300.0 * (c[0] / GB) * c[1] / s + 100.0 * c[1];
        };
    } else if (name == "kmeans") {
        p.context = {{"data_size", {10 * GB, 15 * GB, 20 * GB}},
                     {"k", {3, 6, 9}},
                     {"convergence", {0.01, 0.001, 0.0001}}};
        p.ground_truth = [](std::span<const double> c, double s) {
            const double iters = 2.0 + 2.0 * std::log10(1.0 / c[2]);
            return 150.0 * (c[0] / GB) * c[1] * iters / s;
        };
    } else if (name == "pagerank") {
        p.context = {{"data_size", {130 * MB, 285 * MB, 440 * MB}},
                     {"pages", {1e6, 2e6, 4e6}},
                     {"convergence", {0.01, 0.001, 0.0001}}};
        p.ground_truth = [](std::span<const double> c, double s) {
            const double iters = 4.0 * std::log10(1.0 / c[2]);
            return 400.0 * (c[0] / MB) / s + 0.002 * c[1] * iters;
        };
    } else {
        throw InputError("unknown job profile '" + std::string(name) + "'");
    }
    return p;
}

/// n records drawn uniformly from the profile's grid; runtime =
/// ground_truth * exp(noise_rel * z), z ~ N(0, 1). Deterministic in seed.
inline TrainingSet synth_generate(const JobProfile& profile, std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    auto pick = [&](std::size_t size) {
        return std::uniform_int_distribution<std::size_t>(0, size - 1)(rng);
    };
    std::vector<RuntimeRecord> records;
    records.reserve(n);
    std::vector<double> ctx(profile.context.size());
    for (std::size_t i = 0; i < n; ++i) {
        RuntimeRecord r;
        r.machine_type = profile.machine_type;
        r.instance_count = profile.scale_outs[pick(profile.scale_outs.size())];
        for (std::size_t j = 0; j < profile.context.size(); ++j) {
            ctx[j] = profile.context[j].values[pick(profile.context[j].values.size())];
            r.context.emplace_back(ctx[j]);
        }
        const double truth = profile.ground_truth(ctx, static_cast<double>(r.instance_count));
        double factor = 1.0;
        if (profile.noise_rel > 0.0) {
            if (profile.median_of_5) {
                double runs[5];
                for (auto& v : runs) v = gauss(rng);
                std::nth_element(runs, runs + 2, runs + 5);
                factor = std::exp(profile.noise_rel * runs[2]);
            } else {
                factor = std::exp(profile.noise_rel * gauss(rng));
            }
        }
        r.gross_runtime_ms = truth * factor;
        records.push_back(std::move(r));
    }
    return TrainingSet(profile.schema(), std::move(records));
}

}  // namespace c3o
