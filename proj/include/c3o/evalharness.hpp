#pragma once

// Experiment designs: local-vs-global training data origin and training data
// availability curves, plus plot data output.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "c3o/dataset.hpp"
#include "c3o/detail/text.hpp"
#include "c3o/error.hpp"
#include "c3o/selection.hpp"
#include "c3o/synth.hpp"

namespace c3o {

inline constexpr std::string_view kPredictorId = "C3O";

struct HarnessOptions {
    std::size_t repetitions = 50;
    std::uint64_t seed = 1;
    std::vector<std::string> models{"GBM", "BOM", "OGB", "ERNEST"};
    bool include_predictor = true;
    CvCap selection_cap{30, std::nullopt, kDefaultCvSeed};
    double test_fraction = 0.25;
};

struct ExperimentCell {
    std::string job;
    std::string model_id;
    std::string scenario;  // "local", "global" or a training-set size
    double mean_mape = 0.0;
    std::size_t repetitions = 0;
};

struct ExperimentReport {
    std::string experiment;
    std::uint64_t seed = 0;
    std::size_t repetitions = 0;
    std::vector<ExperimentCell> cells;

    const ExperimentCell* find(std::string_view job, std::string_view model, std::string_view scenario) const {
        for (const auto& c : cells)
            if (c.job == job && c.model_id == model && c.scenario == scenario) return &c;
        return nullptr;
    }

    double mape(std::string_view job, std::string_view model, std::string_view scenario) const {
        const auto* c = find(job, model, scenario);
        if (!c) throw PreconditionViolation("no cell for " + std::string(job) + "/" + std::string(model) + "/" + std::string(scenario));
        return c->mean_mape;
    }

    void append(const ExperimentReport& other) { cells.insert(cells.end(), other.cells.begin(), other.cells.end()); }

    std::string to_tsv() const {
        std::string out = "experiment\tjob\tmodel_id\tscenario\tmean_mape\trepetitions\tseed\n";
        for (const auto& c : cells) {
            out += experiment + "\t" + c.job + "\t" + c.model_id + "\t" + c.scenario + "\t" +
                   detail::format_double(c.mean_mape) + "\t" + std::to_string(c.repetitions) + "\t" +
                   std::to_string(seed) + "\n";
        }
        return out;
    }
};

namespace detail {

/// MAPE of one model id (or the composed predictor) trained on `train` and
/// scored on `test`. Fit failures fall back to mean(training y).
inline double evaluate_model(const ModelRegistry& registry, std::string_view model_id,
                             std::span<const std::string> candidates, const TrainingSet& train,
                             const TrainingSet& test, const CvCap& cap) {
    std::vector<double> actual, predicted;
    actual.reserve(test.size());
    predicted.reserve(test.size());
    if (model_id == kPredictorId) {
        const RuntimePredictor predictor(registry, candidates, train, cap);
        for (const auto& r : test.records()) {
            actual.push_back(r.gross_runtime_ms);
            predicted.push_back(predictor.predict(r));
        }
        return mape(actual, predicted);
    }
    const Encoder encoder(train);
    const auto x = encoder.encode(train);
    const auto y = train.runtimes();
    std::optional<FittedModel> model;
    try {
        model = registry.fit(model_id, x, y);
    } catch (const Error&) {
    }
    const double fallback = clamp_runtime(mean_of(y));
    for (const auto& r : test.records()) {
        actual.push_back(r.gross_runtime_ms);
        predicted.push_back(model ? predict(*model, encoder.encode(r)) : fallback);
    }
    return mape(actual, predicted);
}

inline std::vector<std::string> evaluated_ids(const HarnessOptions& opt) {
    auto ids = opt.models;
    if (opt.include_predictor) ids.emplace_back(kPredictorId);
    return ids;
}

/// Random subset of `count` indices out of n, ascending.
inline std::vector<std::size_t> sample_indices(std::size_t n, std::size_t count, std::mt19937_64& rng) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < count; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(count);
    std::sort(idx.begin(), idx.end());
    return idx;
}

inline std::vector<std::size_t> complement(std::size_t n, std::span<const std::size_t> sorted) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0, k = 0; i < n; ++i) {
        if (k < sorted.size() && sorted[k] == i) {
            ++k;
        } else {
            out.push_back(i);
        }
    }
    return out;
}

}  // namespace detail

/// Local vs global training origin. Each repetition picks one local
/// partition uniformly (among those with at least 4 records), holds out a
/// random test_fraction of it, and trains the local scenario on the rest of
/// that partition and the global scenario on every other pool record.
inline ExperimentReport experiment_origin(const TrainingSet& pool, const HarnessOptions& opt = {},
                                          const ModelRegistry& registry = ModelRegistry::with_builtins()) {
    const auto members = local_partition_indices(pool);
    std::vector<std::size_t> eligible;
    for (std::size_t p = 0; p < members.size(); ++p)
        if (members[p].size() >= 4) eligible.push_back(p);
    if (eligible.empty()) throw TooFewRecords("no local partition has at least 4 records");
    if (opt.repetitions == 0) throw PreconditionViolation("repetitions must be positive");

    const auto ids = detail::evaluated_ids(opt);
    std::map<std::pair<std::string, std::string>, double> sums;
    for (std::size_t rep = 0; rep < opt.repetitions; ++rep) {
        std::mt19937_64 rng(detail::mix_seed(opt.seed, rep));
        const auto& part = members[eligible[std::uniform_int_distribution<std::size_t>(0, eligible.size() - 1)(rng)]];
        const auto n_test = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::llround(opt.test_fraction * static_cast<double>(part.size()))));
        const auto test_local = detail::sample_indices(part.size(), n_test, rng);
        std::vector<std::size_t> test_idx;
        for (const auto k : test_local) test_idx.push_back(part[k]);
        std::vector<std::size_t> local_idx;
        for (const auto k : detail::complement(part.size(), test_local)) local_idx.push_back(part[k]);
        const auto global_idx = detail::complement(pool.size(), test_idx);

        const auto test = pool.subset(test_idx);
        const auto local = pool.subset(local_idx);
        const auto global = pool.subset(global_idx);
        for (const auto& id : ids) {
            const double l = detail::evaluate_model(registry, id, opt.models, local, test, opt.selection_cap);
            // identical training sets (no extra context features) give identical numbers
            const double g = local_idx == global_idx
                                 ? l
                                 : detail::evaluate_model(registry, id, opt.models, global, test, opt.selection_cap);
            sums[{id, "local"}] += l;
            sums[{id, "global"}] += g;
        }
    }

    ExperimentReport report;
    report.experiment = "origin";
    report.seed = opt.seed;
    report.repetitions = opt.repetitions;
    for (const auto& id : ids) {
        for (const std::string scenario : {"local", "global"}) {
            report.cells.push_back({pool.schema().job_name(), id, scenario,
                                    sums[{id, scenario}] / static_cast<double>(opt.repetitions), opt.repetitions});
        }
    }
    return report;
}

inline ExperimentReport experiment_origin(const JobProfile& profile, std::size_t pool_size,
                                          const HarnessOptions& opt = {},
                                          const ModelRegistry& registry = ModelRegistry::with_builtins()) {
    return experiment_origin(synth_generate(profile, pool_size, detail::mix_seed(opt.seed, 0xda7a)), opt, registry);
}

inline std::vector<std::size_t> default_availability_sizes() { return {3, 6, 9, 12, 15, 18, 21, 24, 27, 30}; }

/// Training-data availability: for every size k, repeatedly train on k
/// random pool records and score on the remaining ones.
inline ExperimentReport experiment_availability(const TrainingSet& pool,
                                                const std::vector<std::size_t>& sizes = default_availability_sizes(),
                                                const HarnessOptions& opt = {},
                                                const ModelRegistry& registry = ModelRegistry::with_builtins()) {
    if (opt.repetitions == 0) throw PreconditionViolation("repetitions must be positive");
    if (sizes.empty()) throw PreconditionViolation("no training sizes given");
    const auto largest = *std::max_element(sizes.begin(), sizes.end());
    if (pool.size() <= largest) {
        throw TooFewRecords("pool of " + std::to_string(pool.size()) + " records is not larger than the largest training size " +
                            std::to_string(largest));
    }
    const auto ids = detail::evaluated_ids(opt);

    ExperimentReport report;
    report.experiment = "availability";
    report.seed = opt.seed;
    report.repetitions = opt.repetitions;
    for (std::size_t si = 0; si < sizes.size(); ++si) {
        const auto k = sizes[si];
        if (k < 1) throw PreconditionViolation("training sizes must be positive");
        std::map<std::string, double> sums;
        for (std::size_t rep = 0; rep < opt.repetitions; ++rep) {
            std::mt19937_64 rng(detail::mix_seed(detail::mix_seed(opt.seed, k), rep));
            const auto train_idx = detail::sample_indices(pool.size(), k, rng);
            const auto train = pool.subset(train_idx);
            const auto test = pool.subset(detail::complement(pool.size(), train_idx));
            for (const auto& id : ids) {
                sums[id] += detail::evaluate_model(registry, id, opt.models, train, test, opt.selection_cap);
            }
        }
        for (const auto& id : ids) {
            report.cells.push_back({pool.schema().job_name(), id, std::to_string(k),
                                    sums[id] / static_cast<double>(opt.repetitions), opt.repetitions});
        }
    }
    return report;
}

inline ExperimentReport experiment_availability(const JobProfile& profile, std::size_t pool_size,
                                                const std::vector<std::size_t>& sizes = default_availability_sizes(),
                                                const HarnessOptions& opt = {},
                                                const ModelRegistry& registry = ModelRegistry::with_builtins()) {
    return experiment_availability(synth_generate(profile, pool_size, detail::mix_seed(opt.seed, 0xda7a)), sizes, opt,
                                   registry);
}

/// CSV for one job: x column (scenario or training size, in report order)
/// then one MAPE column per model in first-appearance order.
inline std::string plot_csv(const ExperimentReport& report, std::string_view job) {
    std::vector<std::string> xs, models;
    std::map<std::pair<std::string, std::string>, double> value;
    for (const auto& c : report.cells) {
        if (c.job != job) continue;
        if (std::find(xs.begin(), xs.end(), c.scenario) == xs.end()) xs.push_back(c.scenario);
        if (std::find(models.begin(), models.end(), c.model_id) == models.end()) models.push_back(c.model_id);
        value[{c.scenario, c.model_id}] = c.mean_mape;
    }
    std::string out = report.experiment == "availability" ? "training_size" : "scenario";
    for (const auto& m : models) out += "," + m;
    out += "\n";
    for (const auto& x : xs) {
        out += x;
        for (const auto& m : models) {
            out += ",";
            if (const auto it = value.find({x, m}); it != value.end()) out += detail::format_double(it->second);
        }
        out += "\n";
    }
    return out;
}

/// Writes <dir>/<experiment>_<job>.csv for every job in the report and
/// returns the written paths.
inline std::vector<std::filesystem::path> emit_plot_data(const ExperimentReport& report,
                                                         const std::filesystem::path& dir) {
    std::vector<std::string> jobs;
    for (const auto& c : report.cells)
        if (std::find(jobs.begin(), jobs.end(), c.job) == jobs.end()) jobs.push_back(c.job);
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> written;
    for (const auto& job : jobs) {
        const auto path = dir / (report.experiment + "_" + job + ".csv");
        std::ofstream out(path, std::ios::binary);
        if (!out) throw InputError("cannot write " + path.string());
        out << plot_csv(report, job);
        if (!out) throw InputError("failed writing " + path.string());
        written.push_back(path);
    }
    return written;
}

}  // namespace c3o
