// c3o: runtime prediction and cluster configuration from shared runtime data.
//
//   c3o predict   --data runs.tsv --schema job.schema --scaleouts 2..12,2 --context k=5
//   c3o configure --data runs.tsv --schema job.schema --prices prices.tsv --tmax-ms 600000 ...
//   c3o record    --data runs.tsv --schema job.schema --machine m5.xlarge --scaleout 4 --runtime-ms 91000 ...
//   c3o validate  --data runs.tsv --contribution new.tsv --schema job.schema
//   c3o evaluate  --experiment origin --job kmeans --seed 7 --out report.tsv
//   c3o generate  --job sort --n 200 --seed 7 --out sort.tsv --schema-out sort.schema
//
// Exit codes: 0 success/accepted, 1 rejected contribution, 2 input error,
// 3 infeasible plan.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "c3o/c3o.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRejected = 1;
constexpr int kExitInput = 2;
constexpr int kExitInfeasible = 3;

// sub-seed streams derived from --seed
constexpr std::uint64_t kCvStream = 1;
constexpr std::uint64_t kHoldoutStream = 2;
constexpr std::uint64_t kHarnessStream = 3;
constexpr std::uint64_t kGenerateStream = 4;

struct Options {
    std::string data, schema, prices, models, contribution, out, schema_out, plots;
    std::optional<double> tmax_ms;
    double confidence = c3o::kDefaultConfidence;
    std::string scaleouts = "1..16";
    std::string machine;
    std::uint64_t seed = 1;
    std::size_t max_splits = 200;
    std::optional<double> time_budget_ms;
    double threshold = c3o::kDefaultRejectThreshold;
    std::vector<std::string> context;
    std::optional<double> runtime_ms;
    int scaleout = 0;
    std::optional<double> dataset_gb;
    double headroom = c3o::kDefaultHeadroom;
    std::string experiment = "origin";
    std::string job = "all";
    std::size_t n = 0;
    std::size_t repetitions = 50;
    std::vector<std::size_t> sizes;
};

std::string read_file(const std::string& path, std::string_view what) {
    if (path.empty()) throw c3o::InputError("missing --" + std::string(what));
    std::ifstream in(path, std::ios::binary);
    if (!in) throw c3o::InputError("cannot read " + std::string(what) + " file '" + path + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw c3o::InputError("cannot write '" + path + "'");
    out << text;
    if (!out) throw c3o::InputError("failed writing '" + path + "'");
}

/// "a..b[,step]" or a comma list "2,4,8".
std::vector<int> parse_scaleouts(const std::string& expr) {
    std::vector<int> out;
    const auto dots = expr.find("..");
    auto bad = [&] { return c3o::InputError("bad scale-out domain '" + expr + "' (expected a..b[,step] or a,b,c)"); };
    if (dots != std::string::npos) {
        const auto comma = expr.find(',', dots);
        const auto a = c3o::detail::parse_integer(expr.substr(0, dots));
        const auto b = c3o::detail::parse_integer(expr.substr(dots + 2, comma == std::string::npos ? std::string::npos : comma - dots - 2));
        const auto step = comma == std::string::npos ? std::optional<long long>(1)
                                                     : c3o::detail::parse_integer(expr.substr(comma + 1));
        if (!a || !b || !step || *a < 1 || *b < *a || *step < 1 || *b > 100000) throw bad();
        for (long long s = *a; s <= *b; s += *step) out.push_back(static_cast<int>(s));
    } else {
        for (auto tok : c3o::detail::split(expr, ',')) {
            const auto v = c3o::detail::parse_integer(c3o::detail::trim(tok));
            if (!v || *v < 1 || *v > 100000) throw bad();
            out.push_back(static_cast<int>(*v));
        }
    }
    if (out.empty()) throw bad();
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

c3o::CvCap make_cap(const Options& o) {
    c3o::CvCap cap;
    cap.max_splits = o.max_splits;
    cap.seed = c3o::detail::mix_seed(o.seed, kCvStream);
    if (o.time_budget_ms) {
        cap.time_budget = std::chrono::milliseconds(static_cast<long long>(*o.time_budget_ms));
    }
    return cap;
}

c3o::ModelRegistry make_registry(const Options& o) {
    auto registry = c3o::ModelRegistry::with_builtins();
    if (!o.models.empty()) registry.load_manifest(read_file(o.models, "models"));
    return registry;
}

struct Loaded {
    c3o::JobSchema schema;
    c3o::TrainingSet data;
};

Loaded load_data(const Options& o) {
    auto schema = c3o::JobSchema::parse(read_file(o.schema, "schema"));
    auto data = c3o::parse_tsv(read_file(o.data, "data"), schema);
    return {schema, std::move(data)};
}

/// Context values from repeated --context name=value flags, in schema order.
std::vector<c3o::FeatureValue> parse_context(const c3o::JobSchema& schema, const std::vector<std::string>& flags) {
    std::map<std::string, std::string> given;
    for (const auto& f : flags) {
        const auto eq = f.find('=');
        if (eq == std::string::npos) throw c3o::InputError("--context expects name=value, got '" + f + "'");
        given[f.substr(0, eq)] = f.substr(eq + 1);
    }
    std::vector<c3o::FeatureValue> ctx;
    for (const auto& feature : schema.context_features()) {
        const auto it = given.find(feature.name);
        if (it == given.end()) throw c3o::InputError("missing --context " + feature.name + "=<value>");
        if (feature.kind == c3o::FeatureKind::numeric) {
            const auto v = c3o::detail::parse_double(it->second);
            if (!v) throw c3o::InputError("context '" + feature.name + "' needs a number, got '" + it->second + "'");
            ctx.emplace_back(*v);
        } else {
            ctx.emplace_back(it->second);
        }
        given.erase(it);
    }
    if (!given.empty()) throw c3o::InputError("unknown context feature '" + given.begin()->first + "'");
    return ctx;
}

std::string machine_with_most_records(const c3o::TrainingSet& ts) {
    const auto counts = c3o::records_per_machine_type(ts);
    std::string best;
    std::size_t n = 0;
    for (const auto& [m, k] : counts) {
        if (k > n) {
            best = m;
            n = k;
        }
    }
    if (best.empty()) throw c3o::EmptyTrainingSet();
    return best;
}

struct PredictionRun {
    std::string machine_type;
    std::string model_id;
    double mu = 0.0;
    double sigma = 0.0;
    std::size_t n_splits = 0;
    double cv_mape = 0.0;
    std::map<int, double> runtimes;
};

PredictionRun run_predictions(const Options& o, const c3o::TrainingSet& data, const std::string& machine,
                              const std::vector<c3o::FeatureValue>& ctx, const std::vector<int>& scale_outs) {
    const auto subset = c3o::filter_machine_type(data, machine);
    if (subset.empty()) throw c3o::InputError("no runtime records for machine type '" + machine + "'");
    const auto registry = make_registry(o);
    const auto ids = registry.ids();
    const c3o::RuntimePredictor predictor(registry, ids, subset, make_cap(o));

    PredictionRun run;
    run.machine_type = machine;
    run.model_id = predictor.model_id();
    const auto& report = predictor.report();
    run.n_splits = report.n_splits;
    run.cv_mape = report.mape;
    if (report.signed_errors.size() >= 2) std::tie(run.mu, run.sigma) = c3o::error_quantile_inputs(report);
    for (const int s : scale_outs) {
        c3o::RuntimeRecord r;
        r.machine_type = machine;
        r.instance_count = s;
        r.context = ctx;
        run.runtimes[s] = predictor.predict(r);
    }
    return run;
}

std::string prediction_tsv(const PredictionRun& run) {
    std::string out = "# machine_type=" + run.machine_type + " model_id=" + run.model_id +
                      " mu_ms=" + c3o::detail::format_double(run.mu) +
                      " sigma_ms=" + c3o::detail::format_double(run.sigma) +
                      " cv_mape=" + c3o::detail::format_double(run.cv_mape) +
                      " n_splits=" + std::to_string(run.n_splits) + "\n";
    out += "s\tt_s_ms\n";
    for (const auto& [s, t] : run.runtimes) out += std::to_string(s) + "\t" + c3o::detail::format_double(t) + "\n";
    return out;
}

int cmd_predict(const Options& o) {
    const auto [schema, data] = load_data(o);
    const auto machine = o.machine.empty() ? machine_with_most_records(data) : o.machine;
    const auto run = run_predictions(o, data, machine, parse_context(schema, o.context), parse_scaleouts(o.scaleouts));
    const auto text = prediction_tsv(run);
    std::cout << text;
    if (!o.out.empty()) write_file(o.out, text);
    return kExitOk;
}

int cmd_configure(const Options& o) {
    const auto [schema, data] = load_data(o);
    const auto catalog = c3o::PriceCatalog::parse_tsv(read_file(o.prices, "prices"));
    const auto ctx = parse_context(schema, o.context);

    c3o::ConfigRequest req;
    req.t_max_ms = o.tmax_ms;
    req.confidence = o.confidence;
    req.scale_outs = parse_scaleouts(o.scaleouts);
    req.headroom = o.headroom;
    if (!o.machine.empty()) req.maintainer_machine_type = o.machine;
    if (o.dataset_gb) {
        req.dataset_size_gb = *o.dataset_gb;
    } else if (const auto idx = schema.size_feature()) {
        // size features are recorded in bytes
        req.dataset_size_gb = std::get<double>(ctx[*idx]) / 1e9;
    }
    req.validate();

    const auto machine = c3o::choose_machine_type(req, catalog, c3o::records_per_machine_type(data));
    const auto run = run_predictions(o, data, machine, ctx, req.scale_outs);
    try {
        const auto plan = c3o::build_plan(req, catalog, machine, run.runtimes, run.mu, run.sigma);
        std::cout << "model: " << run.model_id << " (mu " << c3o::detail::format_fixed(run.mu, 1) << " ms, sigma "
                  << c3o::detail::format_fixed(run.sigma, 1) << " ms, confidence "
                  << c3o::detail::format_double(req.confidence) << ")\n";
        std::cout << c3o::plan_table(plan);
        std::cout << "chosen: " << plan.machine_type << " x " << plan.chosen_scale_out << ", predicted "
                  << c3o::detail::format_fixed(plan.predicted_runtime_ms / 1000.0, 1) << " s, cost "
                  << c3o::detail::format_fixed(plan.cost, 4) << "\n";
        if (!o.out.empty()) write_file(o.out, c3o::plan_tsv(plan));
    } catch (const c3o::NoFeasibleScaleOut& e) {
        std::cout << "infeasible: best achievable is s=" << e.best_scale_out() << " at "
                  << c3o::detail::format_fixed(e.best_runtime_ms() / 1000.0, 1)
                  << " s including error margin; deadline " << c3o::detail::format_fixed(*req.t_max_ms / 1000.0, 1)
                  << " s\n";
        return kExitInfeasible;
    }
    return kExitOk;
}

int cmd_record(const Options& o) {
    const auto schema = c3o::JobSchema::parse(read_file(o.schema, "schema"));
    if (o.machine.empty()) throw c3o::InputError("record needs --machine");
    if (!o.runtime_ms) throw c3o::InputError("record needs --runtime-ms");
    c3o::RuntimeRecord r;
    r.machine_type = o.machine;
    r.instance_count = o.scaleout;
    r.context = parse_context(schema, o.context);
    r.gross_runtime_ms = *o.runtime_ms;
    c3o::check_conforms(r, schema);

    if (o.data.empty()) throw c3o::InputError("missing --data");
    std::string existing;
    if (std::filesystem::exists(o.data)) {
        existing = read_file(o.data, "data");
        (void)c3o::parse_tsv(existing, schema);  // refuse to append to a nonconforming file
    }
    std::string text = existing;
    if (text.empty()) text = c3o::tsv_header(schema) + "\n";
    if (text.back() != '\n') text += '\n';
    const auto row = c3o::serialize_record(r);
    text += row + "\n";
    write_file(o.data, text);
    std::cout << row << "\n";
    if (!o.out.empty()) write_file(o.out, c3o::tsv_header(schema) + "\n" + row + "\n");
    return kExitOk;
}

int cmd_validate(const Options& o) {
    const auto [schema, existing] = load_data(o);
    const auto contribution = c3o::parse_tsv(read_file(o.contribution, "contribution"), schema);
    const auto registry = make_registry(o);
    const auto ids = registry.ids();
    const auto v = c3o::validate_contribution(registry, existing, contribution.records(), ids, o.threshold,
                                              make_cap(o), c3o::detail::mix_seed(o.seed, kHoldoutStream));
    const auto row = c3o::verdict_tsv_row(v);
    std::cout << row << "\n";
    if (!o.out.empty()) write_file(o.out, c3o::verdict_tsv_header() + "\n" + row + "\n");
    return v.accepted ? kExitOk : kExitRejected;
}

int cmd_evaluate(const Options& o) {
    if (o.experiment != "origin" && o.experiment != "availability") {
        throw c3o::InputError("--experiment must be origin or availability");
    }
    const auto registry = make_registry(o);
    c3o::HarnessOptions opt;
    opt.repetitions = o.repetitions;
    opt.seed = c3o::detail::mix_seed(o.seed, kHarnessStream);
    opt.models = registry.ids();
    opt.selection_cap.max_splits = std::min<std::size_t>(o.max_splits, 30);
    opt.selection_cap.seed = c3o::detail::mix_seed(o.seed, kCvStream);
    const auto sizes = o.sizes.empty() ? c3o::default_availability_sizes() : o.sizes;

    auto run = [&](const c3o::TrainingSet& pool) {
        return o.experiment == "origin" ? c3o::experiment_origin(pool, opt, registry)
                                        : c3o::experiment_availability(pool, sizes, opt, registry);
    };

    c3o::ExperimentReport report;
    report.experiment = o.experiment;
    report.seed = opt.seed;
    report.repetitions = opt.repetitions;
    if (!o.data.empty()) {
        report.append(run(load_data(o).data));
    } else {
        const auto jobs = o.job == "all" ? c3o::profile_names() : std::vector<std::string>{o.job};
        const std::size_t pool = o.n == 0 ? 200 : o.n;
        for (const auto& job : jobs) {
            const auto profile = c3o::make_profile(job);
            report.append(run(c3o::synth_generate(profile, pool, c3o::detail::mix_seed(o.seed, kGenerateStream))));
        }
    }
    const auto text = report.to_tsv();
    std::cout << text;
    if (!o.out.empty()) write_file(o.out, text);
    if (!o.plots.empty()) c3o::emit_plot_data(report, o.plots);
    return kExitOk;
}

int cmd_generate(const Options& o) {
    if (o.n == 0) throw c3o::InputError("--n must be at least 1");
    auto profile = c3o::make_profile(o.job);
    if (!o.machine.empty()) profile.machine_type = o.machine;
    const auto ts = c3o::synth_generate(profile, o.n, c3o::detail::mix_seed(o.seed, kGenerateStream));
    const auto text = c3o::serialize_tsv(ts);
    if (o.out.empty()) {
        std::cout << text;
    } else {
        write_file(o.out, text);
    }
    if (!o.schema_out.empty()) write_file(o.schema_out, ts.schema().serialize());
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Runtime prediction and cluster configuration from shared runtime data"};
    app.require_subcommand(1);
    Options o;

    auto data_flags = [&](CLI::App* sub) {
        sub->add_option("--data", o.data, "runtime data TSV");
        sub->add_option("--schema", o.schema, "job schema file");
        sub->add_option("--models", o.models, "plug-in model manifest");
        sub->add_option("--seed", o.seed, "master seed");
        sub->add_option("--max-splits", o.max_splits, "cross-validation split cap (0 = full leave-one-out)");
        sub->add_option("--time-budget-ms", o.time_budget_ms, "cross-validation wall-clock budget");
        sub->add_option("--out", o.out, "also write the output as TSV");
    };
    auto context_flags = [&](CLI::App* sub) {
        sub->add_option("--context", o.context, "context feature value, name=value (repeatable)");
        sub->add_option("--scaleouts", o.scaleouts, "scale-out domain, a..b[,step] or a,b,c");
    };

    auto* predict = app.add_subcommand("predict", "predict runtimes over a scale-out domain");
    data_flags(predict);
    context_flags(predict);
    predict->add_option("--machine", o.machine, "machine type (default: the one with most records)");

    auto* configure = app.add_subcommand("configure", "choose machine type and scale-out");
    data_flags(configure);
    context_flags(configure);
    configure->add_option("--prices", o.prices, "price catalog TSV");
    configure->add_option("--tmax-ms", o.tmax_ms, "runtime target in milliseconds");
    configure->add_option("--confidence", o.confidence, "confidence of meeting the target")->check(CLI::Range(0.0, 1.0));
    configure->add_option("--machine", o.machine, "maintainer machine type override");
    configure->add_option("--dataset-gb", o.dataset_gb, "dataset size in GB (default: size feature / 1e9)");
    configure->add_option("--headroom", o.headroom, "memory headroom factor for the bottleneck rule");

    auto* record = app.add_subcommand("record", "append an observed runtime");
    data_flags(record);
    record->add_option("--context", o.context, "context feature value, name=value (repeatable)");
    record->add_option("--machine", o.machine, "machine type");
    record->add_option("--scaleout", o.scaleout, "instance count")->required();
    record->add_option("--runtime-ms", o.runtime_ms, "observed gross runtime in milliseconds");

    auto* validate = app.add_subcommand("validate", "accept or reject a runtime data contribution");
    data_flags(validate);
    validate->add_option("--contribution", o.contribution, "contributed runtime data TSV");
    validate->add_option("--threshold", o.threshold, "tolerated relative MAPE increase");

    auto* evaluate = app.add_subcommand("evaluate", "run an evaluation experiment");
    data_flags(evaluate);
    evaluate->add_option("--experiment", o.experiment, "origin or availability");
    evaluate->add_option("--job", o.job, "synthetic job profile or 'all'");
    evaluate->add_option("--n", o.n, "synthetic pool size (default 200)");
    evaluate->add_option("--repetitions", o.repetitions, "train-test splits per cell");
    evaluate->add_option("--sizes", o.sizes, "training sizes for the availability experiment");
    evaluate->add_option("--plots", o.plots, "directory for per-job plot CSV files");

    auto* generate = app.add_subcommand("generate", "generate synthetic runtime data");
    generate->add_option("--job", o.job, "job profile")->required();
    generate->add_option("--n", o.n, "number of records")->required();
    generate->add_option("--seed", o.seed, "master seed");
    generate->add_option("--machine", o.machine, "machine type label");
    generate->add_option("--out", o.out, "output TSV (default: stdout)");
    generate->add_option("--schema-out", o.schema_out, "write the job schema here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitInput;
    }

    try {
        if (*predict) return cmd_predict(o);
        if (*configure) return cmd_configure(o);
        if (*record) return cmd_record(o);
        if (*validate) return cmd_validate(o);
        if (*evaluate) return cmd_evaluate(o);
        if (*generate) return cmd_generate(o);
    } catch (const c3o::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    }
    return kExitInput;
}
