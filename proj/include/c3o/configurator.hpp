#pragma once

// Cluster configuration: machine type choice, confidence-aware scale-out
// choice and the per-scale-out runtime/cost table.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "c3o/detail/text.hpp"
#include "c3o/error.hpp"

namespace c3o {

/// Inverse of the Gauss error function. A polynomial seed (Giles 2010) is
/// refined by Newton steps against std::erf.
inline double inv_erf(double p) {
    if (std::isnan(p) || !(std::abs(p) < 1.0)) {
        throw DomainError("inv_erf: argument must lie in (-1, 1)");
    }
    if (p == 0.0) return 0.0;
    const double a = std::abs(p);

    double w = -std::log((1.0 - a) * (1.0 + a));
    double x;
    if (w < 5.0) {
        w -= 2.5;
        x = 2.81022636e-08;
        x = 3.43273939e-07 + x * w;
        x = -3.5233877e-06 + x * w;
        x = -4.39150654e-06 + x * w;
        x = 0.00021858087 + x * w;
        x = -0.00125372503 + x * w;
        x = -0.00417768164 + x * w;
        x = 0.246640727 + x * w;
        x = 1.50140941 + x * w;
    } else {
        w = std::sqrt(w) - 3.0;
        x = -0.000200214257;
        x = 0.000100950558 + x * w;
        x = 0.00134934322 + x * w;
        x = -0.00367342844 + x * w;
        x = 0.00573950773 + x * w;
        x = -0.0076224613 + x * w;
        x = 0.00943887047 + x * w;
        x = 1.00167406 + x * w;
        x = 2.83297682 + x * w;
    }
    x *= a;

    const double two_over_sqrt_pi = 2.0 * std::numbers::inv_sqrtpi;
    for (int i = 0; i < 4; ++i) {
        const double step = (std::erf(x) - a) / (two_over_sqrt_pi * std::exp(-x * x));
        x -= step;
        if (std::abs(step) <= 1e-16 * std::max(1.0, x)) break;
    }
    return p < 0.0 ? -x : x;
}

/// Standard normal quantile multiplier for one-sided confidence c.
inline double confidence_multiplier(double c) {
    if (!(c > 0.0 && c < 1.0)) throw DomainError("confidence must lie in (0, 1)");
    return std::numbers::sqrt2 * inv_erf(2.0 * c - 1.0);
}

/// Error margin mu + sqrt(2) * erfinv(2c - 1) * sigma, in the units of mu.
inline double epsilon_c(double mu, double sigma, double c) {
    if (sigma < 0.0) throw DomainError("sigma must be non-negative");
    return mu + confidence_multiplier(c) * sigma;
}

enum class MachineCategory { general, compute, memory, storage };

inline std::string_view to_string(MachineCategory c) {
    switch (c) {
        case MachineCategory::general: return "general";
        case MachineCategory::compute: return "compute";
        case MachineCategory::memory: return "memory";
        case MachineCategory::storage: return "storage";
    }
    return "general";
}

struct MachineSpec {
    double price_per_hour = 0.0;
    double memory_gb = 0.0;
    MachineCategory category = MachineCategory::general;
};

/// Static machine-type price list.
class PriceCatalog {
public:
    PriceCatalog() = default;

    void add(std::string machine_type, MachineSpec spec) {
        if (machine_type.empty()) throw InputError("price catalog: empty machine type");
        if (!(spec.price_per_hour > 0.0) || !(spec.memory_gb > 0.0)) {
            throw InputError("price catalog: '" + machine_type + "' needs positive price and memory");
        }
        if (!entries_.emplace(std::move(machine_type), spec).second) {
            throw InputError("price catalog: duplicate machine type");
        }
    }

    /// TSV with header `machine_type  price_per_hour  memory_gb  category`.
    static PriceCatalog parse_tsv(std::string_view text) {
        const auto all = detail::lines(text);
        if (all.empty() || all.front() != "machine_type\tprice_per_hour\tmemory_gb\tcategory") {
            throw InputError("price catalog: expected header 'machine_type\\tprice_per_hour\\tmemory_gb\\tcategory'");
        }
        PriceCatalog cat;
        for (std::size_t i = 1; i < all.size(); ++i) {
            if (detail::trim(all[i]).empty()) continue;
            const auto where = "price catalog line " + std::to_string(i + 1) + ": ";
            const auto f = detail::split(all[i], '\t');
            if (f.size() != 4) throw InputError(where + "expected 4 fields");
            const auto price = detail::parse_double(f[1]);
            const auto mem = detail::parse_double(f[2]);
            if (!price || !mem) throw InputError(where + "price and memory must be numbers");
            MachineSpec spec{*price, *mem, MachineCategory::general};
            if (f[3] == "general") {
                spec.category = MachineCategory::general;
            } else if (f[3] == "compute") {
                spec.category = MachineCategory::compute;
            } else if (f[3] == "memory") {
                spec.category = MachineCategory::memory;
            } else if (f[3] == "storage") {
                spec.category = MachineCategory::storage;
            } else {
                throw InputError(where + "unknown category '" + std::string(f[3]) + "'");
            }
            try {
                cat.add(std::string(f[0]), spec);
            } catch (const InputError& e) {
                throw InputError(where + e.what());
            }
        }
        return cat;
    }

    bool empty() const noexcept { return entries_.empty(); }
    bool contains(std::string_view m) const { return entries_.find(std::string(m)) != entries_.end(); }

    const MachineSpec& at(std::string_view m) const {
        const auto it = entries_.find(std::string(m));
        if (it == entries_.end()) throw NoUsableMachineType("machine type '" + std::string(m) + "' is not in the price catalog");
        return it->second;
    }

    const std::map<std::string, MachineSpec>& entries() const noexcept { return entries_; }

private:
    std::map<std::string, MachineSpec> entries_;
};

inline constexpr double kDefaultConfidence = 0.95;
inline constexpr double kDefaultHeadroom = 1.5;

struct ConfigRequest {
    std::optional<double> t_max_ms;
    double confidence = kDefaultConfidence;
    std::vector<int> scale_outs;
    double dataset_size_gb = 0.0;
    std::optional<std::string> maintainer_machine_type;
    double headroom = kDefaultHeadroom;

    void validate() const {
        if (!(confidence > 0.0 && confidence < 1.0)) throw InputError("confidence must lie in (0, 1)");
        if (scale_outs.empty()) throw PreconditionViolation("scale-out domain is empty");
        for (const int s : scale_outs)
            if (s < 1) throw InputError("scale-outs must be positive integers");
        if (t_max_ms && !(*t_max_ms > 0.0)) throw InputError("deadline must be positive");
        if (dataset_size_gb < 0.0 || headroom < 0.0) throw InputError("dataset size and headroom must be >= 0");
    }
};

/// Aggregate cluster memory cannot hold the dataset with the given headroom.
inline bool bottleneck_flag(int scale_out, const MachineSpec& machine, double dataset_size_gb,
                            double headroom = kDefaultHeadroom) {
    return static_cast<double>(scale_out) * machine.memory_gb < headroom * dataset_size_gb;
}

/// Maintainer recommendation, else the general-purpose type with the most
/// runtime records, else the type with the most records overall. Count ties
/// go to the lexicographically smaller name.
inline std::string choose_machine_type(const ConfigRequest& req, const PriceCatalog& catalog,
                                       const std::map<std::string, std::size_t>& available_data) {
    if (catalog.empty()) throw NoUsableMachineType("price catalog is empty");
    if (req.maintainer_machine_type) {
        (void)catalog.at(*req.maintainer_machine_type);
        return *req.maintainer_machine_type;
    }
    std::optional<std::string> best_general, best_any;
    std::size_t n_general = 0, n_any = 0;
    for (const auto& [machine, spec] : catalog.entries()) {
        const auto it = available_data.find(machine);
        const std::size_t n = it == available_data.end() ? 0 : it->second;
        if (n == 0) continue;
        if (spec.category == MachineCategory::general && n > n_general) {
            best_general = machine;
            n_general = n;
        }
        if (n > n_any) {
            best_any = machine;
            n_any = n;
        }
    }
    if (best_general) return *best_general;
    if (best_any) return *best_any;
    throw NoUsableMachineType("no machine type in the price catalog has runtime data");
}

struct ScaleOutChoice {
    int scale_out = 0;
    double runtime_with_margin_ms = 0.0;
    bool bottleneck_warning = false;  // only bottleneck-flagged scale-outs met the deadline
};

/// Smallest s with t_s + epsilon_c <= t_max that is not bottleneck-flagged;
/// falls back to the smallest flagged one (with a warning) when no other
/// option exists.
inline ScaleOutChoice choose_scale_out(const std::map<int, double>& predictions, double mu, double sigma,
                                       double confidence, double t_max_ms,
                                       const std::set<int>& flagged = {}) {
    if (predictions.empty()) throw PreconditionViolation("no runtime predictions to choose from");
    const double margin = epsilon_c(mu, sigma, confidence);
    std::optional<ScaleOutChoice> flagged_choice;
    std::optional<ScaleOutChoice> best;
    for (const auto& [s, t] : predictions) {
        const double total = t + margin;
        if (!best || total < best->runtime_with_margin_ms) best = ScaleOutChoice{s, total, false};
        if (!(total <= t_max_ms)) continue;
        if (!flagged.contains(s)) return ScaleOutChoice{s, total, false};
        if (!flagged_choice) flagged_choice = ScaleOutChoice{s, total, true};
    }
    if (flagged_choice) return *flagged_choice;
    throw NoFeasibleScaleOut(best->scale_out, best->runtime_with_margin_ms);
}

struct PlanRow {
    int scale_out = 0;
    double runtime_ms = 0.0;
    double cost = 0.0;
    bool meets_deadline = true;
    bool bottleneck = false;
    bool chosen = false;
};

struct ClusterPlan {
    std::string machine_type;
    int chosen_scale_out = 0;
    double predicted_runtime_ms = 0.0;
    double epsilon_c_ms = 0.0;
    double cost = 0.0;
    bool bottleneck_warning = false;
    std::vector<PlanRow> table;
};

/// price_per_hour x hours x nodes.
inline double execution_cost(double price_per_hour, double runtime_ms, int scale_out) {
    return price_per_hour * (runtime_ms / 3'600'000.0) * static_cast<double>(scale_out);
}

/// Builds the runtime/cost table over req.scale_outs for one machine type.
/// With a deadline the row follows choose_scale_out; without one it is the
/// cheapest non-flagged row (ties to the smaller scale-out).
inline ClusterPlan build_plan(const ConfigRequest& req, const PriceCatalog& catalog,
                              const std::string& machine_type, const std::map<int, double>& predictions,
                              double mu, double sigma) {
    req.validate();
    const auto& spec = catalog.at(machine_type);

    ClusterPlan plan;
    plan.machine_type = machine_type;
    plan.epsilon_c_ms = epsilon_c(mu, sigma, req.confidence);

    std::set<int> domain(req.scale_outs.begin(), req.scale_outs.end());
    std::map<int, double> restricted;
    std::set<int> flagged;
    for (const int s : domain) {
        const auto it = predictions.find(s);
        if (it == predictions.end()) {
            throw PreconditionViolation("missing runtime prediction for scale-out " + std::to_string(s));
        }
        restricted.emplace(s, it->second);
        PlanRow row;
        row.scale_out = s;
        row.runtime_ms = it->second;
        row.cost = execution_cost(spec.price_per_hour, it->second, s);
        row.meets_deadline = !req.t_max_ms || it->second + plan.epsilon_c_ms <= *req.t_max_ms;
        row.bottleneck = bottleneck_flag(s, spec, req.dataset_size_gb, req.headroom);
        if (row.bottleneck) flagged.insert(s);
        plan.table.push_back(row);
    }

    int chosen = 0;
    if (req.t_max_ms) {
        const auto c = choose_scale_out(restricted, mu, sigma, req.confidence, *req.t_max_ms, flagged);
        chosen = c.scale_out;
        plan.bottleneck_warning = c.bottleneck_warning;
    } else {
        const PlanRow* best = nullptr;
        for (const bool allow_flagged : {false, true}) {
            for (const auto& row : plan.table) {
                if (row.bottleneck && !allow_flagged) continue;
                if (!best || row.cost < best->cost) best = &row;
            }
            if (best) {
                plan.bottleneck_warning = allow_flagged;
                break;
            }
        }
        chosen = best->scale_out;
    }
    for (auto& row : plan.table) {
        row.chosen = row.scale_out == chosen;
        if (row.chosen) {
            plan.chosen_scale_out = chosen;
            plan.predicted_runtime_ms = row.runtime_ms;
            plan.cost = row.cost;
        }
    }
    return plan;
}

inline std::string plan_tsv(const ClusterPlan& plan) {
    std::string out = "s\tt_s_ms\tcost\tmeets_deadline\tbottleneck\tchosen\n";
    for (const auto& r : plan.table) {
        out += std::to_string(r.scale_out) + "\t" + detail::format_double(r.runtime_ms) + "\t" +
               detail::format_double(r.cost) + "\t" + (r.meets_deadline ? "1" : "0") + "\t" +
               (r.bottleneck ? "1" : "0") + "\t" + (r.chosen ? "1" : "0") + "\n";
    }
    return out;
}

/// Human-readable plan table.
inline std::string plan_table(const ClusterPlan& plan) {
    std::string out = "machine type: " + plan.machine_type + "\n";
    out += "error margin (ms): " + detail::format_fixed(plan.epsilon_c_ms, 1) + "\n";
    out += "  scale-out    runtime (s)         cost   deadline  bottleneck\n";
    for (const auto& r : plan.table) {
        std::string line = r.chosen ? "* " : "  ";
        auto pad = [](std::string s, std::size_t w) {
            return s.size() >= w ? s : std::string(w - s.size(), ' ') + s;
        };
        line += pad(std::to_string(r.scale_out), 9);
        line += pad(detail::format_fixed(r.runtime_ms / 1000.0, 1), 15);
        line += pad(detail::format_fixed(r.cost, 4), 13);
        line += pad(r.meets_deadline ? "yes" : "no", 11);
        line += pad(r.bottleneck ? "yes" : "no", 12);
        if (r.chosen) line += "  chosen";
        out += line + "\n";
    }
    if (plan.bottleneck_warning) out += "warning: every feasible scale-out risks a memory bottleneck\n";
    return out;
}

}  // namespace c3o
