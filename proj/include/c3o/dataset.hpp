#pragma once

// Shared runtime-data files: job schemas, the TSV record format, machine-type
// filtering, local (single-context) partitioning and numeric encoding.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "c3o/detail/text.hpp"
#include "c3o/error.hpp"
#include "c3o/feature_matrix.hpp"

namespace c3o {

inline constexpr std::string_view kMachineTypeColumn = "machine_type";
inline constexpr std::string_view kInstanceCountColumn = "instance_count";
inline constexpr std::string_view kRuntimeColumn = "gross_runtime";

enum class FeatureKind { numeric, categorical };

inline std::string_view to_string(FeatureKind k) {
    return k == FeatureKind::numeric ? "numeric" : "categorical";
}

struct ContextFeature {
    std::string name;
    FeatureKind kind = FeatureKind::numeric;

    bool operator==(const ContextFeature&) const = default;
};

namespace detail {

inline bool is_identifier(std::string_view s) {
    if (s.empty()) return false;
    return std::all_of(s.begin(), s.end(), [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
               c == '_' || c == '-' || c == '.';
    });
}

}  // namespace detail

/// Declared column layout of one job's shared runtime data. The base columns
/// (machine_type, instance_count, gross_runtime) are implicit.
class JobSchema {
public:
    JobSchema() = default;

    JobSchema(std::string job_name, std::vector<ContextFeature> context)
        : job_name_(std::move(job_name)), context_(std::move(context)) {
        if (!detail::is_identifier(job_name_)) {
            throw SchemaMismatch("invalid job name '" + job_name_ + "'");
        }
        std::set<std::string_view> seen;
        for (const auto& f : context_) {
            if (!detail::is_identifier(f.name)) {
                throw SchemaMismatch("invalid feature name '" + f.name + "'");
            }
            if (f.name == kMachineTypeColumn || f.name == kInstanceCountColumn ||
                f.name == kRuntimeColumn) {
                throw SchemaMismatch("feature name '" + f.name + "' is reserved");
            }
            if (!seen.insert(f.name).second) {
                throw SchemaMismatch("duplicate feature name '" + f.name + "'");
            }
        }
    }

    /// Parses the key-value schema document:
    ///
    ///     # comment
    ///     job_name = kmeans
    ///     context  = data_size:numeric
    ///     context  = k:numeric
    ///
    /// `context` lines are ordered; the kind suffix defaults to numeric.
    static JobSchema parse(std::string_view text) {
        std::optional<std::string> name;
        std::vector<ContextFeature> ctx;
        std::size_t line_no = 0;
        for (auto line : detail::lines(text)) {
            ++line_no;
            line = detail::trim(line);
            if (line.empty() || line.front() == '#') continue;
            const auto eq = line.find('=');
            if (eq == std::string_view::npos) {
                throw SchemaMismatch("schema line " + std::to_string(line_no) + ": expected key = value");
            }
            const auto key = detail::trim(line.substr(0, eq));
            const auto value = detail::trim(line.substr(eq + 1));
            if (key == "job_name") {
                name = std::string(value);
            } else if (key == "context") {
                const auto colon = value.find(':');
                ContextFeature f;
                f.name = std::string(detail::trim(value.substr(0, colon)));
                if (colon != std::string_view::npos) {
                    const auto kind = detail::trim(value.substr(colon + 1));
                    if (kind == "numeric") {
                        f.kind = FeatureKind::numeric;
                    } else if (kind == "categorical") {
                        f.kind = FeatureKind::categorical;
                    } else {
                        throw SchemaMismatch("schema line " + std::to_string(line_no) +
                                             ": unknown feature kind '" + std::string(kind) + "'");
                    }
                }
                ctx.push_back(std::move(f));
            } else {
                throw SchemaMismatch("schema line " + std::to_string(line_no) + ": unknown key '" +
                                     std::string(key) + "'");
            }
        }
        if (!name) throw SchemaMismatch("schema has no job_name");
        return JobSchema(std::move(*name), std::move(ctx));
    }

    std::string serialize() const {
        std::string out = "job_name = " + job_name_ + "\n";
        for (const auto& f : context_) {
            out += "context = " + f.name + ":" + std::string(to_string(f.kind)) + "\n";
        }
        return out;
    }

    const std::string& job_name() const noexcept { return job_name_; }
    const std::vector<ContextFeature>& context_features() const noexcept { return context_; }
    std::size_t arity() const noexcept { return context_.size(); }

    /// Index (within the context features) of the dataset/problem size: the
    /// first numeric context feature.
    std::optional<std::size_t> size_feature() const {
        for (std::size_t i = 0; i < context_.size(); ++i) {
            if (context_[i].kind == FeatureKind::numeric) return i;
        }
        return std::nullopt;
    }

    std::vector<std::string> column_names() const {
        std::vector<std::string> cols{std::string(kMachineTypeColumn),
                                      std::string(kInstanceCountColumn)};
        for (const auto& f : context_) cols.push_back(f.name);
        cols.emplace_back(kRuntimeColumn);
        return cols;
    }

    bool operator==(const JobSchema&) const = default;

private:
    std::string job_name_;
    std::vector<ContextFeature> context_;
};

using FeatureValue = std::variant<double, std::string>;

struct RuntimeRecord {
    std::string machine_type;
    int instance_count = 1;
    std::vector<FeatureValue> context;
    double gross_runtime_ms = 1.0;

    bool operator==(const RuntimeRecord&) const = default;
};

inline void check_conforms(const RuntimeRecord& r, const JobSchema& schema) {
    if (r.machine_type.empty()) throw SchemaMismatch("record has empty machine_type");
    if (r.instance_count < 1) throw SchemaMismatch("instance_count must be >= 1");
    if (!(r.gross_runtime_ms > 0.0) || !std::isfinite(r.gross_runtime_ms)) {
        throw SchemaMismatch("gross_runtime must be a positive finite number");
    }
    if (r.context.size() != schema.arity()) {
        throw SchemaMismatch("record has " + std::to_string(r.context.size()) +
                             " context values, schema declares " + std::to_string(schema.arity()));
    }
    for (std::size_t i = 0; i < r.context.size(); ++i) {
        const auto& f = schema.context_features()[i];
        if (f.kind == FeatureKind::numeric) {
            const auto* v = std::get_if<double>(&r.context[i]);
            if (!v || !std::isfinite(*v)) {
                throw SchemaMismatch("feature '" + f.name + "' must be a finite number");
            }
        } else {
            const auto* v = std::get_if<std::string>(&r.context[i]);
            if (!v || v->empty() || v->find_first_of("\t\n\r") != std::string::npos) {
                throw SchemaMismatch("feature '" + f.name + "' must be a non-empty label");
            }
        }
    }
}

/// Immutable collection of records that all conform to one schema.
class TrainingSet {
public:
    TrainingSet() = default;

    TrainingSet(JobSchema schema, std::vector<RuntimeRecord> records)
        : schema_(std::move(schema)), records_(std::move(records)) {
        for (const auto& r : records_) check_conforms(r, schema_);
    }

    const JobSchema& schema() const noexcept { return schema_; }
    std::span<const RuntimeRecord> records() const noexcept { return records_; }
    std::size_t size() const noexcept { return records_.size(); }
    bool empty() const noexcept { return records_.empty(); }
    const RuntimeRecord& operator[](std::size_t i) const { return records_.at(i); }

    std::vector<double> runtimes() const {
        std::vector<double> y;
        y.reserve(records_.size());
        for (const auto& r : records_) y.push_back(r.gross_runtime_ms);
        return y;
    }

    TrainingSet subset(std::span<const std::size_t> indices) const {
        std::vector<RuntimeRecord> out;
        out.reserve(indices.size());
        for (const auto i : indices) out.push_back(records_.at(i));
        return TrainingSet(schema_, std::move(out));
    }

    TrainingSet with_appended(std::span<const RuntimeRecord> extra) const {
        auto out = records_;
        out.insert(out.end(), extra.begin(), extra.end());
        return TrainingSet(schema_, std::move(out));
    }

    bool operator==(const TrainingSet&) const = default;

private:
    JobSchema schema_;
    std::vector<RuntimeRecord> records_;
};

inline std::string tsv_header(const JobSchema& schema) {
    std::string out;
    const auto cols = schema.column_names();
    for (std::size_t i = 0; i < cols.size(); ++i) {
        if (i) out += '\t';
        out += cols[i];
    }
    return out;
}

inline std::string serialize_record(const RuntimeRecord& r) {
    std::string out = r.machine_type;
    out += '\t';
    out += std::to_string(r.instance_count);
    for (const auto& v : r.context) {
        out += '\t';
        if (const auto* d = std::get_if<double>(&v)) {
            out += detail::format_double(*d);
        } else {
            out += std::get<std::string>(v);
        }
    }
    out += '\t';
    out += detail::format_double(r.gross_runtime_ms);
    return out;
}

/// Header row plus one line per record, each terminated by '\n'.
inline std::string serialize_tsv(const TrainingSet& ts) {
    std::string out = tsv_header(ts.schema());
    out += '\n';
    for (const auto& r : ts.records()) {
        out += serialize_record(r);
        out += '\n';
    }
    return out;
}

/// Parses one data line; `line_no` is used for diagnostics only.
inline RuntimeRecord parse_record(std::string_view line, const JobSchema& schema,
                                  std::size_t line_no) {
    const auto fields = detail::split(line, '\t');
    const std::size_t expected = schema.arity() + 3;
    if (fields.size() != expected) {
        throw MalformedRow(line_no, "expected " + std::to_string(expected) + " fields, got " +
                                        std::to_string(fields.size()));
    }
    RuntimeRecord r;
    r.machine_type = std::string(fields[0]);
    if (r.machine_type.empty()) throw MalformedRow(line_no, "empty machine_type");

    const auto count = detail::parse_integer(fields[1]);
    if (!count || *count < 1 || *count > std::numeric_limits<int>::max()) {
        throw MalformedRow(line_no, "instance_count must be a positive integer, got '" +
                                        std::string(fields[1]) + "'");
    }
    r.instance_count = static_cast<int>(*count);

    for (std::size_t i = 0; i < schema.arity(); ++i) {
        const auto& f = schema.context_features()[i];
        const auto field = fields[i + 2];
        if (field.empty()) throw MalformedRow(line_no, "missing value for '" + f.name + "'");
        if (f.kind == FeatureKind::numeric) {
            const auto v = detail::parse_double(field);
            if (!v) {
                throw MalformedRow(line_no, "feature '" + f.name + "' is not a finite number: '" +
                                                std::string(field) + "'");
            }
            r.context.emplace_back(*v);
        } else {
            r.context.emplace_back(std::string(field));
        }
    }

    const auto runtime = detail::parse_double(fields.back());
    if (!runtime || *runtime <= 0.0) {
        throw MalformedRow(line_no, "gross_runtime must be a positive number, got '" +
                                        std::string(fields.back()) + "'");
    }
    r.gross_runtime_ms = *runtime;
    return r;
}

/// Parses a shared runtime-data file. Column order: machine_type,
/// instance_count, the schema's context features, gross_runtime (ms). Blank
/// lines are ignored.
inline TrainingSet parse_tsv(std::string_view text, const JobSchema& schema) {
    const auto all = detail::lines(text);
    if (all.empty()) throw SchemaMismatch("missing header row");
    const auto header = detail::split(all.front(), '\t');
    const auto expected = schema.column_names();
    bool same = header.size() == expected.size();
    for (std::size_t i = 0; same && i < header.size(); ++i) same = header[i] == expected[i];
    if (!same) {
        throw SchemaMismatch("header '" + std::string(all.front()) + "' does not match schema '" +
                             tsv_header(schema) + "'");
    }
    std::vector<RuntimeRecord> records;
    for (std::size_t i = 1; i < all.size(); ++i) {
        if (detail::trim(all[i]).empty()) continue;
        records.push_back(parse_record(all[i], schema, i + 1));
    }
    return TrainingSet(schema, std::move(records));
}

inline TrainingSet filter_machine_type(const TrainingSet& ts, std::string_view machine_type) {
    std::vector<RuntimeRecord> out;
    for (const auto& r : ts.records()) {
        if (r.machine_type == machine_type) out.push_back(r);
    }
    return TrainingSet(ts.schema(), std::move(out));
}

inline std::map<std::string, std::size_t> records_per_machine_type(const TrainingSet& ts) {
    std::map<std::string, std::size_t> counts;
    for (const auto& r : ts.records()) ++counts[r.machine_type];
    return counts;
}

/// Record indices of the emulated single-user datasets: records agree on
/// every context feature except the dataset/problem size (scale-out is never
/// part of the key). Groups appear in order of first occurrence.
inline std::vector<std::vector<std::size_t>> local_partition_indices(const TrainingSet& ts) {
    const auto size_idx = ts.schema().size_feature();
    std::map<std::vector<FeatureValue>, std::size_t> group_of;
    std::vector<std::vector<std::size_t>> groups;
    for (std::size_t n = 0; n < ts.size(); ++n) {
        const auto& r = ts[n];
        std::vector<FeatureValue> key;
        for (std::size_t i = 0; i < r.context.size(); ++i) {
            if (size_idx && i == *size_idx) continue;
            key.push_back(r.context[i]);
        }
        const auto [it, inserted] = group_of.emplace(std::move(key), groups.size());
        if (inserted) groups.emplace_back();
        groups[it->second].push_back(n);
    }
    return groups;
}

inline std::vector<TrainingSet> local_partitions(const TrainingSet& ts) {
    std::vector<TrainingSet> out;
    for (const auto& g : local_partition_indices(ts)) out.push_back(ts.subset(g));
    return out;
}

/// Numeric encoding shared by every model. Column 0 is the scale-out, then
/// context features in schema order; categorical features expand to one-hot
/// columns over the levels seen when the encoder was built (sorted). Unseen
/// levels encode as all zeros.
class Encoder {
public:
    explicit Encoder(const TrainingSet& ts) : schema_(ts.schema()) {
        levels_.resize(schema_.arity());
        for (std::size_t i = 0; i < schema_.arity(); ++i) {
            if (schema_.context_features()[i].kind != FeatureKind::categorical) continue;
            std::set<std::string> seen;
            for (const auto& r : ts.records()) seen.insert(std::get<std::string>(r.context[i]));
            levels_[i].assign(seen.begin(), seen.end());
        }

        roles_.push_back(ColumnRole::scale_out);
        names_.emplace_back(kInstanceCountColumn);
        detail::Fnv1a h;
        h.update(schema_.job_name());
        for (std::size_t i = 0; i < schema_.arity(); ++i) {
            const auto& f = schema_.context_features()[i];
            h.update(f.name);
            h.update(to_string(f.kind));
            if (f.kind == FeatureKind::numeric) {
                roles_.push_back(ColumnRole::numeric_context);
                names_.push_back(f.name);
            } else {
                for (const auto& level : levels_[i]) {
                    h.update(level);
                    roles_.push_back(ColumnRole::one_hot_context);
                    names_.push_back(f.name + "=" + level);
                }
            }
        }
        fingerprint_ = h.value();
    }

    std::uint64_t fingerprint() const noexcept { return fingerprint_; }
    std::size_t width() const noexcept { return roles_.size(); }
    const JobSchema& schema() const noexcept { return schema_; }

    EncodedRow encode(const RuntimeRecord& r) const {
        check_context(r);
        EncodedRow row;
        row.fingerprint = fingerprint_;
        row.values.reserve(width());
        append(r, row.values);
        return row;
    }

    FeatureMatrix encode(const TrainingSet& ts) const {
        if (!(ts.schema() == schema_)) throw SchemaMismatch("training set schema differs from encoder schema");
        std::vector<double> values;
        values.reserve(ts.size() * width());
        for (const auto& r : ts.records()) append(r, values);
        return FeatureMatrix(ts.size(), roles_, names_, std::move(values), fingerprint_);
    }

private:
    void check_context(const RuntimeRecord& r) const {
        if (r.instance_count < 1) throw SchemaMismatch("instance_count must be >= 1");
        if (r.context.size() != schema_.arity()) {
            throw SchemaMismatch("record context arity does not match schema");
        }
        for (std::size_t i = 0; i < schema_.arity(); ++i) {
            const bool numeric = schema_.context_features()[i].kind == FeatureKind::numeric;
            if (numeric != std::holds_alternative<double>(r.context[i])) {
                throw SchemaMismatch("feature '" + schema_.context_features()[i].name +
                                     "' has the wrong value kind");
            }
        }
    }

    void append(const RuntimeRecord& r, std::vector<double>& out) const {
        out.push_back(static_cast<double>(r.instance_count));
        for (std::size_t i = 0; i < schema_.arity(); ++i) {
            if (schema_.context_features()[i].kind == FeatureKind::numeric) {
                out.push_back(std::get<double>(r.context[i]));
            } else {
                const auto& label = std::get<std::string>(r.context[i]);
                for (const auto& level : levels_[i]) out.push_back(level == label ? 1.0 : 0.0);
            }
        }
    }

    JobSchema schema_;
    std::vector<std::vector<std::string>> levels_;
    std::vector<ColumnRole> roles_;
    std::vector<std::string> names_;
    std::uint64_t fingerprint_ = 0;
};

}  // namespace c3o
