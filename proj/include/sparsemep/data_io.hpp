#pragma once

// Dataset ingestion, synthetic instances, and the versioned JSON / CSV formats used by
// the CLI and the bindings.

#include "sparsemep/constraints.hpp"
#include "sparsemep/phase.hpp"
#include "sparsemep/solver.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace sparsemep {

using nlohmann::json;

inline constexpr int kSchemaVersion = 1;

struct FeatureColumn {
    std::string name;
    int column = 0;  // 0-based field index in the raw CSV
};

struct DatasetSpec {
    std::string path;
    std::vector<FeatureColumn> features;  // a_1..a_13 in order
    FeatureColumn target{"price", 25};
    std::string missing_marker = "?";
    int expected_rows = 205;
    int expected_complete = 195;
    int expected_fields = 26;

    /// The 13 continuous UCI automobile attributes, wheel-base .. highway-mpg.
    static DatasetSpec automobile(std::string path);
};

/// Replaces the feature list (and optionally the target) from a mapping document:
/// {"features": [{"name": ..., "column": <0-based>}, ...], "target": {...}}.
/// Exactly 13 features are required.
void apply_mapping(DatasetSpec& spec, const json& mapping);

/// Reads the raw CSV, drops records with a missing marker in any used field, and scales
/// every feature column and the target to unit 2-norm (no centering).
/// Throws DataIntegrityError on row-count mismatches, ParseError on bad numbers.
Problem load_automobile(const DatasetSpec& spec, int k = 1);

struct SyntheticSpec {
    long n = 8;
    long d = 15;
    int k_true = 3;
    int k = 5;
    double noise_sigma = 0.0;
    double coef_low = 1.0;   // |w_j| ~ U[coef_low, coef_high], random sign
    double coef_high = 2.0;
    std::uint64_t seed = 0;
};

struct SyntheticInstance {
    Problem problem;
    std::vector<int> support;  // 0-based, ascending
    VectorXd w;
};

/// A with i.i.d. N(0,1) entries, planted support uniform over k_true-subsets,
/// y = A w + N(0, noise_sigma^2). Pure function of the spec.
SyntheticInstance generate_synthetic(const SyntheticSpec& spec);

json to_json(const Problem& problem);
json to_json(const SparseSolution& solution);
json to_json(const AnnealTrace& trace);
json to_json(const TransitionReport& report);
json to_json(const AnnealConfig& config);

Problem problem_from_json(const json& j);
SparseSolution solution_from_json(const json& j);
AnnealTrace trace_from_json(const json& j);
TransitionReport report_from_json(const json& j);

/// Overlays the keys present in j onto base (unknown keys are a ConfigError).
AnnealConfig config_from_json(const json& j, AnnealConfig base = {});

/// Constraint file: [{"kind": "at_most_one" | "at_least_one" | "group",
/// "features": [1-based indices]}, ...], optionally wrapped as {"constraints": [...]}.
ConstraintSet constraints_from_json(const json& j, long d);
json to_json(const ConstraintSet& set);

/// Parses text, mapping syntax errors to ParseError.
json parse_json(const std::string& text);
/// Compact rendering with full-precision doubles, NaN and infinities as null.
std::string dump_json(const json& j);

std::string serialize(const Problem& problem);
std::string serialize(const SparseSolution& solution);
std::string serialize(const AnnealTrace& trace);
std::string serialize(const TransitionReport& report);

Problem deserialize_problem(const std::string& text);
SparseSolution deserialize_solution(const std::string& text);
AnnealTrace deserialize_trace(const std::string& text);
TransitionReport deserialize_report(const std::string& text);

/// "log_inv_T,k_d" rows, one per trace record.
std::string kd_csv(const AnnealTrace& trace);
/// "segment,k_d,median,max" rows of fractional change.
std::string segment_csv(const FractionalChangeStats& stats);
/// One row per detected transition with analytic and observed temperatures.
std::string transition_csv(const TransitionReport& report);

std::string read_file(const std::string& path);
/// Writes to path + ".tmp" and renames over path.
void write_file_atomic(const std::string& path, const std::string& contents);

}  // namespace sparsemep
