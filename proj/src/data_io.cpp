#include "sparsemep/data_io.hpp"

#include "sparsemep/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

namespace sparsemep {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream is(line);
    while (std::getline(is, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parse_number(const std::string& text, long row, long col) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != text.size() || !std::isfinite(v)) {
        std::ostringstream os;
        os << "unparseable number '" << text << "' at row " << row + 1 << ", column " << col + 1;
        throw ParseError(os.str(), row, col);
    }
    return v;
}

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double read_number(const json& j) {
    if (j.is_null()) return kNaN;
    if (!j.is_number()) throw ParseError("expected a number, got " + std::string(j.type_name()));
    return j.get<double>();
}

json vector_json(const VectorXd& v) {
    json out = json::array();
    for (long i = 0; i < v.size(); ++i) out.push_back(number(v(i)));
    return out;
}

VectorXd read_vector(const json& j) {
    if (!j.is_array()) throw ParseError("expected an array of numbers");
    VectorXd v(static_cast<long>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<long>(i)) = read_number(j[i]);
    return v;
}

template <typename Matrix>
json matrix_json(const Matrix& m) {
    json rows = json::array();
    for (long i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (long c = 0; c < m.cols(); ++c) {
            if constexpr (std::is_floating_point_v<typename Matrix::Scalar>) {
                row.push_back(number(m(i, c)));
            } else {
                row.push_back(m(i, c));
            }
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

MatrixXd read_matrix(const json& j) {
    if (!j.is_array()) throw ParseError("expected a matrix (array of rows)");
    const long rows = static_cast<long>(j.size());
    const long cols = rows == 0 ? 0 : static_cast<long>(j[0].size());
    MatrixXd m(rows, cols);
    for (long i = 0; i < rows; ++i) {
        const json& row = j[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<long>(row.size()) != cols) throw ParseError("ragged matrix rows");
        for (long c = 0; c < cols; ++c) m(i, c) = read_number(row[static_cast<std::size_t>(c)]);
    }
    return m;
}

Eigen::MatrixXi read_int_matrix(const json& j) {
    const MatrixXd m = read_matrix(j);
    Eigen::MatrixXi out(m.rows(), m.cols());
    for (long i = 0; i < m.rows(); ++i) {
        for (long c = 0; c < m.cols(); ++c) {
            if (m(i, c) != std::round(m(i, c))) throw ParseError("expected an integer matrix");
            out(i, c) = static_cast<int>(m(i, c));
        }
    }
    return out;
}

json header(const char* type) { return json{{"schema", type}, {"version", kSchemaVersion}}; }

void check_header(const json& j, const char* type) {
    if (!j.is_object()) throw ParseError(std::string("expected a ") + type + " object");
    if (!j.contains("schema") || j["schema"] != type) {
        throw ParseError(std::string("document is not a ") + type);
    }
    if (!j.contains("version") || !j["version"].is_number_integer()) {
        throw ParseError("missing schema version");
    }
    const int version = j["version"].get<int>();
    if (version != kSchemaVersion) {
        throw VersionError(std::string(type) + " schema version " + std::to_string(version) +
                           " is not supported (expected " + std::to_string(kSchemaVersion) + ")");
    }
}

// Wraps nlohmann access errors so that a malformed document surfaces as ParseError.
template <typename F>
auto guarded(const char* what, F&& f) {
    try {
        return f();
    } catch (const Error&) {
        throw;
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed ") + what + ": " + e.what());
    }
}

std::vector<int> read_ints(const json& j) {
    std::vector<int> out;
    for (const auto& v : j) out.push_back(v.get<int>());
    return out;
}

}  // namespace

DatasetSpec DatasetSpec::automobile(std::string path) {
    DatasetSpec spec;
    spec.path = std::move(path);
    spec.features = {
        {"wheel-base", 9},    {"length", 10},     {"width", 11},       {"height", 12},
        {"curb-weight", 13},  {"engine-size", 16}, {"bore", 18},        {"stroke", 19},
        {"compression-ratio", 20}, {"horsepower", 21}, {"peak-rpm", 22}, {"city-mpg", 23},
        {"highway-mpg", 24},
    };
    return spec;
}

void apply_mapping(DatasetSpec& spec, const json& mapping) {
    guarded("mapping", [&] {
        if (!mapping.is_object() || !mapping.contains("features")) {
            throw ConfigError("mapping must be an object with a \"features\" array");
        }
        std::vector<FeatureColumn> features;
        for (const auto& f : mapping.at("features")) {
            features.push_back({f.at("name").get<std::string>(), f.at("column").get<int>()});
        }
        if (features.size() != 13) {
            throw ConfigError("mapping must list exactly 13 features, got " + std::to_string(features.size()));
        }
        spec.features = std::move(features);
        if (mapping.contains("target")) {
            const auto& t = mapping["target"];
            spec.target = {t.value("name", spec.target.name), t.at("column").get<int>()};
        }
        return 0;
    });
}

Problem load_automobile(const DatasetSpec& spec, int k) {
    if (spec.features.size() != 13) throw ConfigError("dataset spec must have exactly 13 feature columns");
    std::ifstream in(spec.path);
    if (!in) throw DataIntegrityError("cannot open dataset file '" + spec.path + "'");

    std::vector<int> used;
    for (const auto& f : spec.features) used.push_back(f.column);
    used.push_back(spec.target.column);
    for (int c : used) {
        if (c < 0 || c >= spec.expected_fields) {
            throw ConfigError("column " + std::to_string(c) + " outside the " +
                              std::to_string(spec.expected_fields) + " CSV fields");
        }
    }

    std::vector<std::vector<double>> rows;
    std::string line;
    long total = 0;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        const auto fields = split_fields(trim(line));
        if (static_cast<int>(fields.size()) != spec.expected_fields) {
            std::ostringstream os;
            os << "row " << total + 1 << " has " << fields.size() << " fields, expected " << spec.expected_fields;
            throw DataIntegrityError(os.str());
        }
        bool complete = true;
        for (int c : used) complete = complete && trim(fields[static_cast<std::size_t>(c)]) != spec.missing_marker;
        if (complete) {
            std::vector<double> values;
            for (int c : used) values.push_back(parse_number(trim(fields[static_cast<std::size_t>(c)]), total, c));
            rows.push_back(std::move(values));
        }
        ++total;
    }
    if (total != spec.expected_rows) {
        throw DataIntegrityError("dataset has " + std::to_string(total) + " records, expected " +
                                 std::to_string(spec.expected_rows));
    }
    if (static_cast<int>(rows.size()) != spec.expected_complete) {
        throw DataIntegrityError("dataset has " + std::to_string(rows.size()) + " complete records, expected " +
                                 std::to_string(spec.expected_complete));
    }

    const long n = static_cast<long>(rows.size());
    const long d = static_cast<long>(spec.features.size());
    MatrixXd A(n, d);
    VectorXd y(n);
    for (long i = 0; i < n; ++i) {
        for (long j = 0; j < d; ++j) A(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        y(i) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(d)];
    }
    for (long j = 0; j < d; ++j) {
        const double norm = A.col(j).norm();
        if (norm == 0.0) throw DataIntegrityError("feature '" + spec.features[static_cast<std::size_t>(j)].name + "' is identically zero");
        A.col(j) /= norm;
    }
    const double ynorm = y.norm();
    if (ynorm == 0.0) throw DataIntegrityError("target column is identically zero");
    y /= ynorm;

    std::vector<std::string> names;
    for (const auto& f : spec.features) names.push_back(f.name);
    return Problem(std::move(A), std::move(y), k, std::move(names));
}

SyntheticInstance generate_synthetic(const SyntheticSpec& spec) {
    if (spec.n < 1 || spec.d < 1 || spec.k_true < 0 || spec.k_true > spec.d || spec.k < 1 || spec.k > spec.d) {
        throw ConfigError("synthetic spec needs n, d >= 1, 0 <= k_true <= d and 1 <= k <= d");
    }
    if (!(spec.coef_low <= spec.coef_high) || spec.noise_sigma < 0.0) {
        throw ConfigError("synthetic spec needs coef_low <= coef_high and noise_sigma >= 0");
    }
    std::mt19937_64 gen(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> magnitude(spec.coef_low, spec.coef_high);

    MatrixXd A(spec.n, spec.d);
    for (long i = 0; i < spec.n; ++i) {
        for (long j = 0; j < spec.d; ++j) A(i, j) = normal(gen);
    }
    std::vector<int> perm(static_cast<std::size_t>(spec.d));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), gen);

    SyntheticInstance out;
    out.support.assign(perm.begin(), perm.begin() + spec.k_true);
    std::sort(out.support.begin(), out.support.end());
    out.w = VectorXd::Zero(spec.d);
    for (int j : out.support) {
        const double sign = (gen() & 1U) ? 1.0 : -1.0;
        out.w(j) = sign * magnitude(gen);
    }
    VectorXd y = A * out.w;
    if (spec.noise_sigma > 0.0) {
        for (long i = 0; i < spec.n; ++i) y(i) += spec.noise_sigma * normal(gen);
    }
    out.problem = Problem(std::move(A), std::move(y), spec.k);
    return out;
}

json to_json(const Problem& problem) {
    json j = header("problem");
    j["n"] = problem.n();
    j["d"] = problem.d();
    j["k"] = problem.k();
    j["feature_names"] = problem.feature_names();
    j["A"] = matrix_json(problem.A());
    j["y"] = vector_json(problem.y());
    return j;
}

Problem problem_from_json(const json& j) {
    return guarded("problem", [&] {
        check_header(j, "problem");
        MatrixXd A = read_matrix(j.at("A"));
        VectorXd y = read_vector(j.at("y"));
        const int k = j.at("k").get<int>();
        if (A.rows() != j.at("n").get<long>() || A.cols() != j.at("d").get<long>() || y.size() != A.rows()) {
            throw ParseError("problem dimensions do not match its n and d fields");
        }
        if (!A.allFinite() || !y.allFinite()) throw ParseError("problem contains non-finite values");
        if (k < 1 || k > A.cols()) throw DomainError("problem k must satisfy 1 <= k <= d");
        std::vector<std::string> names;
        if (j.contains("feature_names")) names = j["feature_names"].get<std::vector<std::string>>();
        return Problem(std::move(A), std::move(y), k, std::move(names));
    });
}

json to_json(const SparseSolution& solution) {
    json j = header("solution");
    json support = json::array();
    for (int s : solution.support()) support.push_back(s + 1);
    j["support"] = support;
    j["V"] = matrix_json(solution.V);
    j["x"] = vector_json(solution.x);
    j["w"] = vector_json(solution.w);
    j["cost"] = number(solution.cost);
    j["effective_sparsity"] = solution.effective_sparsity;
    return j;
}

SparseSolution solution_from_json(const json& j) {
    return guarded("solution", [&] {
        check_header(j, "solution");
        SparseSolution s;
        s.V = read_int_matrix(j.at("V"));
        s.x = read_vector(j.at("x"));
        s.w = read_vector(j.at("w"));
        s.cost = read_number(j.at("cost"));
        s.effective_sparsity = j.at("effective_sparsity").get<int>();
        if (s.V.cols() != s.x.size() || s.V.rows() != s.w.size()) {
            throw ParseError("solution V, x and w have inconsistent sizes");
        }
        return s;
    });
}

json to_json(const AnnealTrace& trace) {
    json j = header("trace");
    json records = json::array();
    for (const auto& r : trace.records) {
        json rec{{"T", number(r.T)},
                 {"x", vector_json(r.x)},
                 {"mu", vector_json(r.mu)},
                 {"relaxed_cost", number(r.relaxed_cost)},
                 {"rounded_cost", number(r.rounded_cost)},
                 {"k_d", r.k_d},
                 {"stoch_residual", number(r.stoch_residual)},
                 {"constraint_violation", number(r.constraint_violation)},
                 {"inner_iterations", r.inner_iterations},
                 {"multiplier_rounds", r.multiplier_rounds},
                 {"kicks", r.kicks},
                 {"converged", r.converged}};
        if (r.Q.size() > 0) rec["Q"] = matrix_json(r.Q);
        records.push_back(std::move(rec));
    }
    j["records"] = std::move(records);
    j["transitions"] = trace.transitions;
    return j;
}

AnnealTrace trace_from_json(const json& j) {
    return guarded("trace", [&] {
        check_header(j, "trace");
        AnnealTrace trace;
        for (const auto& rec : j.at("records")) {
            TraceRecord r;
            r.T = read_number(rec.at("T"));
            r.x = read_vector(rec.at("x"));
            r.mu = read_vector(rec.at("mu"));
            r.relaxed_cost = read_number(rec.at("relaxed_cost"));
            r.rounded_cost = read_number(rec.at("rounded_cost"));
            r.k_d = rec.at("k_d").get<int>();
            r.stoch_residual = read_number(rec.at("stoch_residual"));
            r.constraint_violation = read_number(rec.at("constraint_violation"));
            r.inner_iterations = rec.at("inner_iterations").get<int>();
            r.multiplier_rounds = rec.at("multiplier_rounds").get<int>();
            r.kicks = rec.value("kicks", 0);
            r.converged = rec.at("converged").get<bool>();
            if (rec.contains("Q")) r.Q = read_matrix(rec["Q"]);
            trace.records.push_back(std::move(r));
        }
        trace.transitions = read_ints(j.at("transitions"));
        for (int t : trace.transitions) {
            if (t < 0 || t >= static_cast<int>(trace.records.size())) throw ParseError("transition index out of range");
        }
        return trace;
    });
}

json to_json(const TransitionReport& report) {
    json j = header("transition_report");
    json transitions = json::array();
    for (const auto& t : report.transitions) {
        transitions.push_back({{"record", t.record},
                               {"t_before", number(t.t_before)},
                               {"t_observed", number(t.t_observed)},
                               {"kd_before", t.kd_before},
                               {"kd_after", t.kd_after},
                               {"jump", number(t.jump)},
                               {"t_cr", t.t_cr ? number(*t.t_cr) : json(nullptr)},
                               {"within_one_step", t.within_one_step},
                               {"min_eig_above", number(t.min_eig_above)},
                               {"min_eig_below", number(t.min_eig_below)},
                               {"sign_flip", t.sign_flip}});
    }
    j["transitions"] = std::move(transitions);

    json segments = json::array();
    for (const auto& s : report.fractional.segments) {
        json changes = json::array();
        for (double c : s.changes) changes.push_back(number(c));
        segments.push_back({{"first_record", s.first_record},
                            {"last_record", s.last_record},
                            {"k_d", s.k_d},
                            {"changes", std::move(changes)},
                            {"median", number(s.median)},
                            {"max", number(s.max)},
                            {"interior", s.interior}});
    }
    json jumps = json::array();
    for (double v : report.fractional.jumps) jumps.push_back(number(v));
    j["fractional"] = {{"segments", std::move(segments)},
                       {"jumps", std::move(jumps)},
                       {"pooled_median", number(report.fractional.pooled_median)}};

    json dwell = json::array();
    for (const auto& [kd, span] : report.persistence.dwell) dwell.push_back({{"k_d", kd}, {"span", number(span)}});
    j["persistence"] = {{"k_hat", report.persistence.k_hat},
                        {"low_confidence", report.persistence.low_confidence},
                        {"dwell", std::move(dwell)}};
    return j;
}

TransitionReport report_from_json(const json& j) {
    return guarded("transition report", [&] {
        check_header(j, "transition_report");
        TransitionReport report;
        for (const auto& t : j.at("transitions")) {
            TransitionInfo info;
            info.record = t.at("record").get<int>();
            info.t_before = read_number(t.at("t_before"));
            info.t_observed = read_number(t.at("t_observed"));
            info.kd_before = t.at("kd_before").get<int>();
            info.kd_after = t.at("kd_after").get<int>();
            info.jump = read_number(t.at("jump"));
            if (!t.at("t_cr").is_null()) info.t_cr = read_number(t["t_cr"]);
            info.within_one_step = t.at("within_one_step").get<bool>();
            info.min_eig_above = read_number(t.at("min_eig_above"));
            info.min_eig_below = read_number(t.at("min_eig_below"));
            info.sign_flip = t.at("sign_flip").get<bool>();
            report.transitions.push_back(info);
        }
        const json& f = j.at("fractional");
        for (const auto& s : f.at("segments")) {
            SegmentStats seg;
            seg.first_record = s.at("first_record").get<int>();
            seg.last_record = s.at("last_record").get<int>();
            seg.k_d = s.at("k_d").get<int>();
            for (const auto& c : s.at("changes")) seg.changes.push_back(read_number(c));
            seg.median = read_number(s.at("median"));
            seg.max = read_number(s.at("max"));
            seg.interior = s.at("interior").get<bool>();
            report.fractional.segments.push_back(std::move(seg));
        }
        for (const auto& v : f.at("jumps")) report.fractional.jumps.push_back(read_number(v));
        report.fractional.pooled_median = read_number(f.at("pooled_median"));
        const json& p = j.at("persistence");
        report.persistence.k_hat = p.at("k_hat").get<int>();
        report.persistence.low_confidence = p.at("low_confidence").get<bool>();
        for (const auto& dw : p.at("dwell")) {
            report.persistence.dwell.emplace_back(dw.at("k_d").get<int>(), read_number(dw.at("span")));
        }
        return report;
    });
}

json to_json(const AnnealConfig& c) {
    return json{{"t_max", c.t_max ? json(*c.t_max) : json("auto")},
                {"t_min", c.t_min ? json(*c.t_min) : json(nullptr)},
                {"beta", c.beta},
                {"inner_max_iters", c.inner_max_iters},
                {"inner_tol", c.inner_tol},
                {"damping", c.damping},
                {"ridge_eps", c.ridge_eps},
                {"tol_stoch", c.tol_stoch},
                {"round_tol", c.round_tol},
                {"multiplier_rounds", c.multiplier_rounds},
                {"perturbation", c.perturbation},
                {"col_tol", c.col_tol},
                {"stability_probe", c.stability_probe},
                {"kick", c.kick},
                {"max_kicks", c.max_kicks},
                {"stability_max_size", c.stability_max_size},
                {"stall_window", c.stall_window},
                {"seed", c.seed},
                {"keep_snapshots", c.keep_snapshots}};
}

AnnealConfig config_from_json(const json& j, AnnealConfig c) {
    return guarded("config", [&] {
        if (!j.is_object()) throw ConfigError("config must be a JSON object");
        for (const auto& [key, v] : j.items()) {
            if (key == "t_max") {
                if (v.is_string() && v.get<std::string>() == "auto") {
                    c.t_max.reset();
                } else {
                    c.t_max = v.get<double>();
                }
            } else if (key == "t_min") {
                if (v.is_null()) {
                    c.t_min.reset();
                } else {
                    c.t_min = v.get<double>();
                }
            } else if (key == "beta") {
                c.beta = v.get<double>();
            } else if (key == "inner_max_iters") {
                c.inner_max_iters = v.get<int>();
            } else if (key == "inner_tol") {
                c.inner_tol = v.get<double>();
            } else if (key == "damping") {
                c.damping = v.get<double>();
            } else if (key == "ridge_eps") {
                c.ridge_eps = v.get<double>();
            } else if (key == "tol_stoch") {
                c.tol_stoch = v.get<double>();
            } else if (key == "round_tol") {
                c.round_tol = v.get<double>();
            } else if (key == "multiplier_rounds") {
                c.multiplier_rounds = v.get<int>();
            } else if (key == "perturbation") {
                c.perturbation = v.get<double>();
            } else if (key == "col_tol") {
                c.col_tol = v.get<double>();
            } else if (key == "stability_probe") {
                c.stability_probe = v.get<bool>();
            } else if (key == "kick") {
                c.kick = v.get<double>();
            } else if (key == "max_kicks") {
                c.max_kicks = v.get<int>();
            } else if (key == "stability_max_size") {
                c.stability_max_size = v.get<int>();
            } else if (key == "stall_window") {
                c.stall_window = v.get<int>();
            } else if (key == "seed") {
                c.seed = v.get<std::uint64_t>();
            } else if (key == "keep_snapshots") {
                c.keep_snapshots = v.get<bool>();
            } else {
                throw ConfigError("unknown config key '" + key + "'");
            }
        }
        return c;
    });
}

ConstraintSet constraints_from_json(const json& j, long d) {
    return guarded("constraint file", [&] {
        const json& list = (j.is_object() && j.contains("constraints")) ? j["constraints"] : j;
        if (!list.is_array()) throw ParseError("constraint file must be a JSON array");
        ConstraintSet set;
        for (const auto& item : list) {
            const auto kind = constraint_kind_from_string(item.at("kind").get<std::string>());
            std::vector<int> features;
            for (const auto& f : item.at("features")) {
                const int one_based = f.get<int>();
                if (one_based < 1 || one_based > d) {
                    throw ConstraintError("constraint feature " + std::to_string(one_based) + " outside 1.." +
                                          std::to_string(d));
                }
                features.push_back(one_based - 1);
            }
            switch (kind) {
                case ConstraintKind::AtMostOne: set.constraints.push_back(at_most_one(features, d)); break;
                case ConstraintKind::AtLeastOne: set.constraints.push_back(at_least_one(features, d)); break;
                case ConstraintKind::GroupTie: set.constraints.push_back(group_tie(features, d)); break;
            }
        }
        return set;
    });
}

json to_json(const ConstraintSet& set) {
    json out = json::array();
    for (const auto& c : set.constraints) {
        json features = json::array();
        for (int f : c.features) features.push_back(f + 1);
        out.push_back({{"kind", to_string(c.kind)}, {"features", std::move(features)}});
    }
    return out;
}

json parse_json(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("malformed JSON: ") + e.what());
    }
}

std::string dump_json(const json& j) { return j.dump(1, '\t') + "\n"; }

std::string serialize(const Problem& problem) { return dump_json(to_json(problem)); }
std::string serialize(const SparseSolution& solution) { return dump_json(to_json(solution)); }
std::string serialize(const AnnealTrace& trace) { return dump_json(to_json(trace)); }
std::string serialize(const TransitionReport& report) { return dump_json(to_json(report)); }

Problem deserialize_problem(const std::string& text) { return problem_from_json(parse_json(text)); }
SparseSolution deserialize_solution(const std::string& text) { return solution_from_json(parse_json(text)); }
AnnealTrace deserialize_trace(const std::string& text) { return trace_from_json(parse_json(text)); }
TransitionReport deserialize_report(const std::string& text) { return report_from_json(parse_json(text)); }

std::string kd_csv(const AnnealTrace& trace) {
    std::ostringstream os;
    os << std::setprecision(17) << "log_inv_T,k_d\n";
    for (const auto& r : trace.records) os << std::log(1.0 / r.T) << ',' << r.k_d << '\n';
    return os.str();
}

std::string segment_csv(const FractionalChangeStats& stats) {
    std::ostringstream os;
    os << std::setprecision(17) << "segment,k_d,median,max,interior\n";
    for (std::size_t s = 0; s < stats.segments.size(); ++s) {
        const auto& seg = stats.segments[s];
        os << s << ',' << seg.k_d << ',' << seg.median << ',' << seg.max << ',' << (seg.interior ? 1 : 0) << '\n';
    }
    return os.str();
}

std::string transition_csv(const TransitionReport& report) {
    std::ostringstream os;
    os << std::setprecision(17)
       << "record,kd_before,kd_after,t_before,t_observed,t_cr,within_one_step,min_eig_above,min_eig_below,sign_flip,jump\n";
    for (const auto& t : report.transitions) {
        os << t.record << ',' << t.kd_before << ',' << t.kd_after << ',' << t.t_before << ',' << t.t_observed << ',';
        if (t.t_cr) os << *t.t_cr;
        os << ',' << (t.within_one_step ? 1 : 0) << ',' << t.min_eig_above << ',' << t.min_eig_below << ','
           << (t.sign_flip ? 1 : 0) << ',' << t.jump << '\n';
    }
    return os.str();
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataIntegrityError("cannot open '" + path + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_file_atomic(const std::string& path, const std::string& contents) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write '" + tmp + "'");
        out << contents;
        out.flush();
        if (!out) throw Error("write failed for '" + tmp + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw Error("cannot rename '" + tmp + "' to '" + path + "': " + ec.message());
}

}  // namespace sparsemep
