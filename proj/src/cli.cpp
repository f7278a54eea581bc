#include "sparsemep/cli.hpp"

#include "sparsemep/baselines.hpp"
#include "sparsemep/data_io.hpp"
#include "sparsemep/errors.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

namespace sparsemep {

namespace {

constexpr const char* kExitCodeHelp =
    "Exit codes:\n"
    "  0  success\n"
    "  1  usage or configuration error\n"
    "  2  data integrity or parse error\n"
    "  3  infeasible constraints\n"
    "  4  solver failure\n"
    "  +8 warning bit: added to the status when the run completed with a non-converged\n"
    "     temperature, soft rounding, a constraint violated by the rounded solution, or\n"
    "     (compare) a row where the annealed cost exceeds the greedy cost";

struct Options {
    std::string input;
    std::vector<int> ks;
    std::string constraints;
    std::string config;
    std::string mapping;
    std::string out_dir = ".";
    std::optional<double> beta;
    std::optional<double> tmin;
    std::string tmax;
    std::optional<std::uint64_t> seed;
    bool no_analytic = false;
    bool verbose = false;
    double oracle_cap = kDefaultEnumerationCap;
};

void add_anneal_flags(CLI::App* cmd, Options& o) {
    cmd->add_option("--constraints", o.constraints, "Constraint JSON file");
    cmd->add_option("--config", o.config, "Solver config JSON (overridden by flags)");
    cmd->add_option("--beta", o.beta, "Cooling factor in (0, 1)");
    cmd->add_option("--tmin", o.tmin, "Final temperature");
    cmd->add_option("--tmax", o.tmax, "Initial temperature: auto or a positive value");
    cmd->add_option("--seed", o.seed, "Seed of the random generator");
    cmd->add_option("--out-dir", o.out_dir, "Directory for output artifacts");
    cmd->add_flag("-v,--verbose", o.verbose, "Log one line per temperature to stderr");
}

std::string hex(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

// Collects outputs of one command and writes them together with the run manifest.
class Run {
public:
    Run(std::string command, Options& options, std::ostream& err)
        : command_(std::move(command)), options_(options), err_(err), start_(std::chrono::steady_clock::now()) {}

    AnnealConfig config() {
        AnnealConfig c;
        if (!options_.config.empty()) c = config_from_json(parse_json(read_file(options_.config)), c);
        if (options_.beta) c.beta = *options_.beta;
        if (options_.tmin) c.t_min = *options_.tmin;
        if (!options_.tmax.empty()) {
            if (options_.tmax == "auto") {
                c.t_max.reset();
            } else {
                try {
                    std::size_t used = 0;
                    c.t_max = std::stod(options_.tmax, &used);
                    if (used != options_.tmax.size()) throw std::invalid_argument("trailing characters");
                } catch (const std::exception&) {
                    throw ConfigError("--tmax must be 'auto' or a number, got '" + options_.tmax + "'");
                }
            }
        }
        if (options_.seed) c.seed = *options_.seed;
        c.validate();
        settings_["anneal"] = to_json(c);
        if (options_.verbose) {
            c.on_record = [this](const TraceRecord& r) {
                err_ << std::setprecision(6) << "T=" << r.T << " k_d=" << r.k_d << " cost=" << r.relaxed_cost
                     << " rounded=" << r.rounded_cost << " iters=" << r.inner_iterations
                     << (r.converged ? "" : " (not converged)") << '\n';
            };
        }
        return c;
    }

    void setting(const std::string& key, json value) { settings_[key] = std::move(value); }
    void input(const std::string& path) { inputs_.push_back(path); }

    std::string hash() const {
        json j{{"command", command_}, {"settings", settings_}, {"inputs", inputs_}};
        return hex(fnv1a(j.dump()));
    }

    json manifest_ref() const { return json{{"file", manifest_name()}, {"config_hash", hash()}}; }

    std::string path(const std::string& name) const {
        return (std::filesystem::path(options_.out_dir) / name).string();
    }

    void write(const std::string& name, const std::string& contents) {
        std::filesystem::create_directories(options_.out_dir);
        write_file_atomic(path(name), contents);
        outputs_.push_back(path(name));
    }

    void write_json(const std::string& name, json j) {
        j["manifest"] = manifest_ref();
        write(name, dump_json(j));
    }

    void finish(std::uint64_t seed) {
        const double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        json m{{"command", command_},
               {"config_hash", hash()},
               {"seed", seed},
               {"settings", settings_},
               {"inputs", inputs_},
               {"outputs", outputs_},
               {"library_version", kLibraryVersion},
               {"duration_seconds", seconds},
               {"timestamp", utc_timestamp()}};
        std::filesystem::create_directories(options_.out_dir);
        write_file_atomic(path(manifest_name()), dump_json(m));
    }

private:
    std::string manifest_name() const { return "manifest_" + command_ + ".json"; }

    std::string command_;
    Options& options_;
    std::ostream& err_;
    std::chrono::steady_clock::time_point start_;
    json settings_ = json::object();
    json inputs_ = json::array();
    std::vector<std::string> outputs_;
};

Problem load_problem(const Options& o, std::optional<int> k) {
    Problem problem = deserialize_problem(read_file(o.input));
    if (k) {
        if (*k < 1 || *k > problem.d()) {
            throw ConfigError("--k must satisfy 1 <= k <= d = " + std::to_string(problem.d()));
        }
        problem = problem.with_k(*k);
    }
    return problem;
}

ConstraintSet load_constraints(const Options& o, long d) {
    if (o.constraints.empty()) return {};
    return constraints_from_json(parse_json(read_file(o.constraints)), d);
}

std::string feature_label(const Problem& problem, int j) {
    std::string label = "a" + std::to_string(j + 1);
    const auto& names = problem.feature_names();
    if (static_cast<std::size_t>(j) < names.size() && !names[static_cast<std::size_t>(j)].empty()) {
        label += " (" + names[static_cast<std::size_t>(j)] + ")";
    }
    return label;
}

std::string support_string(const std::vector<int>& support) {
    std::string s;
    for (std::size_t i = 0; i < support.size(); ++i) {
        if (i) s += ' ';
        s += std::to_string(support[i] + 1);
    }
    return s;
}

int warning_status(const SolveDiagnostics& diag, std::ostream& err) {
    if (diag.nonconverged_temperatures > 0) {
        err << "warning: " << diag.nonconverged_temperatures << " temperature(s) did not converge\n";
    }
    if (diag.stalled) err << "warning: annealing stopped early on a frozen fractional selection\n";
    if (diag.soft_rounding) err << "warning: rounding was soft (some column of Q was not near one-hot)\n";
    if (!diag.constraints_satisfied) err << "warning: the rounded solution violates a constraint\n";
    return diag.has_warnings() ? kWarningBit : 0;
}

void print_solution(const Problem& problem, const ConstraintSet& constraints, const AnnealResult& result,
                    std::ostream& out) {
    const SparseSolution& s = result.solution;
    out << "k = " << problem.k() << ", effective sparsity = " << s.effective_sparsity << '\n';
    out << std::setprecision(10);
    out << "cost ||y - Aw||^2 = " << s.cost << ", ||y - Aw|| = " << s.residual_norm() << '\n';
    out << "selected features:\n";
    for (int j : s.support()) out << "  " << feature_label(problem, j) << "  w = " << s.w(j) << '\n';
    if (!constraints.empty()) {
        out << "constraints:\n";
        for (const auto& c : constraints.constraints) {
            ConstraintSet single{{c}};
            out << "  " << to_string(c.kind) << " {" << support_string(c.features) << "}: "
                << (satisfied_by(single, s.V) ? "satisfied" : "VIOLATED") << '\n';
        }
    }
    const auto& d = result.diagnostics;
    out << "temperatures = " << d.temperatures << ", T_max = " << d.t_max << ", final T = " << d.final_T
        << ", binary = " << (d.binary_converged ? "yes" : "no") << '\n';
}

int cmd_prep(Options& o, std::optional<int> k, std::ostream& out, std::ostream&, Run& run) {
    DatasetSpec spec = DatasetSpec::automobile(o.input);
    run.input(o.input);
    if (!o.mapping.empty()) {
        apply_mapping(spec, parse_json(read_file(o.mapping)));
        run.input(o.mapping);
    }
    json mapping = json::array();
    for (const auto& f : spec.features) mapping.push_back({{"name", f.name}, {"column", f.column}});
    run.setting("mapping", mapping);
    run.setting("k", k.value_or(1));
    if (k && (*k < 1 || *k > 13)) throw ConfigError("--k must satisfy 1 <= k <= 13");
    const Problem problem = load_automobile(spec, k.value_or(1));
    run.write_json("problem.json", to_json(problem));
    out << "problem: n = " << problem.n() << ", d = " << problem.d() << ", k = " << problem.k() << " -> "
        << run.path("problem.json") << '\n';
    run.finish(0);
    return 0;
}

int cmd_fit(Options& o, std::optional<int> k, std::ostream& out, std::ostream& err, Run& run) {
    const Problem problem = load_problem(o, k);
    const ConstraintSet constraints = load_constraints(o, problem.d());
    run.input(o.input);
    if (!o.constraints.empty()) run.input(o.constraints);
    run.setting("k", problem.k());
    run.setting("constraints", to_json(constraints));
    AnnealConfig config = run.config();
    config.keep_snapshots = false;
    const AnnealResult result = anneal(problem, constraints, config);

    json j = to_json(result.solution);
    j["constraints_satisfied"] = result.diagnostics.constraints_satisfied;
    j["diagnostics"] = {{"t_max", result.diagnostics.t_max},
                        {"final_T", result.diagnostics.final_T},
                        {"temperatures", result.diagnostics.temperatures},
                        {"nonconverged_temperatures", result.diagnostics.nonconverged_temperatures},
                        {"soft_rounding", result.diagnostics.soft_rounding},
                        {"binary_converged", result.diagnostics.binary_converged},
                        {"stalled", result.diagnostics.stalled}};
    run.write_json("solution.json", j);
    print_solution(problem, constraints, result, out);
    run.finish(config.seed);
    return warning_status(result.diagnostics, err);
}

int cmd_trace(Options& o, std::optional<int> k, std::ostream& out, std::ostream& err, Run& run) {
    const Problem problem = load_problem(o, k);
    const ConstraintSet constraints = load_constraints(o, problem.d());
    run.input(o.input);
    if (!o.constraints.empty()) run.input(o.constraints);
    run.setting("k", problem.k());
    run.setting("constraints", to_json(constraints));
    run.setting("analytic", !o.no_analytic);
    AnnealConfig config = run.config();
    config.keep_snapshots = true;
    const AnnealResult result = anneal(problem, constraints, config);

    TransitionOptions topts;
    topts.analytic = !o.no_analytic;
    topts.beta = config.beta;
    topts.col_tol = config.col_tol;
    const TransitionReport report = analyze_transitions(problem, result.trace, topts);

    run.write_json("trace.json", to_json(result.trace));
    run.write_json("transitions.json", to_json(report));
    run.write("kd.csv", kd_csv(result.trace));
    run.write("segments.csv", segment_csv(report.fractional));
    run.write("transitions.csv", transition_csv(report));

    out << std::setprecision(6);
    out << "temperatures = " << result.trace.records.size() << ", transitions = " << report.transitions.size()
        << '\n';
    out << "k_d path:";
    int last = 0;
    for (const auto& r : result.trace.records) {
        if (r.k_d != last) out << ' ' << r.k_d;
        last = r.k_d;
    }
    out << '\n';
    out << std::left << std::setw(10) << "k_d" << std::setw(14) << "T_observed" << std::setw(14) << "T_cr"
        << std::setw(10) << "1-step" << std::setw(10) << "flip" << "jump\n";
    for (const auto& t : report.transitions) {
        std::ostringstream kd;
        kd << t.kd_before << "->" << t.kd_after;
        out << std::setw(10) << kd.str() << std::setw(14) << t.t_observed << std::setw(14)
            << (t.t_cr ? std::to_string(*t.t_cr) : std::string("-")) << std::setw(10)
            << (o.no_analytic ? "-" : (t.within_one_step ? "yes" : "no")) << std::setw(10)
            << (o.no_analytic ? "-" : (t.sign_flip ? "yes" : "no")) << t.jump << '\n';
    }
    out << std::right;
    out << "pooled intra-phase median change = " << report.fractional.pooled_median << '\n';
    out << "persistence estimate of the sparsity = " << report.persistence.k_hat
        << (report.persistence.low_confidence ? " (low confidence)" : "") << '\n';
    out << "final cost = " << result.solution.cost << ", support = {" << support_string(result.solution.support())
        << "}\n";
    run.finish(config.seed);
    return warning_status(result.diagnostics, err);
}

int cmd_compare(Options& o, std::ostream& out, std::ostream& err, Run& run) {
    const Problem base = load_problem(o, std::nullopt);
    const ConstraintSet constraints = load_constraints(o, base.d());
    run.input(o.input);
    if (!o.constraints.empty()) run.input(o.constraints);
    std::vector<int> ks = o.ks.empty() ? std::vector<int>{base.k()} : o.ks;
    for (int k : ks) {
        if (k < 1 || k > base.d()) throw ConfigError("--k must satisfy 1 <= k <= d = " + std::to_string(base.d()));
    }
    run.setting("k", ks);
    run.setting("constraints", to_json(constraints));
    run.setting("oracle_cap", o.oracle_cap);
    AnnealConfig config = run.config();
    config.keep_snapshots = false;

    std::ostringstream csv;
    csv << std::setprecision(17);
    csv << "k,mep_cost,mep_support,omp_cost,omp_support,omp_feasible,oracle_cost,oracle_support\n";
    out << std::setprecision(8) << std::left;
    out << std::setw(4) << "k" << std::setw(14) << "MEP" << std::setw(16) << "OMP" << "oracle\n";
    int status = 0;
    for (int k : ks) {
        const Problem problem = base.with_k(k);
        const AnnealResult mep = anneal(problem, constraints, config);
        status |= warning_status(mep.diagnostics, err);
        const SparseSolution greedy = omp(problem);
        const bool omp_feasible = constraints.empty() || satisfied_by(constraints, greedy.V);

        std::optional<OracleResult> oracle;
        if (subset_count(problem.d(), k) <= o.oracle_cap) oracle = exhaustive_best_subset(problem, constraints, o.oracle_cap);

        csv << k << ',' << mep.solution.cost << ',' << support_string(mep.solution.support()) << ','
            << greedy.cost << ',' << support_string(greedy.support()) << ',' << (omp_feasible ? 1 : 0) << ',';
        if (oracle) {
            csv << oracle->cost << ',' << support_string(oracle->support) << '\n';
        } else {
            csv << "skipped,skipped\n";
        }

        std::ostringstream omp_cell;
        omp_cell << greedy.cost << (omp_feasible ? "" : "*");
        out << std::setw(4) << k << std::setw(14) << mep.solution.cost << std::setw(16) << omp_cell.str();
        if (oracle) {
            out << oracle->cost;
        } else {
            out << "skipped";
        }
        out << '\n';
        if (mep.solution.cost > greedy.cost + 1e-9) {
            err << "warning: k = " << k << ": annealed cost " << mep.solution.cost << " exceeds greedy cost "
                << greedy.cost << '\n';
            status |= kWarningBit;
        }
    }
    out << std::right;
    if (!constraints.empty()) out << "(* greedy support violates the constraints)\n";
    run.write("compare.csv", csv.str());
    run.finish(config.seed);
    return status;
}

}  // namespace

std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Exact-k sparse regression by maximum-entropy deterministic annealing", "sparsemep"};
    app.footer(kExitCodeHelp);
    app.set_version_flag("--version", kLibraryVersion);
    app.require_subcommand(1, 1);

    Options o;
    std::optional<int> k;

    auto* prep = app.add_subcommand("prep", "Convert the raw UCI automobile CSV into problem JSON");
    prep->add_option("input", o.input, "Raw imports-85.data file")->required();
    prep->add_option("--mapping", o.mapping, "Feature mapping JSON");
    prep->add_option("--k", k, "Sparsity stored in the problem (default 1)");
    prep->add_option("--out-dir", o.out_dir, "Directory for output artifacts");

    auto* fit = app.add_subcommand("fit", "Anneal one problem and write the solution");
    fit->add_option("input", o.input, "Problem JSON")->required();
    fit->add_option("--k", k, "Sparsity (default: the problem's k)");
    add_anneal_flags(fit, o);

    auto* trace = app.add_subcommand("trace", "Anneal with full trace retention and analyse the transitions");
    trace->add_option("input", o.input, "Problem JSON")->required();
    trace->add_option("--k", k, "Sparsity (default: the problem's k)");
    trace->add_flag("--no-analytic", o.no_analytic, "Skip the reduced-Hessian critical temperatures");
    add_anneal_flags(trace, o);

    auto* compare = app.add_subcommand("compare", "Compare annealing, OMP and exhaustive search");
    compare->add_option("input", o.input, "Problem JSON")->required();
    compare->add_option("--k", o.ks, "Sparsity levels, e.g. --k 3,4,5")->delimiter(',');
    compare->add_option("--oracle-cap", o.oracle_cap, "Largest subset count enumerated");
    add_anneal_flags(compare, o);

    for (auto* sub : {prep, fit, trace, compare}) sub->footer(kExitCodeHelp);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : static_cast<int>(ExitCode::kUsage);
    }

    try {
        if (prep->parsed()) {
            Run run("prep", o, err);
            return cmd_prep(o, k, out, err, run);
        }
        if (fit->parsed()) {
            Run run("fit", o, err);
            return cmd_fit(o, k, out, err, run);
        }
        if (trace->parsed()) {
            Run run("trace", o, err);
            return cmd_trace(o, k, out, err, run);
        }
        Run run("compare", o, err);
        return cmd_compare(o, out, err, run);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return static_cast<int>(e.exit_code());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return static_cast<int>(ExitCode::kSolverFailure);
    }
}

}  // namespace sparsemep
