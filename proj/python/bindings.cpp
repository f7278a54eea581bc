#include "sparsemep/baselines.hpp"
#include "sparsemep/constraints.hpp"
#include "sparsemep/data_io.hpp"
#include "sparsemep/errors.hpp"
#include "sparsemep/model.hpp"
#include "sparsemep/phase.hpp"
#include "sparsemep/solver.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace sparsemep;

namespace {

ConstraintSet make_constraints(const py::object& spec, long d) {
    if (spec.is_none()) return {};
    if (py::isinstance<ConstraintSet>(spec)) return spec.cast<ConstraintSet>();
    const std::string text = py::str(py::module_::import("json").attr("dumps")(spec));
    return constraints_from_json(parse_json(text), d);
}

}  // namespace

PYBIND11_MODULE(_sparsemep, m) {
    m.doc() = "Exact-k sparse regression by deterministic annealing over a relaxed selection matrix.";

    auto base = py::register_exception<Error>(m, "SparsemepError", PyExc_RuntimeError);
    py::register_exception<DomainError>(m, "DomainError", base);
    py::register_exception<ShapeError>(m, "ShapeError", base);
    py::register_exception<ConfigError>(m, "ConfigError", base);
    py::register_exception<SolverError>(m, "SolverError", base);
    py::register_exception<NumericalError>(m, "NumericalError", base);
    py::register_exception<ConstraintError>(m, "ConstraintError", base);
    py::register_exception<DataIntegrityError>(m, "DataIntegrityError", base);
    py::register_exception<ParseError>(m, "ParseError", base);
    py::register_exception<VersionError>(m, "VersionError", base);

    py::class_<Problem>(m, "Problem")
        .def(py::init<MatrixXd, VectorXd, int, std::vector<std::string>>(), py::arg("A"), py::arg("y"), py::arg("k"),
             py::arg("feature_names") = std::vector<std::string>{})
        .def_property_readonly("A", &Problem::A)
        .def_property_readonly("y", &Problem::y)
        .def_property_readonly("k", &Problem::k)
        .def_property_readonly("n", &Problem::n)
        .def_property_readonly("d", &Problem::d)
        .def_property_readonly("feature_names", &Problem::feature_names)
        .def("with_k", &Problem::with_k, py::arg("k"))
        .def("to_json", [](const Problem& p) { return serialize(p); })
        .def_static("from_json", &deserialize_problem, py::arg("text"))
        .def("__repr__", [](const Problem& p) {
            return "<Problem n=" + std::to_string(p.n()) + " d=" + std::to_string(p.d()) + " k=" +
                   std::to_string(p.k()) + ">";
        });

    py::class_<ConstraintSet>(m, "ConstraintSet")
        .def(py::init<>())
        .def_property_readonly("row_count", &ConstraintSet::row_count)
        .def("__len__", [](const ConstraintSet& s) { return s.constraints.size(); })
        .def("to_json", [](const ConstraintSet& s) { return dump_json(to_json(s)); });

    m.def("constraints", &make_constraints, py::arg("spec"), py::arg("d"),
          "Builds a ConstraintSet from a list of {'kind', 'features' (1-based)} dicts.");

    py::class_<AnnealConfig>(m, "AnnealConfig")
        .def(py::init<>())
        .def_readwrite("t_max", &AnnealConfig::t_max)
        .def_readwrite("t_min", &AnnealConfig::t_min)
        .def_readwrite("beta", &AnnealConfig::beta)
        .def_readwrite("inner_max_iters", &AnnealConfig::inner_max_iters)
        .def_readwrite("inner_tol", &AnnealConfig::inner_tol)
        .def_readwrite("damping", &AnnealConfig::damping)
        .def_readwrite("ridge_eps", &AnnealConfig::ridge_eps)
        .def_readwrite("tol_stoch", &AnnealConfig::tol_stoch)
        .def_readwrite("round_tol", &AnnealConfig::round_tol)
        .def_readwrite("multiplier_rounds", &AnnealConfig::multiplier_rounds)
        .def_readwrite("perturbation", &AnnealConfig::perturbation)
        .def_readwrite("col_tol", &AnnealConfig::col_tol)
        .def_readwrite("stability_probe", &AnnealConfig::stability_probe)
        .def_readwrite("kick", &AnnealConfig::kick)
        .def_readwrite("max_kicks", &AnnealConfig::max_kicks)
        .def_readwrite("stability_max_size", &AnnealConfig::stability_max_size)
        .def_readwrite("stall_window", &AnnealConfig::stall_window)
        .def_readwrite("seed", &AnnealConfig::seed)
        .def_readwrite("keep_snapshots", &AnnealConfig::keep_snapshots)
        .def("validate", &AnnealConfig::validate)
        .def("to_json", [](const AnnealConfig& c) { return dump_json(to_json(c)); })
        .def_static("from_json", [](const std::string& text) { return config_from_json(parse_json(text)); });

    py::class_<SparseSolution>(m, "SparseSolution")
        .def_readonly("V", &SparseSolution::V)
        .def_readonly("x", &SparseSolution::x)
        .def_readonly("w", &SparseSolution::w)
        .def_readonly("cost", &SparseSolution::cost)
        .def_readonly("effective_sparsity", &SparseSolution::effective_sparsity)
        .def_property_readonly("support", &SparseSolution::support)
        .def_property_readonly("residual_norm", &SparseSolution::residual_norm)
        .def("to_json", [](const SparseSolution& s) { return serialize(s); });

    py::class_<TraceRecord>(m, "TraceRecord")
        .def_readonly("T", &TraceRecord::T)
        .def_readonly("Q", &TraceRecord::Q)
        .def_readonly("x", &TraceRecord::x)
        .def_readonly("mu", &TraceRecord::mu)
        .def_readonly("relaxed_cost", &TraceRecord::relaxed_cost)
        .def_readonly("rounded_cost", &TraceRecord::rounded_cost)
        .def_readonly("k_d", &TraceRecord::k_d)
        .def_readonly("inner_iterations", &TraceRecord::inner_iterations)
        .def_readonly("kicks", &TraceRecord::kicks)
        .def_readonly("converged", &TraceRecord::converged);

    py::class_<AnnealTrace>(m, "AnnealTrace")
        .def_readonly("records", &AnnealTrace::records)
        .def_readonly("transitions", &AnnealTrace::transitions)
        .def("to_json", [](const AnnealTrace& t) { return serialize(t); });

    py::class_<SolveDiagnostics>(m, "SolveDiagnostics")
        .def_readonly("t_max", &SolveDiagnostics::t_max)
        .def_readonly("final_T", &SolveDiagnostics::final_T)
        .def_readonly("temperatures", &SolveDiagnostics::temperatures)
        .def_readonly("nonconverged_temperatures", &SolveDiagnostics::nonconverged_temperatures)
        .def_readonly("soft_rounding", &SolveDiagnostics::soft_rounding)
        .def_readonly("constraints_satisfied", &SolveDiagnostics::constraints_satisfied)
        .def_readonly("binary_converged", &SolveDiagnostics::binary_converged)
        .def_readonly("stalled", &SolveDiagnostics::stalled);

    py::class_<AnnealResult>(m, "AnnealResult")
        .def_readonly("solution", &AnnealResult::solution)
        .def_readonly("trace", &AnnealResult::trace)
        .def_readonly("diagnostics", &AnnealResult::diagnostics);

    m.def(
        "anneal",
        [](const Problem& problem, const py::object& constraints, const AnnealConfig& config) {
            const ConstraintSet set = make_constraints(constraints, problem.d());
            py::gil_scoped_release release;
            return anneal(problem, set, config);
        },
        py::arg("problem"), py::arg("constraints") = py::none(), py::arg("config") = AnnealConfig{});

    m.def("omp", &omp, py::arg("problem"));
    m.def(
        "exhaustive_best_subset",
        [](const Problem& problem, const py::object& constraints, double cap) {
            const OracleResult r = exhaustive_best_subset(problem, make_constraints(constraints, problem.d()), cap);
            return py::make_tuple(r.support, r.coefficients, r.cost);
        },
        py::arg("problem"), py::arg("constraints") = py::none(), py::arg("cap") = kDefaultEnumerationCap,
        "Returns (support, coefficients, cost) of the best k-subset.");

    m.def("entropy", &entropy, py::arg("Q"));
    m.def("relaxed_cost", &relaxed_cost, py::arg("problem"), py::arg("Q"), py::arg("x"));
    m.def("update_x", [](const Problem& p, const MatrixXd& Q) { return update_x(p, Q); }, py::arg("problem"),
          py::arg("Q"));
    m.def("count_distinct_columns", &count_distinct_columns, py::arg("Q"), py::arg("col_tol") = 1e-3);

    m.def(
        "analyze_transitions",
        [](const Problem& problem, const AnnealTrace& trace, bool analytic, double beta) {
            TransitionOptions options;
            options.analytic = analytic;
            options.beta = beta;
            return serialize(analyze_transitions(problem, trace, options));
        },
        py::arg("problem"), py::arg("trace"), py::arg("analytic") = true, py::arg("beta") = 0.95,
        "Transition report as JSON text.");

    m.def(
        "load_automobile",
        [](const std::string& path, int k) { return load_automobile(DatasetSpec::automobile(path), k); },
        py::arg("path"), py::arg("k") = 1);

    m.def(
        "generate_synthetic",
        [](long n, long d, int k_true, int k, double noise_sigma, std::uint64_t seed) {
            SyntheticSpec spec;
            spec.n = n;
            spec.d = d;
            spec.k_true = k_true;
            spec.k = k;
            spec.noise_sigma = noise_sigma;
            spec.seed = seed;
            SyntheticInstance inst = generate_synthetic(spec);
            return py::make_tuple(inst.problem, inst.support, inst.w);
        },
        py::arg("n") = 8, py::arg("d") = 15, py::arg("k_true") = 3, py::arg("k") = 5, py::arg("noise_sigma") = 0.0,
        py::arg("seed") = 0, "Returns (problem, planted support, planted w).");

    m.attr("SCHEMA_VERSION") = kSchemaVersion;
}
