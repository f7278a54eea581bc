#pragma once

// Deterministic annealing over the relaxed selection matrix Q.
//
// At each temperature the solver alternates the two stationarity maps of the free
// energy (the x normal equations and the elementwise Gibbs update of Q with exact
// column normalization), runs the multiplier iteration for structural constraints,
// and then cools geometrically. The structural penalty parameter follows rho = T.

#include "sparsemep/constraints.hpp"
#include "sparsemep/model.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace sparsemep {

struct TraceRecord {
    double T = 0.0;
    MatrixXd Q;  // empty when snapshots are disabled
    VectorXd x;
    VectorXd mu;
    double relaxed_cost = 0.0;
    double rounded_cost = 0.0;  // least-squares cost of the support obtained by rounding Q
    int k_d = 1;
    double stoch_residual = 0.0;
    double constraint_violation = 0.0;
    int inner_iterations = 0;
    int multiplier_rounds = 0;
    int kicks = 0;
    bool converged = true;
};

struct AnnealConfig {
    std::optional<double> t_max;  // nullopt: auto_tmax
    std::optional<double> t_min;  // nullopt: T_max * beta^500, or earlier binary convergence
    double beta = 0.95;
    int inner_max_iters = 2000;
    double inner_tol = 1e-8;
    double damping = 0.5;
    double ridge_eps = 1e-10;
    double tol_stoch = 1e-6;
    double round_tol = 1e-3;
    int multiplier_rounds = 60;
    // Relative size of an optional seeded random perturbation of Q at every temperature.
    // Off by default: symmetry is broken deterministically by the stability probe.
    double perturbation = 0.0;
    double col_tol = 1e-3;
    // After each temperature's fixed point, test its stability through the reduced
    // Hessian and, if unstable, displace Q along the unstable mode by this max-norm
    // amount and solve again, at most max_kicks times per temperature. Skipped when
    // k(d-1) exceeds stability_max_size.
    bool stability_probe = true;
    double kick = 1e-2;
    int max_kicks = 1;
    int stability_max_size = 800;
    // Stop early once this many consecutive temperatures fail to converge without
    // changing the rounded selection (a frozen fractional tie); 0 disables.
    int stall_window = 10;
    std::uint64_t seed = 0;
    bool keep_snapshots = true;
    // Called once per temperature with the finished record (progress logging).
    std::function<void(const TraceRecord&)> on_record;

    /// Throws ConfigError on invalid combinations.
    void validate() const;
};


struct AnnealTrace {
    std::vector<TraceRecord> records;
    /// Record indices at which k_d increased relative to the previous record.
    std::vector<int> transitions;
};

struct SolveDiagnostics {
    double t_max = 0.0;
    double final_T = 0.0;
    int temperatures = 0;
    int nonconverged_temperatures = 0;
    bool soft_rounding = false;
    bool constraints_satisfied = true;
    bool binary_converged = false;
    bool stalled = false;

    bool has_warnings() const { return soft_rounding || nonconverged_temperatures > 0 || !constraints_satisfied; }
};

struct AnnealResult {
    SparseSolution solution;
    AnnealTrace trace;
    SolveDiagnostics diagnostics;
};

struct XUpdate {
    VectorXd x;
    bool ridged = false;
    double condition = 1.0;
};

/// Solves [Q'A'AQ + diag(lambda_a'(Q.*(1-Q)))] x = Q'A'y. A ridge of ridge_eps * I is
/// added when the condition estimate exceeds 1e12; throws SolverError if the system
/// is still singular.
XUpdate solve_x(const Problem& problem, const MatrixXd& Q, double ridge_eps = 1e-10);
VectorXd update_x(const Problem& problem, const MatrixXd& Q, double ridge_eps = 1e-10);

/// Elementwise sigmoid((2/T) xi), clamped to [kClip, 1 - kClip].
MatrixXd gibbs_from_xi(const MatrixXd& xi, double T);

/// Gibbs update of Q from the current state (no structural constraints).
MatrixXd gibbs_update_q(const Problem& problem, const RelaxedState& state);

/// Xi including the structural-constraint penalty: Xi - 1/2 dP/dQ.
MatrixXd constrained_xi(const Problem& problem, const ConstraintSet& constraints, const RelaxedState& state);

/// free_energy(...) - P(Q)/T where P is the structural-constraint penalty.
double augmented_free_energy(const Problem& problem, const ConstraintSet& constraints,
                             const RelaxedState& state, double c0 = 0.0);

/// mu + rho (Q'1_d - 1_k).
VectorXd update_multiplier(const VectorXd& mu, double rho, const MatrixXd& Q);

struct InnerResult {
    RelaxedState state;
    int iterations = 0;
    int multiplier_rounds = 0;
    bool converged = false;
    bool q_settled = false;  // the last Q fixed-point pass met inner_tol
    double stoch_residual = 0.0;
    double constraint_violation = 0.0;
};

struct NormalizedGibbs {
    MatrixXd Q;
    VectorXd nu;  // per-column shift, so that mu = T nu
};

/// Gibbs update with each column's stochasticity multiplier solved exactly:
/// q_ij = sigmoid((2/T) xi_ij - nu_j) with sum_i q_ij = 1. xi must exclude the
/// stochasticity multiplier term.
NormalizedGibbs normalized_gibbs(const MatrixXd& xi, double T);

/// Fixed-point iteration at fixed T: x <- update_x(Q), Q <- (1-a) Q + a Gibbs(Q, x),
/// until max|Q+ - Q| <= inner_tol. The stochasticity multipliers are solved inside
/// every Gibbs step; structural-constraint multipliers are held fixed.
InnerResult fixed_point(const Problem& problem, const ConstraintSet& constraints, RelaxedState state,
                        const AnnealConfig& config);

/// Fixed point plus the structural-constraint multiplier iteration: after each fixed
/// point the row multipliers take a projected step sized by the row's linearized
/// response, repeated until the projected residuals fall below tol_stoch.
InnerResult inner_solve(const Problem& problem, const ConstraintSet& constraints, RelaxedState state,
                        const AnnealConfig& config);

struct RoundResult {
    Eigen::MatrixXi V;
    bool soft = false;
};

/// Per column, argmax row -> 1 (lowest index on ties). Soft if a column max < 1 - round_tol.
RoundResult round_to_binary(const MatrixXd& Q, double round_tol);

/// Doubles T from 4 max_j(a_j'a_j) ||y||^2 until the high-temperature fixed point is
/// within 1e-4 of uniform (1/d) in max norm.
double auto_tmax(const Problem& problem, const AnnealConfig& config = {});

/// Least-squares refit on the rows selected by V; duplicate columns get coefficient 0.
SparseSolution refit_solution(const Problem& problem, const Eigen::MatrixXi& V);

AnnealResult anneal(const Problem& problem, const ConstraintSet& constraints, const AnnealConfig& config);

}  // namespace sparsemep
