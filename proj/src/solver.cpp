#include "sparsemep/solver.hpp"

#include "sparsemep/baselines.hpp"
#include "sparsemep/errors.hpp"
#include "sparsemep/phase.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace sparsemep {

namespace {

constexpr double kRidgeCondition = 1e12;
constexpr double kSingularCondition = 1e16;
constexpr double kUniformTol = 1e-4;
constexpr int kAutoTmaxDoublings = 60;
constexpr int kDefaultCoolingSteps = 500;
constexpr double kMinSensitivity = 1e-2;
constexpr int kNormalizeIters = 200;
constexpr double kMinDamping = 1.0 / 64.0;
constexpr double kDampingGrowth = 1.25;

double condition_estimate(const MatrixXd& M) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(M, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
    return hi / lo;
}

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

bool is_binary(const MatrixXd& Q, double tol) {
    return (Q.array().min(1.0 - Q.array()) <= tol).all();
}

// Multiplier step that cancels the linearized row residual in one round: a row with
// sensitivity s moves by -s / (T + rho s) per unit multiplier change.
VectorXd newton_steps(const VectorXd& sensitivity, double T, double rho) {
    return (T + rho * sensitivity.array().max(kMinSensitivity)) / sensitivity.array().max(kMinSensitivity);
}

// Moves Q along a zero-column-sum direction by `size` in max norm, shortened so every
// entry stays inside the clamp interval. Returns false if no move is possible.
bool kick_along(MatrixXd& Q, const MatrixXd& direction, double size) {
    const double peak = direction.cwiseAbs().maxCoeff();
    if (!(peak > 0.0)) return false;
    double step = size / peak;
    for (long j = 0; j < Q.cols(); ++j) {
        for (long i = 0; i < Q.rows(); ++i) {
            const double v = direction(i, j);
            if (v < 0.0) step = std::min(step, 0.5 * (Q(i, j) - kClip) / -v);
            if (v > 0.0) step = std::min(step, 0.5 * (1.0 - kClip - Q(i, j)) / v);
        }
    }
    if (!(step > 0.0)) return false;
    Q += step * direction;
    return true;
}

double uniform_deviation(const MatrixXd& Q) {
    return (Q.array() - 1.0 / static_cast<double>(Q.rows())).abs().maxCoeff();
}

}  // namespace

void AnnealConfig::validate() const {
    auto fail = [](const std::string& m) { throw ConfigError("AnnealConfig: " + m); };
    if (!(beta > 0.0 && beta < 1.0)) fail("beta must lie in (0, 1)");
    if (t_max && !(*t_max > 0.0)) fail("t_max must be positive");
    if (t_min && !(*t_min > 0.0)) fail("t_min must be positive");
    if (t_max && t_min && !(*t_min < *t_max)) fail("t_min must be below t_max");
    if (inner_max_iters < 1) fail("inner_max_iters must be at least 1");
    if (!(inner_tol > 0.0)) fail("inner_tol must be positive");
    if (!(damping > 0.0 && damping <= 1.0)) fail("damping must lie in (0, 1]");
    if (!(ridge_eps > 0.0)) fail("ridge_eps must be positive");
    if (!(tol_stoch > 0.0)) fail("tol_stoch must be positive");
    if (!(round_tol > 0.0 && round_tol < 0.5)) fail("round_tol must lie in (0, 0.5)");
    if (multiplier_rounds < 0) fail("multiplier_rounds must be non-negative");
    if (!(perturbation >= 0.0)) fail("perturbation must be non-negative");
    if (!(col_tol > 0.0)) fail("col_tol must be positive");
    if (!(kick > 0.0 && kick < 0.5)) fail("kick must lie in (0, 0.5)");
    if (stall_window < 0) fail("stall_window must be non-negative");
    if (max_kicks < 0) fail("max_kicks must be non-negative");
}

XUpdate solve_x(const Problem& problem, const MatrixXd& Q, double ridge_eps) {
    if (Q.rows() != problem.d() || Q.cols() != problem.k()) {
        throw ShapeError("update_x: Q must be d x k");
    }
    const MatrixXd spread = Q.array() * (1.0 - Q.array());
    MatrixXd M = Q.transpose() * problem.gram() * Q;
    M.diagonal() += spread.transpose() * problem.column_norms_sq();
    const VectorXd rhs = Q.transpose() * problem.Aty();

    XUpdate out;
    out.condition = condition_estimate(M);
    if (out.condition > kRidgeCondition) {
        M.diagonal().array() += ridge_eps;
        out.ridged = true;
        out.condition = condition_estimate(M);
        if (!(out.condition < kSingularCondition)) {
            std::ostringstream os;
            os << "update_x: system singular even with ridge (condition estimate " << out.condition << ")";
            throw SolverError(os.str(), out.condition);
        }
    }
    out.x = M.ldlt().solve(rhs);
    if (!out.x.allFinite()) {
        throw SolverError("update_x: non-finite solution", out.condition);
    }
    return out;
}

VectorXd update_x(const Problem& problem, const MatrixXd& Q, double ridge_eps) {
    return solve_x(problem, Q, ridge_eps).x;
}

MatrixXd gibbs_from_xi(const MatrixXd& xi, double T) {
    if (!(T > 0.0)) throw DomainError("gibbs_update_q: temperature must be positive");
    MatrixXd Q(xi.rows(), xi.cols());
    const double scale = 2.0 / T;
    for (long j = 0; j < xi.cols(); ++j) {
        for (long i = 0; i < xi.rows(); ++i) {
            const double v = xi(i, j);
            if (!std::isfinite(v)) {
                std::ostringstream os;
                os << "gibbs_update_q: non-finite Xi entry at (" << i << "," << j << ")";
                throw NumericalError(os.str(), i, j);
            }
            Q(i, j) = std::clamp(sigmoid(scale * v), kClip, 1.0 - kClip);
        }
    }
    return Q;
}

MatrixXd gibbs_update_q(const Problem& problem, const RelaxedState& state) {
    return gibbs_from_xi(xi_matrix(problem, state), state.T);
}

MatrixXd constrained_xi(const Problem& problem, const ConstraintSet& constraints, const RelaxedState& state) {
    MatrixXd xi = xi_matrix(problem, state);
    if (!constraints.empty()) {
        const PenaltyResult p = penalty_and_gradient(constraints, state.Q, state.constraint_mu, state.rho);
        xi -= 0.5 * p.gradient;
    }
    return xi;
}

double augmented_free_energy(const Problem& problem, const ConstraintSet& constraints,
                             const RelaxedState& state, double c0) {
    double f = free_energy(problem, state, c0);
    if (!constraints.empty()) {
        f -= penalty_and_gradient(constraints, state.Q, state.constraint_mu, state.rho).value / state.T;
    }
    return f;
}

VectorXd update_multiplier(const VectorXd& mu, double rho, const MatrixXd& Q) {
    if (mu.size() != Q.cols()) throw ShapeError("update_multiplier: mu must have length k");
    return mu + rho * stochasticity_residual(Q);
}

NormalizedGibbs normalized_gibbs(const MatrixXd& xi, double T) {
    if (!(T > 0.0)) throw DomainError("normalized_gibbs: temperature must be positive");
    if (!xi.allFinite()) {
        for (long j = 0; j < xi.cols(); ++j) {
            for (long i = 0; i < xi.rows(); ++i) {
                if (!std::isfinite(xi(i, j))) {
                    std::ostringstream os;
                    os << "normalized_gibbs: non-finite Xi entry at (" << i << "," << j << ")";
                    throw NumericalError(os.str(), i, j);
                }
            }
        }
    }
    NormalizedGibbs out;
    out.Q.resize(xi.rows(), xi.cols());
    out.nu.resize(xi.cols());
    const double scale = 2.0 / T;
    const double log_d = std::log(static_cast<double>(xi.rows()));
    for (long j = 0; j < xi.cols(); ++j) {
        const VectorXd z = scale * xi.col(j);
        const double top = z.maxCoeff();
        double lo = top - 50.0;
        double hi = top + log_d + 1.0;
        double nu = top;
        for (int it = 0; it < kNormalizeIters; ++it) {
            double sum = 0.0;
            double slope = 0.0;
            for (long i = 0; i < z.size(); ++i) {
                const double q = sigmoid(z(i) - nu);
                sum += q;
                slope += q * (1.0 - q);
            }
            const double f = sum - 1.0;
            if (f > 0.0) {
                lo = nu;
            } else {
                hi = nu;
            }
            if (std::abs(f) <= 1e-15 || hi - lo <= 1e-15 * std::max(1.0, std::abs(nu))) break;
            double next = slope > 0.0 ? nu + f / slope : 0.5 * (lo + hi);
            if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
            nu = next;
        }
        out.nu(j) = nu;
        for (long i = 0; i < z.size(); ++i) out.Q(i, j) = std::clamp(sigmoid(z(i) - nu), kClip, 1.0 - kClip);
    }
    return out;
}

InnerResult fixed_point(const Problem& problem, const ConstraintSet& constraints, RelaxedState state,
                        const AnnealConfig& config) {
    if (state.constraint_mu.size() != constraints.row_count()) {
        state.constraint_mu = VectorXd::Zero(constraints.row_count());
    }
    InnerResult out;
    double a = config.damping;
    double previous = std::numeric_limits<double>::infinity();
    RelaxedState probe = state;
    for (int it = 0; it < config.inner_max_iters; ++it) {
        state.x = update_x(problem, state.Q, config.ridge_eps);
        probe.Q = state.Q;
        probe.x = state.x;
        probe.mu.setZero(state.Q.cols());
        const NormalizedGibbs next = normalized_gibbs(constrained_xi(problem, constraints, probe), state.T);
        const double delta = (next.Q - state.Q).cwiseAbs().maxCoeff();
        // A growing residual means the parallel update overshoots; shorten the step.
        if (delta > previous) {
            a = std::max(kMinDamping, 0.5 * a);
        } else {
            a = std::min(config.damping, kDampingGrowth * a);
        }
        previous = delta;
        state.Q = (1.0 - a) * state.Q + a * next.Q;
        state.mu = state.T * next.nu;
        ++out.iterations;
        if (delta <= config.inner_tol) {
            out.converged = true;
            break;
        }
    }
    state.x = update_x(problem, state.Q, config.ridge_eps);
    out.stoch_residual = stochasticity_residual(state.Q).cwiseAbs().maxCoeff();
    out.constraint_violation = constraints.empty() ? 0.0 : max_violation(constraints, state.Q);
    out.state = std::move(state);
    return out;
}

InnerResult inner_solve(const Problem& problem, const ConstraintSet& constraints, RelaxedState state,
                        const AnnealConfig& config) {
    InnerResult res = fixed_point(problem, constraints, std::move(state), config);
    int iterations = res.iterations;
    int rounds = 0;
    bool dual_ok = true;
    while (!constraints.empty()) {
        RelaxedState& s = res.state;
        const VectorXd steps = newton_steps(constraint_sensitivity(constraints, s.Q), s.T, s.rho);
        const VectorXd next = update_constraint_multipliers(constraints, s.constraint_mu, s.Q, steps);
        const double dual_change =
            next.size() ? ((next - s.constraint_mu).array() / steps.array()).abs().maxCoeff() : 0.0;
        dual_ok = dual_change <= config.tol_stoch;
        if (dual_ok || rounds >= config.multiplier_rounds) break;
        s.constraint_mu = next;
        res = fixed_point(problem, constraints, std::move(res.state), config);
        iterations += res.iterations;
        ++rounds;
    }
    res.iterations = iterations;
    res.multiplier_rounds = rounds;
    res.q_settled = res.converged;
    res.converged = res.converged && dual_ok && res.stoch_residual <= config.tol_stoch;
    return res;
}

RoundResult round_to_binary(const MatrixXd& Q, double round_tol) {
    RoundResult out;
    out.V = Eigen::MatrixXi::Zero(Q.rows(), Q.cols());
    for (long j = 0; j < Q.cols(); ++j) {
        long best = 0;
        for (long i = 1; i < Q.rows(); ++i) {
            if (Q(i, j) > Q(best, j)) best = i;
        }
        out.V(best, j) = 1;
        if (Q(best, j) < 1.0 - round_tol) out.soft = true;
    }
    return out;
}

double auto_tmax(const Problem& problem, const AnnealConfig& config) {
    double T = 4.0 * problem.column_norms_sq().maxCoeff() * problem.y().squaredNorm();
    if (!(T > 0.0)) T = 1.0;
    const double initial = T;
    const ConstraintSet none;
    for (int doubling = 0; doubling <= kAutoTmaxDoublings; ++doubling) {
        RelaxedState s = RelaxedState::uniform(problem.d(), problem.k(), T, T);
        const InnerResult res = inner_solve(problem, none, std::move(s), config);
        if (uniform_deviation(res.state.Q) <= kUniformTol) return T;
        T *= 2.0;
    }
    std::ostringstream os;
    os << "auto_tmax: no near-uniform fixed point up to 2^" << kAutoTmaxDoublings << " x " << initial;
    throw ConfigError(os.str());
}

SparseSolution refit_solution(const Problem& problem, const Eigen::MatrixXi& V) {
    std::vector<int> support;
    std::vector<int> owner(static_cast<std::size_t>(V.cols()), -1);
    for (long t = 0; t < V.cols(); ++t) {
        long row = 0;
        V.col(t).maxCoeff(&row);
        owner[static_cast<std::size_t>(t)] = static_cast<int>(row);
        if (std::find(support.begin(), support.end(), row) == support.end()) {
            support.push_back(static_cast<int>(row));
        }
    }
    std::sort(support.begin(), support.end());
    const SupportFit fit = least_squares_on_support(problem, support);
    VectorXd x = VectorXd::Zero(V.cols());
    std::vector<bool> assigned(support.size(), false);
    for (long t = 0; t < V.cols(); ++t) {
        const auto pos = static_cast<std::size_t>(
            std::lower_bound(support.begin(), support.end(), owner[static_cast<std::size_t>(t)]) - support.begin());
        if (!assigned[pos]) {
            x(t) = fit.coefficients(static_cast<long>(pos));
            assigned[pos] = true;
        }
    }
    return make_solution(problem, V, std::move(x));
}

AnnealResult anneal(const Problem& problem, const ConstraintSet& constraints, const AnnealConfig& config) {
    config.validate();
    if (!constraints.empty()) {
        const ValidationReport report = validate(constraints, problem.k(), problem.d());
        if (!report.ok) throw ConstraintError("infeasible constraint set: " + report.message);
    }

    AnnealResult result;
    const double t_max = config.t_max ? *config.t_max : auto_tmax(problem, config);
    const double t_min = config.t_min ? *config.t_min : t_max * std::pow(config.beta, kDefaultCoolingSteps);
    result.diagnostics.t_max = t_max;

    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    RelaxedState state = RelaxedState::uniform(problem.d(), problem.k(), t_max, t_max);
    state.constraint_mu = VectorXd::Zero(constraints.row_count());
    double T = t_max;
    int previous_kd = 0;
    Eigen::MatrixXi frozen_V;
    int frozen_count = 0;
    while (T >= t_min) {
        state.T = T;
        state.rho = T;
        if (config.perturbation > 0.0) {
            for (long j = 0; j < state.Q.cols(); ++j) {
                for (long i = 0; i < state.Q.rows(); ++i) {
                    double& q = state.Q(i, j);
                    q = std::clamp(q + config.perturbation * normal(rng) * q * (1.0 - q), kClip, 1.0 - kClip);
                }
            }
        }
        InnerResult inner = inner_solve(problem, constraints, std::move(state), config);
        int kicks = 0;
        const bool probe = config.stability_probe &&
                           problem.k() * (problem.d() - 1) <= static_cast<long>(config.stability_max_size);
        while (probe && kicks < config.max_kicks) {
            const auto direction = unstable_direction(problem, inner.state.Q, T, config.col_tol);
            if (!direction || !kick_along(inner.state.Q, *direction, config.kick)) break;
            const int iterations = inner.iterations;
            inner = inner_solve(problem, constraints, std::move(inner.state), config);
            inner.iterations += iterations;
            ++kicks;
        }
        state = std::move(inner.state);

        TraceRecord rec;
        rec.T = T;
        if (config.keep_snapshots) rec.Q = state.Q;
        rec.x = state.x;
        rec.mu = state.mu;
        rec.relaxed_cost = relaxed_cost(problem, state.Q, state.x);
        const Eigen::MatrixXi V = round_to_binary(state.Q, config.round_tol).V;
        rec.rounded_cost = refit_solution(problem, V).cost;
        rec.k_d = count_distinct_columns(state.Q, config.col_tol);
        rec.stoch_residual = inner.stoch_residual;
        rec.constraint_violation = inner.constraint_violation;
        rec.inner_iterations = inner.iterations;
        rec.multiplier_rounds = inner.multiplier_rounds;
        rec.kicks = kicks;
        rec.converged = inner.converged;
        if (!rec.converged) ++result.diagnostics.nonconverged_temperatures;
        if (previous_kd > 0 && rec.k_d > previous_kd) {
            result.trace.transitions.push_back(static_cast<int>(result.trace.records.size()));
        }
        previous_kd = rec.k_d;
        if (config.on_record) config.on_record(rec);
        result.trace.records.push_back(std::move(rec));

        result.diagnostics.final_T = T;
        ++result.diagnostics.temperatures;
        // Duplicate binary columns can still split at a lower temperature.
        if (is_binary(state.Q, config.round_tol) && previous_kd == problem.k()) {
            result.diagnostics.binary_converged = true;
            break;
        }
        if (!inner.q_settled && frozen_count > 0 && V == frozen_V) {
            ++frozen_count;
        } else {
            frozen_count = inner.q_settled ? 0 : 1;
            frozen_V = V;
        }
        if (config.stall_window > 0 && frozen_count >= config.stall_window) {
            result.diagnostics.stalled = true;
            break;
        }
        T *= config.beta;
    }

    const RoundResult rounded = round_to_binary(state.Q, config.round_tol);
    result.diagnostics.binary_converged = is_binary(state.Q, config.round_tol);
    result.diagnostics.soft_rounding = rounded.soft;
    result.solution = refit_solution(problem, rounded.V);
    result.diagnostics.constraints_satisfied = constraints.empty() || satisfied_by(constraints, rounded.V);
    return result;
}

}  // namespace sparsemep
