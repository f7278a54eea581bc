#include "sparsemep/model.hpp"

#include "sparsemep/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace sparsemep {

namespace {

constexpr double kDomainTol = 1e-12;

void check_probability_matrix(const MatrixXd& Q, const char* who) {
    for (long j = 0; j < Q.cols(); ++j) {
        for (long i = 0; i < Q.rows(); ++i) {
            const double q = Q(i, j);
            if (!(q >= -kDomainTol && q <= 1.0 + kDomainTol)) {
                std::ostringstream os;
                os << who << ": entry (" << i << "," << j << ") = " << q << " outside [0,1]";
                throw DomainError(os.str());
            }
        }
    }
}

void check_shapes(const Problem& problem, const MatrixXd& Q, const VectorXd& x, const char* who) {
    if (Q.rows() != problem.d() || Q.cols() != problem.k() || x.size() != problem.k()) {
        std::ostringstream os;
        os << who << ": expected Q " << problem.d() << "x" << problem.k() << " and x of length "
           << problem.k() << ", got Q " << Q.rows() << "x" << Q.cols() << " and x of length "
           << x.size();
        throw ShapeError(os.str());
    }
}

void check_state(const Problem& problem, const RelaxedState& state, const char* who) {
    check_shapes(problem, state.Q, state.x, who);
    if (state.mu.size() != problem.k()) {
        throw ShapeError(std::string(who) + ": mu must have length k");
    }
    if (!(state.T > 0.0)) {
        throw DomainError(std::string(who) + ": temperature must be positive");
    }
}

double xlogx(double v) { return v > 0.0 ? v * std::log(v) : 0.0; }

}  // namespace

Problem::Problem(MatrixXd A, VectorXd y, int k, std::vector<std::string> feature_names)
    : A_(std::move(A)), y_(std::move(y)), k_(k), feature_names_(std::move(feature_names)) {
    if (A_.rows() < 1 || A_.cols() < 1) {
        throw ShapeError("Problem: design matrix must be non-empty");
    }
    if (y_.size() != A_.rows()) {
        throw ShapeError("Problem: y length must equal the number of rows of A");
    }
    if (k_ < 1 || k_ > A_.cols()) {
        throw DomainError("Problem: sparsity k must satisfy 1 <= k <= d");
    }
    if (!feature_names_.empty() && static_cast<long>(feature_names_.size()) != A_.cols()) {
        throw ShapeError("Problem: feature_names must have one entry per column");
    }
    if (!A_.allFinite() || !y_.allFinite()) {
        throw DomainError("Problem: A and y must be finite");
    }
    column_norms_sq_ = A_.colwise().squaredNorm().transpose();
    gram_ = A_.transpose() * A_;
    Aty_ = A_.transpose() * y_;
}

Problem Problem::with_k(int k) const { return Problem(A_, y_, k, feature_names_); }

RelaxedState RelaxedState::uniform(long d, int k, double T, double rho) {
    RelaxedState s;
    s.Q = MatrixXd::Constant(d, k, 1.0 / static_cast<double>(d));
    s.x = VectorXd::Zero(k);
    s.mu = VectorXd::Zero(k);
    s.T = T;
    s.rho = rho;
    return s;
}

std::vector<int> SparseSolution::support() const {
    std::vector<int> s;
    for (long i = 0; i < w.size(); ++i) {
        if (V.row(i).sum() > 0) s.push_back(static_cast<int>(i));
    }
    return s;
}

double SparseSolution::residual_norm() const { return std::sqrt(cost); }

SparseSolution make_solution(const Problem& problem, Eigen::MatrixXi V, VectorXd x) {
    if (V.rows() != problem.d() || V.cols() != x.size()) {
        throw ShapeError("make_solution: V must be d x k and x of length k");
    }
    for (long j = 0; j < V.cols(); ++j) {
        if (V.col(j).sum() != 1 || V.col(j).minCoeff() < 0 || V.col(j).maxCoeff() > 1) {
            throw DomainError("make_solution: V must be binary and column-stochastic");
        }
    }
    SparseSolution s;
    s.w = V.cast<double>() * x;
    s.V = std::move(V);
    s.x = std::move(x);
    s.cost = (problem.y() - problem.A() * s.w).squaredNorm();
    s.effective_sparsity = static_cast<int>((s.w.array() != 0.0).count());
    return s;
}

VectorXd stochasticity_residual(const MatrixXd& Q) {
    return Q.colwise().sum().transpose() - VectorXd::Ones(Q.cols());
}

double entropy(const MatrixXd& Q) {
    check_probability_matrix(Q, "entropy");
    double h = 0.0;
    for (long j = 0; j < Q.cols(); ++j) {
        for (long i = 0; i < Q.rows(); ++i) {
            const double q = std::clamp(Q(i, j), 0.0, 1.0);
            h -= xlogx(q) + xlogx(1.0 - q);
        }
    }
    return h;
}

double relaxed_cost(const Problem& problem, const MatrixXd& Q, const VectorXd& x) {
    check_shapes(problem, Q, x, "relaxed_cost");
    const VectorXd residual = problem.y() - problem.A() * (Q * x);
    const MatrixXd spread = Q.array() * (1.0 - Q.array());
    const VectorXd x2 = x.array().square();
    return residual.squaredNorm() + problem.column_norms_sq().dot(spread * x2);
}

double free_energy(const Problem& problem, const RelaxedState& state, double c0) {
    check_state(problem, state, "free_energy");
    if (!(state.rho > 0.0)) {
        throw DomainError("free_energy: penalty parameter rho must be positive");
    }
    const VectorXd g = stochasticity_residual(state.Q);
    const double cost = relaxed_cost(problem, state.Q, state.x);
    const double constraint = state.mu.dot(g) + 0.5 * state.rho * g.squaredNorm();
    return entropy(state.Q) - (cost - c0 + constraint) / state.T;
}

MatrixXd xi_matrix(const Problem& problem, const RelaxedState& state) {
    check_state(problem, state, "xi_matrix");
    const MatrixXd& Q = state.Q;
    const VectorXd& x = state.x;
    const VectorXd residual = problem.y() - problem.A() * (Q * x);
    const VectorXd x2 = x.array().square();
    const VectorXd g = stochasticity_residual(Q);

    MatrixXd xi = (problem.A().transpose() * residual) * x.transpose();
    xi.array() -= 0.5 * ((problem.column_norms_sq() * x2.transpose()).array() * (1.0 - 2.0 * Q.array()));
    xi.rowwise() -= 0.5 * state.mu.transpose();
    xi.rowwise() -= 0.5 * state.rho * g.transpose();
    return xi;
}

VectorXd free_energy_grad_x(const Problem& problem, const RelaxedState& state) {
    check_state(problem, state, "free_energy_grad_x");
    const MatrixXd& Q = state.Q;
    const VectorXd residual = problem.y() - problem.A() * (Q * state.x);
    const MatrixXd spread = Q.array() * (1.0 - Q.array());
    const VectorXd diag = spread.transpose() * problem.column_norms_sq();
    const VectorXd dcost = -2.0 * Q.transpose() * (problem.A().transpose() * residual) +
                           2.0 * diag.cwiseProduct(state.x);
    return -dcost / state.T;
}

MatrixXd free_energy_grad_q(const Problem& problem, const RelaxedState& state) {
    const MatrixXd xi = xi_matrix(problem, state);
    const MatrixXd Qc = state.Q.array().max(kClip).min(1.0 - kClip).matrix();
    const MatrixXd logit = (Qc.array() / (1.0 - Qc.array())).log().matrix();
    return (2.0 / state.T) * xi - logit;
}

}  // namespace sparsemep
