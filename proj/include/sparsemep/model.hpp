#pragma once

// Problem/state types and the scalar functionals of the relaxed selection model:
// Bernoulli entropy of Q, expected regression cost over V ~ Q, and the annealed
// free energy whose stationary maps drive the solver.

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace sparsemep {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Q entries are clamped to [kClip, 1 - kClip] wherever a logarithm or logit is taken.
inline constexpr double kClip = 1e-12;

/// Regression instance: design matrix A (n x d), measurement y (n), sparsity budget k.
class Problem {
public:
    Problem() = default;
    Problem(MatrixXd A, VectorXd y, int k, std::vector<std::string> feature_names = {});

    const MatrixXd& A() const { return A_; }
    const VectorXd& y() const { return y_; }
    int k() const { return k_; }
    long n() const { return A_.rows(); }
    long d() const { return A_.cols(); }

    /// a_j' a_j for every column (the vector lambda_a).
    const VectorXd& column_norms_sq() const { return column_norms_sq_; }
    const MatrixXd& gram() const { return gram_; }
    const VectorXd& Aty() const { return Aty_; }
    const std::vector<std::string>& feature_names() const { return feature_names_; }

    /// Same data with a different sparsity budget.
    Problem with_k(int k) const;

private:
    MatrixXd A_;
    VectorXd y_;
    int k_ = 1;
    VectorXd column_norms_sq_;
    MatrixXd gram_;
    VectorXd Aty_;
    std::vector<std::string> feature_names_;
};

/// Evolving solver state. Q is d x k, x and mu have length k.
struct RelaxedState {
    MatrixXd Q;
    VectorXd x;
    VectorXd mu;
    /// Multipliers of structural constraint rows (empty when unconstrained).
    VectorXd constraint_mu;
    double T = 1.0;
    double rho = 1.0;

    /// Column-uniform start: every column of Q equal to (1/d) 1_d, mu = 0.
    static RelaxedState uniform(long d, int k, double T, double rho);
};

/// Final binary answer: w = V x with V column-stochastic.
struct SparseSolution {
    Eigen::MatrixXi V;
    VectorXd x;
    VectorXd w;
    double cost = 0.0;  // ||y - A w||^2
    int effective_sparsity = 0;

    /// Sorted 0-based indices of the selected features.
    std::vector<int> support() const;
    double residual_norm() const;
};

/// Builds a SparseSolution from V and x, computing w, cost and effective sparsity.
SparseSolution make_solution(const Problem& problem, Eigen::MatrixXi V, VectorXd x);

/// Q' 1_d - 1_k.
VectorXd stochasticity_residual(const MatrixXd& Q);

/// Shannon entropy of the factored Bernoulli distribution, with 0 log 0 = 0.
double entropy(const MatrixXd& Q);

/// E_V[||y - A V x||^2] under independent v_ij ~ Bernoulli(q_ij):
/// ||y - AQx||^2 + sum_ij lambda_i q_ij (1 - q_ij) x_j^2.
double relaxed_cost(const Problem& problem, const MatrixXd& Q, const VectorXd& x);

/// F_T = H(Q) - (1/T) [ (D - c0) + mu'g + (rho/2) ||g||^2 ],  g = Q'1 - 1.
/// The multiplier and penalty terms sit inside the 1/T bracket so that the
/// Q-stationarity condition is exactly q_ij = sigmoid((2/T) Xi_ij).
double free_energy(const Problem& problem, const RelaxedState& state, double c0 = 0.0);

/// Xi = A'(y - AQx)x' - 1/2 lambda_a (x.x)' .* (1 - 2Q) - 1/2 1 mu' - (rho/2) 1 (Q'1 - 1)'.
/// With rho = 1/T the last term is -(1/2T) 1 1'Q + (1/2T) 1 1'.
MatrixXd xi_matrix(const Problem& problem, const RelaxedState& state);

/// dF_T/dx.
VectorXd free_energy_grad_x(const Problem& problem, const RelaxedState& state);

/// dF_T/dQ = (2/T) Xi - logit(Q).
MatrixXd free_energy_grad_q(const Problem& problem, const RelaxedState& state);

}  // namespace sparsemep
