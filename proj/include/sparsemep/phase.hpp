#pragma once

// Phase-transition analysis of an annealing run: distinct-column counting, the
// reduced Hessian of the x-eliminated free energy over feasible perturbations,
// critical temperatures from the simultaneous diagonalization of its T-linear split,
// fractional-change statistics between transitions, and the persistence estimate of
// the true sparsity.

#include "sparsemep/solver.hpp"

#include <optional>
#include <vector>

namespace sparsemep {

/// Union-find labels of Q's columns under max|q_i - q_j| <= col_tol * max|Q|.
/// Labels are 0..k_d-1 in order of first appearance.
std::vector<int> distinct_column_labels(const MatrixXd& Q, double col_tol = 1e-3);

int count_distinct_columns(const MatrixXd& Q, double col_tol = 1e-3);

/// C = [I_{d-1}; 0] - (1/d) 1 1', a d x (d-1) basis of zero-sum columns.
MatrixXd perturbation_basis(long d);

/// Objective whose Hessian is analysed: phi(Q) = -(T/2) F_T(Q, x*(Q)) with x*(Q) from
/// update_x and mu = 0. Along feasible directions the multiplier and penalty terms are
/// constant, so the choice of mu does not matter there.
double eliminated_objective(const Problem& problem, const MatrixXd& Q, double T);

/// The reduced Hessian is exactly affine in T at fixed Q: (T/2) H0 - H1, where H0 is the
/// block-diagonal entropy curvature and H1 the curvature of the x-eliminated Xi.
struct HessianSplit {
    MatrixXd H0;
    MatrixXd H1;

    MatrixXd at(double T) const { return 0.5 * T * H0 - H1; }
};

/// Split of the Hessian of phi(Q + C Phi) with respect to vec(Phi) (column-major,
/// size k(d-1)). Both parts are analytic: H1 is the derivative of Xi(Q, x*(Q)) with
/// x* differentiated through its normal equations, symmetrized. Throws DomainError unless every entry of Q lies in (0, 1).
HessianSplit hessian_split(const Problem& problem, const MatrixXd& Q);

MatrixXd reduced_hessian(const Problem& problem, const MatrixXd& Q, double T);

double min_eigenvalue(const MatrixXd& symmetric);

struct Instability {
    double t_cr = 0.0;  // 2 lambda_max(L^-1 H1 L^-T) over the full split, H0 = L L'
    MatrixXd direction;  // d x k zero-column-sum direction of the most unstable mode
};

/// Whole-matrix critical temperature at Q and the corresponding feasible direction.
/// The fixed point is unstable at T exactly when T < t_cr.
Instability leading_instability(const Problem& problem, const MatrixXd& Q);

/// Direction to displace an unstable fixed point at temperature T, or nullopt if Q is
/// stable. When the leading mode splits a group of coincident columns (the mode is
/// degenerate there) the direction separates one column from the rest of its group.
std::optional<MatrixXd> unstable_direction(const Problem& problem, const MatrixXd& Q, double T,
                                           double col_tol = 1e-3);

/// 2 lambda_max(L^-1 H1 L^-T) with H0 = L L', floored at 0; nullopt if H0 is not
/// positive definite. (T/2) H0 - H1 is singular exactly at this temperature.
std::optional<double> block_critical_temperature(const MatrixXd& H0, const MatrixXd& H1);

enum class CriticalAggregate {
    Max,       // T_cr = max_j T_cr,j
    TwiceMax,  // T_cr = 2 max_j T_cr,j
};

struct CriticalTemperature {
    double t_cr = 0.0;
    std::vector<double> per_column;  // T_cr,j (NaN for flagged columns)
    std::vector<bool> flagged;       // H_0,j not positive definite
    std::vector<int> partner;        // coincident column used for the antisymmetric block, -1 if none
};

/// Per column block of the Hessian split, T_cr,j = 2 lambda_max(L^-1 H1_j L^-T) with
/// H0_j = L L' (0 when the block never loses definiteness).
/// For columns that coincide with another column the block is taken along the
/// antisymmetric direction (phi_j = v, phi_j' = -v), which is the splitting mode.
CriticalTemperature critical_temperature(const Problem& problem, const MatrixXd& Q,
                                         CriticalAggregate aggregate = CriticalAggregate::Max,
                                         double col_tol = 1e-3);

struct SegmentStats {
    int first_record = 0;
    int last_record = 0;
    int k_d = 1;
    std::vector<double> changes;  // ||x(n) - x_mean|| / ||x_mean|| for every record in the segment
    double median = 0.0;
    double max = 0.0;
    bool interior = false;  // bounded by a change of k_d on both sides
};

struct FractionalChangeStats {
    std::vector<SegmentStats> segments;
    std::vector<double> jumps;  // ||x(n) - x(n-1)|| / ||x(n-1)|| at each transition record n
    double pooled_median = 0.0;  // over interior segments only; 0 when there are none
};

FractionalChangeStats fractional_change_stats(const AnnealTrace& trace);

struct PersistenceEstimate {
    int k_hat = 1;
    bool low_confidence = false;
    std::vector<std::pair<int, double>> dwell;  // (k_d, total log(1/T) span)
};

/// k_d with the widest total log(1/T) span, excluding the k_d = 1 plateau and a
/// terminal plateau at k_d = k.
PersistenceEstimate persistence_estimate(const AnnealTrace& trace, int k);

struct TransitionInfo {
    int record = 0;
    double t_before = 0.0;
    double t_observed = 0.0;
    int kd_before = 1;
    int kd_after = 1;
    double jump = 0.0;
    std::optional<double> t_cr;
    bool within_one_step = false;
    double min_eig_above = 0.0;  // pre-transition Q at t_before
    double min_eig_below = 0.0;  // pre-transition Q at t_observed
    bool sign_flip = false;
};

struct TransitionOptions {
    bool analytic = true;
    double beta = 0.95;
    CriticalAggregate aggregate = CriticalAggregate::Max;
    double col_tol = 1e-3;
};

struct TransitionReport {
    std::vector<TransitionInfo> transitions;
    FractionalChangeStats fractional;
    PersistenceEstimate persistence;
};

/// Needs Q snapshots in the trace when options.analytic is set.
TransitionReport analyze_transitions(const Problem& problem, const AnnealTrace& trace,
                                     const TransitionOptions& options = {});

}  // namespace sparsemep
