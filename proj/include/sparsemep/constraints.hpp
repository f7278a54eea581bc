#pragma once

// Structural feature-selection constraints expressed as linear functions of Q.
//
//   AtMostOne  {l_1..l_r}:  sum_t sum_i q_{l_i t} <= 1
//   AtLeastOne {l_1..l_r}:  sum_t sum_i q_{l_i t} >= 1
//   GroupTie   {l_1..l_r}:  sum_t q_{l_1 t} = sum_t q_{l_m t}   for m = 2..r
//
// Every row is handled in the normalized form g(Q) <= 0 or h(Q) = 0 and enters the
// free energy through augmented-Lagrangian terms that share the solver's rho.

#include "sparsemep/model.hpp"

#include <optional>
#include <string>
#include <vector>

namespace sparsemep {

enum class ConstraintKind { AtMostOne, AtLeastOne, GroupTie };
enum class Relation { LessEqual, GreaterEqual, Equal };

std::string to_string(ConstraintKind kind);
ConstraintKind constraint_kind_from_string(const std::string& s);

struct Term {
    double coefficient;
    int row;  // feature index i (0-based)
    int col;  // column t of Q
};

/// One scalar linear relation over Q entries.
struct LinearRow {
    std::vector<Term> terms;
    Relation relation;
    double bound;
};

struct LinearConstraint {
    ConstraintKind kind;
    std::vector<int> features;  // 0-based feature indices

    /// Scalar rows for a Q with k columns.
    std::vector<LinearRow> expand(int k) const;
    /// Number of scalar rows (independent of k).
    int row_count() const;
};

/// Factories take 0-based indices; d is used for range checks.
LinearConstraint at_most_one(std::vector<int> features, long d);
LinearConstraint at_least_one(std::vector<int> features, long d);
LinearConstraint group_tie(std::vector<int> features, long d);

struct ConstraintSet {
    std::vector<LinearConstraint> constraints;

    bool empty() const { return constraints.empty(); }
    /// Total number of scalar rows, i.e. the length of the multiplier vector.
    int row_count() const;
};

/// Normalized row values: g (<= 0 when satisfied) for inequalities, h for equalities.
VectorXd constraint_values(const ConstraintSet& set, const MatrixXd& Q);

/// True for rows that are equalities, in the same order as constraint_values.
std::vector<bool> equality_rows(const ConstraintSet& set);

struct PenaltyResult {
    double value = 0.0;
    MatrixXd gradient;
};

/// sum_c mu_c g_c + (rho/2) max(0, g_c)^2  (inequalities)
/// sum_c mu_c h_c + (rho/2) h_c^2          (equalities)
/// and its gradient with respect to Q.
PenaltyResult penalty_and_gradient(const ConstraintSet& set, const MatrixXd& Q,
                                   const VectorXd& multipliers, double rho);

/// Projected multiplier step: mu_c <- max(0, mu_c + rho g_c), mu_c <- mu_c + rho h_c.
VectorXd update_constraint_multipliers(const ConstraintSet& set, const VectorXd& multipliers,
                                       const MatrixXd& Q, double rho);

/// Same step with a separate step size per row.
VectorXd update_constraint_multipliers(const ConstraintSet& set, const VectorXd& multipliers,
                                       const MatrixXd& Q, const VectorXd& steps);

/// Per row, sum of (d row / d q_ij)^2 q_ij (1 - q_ij): the first-order response of the
/// row value to its multiplier, up to the factor 1/T.
VectorXd constraint_sensitivity(const ConstraintSet& set, const MatrixXd& Q);

/// Largest violation over all rows (0 when every row holds).
double max_violation(const ConstraintSet& set, const MatrixXd& Q);

/// Exact check on a binary selection matrix.
bool satisfied_by(const ConstraintSet& set, const Eigen::MatrixXi& V);

/// Check on a support set where each selected feature occupies exactly one column.
bool satisfied_by_support(const ConstraintSet& set, const std::vector<int>& support);

struct ValidationReport {
    bool ok = true;
    std::string message;
};

/// Structural feasibility: index range, disjoint AtLeastOne sets versus k, ties that
/// force more than k selections, and (for small instances) an exhaustive search for a
/// satisfying support. Returns the first violation found.
ValidationReport validate(const ConstraintSet& set, int k, long d);

}  // namespace sparsemep
