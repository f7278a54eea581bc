#pragma once

// Reference solvers: exhaustive best-subset enumeration (exact, small d) and
// orthogonal matching pursuit (greedy).

#include "sparsemep/constraints.hpp"
#include "sparsemep/model.hpp"

#include <cstdint>
#include <vector>

namespace sparsemep {

struct SupportFit {
    VectorXd coefficients;  // one per support entry, same order
    double cost = 0.0;      // ||y - A_S c||^2
};

/// Least squares of y on the columns listed in support (column-pivoted QR).
SupportFit least_squares_on_support(const Problem& problem, const std::vector<int>& support);

struct OracleResult {
    std::vector<int> support;  // 0-based, ascending
    VectorXd coefficients;
    double cost = 0.0;
    std::int64_t subsets_evaluated = 0;
};

inline constexpr double kDefaultEnumerationCap = 2e6;

/// Number of k-subsets of d items (as a double to avoid overflow).
double subset_count(long d, int k);

/// Enumerates every k-subset in lexicographic order, skipping subsets that violate the
/// constraints, and returns the first global minimizer. Throws ConfigError when the
/// subset count exceeds cap.
OracleResult exhaustive_best_subset(const Problem& problem, const ConstraintSet& constraints,
                                    double cap = kDefaultEnumerationCap);

/// k rounds of: pick the column most correlated with the residual, refit on the
/// selected set. V columns are one-hot in selection order.
SparseSolution omp(const Problem& problem);

}  // namespace sparsemep
