#pragma once

#include "sparsemep/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace testutil {

using sparsemep::MatrixXd;
using sparsemep::Problem;
using sparsemep::VectorXd;

inline MatrixXd gaussian(std::mt19937_64& gen, long rows, long cols) {
    std::normal_distribution<double> normal(0.0, 1.0);
    MatrixXd m(rows, cols);
    for (long j = 0; j < cols; ++j) {
        for (long i = 0; i < rows; ++i) m(i, j) = normal(gen);
    }
    return m;
}

inline Problem random_problem(std::uint64_t seed, long n, long d, int k) {
    std::mt19937_64 gen(seed);
    MatrixXd A = gaussian(gen, n, d);
    VectorXd y = gaussian(gen, n, 1).col(0);
    return Problem(std::move(A), std::move(y), k);
}

/// Entries in [lo, hi], columns not normalized.
inline MatrixXd random_q(std::mt19937_64& gen, long d, int k, double lo = 0.05, double hi = 0.95) {
    std::uniform_real_distribution<double> u(lo, hi);
    MatrixXd Q(d, k);
    for (long j = 0; j < k; ++j) {
        for (long i = 0; i < d; ++i) Q(i, j) = u(gen);
    }
    return Q;
}

/// Random column-stochastic Q with entries bounded away from 0.
inline MatrixXd random_stochastic_q(std::mt19937_64& gen, long d, int k) {
    MatrixXd Q = random_q(gen, d, k, 0.2, 1.0);
    for (long j = 0; j < k; ++j) Q.col(j) /= Q.col(j).sum();
    return Q;
}

inline double relative_error(double a, double b) {
    return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace testutil
