#include "sparsemep/baselines.hpp"

#include "sparsemep/errors.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace sparsemep {

SupportFit least_squares_on_support(const Problem& problem, const std::vector<int>& support) {
    SupportFit fit;
    if (support.empty()) {
        fit.coefficients = VectorXd();
        fit.cost = problem.y().squaredNorm();
        return fit;
    }
    MatrixXd As(problem.n(), static_cast<long>(support.size()));
    for (std::size_t c = 0; c < support.size(); ++c) {
        As.col(static_cast<long>(c)) = problem.A().col(support[c]);
    }
    fit.coefficients = As.colPivHouseholderQr().solve(problem.y());
    fit.cost = (problem.y() - As * fit.coefficients).squaredNorm();
    return fit;
}

double subset_count(long d, int k) {
    if (k < 0 || k > d) return 0.0;
    double out = 1.0;
    for (int i = 1; i <= k; ++i) out = out * static_cast<double>(d - k + i) / static_cast<double>(i);
    return std::round(out);
}

OracleResult exhaustive_best_subset(const Problem& problem, const ConstraintSet& constraints, double cap) {
    const long d = problem.d();
    const int k = problem.k();
    const double count = subset_count(d, k);
    if (count > cap) {
        std::ostringstream os;
        os << "exhaustive_best_subset: " << count << " subsets exceed the enumeration cap of " << cap;
        throw ConfigError(os.str());
    }

    OracleResult best;
    best.cost = std::numeric_limits<double>::infinity();
    std::vector<int> subset(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) subset[static_cast<std::size_t>(i)] = i;

    while (true) {
        if (constraints.empty() || satisfied_by_support(constraints, subset)) {
            SupportFit fit = least_squares_on_support(problem, subset);
            ++best.subsets_evaluated;
            if (fit.cost < best.cost) {
                best.cost = fit.cost;
                best.support = subset;
                best.coefficients = std::move(fit.coefficients);
            }
        }
        // Next combination in lexicographic order.
        int i = k - 1;
        while (i >= 0 && subset[static_cast<std::size_t>(i)] == d - k + i) --i;
        if (i < 0) break;
        ++subset[static_cast<std::size_t>(i)];
        for (int j = i + 1; j < k; ++j) {
            subset[static_cast<std::size_t>(j)] = subset[static_cast<std::size_t>(j - 1)] + 1;
        }
    }
    if (best.support.empty()) {
        throw ConstraintError("exhaustive_best_subset: no k-subset satisfies the constraints");
    }
    return best;
}

SparseSolution omp(const Problem& problem) {
    const int k = problem.k();
    if (k > problem.n() || k > problem.d()) {
        throw DomainError("omp: requires k <= min(n, d)");
    }
    std::vector<int> selected;
    std::vector<bool> used(static_cast<std::size_t>(problem.d()), false);
    VectorXd residual = problem.y();
    SupportFit fit;
    for (int round = 0; round < k; ++round) {
        const VectorXd corr = problem.A().transpose() * residual;
        long pick = -1;
        double best = -1.0;
        for (long j = 0; j < problem.d(); ++j) {
            if (used[static_cast<std::size_t>(j)]) continue;
            const double score = std::abs(corr(j));
            if (score > best) {
                best = score;
                pick = j;
            }
        }
        used[static_cast<std::size_t>(pick)] = true;
        selected.push_back(static_cast<int>(pick));
        fit = least_squares_on_support(problem, selected);
        VectorXd approx = VectorXd::Zero(problem.n());
        for (std::size_t c = 0; c < selected.size(); ++c) {
            approx += fit.coefficients(static_cast<long>(c)) * problem.A().col(selected[c]);
        }
        residual = problem.y() - approx;
    }
    Eigen::MatrixXi V = Eigen::MatrixXi::Zero(problem.d(), k);
    for (int t = 0; t < k; ++t) V(selected[static_cast<std::size_t>(t)], t) = 1;
    return make_solution(problem, std::move(V), fit.coefficients);
}

}  // namespace sparsemep
