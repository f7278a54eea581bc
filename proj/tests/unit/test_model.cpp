#include "helpers.hpp"

#include "sparsemep/errors.hpp"
#include "sparsemep/model.hpp"

#include <doctest.h>

#include <cmath>

using namespace sparsemep;
using namespace testutil;

namespace {

// Expected cost under independent v_ij ~ Bernoulli(q_ij), summed over every binary d x k matrix.
double bernoulli_expectation(const Problem& p, const MatrixXd& Q, const VectorXd& x) {
    const long d = Q.rows();
    const long k = Q.cols();
    const long cells = d * k;
    double total = 0.0;
    for (long mask = 0; mask < (1L << cells); ++mask) {
        MatrixXd V = MatrixXd::Zero(d, k);
        double weight = 1.0;
        for (long c = 0; c < cells; ++c) {
            const long i = c % d;
            const long j = c / d;
            const bool on = (mask >> c) & 1L;
            V(i, j) = on ? 1.0 : 0.0;
            weight *= on ? Q(i, j) : 1.0 - Q(i, j);
        }
        total += weight * (p.y() - p.A() * V * x).squaredNorm();
    }
    return total;
}

double entropy_oracle(const MatrixXd& Q) {
    double h = 0.0;
    for (long i = 0; i < Q.size(); ++i) {
        const double q = Q.data()[i];
        if (q > 0.0) h -= q * std::log(q);
        if (q < 1.0) h -= (1.0 - q) * std::log(1.0 - q);
    }
    return h;
}

}  // namespace

TEST_CASE("problem caches column norms and validates k") {
    const Problem p = random_problem(1, 6, 4, 2);
    for (long j = 0; j < p.d(); ++j) {
        CHECK(p.column_norms_sq()(j) == doctest::Approx(p.A().col(j).squaredNorm()).epsilon(1e-12));
    }
    CHECK_THROWS(Problem(p.A(), p.y(), 0));
    CHECK_THROWS(Problem(p.A(), p.y(), 5));
    CHECK_THROWS(Problem(p.A(), VectorXd::Ones(3), 1));
}

TEST_CASE("entropy") {
    SUBCASE("maximum at one half") {
        MatrixXd Q = MatrixXd::Constant(2, 1, 0.5);
        CHECK(entropy(Q) == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
    }
    SUBCASE("binary matrices carry none") {
        MatrixXd Q(3, 2);
        Q << 1, 0, 0, 1, 0, 0;
        CHECK(entropy(Q) == 0.0);
    }
    SUBCASE("matches per-entry summation") {
        std::mt19937_64 gen(7);
        const MatrixXd Q = random_q(gen, 3, 2, 0.0, 1.0);
        CHECK(std::abs(entropy(Q) - entropy_oracle(Q)) <= 1e-12);
        CHECK(entropy(Q) >= 0.0);
        CHECK(entropy(Q) <= 6 * std::log(2.0));
    }
    SUBCASE("rejects entries outside [0, 1]") {
        MatrixXd Q = MatrixXd::Constant(2, 1, 0.5);
        Q(0, 0) = 1.1;
        CHECK_THROWS_AS(entropy(Q), DomainError);
    }
}

TEST_CASE("relaxed cost") {
    const Problem p = random_problem(3, 5, 3, 2);
    SUBCASE("binary Q gives the plain residual") {
        MatrixXd V = MatrixXd::Zero(3, 2);
        V(0, 0) = 1;
        V(2, 1) = 1;
        const VectorXd x = VectorXd::LinSpaced(2, 0.5, -1.5);
        CHECK(relaxed_cost(p, V, x) == doctest::Approx((p.y() - p.A() * V * x).squaredNorm()).epsilon(1e-14));
    }
    SUBCASE("x = 0 gives ||y||^2") {
        std::mt19937_64 gen(4);
        CHECK(relaxed_cost(p, random_q(gen, 3, 2), VectorXd::Zero(2)) ==
              doctest::Approx(p.y().squaredNorm()).epsilon(1e-14));
    }
    SUBCASE("equals the Bernoulli expectation by enumeration") {
        std::mt19937_64 gen(5);
        const MatrixXd Q = random_q(gen, 3, 2, 0.0, 1.0);
        const VectorXd x = gaussian(gen, 2, 1).col(0);
        CHECK(std::abs(relaxed_cost(p, Q, x) - bernoulli_expectation(p, Q, x)) <= 1e-10);
    }
    SUBCASE("enumeration identity over 100 seeded instances") {
        for (std::uint64_t seed = 0; seed < 100; ++seed) {
            std::mt19937_64 gen(seed);
            const long d = 2 + static_cast<long>(seed % 3);
            const int k = 1 + static_cast<int>(seed % 2);
            const Problem q = random_problem(1000 + seed, 4, d, k);
            const MatrixXd Q = random_q(gen, d, k, 0.0, 1.0);
            const VectorXd x = gaussian(gen, k, 1).col(0);
            CHECK(std::abs(relaxed_cost(q, Q, x) - bernoulli_expectation(q, Q, x)) <= 1e-9);
        }
    }
}

TEST_CASE("free energy and its gradients") {
    const Problem p = random_problem(11, 6, 4, 2);
    std::mt19937_64 gen(12);
    RelaxedState s;
    s.Q = random_q(gen, 4, 2, 0.1, 0.6);
    s.x = gaussian(gen, 2, 1).col(0);
    s.mu = gaussian(gen, 2, 1).col(0);
    s.T = 0.7;
    s.rho = 1.0 / s.T;

    SUBCASE("column-stochastic Q with mu = 0 drops the penalty terms") {
        RelaxedState t = s;
        t.Q = random_stochastic_q(gen, 4, 2);
        t.mu.setZero();
        const double c0 = 0.3;
        const double expected = entropy(t.Q) - relaxed_cost(p, t.Q, t.x) / t.T + c0 / t.T;
        CHECK(free_energy(p, t, c0) == doctest::Approx(expected).epsilon(1e-13));
    }
    SUBCASE("Q gradient matches central differences") {
        const MatrixXd grad = free_energy_grad_q(p, s);
        const double h = 1e-6;
        for (long i = 0; i < 4; ++i) {
            for (long j = 0; j < 2; ++j) {
                RelaxedState plus = s, minus = s;
                plus.Q(i, j) += h;
                minus.Q(i, j) -= h;
                const double fd = (free_energy(p, plus) - free_energy(p, minus)) / (2 * h);
                CHECK(relative_error(fd, grad(i, j)) <= 1e-4);
            }
        }
    }
    SUBCASE("x gradient matches central differences") {
        const VectorXd grad = free_energy_grad_x(p, s);
        const double h = 1e-6;
        for (long j = 0; j < 2; ++j) {
            RelaxedState plus = s, minus = s;
            plus.x(j) += h;
            minus.x(j) -= h;
            const double fd = (free_energy(p, plus) - free_energy(p, minus)) / (2 * h);
            CHECK(relative_error(fd, grad(j)) <= 1e-4);
        }
    }
    SUBCASE("the cost term vanishes as T grows") {
        RelaxedState t = s;
        t.T = 1e12;
        t.rho = 1.0 / t.T;
        CHECK(free_energy(p, t) == doctest::Approx(entropy(t.Q)).epsilon(1e-9));
    }
}

TEST_CASE("xi matrix") {
    const Problem p = random_problem(21, 6, 4, 3);
    SUBCASE("zero at x = 0, mu = 0 and uniform Q") {
        RelaxedState s = RelaxedState::uniform(4, 3, 2.0, 0.5);
        s.x.setZero();
        CHECK(xi_matrix(p, s).cwiseAbs().maxCoeff() <= 1e-15);
    }
    SUBCASE("(T/2) dF/dQ equals Xi - (T/2) logit Q") {
        std::mt19937_64 gen(22);
        RelaxedState s;
        s.Q = random_q(gen, 4, 3, 0.1, 0.5);
        s.x = gaussian(gen, 3, 1).col(0);
        s.mu = VectorXd::Zero(3);
        s.T = 1.3;
        s.rho = 1.0 / s.T;
        const MatrixXd xi = xi_matrix(p, s);
        const double h = 1e-6;
        for (long i = 0; i < 4; ++i) {
            for (long j = 0; j < 3; ++j) {
                RelaxedState plus = s, minus = s;
                plus.Q(i, j) += h;
                minus.Q(i, j) -= h;
                const double fd = 0.5 * s.T * (free_energy(p, plus) - free_energy(p, minus)) / (2 * h);
                const double q = s.Q(i, j);
                CHECK(relative_error(fd, xi(i, j) - 0.5 * s.T * std::log(q / (1 - q))) <= 1e-4);
            }
        }
    }
    SUBCASE("doubling T with rho = 1/T halves the stochasticity penalty term") {
        std::mt19937_64 gen(23);
        RelaxedState s;
        s.Q = random_q(gen, 4, 3);
        s.x = VectorXd::Zero(3);
        s.mu = VectorXd::Zero(3);
        s.T = 0.8;
        s.rho = 1.0 / s.T;
        RelaxedState t = s;
        t.T = 1.6;
        t.rho = 1.0 / t.T;
        CHECK((xi_matrix(p, t) - 0.5 * xi_matrix(p, s)).cwiseAbs().maxCoeff() <= 1e-15);
    }
}

TEST_CASE("solutions") {
    const Problem p = random_problem(31, 5, 4, 2);
    Eigen::MatrixXi V = Eigen::MatrixXi::Zero(4, 2);
    V(1, 0) = 1;
    V(3, 1) = 1;
    VectorXd x(2);
    x << 2.0, -1.0;
    const SparseSolution s = make_solution(p, V, x);
    CHECK(s.w(1) == 2.0);
    CHECK(s.w(3) == -1.0);
    CHECK(s.effective_sparsity == 2);
    CHECK(s.support() == std::vector<int>{1, 3});
    CHECK(s.cost == doctest::Approx((p.y() - p.A() * s.w).squaredNorm()));

    Eigen::MatrixXi bad = V;
    bad(0, 0) = 1;
    CHECK_THROWS(make_solution(p, bad, x));
}
