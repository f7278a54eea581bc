#include "helpers.hpp"

#include "sparsemep/constraints.hpp"
#include "sparsemep/errors.hpp"

#include <doctest.h>

using namespace sparsemep;
using namespace testutil;

namespace {

Eigen::MatrixXi selection(long d, const std::vector<int>& rows) {
    Eigen::MatrixXi V = Eigen::MatrixXi::Zero(d, static_cast<long>(rows.size()));
    for (std::size_t t = 0; t < rows.size(); ++t) V(rows[t], static_cast<long>(t)) = 1;
    return V;
}

ConstraintSet single(LinearConstraint c) { return ConstraintSet{{std::move(c)}}; }

}  // namespace

TEST_CASE("at most one") {
    const ConstraintSet set = single(at_most_one({0, 1}, 5));
    CHECK(satisfied_by(set, selection(5, {0, 3})));
    CHECK_FALSE(satisfied_by(set, selection(5, {0, 1})));
    CHECK(satisfied_by_support(set, {0, 3}));
    CHECK_FALSE(satisfied_by_support(set, {0, 1}));
}

TEST_CASE("at least one") {
    const ConstraintSet all = single(at_least_one({0, 1, 2, 3}, 4));
    std::mt19937_64 gen(3);
    CHECK(max_violation(all, random_stochastic_q(gen, 4, 2)) <= 1e-12);
    const ConstraintSet some = single(at_least_one({1, 2}, 5));
    CHECK_FALSE(satisfied_by(some, selection(5, {0, 4})));
    CHECK(satisfied_by(some, selection(5, {0, 2})));
}

TEST_CASE("group tie") {
    const ConstraintSet set = single(group_tie({1, 3}, 5));
    CHECK(satisfied_by(set, selection(5, {1, 3})));
    CHECK(satisfied_by(set, selection(5, {0, 2})));
    CHECK_FALSE(satisfied_by(set, selection(5, {1, 2})));

    std::mt19937_64 gen(4);
    MatrixXd Q = random_stochastic_q(gen, 5, 2);
    Q.row(3) = Q.row(1);
    const VectorXd mu = VectorXd::Zero(set.row_count());
    CHECK(penalty_and_gradient(set, Q, mu, 2.0).value == doctest::Approx(0.0));

    const double rho = 2.0;
    MatrixXd Q1 = Q, Q2 = Q;
    Q1(3, 0) += 1e-3;
    Q2(3, 0) += 2e-3;
    const double p1 = penalty_and_gradient(set, Q1, mu, rho).value;
    const double p2 = penalty_and_gradient(set, Q2, mu, rho).value;
    CHECK(p1 > 0.0);
    CHECK(p2 / p1 == doctest::Approx(4.0).epsilon(1e-9));
}

TEST_CASE("penalty value and gradient") {
    SUBCASE("slack constraints contribute nothing") {
        const ConstraintSet set = single(at_most_one({0, 1}, 4));
        MatrixXd Q = MatrixXd::Zero(4, 2);
        Q(2, 0) = Q(3, 1) = 1.0;
        const PenaltyResult p = penalty_and_gradient(set, Q, VectorXd::Zero(set.row_count()), 1.0);
        CHECK(p.value == 0.0);
        CHECK(p.gradient.cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("violated inequality: mu v + rho v^2 / 2") {
        const ConstraintSet set = single(at_most_one({0, 1}, 4));
        MatrixXd Q = MatrixXd::Zero(4, 2);
        Q(0, 0) = 1.0;
        Q(1, 1) = 0.7;
        Q(2, 1) = 0.3;
        const double v = 0.7;
        const double mu = 0.4;
        const double rho = 3.0;
        const PenaltyResult p = penalty_and_gradient(set, Q, VectorXd::Constant(1, mu), rho);
        CHECK(p.value == doctest::Approx(mu * v + 0.5 * rho * v * v).epsilon(1e-12));
    }
    SUBCASE("gradient matches central differences") {
        ConstraintSet set;
        set.constraints = {at_most_one({0, 1, 2}, 6), at_least_one({3, 4}, 6), group_tie({1, 5}, 6)};
        for (std::uint64_t seed = 0; seed < 100; ++seed) {
            std::mt19937_64 gen(seed);
            const MatrixXd Q = random_q(gen, 6, 2, 0.0, 0.9);
            const VectorXd mu = random_q(gen, set.row_count(), 1, 0.0, 1.0).col(0);
            const double rho = 1.5;
            const MatrixXd grad = penalty_and_gradient(set, Q, mu, rho).gradient;
            const double h = 1e-6;
            for (long i = 0; i < Q.size(); ++i) {
                MatrixXd plus = Q, minus = Q;
                plus.data()[i] += h;
                minus.data()[i] -= h;
                const double fd = (penalty_and_gradient(set, plus, mu, rho).value -
                                   penalty_and_gradient(set, minus, mu, rho).value) / (2 * h);
                CHECK(relative_error(fd, grad.data()[i]) <= 1e-4);
            }
        }
    }
    SUBCASE("zero exactly when every row holds") {
        ConstraintSet set;
        set.constraints = {at_most_one({0, 1}, 4), at_least_one({2, 3}, 4)};
        MatrixXd Q = MatrixXd::Zero(4, 2);
        Q(0, 0) = Q(2, 1) = 1.0;
        CHECK(penalty_and_gradient(set, Q, VectorXd::Zero(set.row_count()), 1.0).value == 0.0);
        Q(0, 1) = 0.5;
        Q(2, 1) = 0.5;
        CHECK(penalty_and_gradient(set, Q, VectorXd::Zero(set.row_count()), 1.0).value > 0.0);
    }
}

TEST_CASE("multiplier updates") {
    const ConstraintSet set = single(at_most_one({0, 1}, 3));
    MatrixXd slack = MatrixXd::Zero(3, 1);
    slack(2, 0) = 1.0;
    const VectorXd mu = VectorXd::Constant(1, 0.2);
    // Inequality multipliers are projected onto mu >= 0.
    CHECK(update_constraint_multipliers(set, mu, slack, 1.0)(0) == 0.0);
    MatrixXd over = MatrixXd::Zero(3, 2);
    over(0, 0) = over(1, 1) = 1.0;
    const ConstraintSet set2 = single(at_most_one({0, 1}, 3));
    CHECK(update_constraint_multipliers(set2, mu, over, 2.0)(0) == doctest::Approx(0.2 + 2.0 * 1.0));
}

TEST_CASE("validation") {
    SUBCASE("pigeonhole on disjoint at-least-one sets") {
        ConstraintSet set;
        set.constraints = {at_least_one({0, 1}, 8), at_least_one({2, 3}, 8), at_least_one({4, 5}, 8)};
        const ValidationReport r = validate(set, 2, 8);
        CHECK_FALSE(r.ok);
        CHECK_FALSE(r.message.empty());
        CHECK(validate(set, 3, 8).ok);
    }
    SUBCASE("empty set") { CHECK(validate(ConstraintSet{}, 2, 5).ok); }
    SUBCASE("tie larger than k") {
        const ConstraintSet set = single(group_tie({0, 1, 2}, 6));
        CHECK(validate(set, 3, 6).ok);
        // Still feasible by leaving the group out entirely.
        CHECK(validate(set, 2, 6).ok);
    }
    SUBCASE("factories check ranges") {
        CHECK_THROWS(at_most_one({0, 7}, 5));
        CHECK_THROWS(at_least_one({}, 5));
    }
    SUBCASE("kind names") {
        CHECK(constraint_kind_from_string("group") == ConstraintKind::GroupTie);
        CHECK(to_string(ConstraintKind::AtMostOne) == "at_most_one");
        CHECK_THROWS_AS(constraint_kind_from_string("between"), ConstraintError);
    }
}
