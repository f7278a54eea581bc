#include "helpers.hpp"

#include "sparsemep/errors.hpp"
#include "sparsemep/phase.hpp"

#include <doctest.h>

#include <cmath>

using namespace sparsemep;
using namespace testutil;

namespace {

// Richardson-refined mixed second differences of the eliminated objective in Phi.
MatrixXd richardson_hessian(const Problem& p, const MatrixXd& Q, double T, double h) {
    const long d = Q.rows();
    const long k = Q.cols();
    const long m = d - 1;
    const MatrixXd C = perturbation_basis(d);
    auto f = [&](const VectorXd& phi) {
        MatrixXd shifted = Q;
        for (long j = 0; j < k; ++j) shifted.col(j) += C * phi.segment(j * m, m);
        return eliminated_objective(p, shifted, T);
    };
    auto second = [&](long a, long b, double step) {
        VectorXd ea = VectorXd::Zero(k * m), eb = VectorXd::Zero(k * m);
        ea(a) = step;
        eb(b) = step;
        return (f(ea + eb) - f(ea - eb) - f(eb - ea) + f(-ea - eb)) / (4 * step * step);
    };
    MatrixXd H(k * m, k * m);
    for (long a = 0; a < k * m; ++a) {
        for (long b = 0; b < k * m; ++b) H(a, b) = (4 * second(a, b, h / 2) - second(a, b, h)) / 3;
    }
    return H;
}

AnnealTrace trace_of(const std::vector<std::pair<int, VectorXd>>& rows, double t0 = 1.0, double beta = 0.9) {
    AnnealTrace trace;
    double T = t0;
    int previous = 0;
    for (const auto& [kd, x] : rows) {
        TraceRecord r;
        r.T = T;
        r.k_d = kd;
        r.x = x;
        if (previous > 0 && kd > previous) trace.transitions.push_back(static_cast<int>(trace.records.size()));
        previous = kd;
        trace.records.push_back(r);
        T *= beta;
    }
    return trace;
}

}  // namespace

TEST_CASE("distinct columns") {
    MatrixXd same = MatrixXd::Constant(4, 3, 0.25);
    CHECK(count_distinct_columns(same) == 1);
    MatrixXd V = MatrixXd::Zero(4, 3);
    V(0, 0) = V(2, 1) = V(3, 2) = 1.0;
    CHECK(count_distinct_columns(V) == 3);
    MatrixXd pair = V;
    pair.col(2) = pair.col(1);
    CHECK(count_distinct_columns(pair) == 2);
    CHECK(distinct_column_labels(pair) == std::vector<int>{0, 1, 1});
}

TEST_CASE("perturbation basis") {
    const MatrixXd C = perturbation_basis(5);
    CHECK(C.rows() == 5);
    CHECK(C.cols() == 4);
    CHECK(C.colwise().sum().cwiseAbs().maxCoeff() <= 1e-15);
    CHECK(Eigen::FullPivLU<MatrixXd>(C).rank() == 4);
}

TEST_CASE("reduced Hessian") {
    const Problem p = random_problem(101, 6, 5, 2);
    std::mt19937_64 gen(102);
    const MatrixXd Q = random_stochastic_q(gen, 5, 2);
    const double T = 0.3;

    SUBCASE("symmetric and matches a Richardson-refined oracle") {
        const MatrixXd H = reduced_hessian(p, Q, T);
        CHECK((H - H.transpose()).cwiseAbs().maxCoeff() <= 1e-8 * H.cwiseAbs().maxCoeff());
        const MatrixXd R = richardson_hessian(p, Q, T, 1e-3);
        CHECK((H - R).cwiseAbs().maxCoeff() <= 1e-6 * H.cwiseAbs().maxCoeff());
    }
    SUBCASE("affine in T") {
        const HessianSplit s = hessian_split(p, Q);
        CHECK((s.at(0.7) - reduced_hessian(p, Q, 0.7)).cwiseAbs().maxCoeff() <= 1e-12 * s.H1.cwiseAbs().maxCoeff());
        CHECK((s.at(2.0) - s.at(1.0) - 0.5 * s.H0).cwiseAbs().maxCoeff() <= 1e-10 * s.H0.cwiseAbs().maxCoeff());
    }
    SUBCASE("positive definite far above the first transition") {
        const Instability lead = leading_instability(p, Q);
        CHECK(min_eigenvalue(reduced_hessian(p, Q, 10.0 * lead.t_cr + 1.0)) > 0.0);
    }
    SUBCASE("undefined on the clamp boundary") {
        MatrixXd V = MatrixXd::Zero(5, 2);
        V(0, 0) = V(1, 1) = 1.0;
        CHECK_THROWS_AS(hessian_split(p, V), DomainError);
    }
}

TEST_CASE("critical temperature") {
    SUBCASE("diagonal block formula") {
        const MatrixXd H0 = MatrixXd::Identity(2, 2);
        const MatrixXd H1 = (VectorXd(2) << 0.5, 0.25).finished().asDiagonal();
        CHECK(*block_critical_temperature(H0, H1) == doctest::Approx(1.0).epsilon(1e-14));
        CHECK(block_critical_temperature(-H0, H1) == std::nullopt);
        CHECK(*block_critical_temperature(H0, -H1) == 0.0);
    }
    SUBCASE("eigenvalue bracketing at coincident columns") {
        const Problem p = random_problem(111, 8, 6, 2);
        const MatrixXd Q = MatrixXd::Constant(6, 2, 1.0 / 6);
        const Instability lead = leading_instability(p, Q);
        REQUIRE(lead.t_cr > 0.0);
        CHECK(min_eigenvalue(reduced_hessian(p, Q, lead.t_cr * 1.001)) > 0.0);
        CHECK(min_eigenvalue(reduced_hessian(p, Q, lead.t_cr * 0.999)) < 0.0);

        const CriticalTemperature ct = critical_temperature(p, Q);
        CHECK(ct.partner[0] == 1);
        CHECK(ct.partner[1] == 0);
        CHECK(ct.t_cr <= lead.t_cr * (1 + 1e-9));
        CHECK(critical_temperature(p, Q, CriticalAggregate::TwiceMax).t_cr == doctest::Approx(2 * ct.t_cr));
    }
    SUBCASE("unstable direction keeps column sums") {
        const Problem p = random_problem(112, 8, 6, 3);
        const MatrixXd Q = MatrixXd::Constant(6, 3, 1.0 / 6);
        const Instability lead = leading_instability(p, Q);
        CHECK_FALSE(unstable_direction(p, Q, lead.t_cr * 1.01).has_value());
        const auto dir = unstable_direction(p, Q, lead.t_cr * 0.99);
        REQUIRE(dir.has_value());
        CHECK(dir->colwise().sum().cwiseAbs().maxCoeff() <= 1e-12);
        CHECK(dir->cwiseAbs().maxCoeff() > 0.0);
    }
}

TEST_CASE("fractional change") {
    const VectorXd v = (VectorXd(2) << 1.0, -2.0).finished();
    SUBCASE("constant x") {
        const auto stats = fractional_change_stats(trace_of({{1, v}, {1, v}, {1, v}}));
        REQUIRE(stats.segments.size() == 1);
        CHECK(stats.segments[0].median == 0.0);
        CHECK(stats.segments[0].max == 0.0);
    }
    SUBCASE("v and 3v around their mean 2v") {
        const auto stats = fractional_change_stats(trace_of({{1, v}, {1, 3 * v}}));
        CHECK(stats.segments[0].changes[0] == doctest::Approx(0.5));
        CHECK(stats.segments[0].changes[1] == doctest::Approx(0.5));
    }
    SUBCASE("jumps at transitions") {
        const auto stats = fractional_change_stats(trace_of({{1, v}, {1, v}, {2, 2 * v}, {2, 2 * v}}));
        CHECK(stats.segments.size() == 2);
        REQUIRE(stats.jumps.size() == 1);
        CHECK(stats.jumps[0] == doctest::Approx(1.0));
        CHECK(stats.pooled_median == 0.0);
    }
    SUBCASE("only segments between two transitions are pooled") {
        const auto stats = fractional_change_stats(
            trace_of({{1, v}, {1, 5 * v}, {2, v}, {2, 3 * v}, {3, v}, {3, 9 * v}}));
        REQUIRE(stats.segments.size() == 3);
        CHECK_FALSE(stats.segments[0].interior);
        CHECK(stats.segments[1].interior);
        CHECK_FALSE(stats.segments[2].interior);
        CHECK(stats.pooled_median == doctest::Approx(0.5));
    }
}

TEST_CASE("persistence estimate") {
    const VectorXd x = VectorXd::Ones(5);
    SUBCASE("longest interior plateau wins") {
        std::vector<std::pair<int, VectorXd>> rows;
        for (int i = 0; i < 5; ++i) rows.emplace_back(1, x);
        for (int i = 0; i < 3; ++i) rows.emplace_back(2, x);
        for (int i = 0; i < 12; ++i) rows.emplace_back(3, x);
        for (int i = 0; i < 2; ++i) rows.emplace_back(4, x);
        for (int i = 0; i < 30; ++i) rows.emplace_back(5, x);
        const PersistenceEstimate e = persistence_estimate(trace_of(rows), 5);
        CHECK(e.k_hat == 3);
        CHECK_FALSE(e.low_confidence);
    }
    SUBCASE("a jump from 1 straight to k is low confidence") {
        std::vector<std::pair<int, VectorXd>> rows;
        for (int i = 0; i < 5; ++i) rows.emplace_back(1, x);
        for (int i = 0; i < 5; ++i) rows.emplace_back(5, x);
        const PersistenceEstimate e = persistence_estimate(trace_of(rows), 5);
        CHECK(e.k_hat == 5);
        CHECK(e.low_confidence);
    }
}

TEST_CASE("transition analysis needs snapshots for the analytic path") {
    const Problem p = random_problem(121, 8, 5, 2);
    const VectorXd x = VectorXd::Ones(2);
    const AnnealTrace trace = trace_of({{1, x}, {2, x}});
    CHECK_THROWS_AS(analyze_transitions(p, trace), ConfigError);
    TransitionOptions opts;
    opts.analytic = false;
    const TransitionReport r = analyze_transitions(p, trace, opts);
    REQUIRE(r.transitions.size() == 1);
    CHECK_FALSE(r.transitions[0].t_cr.has_value());
}
