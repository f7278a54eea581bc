#include "helpers.hpp"

#include "sparsemep/baselines.hpp"
#include "sparsemep/data_io.hpp"
#include "sparsemep/errors.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace sparsemep;
using namespace testutil;

namespace {

const std::string kAutomobile = std::string(SPARSEMEP_DATA_DIR) + "/imports-85.data";

std::string scratch(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "sparsemep_unit";
    std::filesystem::create_directories(dir);
    return (dir / name).string();
}

std::vector<std::string> lines_of(const std::string& path) {
    std::ifstream in(path);
    std::vector<std::string> lines;
    for (std::string l; std::getline(in, l);) lines.push_back(l);
    return lines;
}

void write_lines(const std::string& path, const std::vector<std::string>& lines) {
    std::ofstream out(path);
    for (const auto& l : lines) out << l << '\n';
}

}  // namespace

TEST_CASE("automobile loader") {
    const Problem p = load_automobile(DatasetSpec::automobile(kAutomobile), 3);
    CHECK(p.n() == 195);
    CHECK(p.d() == 13);
    CHECK(p.k() == 3);
    for (long j = 0; j < 13; ++j) CHECK(std::abs(p.A().col(j).norm() - 1.0) <= 1e-12);
    CHECK(std::abs(p.y().norm() - 1.0) <= 1e-12);
    CHECK(p.feature_names()[5] == "engine-size");

    SUBCASE("a deleted record is an integrity error") {
        auto lines = lines_of(kAutomobile);
        lines.erase(lines.begin() + 17);
        const std::string path = scratch("short.data");
        write_lines(path, lines);
        CHECK_THROWS_AS(load_automobile(DatasetSpec::automobile(path)), DataIntegrityError);
    }
    SUBCASE("a bad number reports its position") {
        auto lines = lines_of(kAutomobile);
        auto fields = lines[0];
        const auto pos = fields.find(",88.60,");
        REQUIRE(pos != std::string::npos);
        fields.replace(pos, 7, ",8x.60,");
        lines[0] = fields;
        const std::string path = scratch("bad.data");
        write_lines(path, lines);
        try {
            load_automobile(DatasetSpec::automobile(path));
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.row() == 0);
            CHECK(e.col() == 9);
        }
    }
    SUBCASE("mapping override") {
        DatasetSpec spec = DatasetSpec::automobile(kAutomobile);
        json mapping = {{"features", json::array()}};
        for (auto it = spec.features.rbegin(); it != spec.features.rend(); ++it) {
            mapping["features"].push_back({{"name", it->name}, {"column", it->column}});
        }
        apply_mapping(spec, mapping);
        const Problem r = load_automobile(spec);
        CHECK((r.A().col(0) - p.A().col(12)).cwiseAbs().maxCoeff() == 0.0);
        CHECK(r.feature_names()[0] == "highway-mpg");
        mapping["features"].erase(0);
        CHECK_THROWS_AS(apply_mapping(spec, mapping), ConfigError);
    }
    SUBCASE("missing file") { CHECK_THROWS_AS(load_automobile(DatasetSpec::automobile(scratch("none"))), DataIntegrityError); }
}

TEST_CASE("synthetic instances") {
    SyntheticSpec spec;
    spec.seed = 17;
    const SyntheticInstance a = generate_synthetic(spec);
    const SyntheticInstance b = generate_synthetic(spec);
    CHECK(a.problem.A() == b.problem.A());
    CHECK(a.problem.y() == b.problem.y());
    CHECK(a.support == b.support);
    CHECK(a.problem.n() == 8);
    CHECK(a.problem.d() == 15);
    CHECK(a.problem.k() == 5);
    CHECK(a.support.size() == 3);
    for (int j : a.support) CHECK((std::abs(a.w(j)) >= 1.0 && std::abs(a.w(j)) <= 2.0));
    CHECK((a.w.array() != 0.0).count() == 3);

    const OracleResult best = exhaustive_best_subset(a.problem.with_k(3), {});
    CHECK(best.cost <= 1e-18);

    spec.seed = 18;
    CHECK_FALSE(generate_synthetic(spec).problem.A() == a.problem.A());
    spec.k_true = 16;
    CHECK_THROWS_AS(generate_synthetic(spec), ConfigError);
}

TEST_CASE("JSON round trips") {
    const Problem p = random_problem(131, 6, 4, 2);

    SUBCASE("problem") {
        const Problem q = deserialize_problem(serialize(p));
        CHECK(q.A() == p.A());
        CHECK(q.y() == p.y());
        CHECK(q.k() == p.k());
    }
    SUBCASE("solution") {
        Eigen::MatrixXi V = Eigen::MatrixXi::Zero(4, 2);
        V(1, 0) = V(3, 1) = 1;
        const SparseSolution s = make_solution(p, V, (VectorXd(2) << 0.1, 1.0 / 3.0).finished());
        const SparseSolution t = deserialize_solution(serialize(s));
        CHECK(t.V == s.V);
        CHECK(t.x == s.x);
        CHECK(t.w == s.w);
        CHECK(t.cost == s.cost);
        CHECK(t.effective_sparsity == s.effective_sparsity);
    }
    SUBCASE("trace of 500 records") {
        AnnealTrace trace;
        std::mt19937_64 gen(132);
        for (int i = 0; i < 500; ++i) {
            TraceRecord r;
            r.T = std::pow(0.95, i);
            r.Q = random_q(gen, 4, 2);
            r.x = gaussian(gen, 2, 1).col(0);
            r.mu = gaussian(gen, 2, 1).col(0);
            r.k_d = 1 + i / 200;
            r.relaxed_cost = 1.0 / (i + 1);
            r.rounded_cost = std::nan("");
            r.converged = i % 7 != 0;
            trace.records.push_back(r);
        }
        trace.transitions = {200, 400};
        const AnnealTrace back = deserialize_trace(serialize(trace));
        REQUIRE(back.records.size() == 500);
        CHECK(back.transitions == trace.transitions);
        for (std::size_t i = 0; i < 500; ++i) {
            CHECK(back.records[i].k_d == trace.records[i].k_d);
            CHECK(back.records[i].T == trace.records[i].T);
            CHECK(back.records[i].Q == trace.records[i].Q);
            CHECK(back.records[i].converged == trace.records[i].converged);
            CHECK(std::isnan(back.records[i].rounded_cost));
        }
        CHECK(serialize(back) == serialize(trace));
    }
    SUBCASE("transition report") {
        TransitionReport r;
        TransitionInfo t;
        t.record = 4;
        t.t_before = 0.3;
        t.t_observed = 0.285;
        t.kd_before = 1;
        t.kd_after = 2;
        t.jump = 0.84;
        t.t_cr = 0.29;
        t.within_one_step = true;
        t.min_eig_above = 1e-3;
        t.min_eig_below = -2e-3;
        t.sign_flip = true;
        r.transitions.push_back(t);
        r.fractional.segments.push_back(SegmentStats{0, 3, 1, {0.0, 0.01, 0.02, 0.0}, 0.005, 0.02, true});
        r.fractional.jumps = {0.84};
        r.fractional.pooled_median = 0.005;
        r.persistence.k_hat = 3;
        r.persistence.dwell = {{2, 0.5}, {3, 1.5}};
        CHECK(serialize(deserialize_report(serialize(r))) == serialize(r));
        CHECK(*deserialize_report(serialize(r)).transitions[0].t_cr == 0.29);
    }
    SUBCASE("version and syntax errors") {
        json j = to_json(p);
        j["version"] = 99;
        CHECK_THROWS_AS(problem_from_json(j), VersionError);
        CHECK_THROWS_AS(deserialize_problem("{\"schema\": \"problem\", \"version\": 1, \"A\": [[1, 2]"), ParseError);
        j = to_json(p);
        j.erase("y");
        CHECK_THROWS_AS(problem_from_json(j), ParseError);
        CHECK_THROWS_AS(deserialize_solution(serialize(p)), ParseError);
    }
}

TEST_CASE("constraint and config files") {
    const json doc = json::parse(R"([{"kind": "at_most_one", "features": [1, 2, 4]},
                                     {"kind": "group", "features": [9, 10]}])");
    const ConstraintSet set = constraints_from_json(doc, 13);
    REQUIRE(set.constraints.size() == 2);
    CHECK(set.constraints[0].features == std::vector<int>{0, 1, 3});
    CHECK(set.constraints[1].kind == ConstraintKind::GroupTie);
    CHECK(to_json(set) == doc);
    CHECK_THROWS_AS(constraints_from_json(json::parse(R"([{"kind": "at_most_one", "features": [0, 2]}])"), 13),
                    ConstraintError);
    CHECK_THROWS_AS(constraints_from_json(json::parse(R"([{"kind": "some", "features": [1, 2]}])"), 13),
                    ConstraintError);

    AnnealConfig c = config_from_json(json::parse(R"({"beta": 0.9, "t_max": 5.0, "seed": 4})"));
    CHECK(c.beta == 0.9);
    CHECK(*c.t_max == 5.0);
    CHECK(c.seed == 4);
    c = config_from_json(to_json(c));
    CHECK(c.beta == 0.9);
    CHECK(config_from_json(json::parse(R"({"t_max": "auto"})"), c).t_max == std::nullopt);
    CHECK_THROWS_AS(config_from_json(json::parse(R"({"betta": 0.9})")), ConfigError);
}

TEST_CASE("CSV outputs") {
    AnnealTrace trace;
    for (int i = 0; i < 3; ++i) {
        TraceRecord r;
        r.T = std::exp(-i);
        r.k_d = 1 + i;
        r.x = VectorXd::Ones(1);
        trace.records.push_back(r);
    }
    trace.transitions = {1, 2};
    const std::string kd = kd_csv(trace);
    CHECK(kd.rfind("log_inv_T,k_d\n0,1\n1,2\n2,3\n", 0) == 0);
    const std::string seg = segment_csv(fractional_change_stats(trace));
    CHECK(seg.rfind("segment,k_d,median,max,interior\n0,1,0,0,0\n1,2,0,0,1\n", 0) == 0);
}

TEST_CASE("atomic writes") {
    const std::string path = scratch("atomic.txt");
    write_file_atomic(path, "first");
    write_file_atomic(path, "second");
    CHECK(read_file(path) == "second");
    CHECK_FALSE(std::filesystem::exists(path + ".tmp"));
}
