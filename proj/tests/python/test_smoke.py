import json
import os

import numpy as np
import pytest

import sparsemep

DATA = os.path.join(os.environ.get("SPARSEMEP_DATA_DIR", "data"), "imports-85.data")


def small_problem(seed=0, n=8, d=6, k=2):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, d))
    y = rng.standard_normal(n)
    return sparsemep.Problem(A, y, k)


def test_anneal_respects_the_oracle_bound():
    p = small_problem()
    result = sparsemep.anneal(p)
    support, _, best = sparsemep.exhaustive_best_subset(p)
    assert result.solution.cost >= best - 1e-9
    assert len(result.solution.support) <= p.k
    w = result.solution.w
    assert np.isclose(result.solution.cost, np.sum((p.y - p.A @ w) ** 2))


def test_planted_instance_round_trip():
    problem, support, w = sparsemep.generate_synthetic(seed=4, k=3)
    assert problem.A.shape == (8, 15)
    assert len(support) == 3
    assert np.allclose(problem.A @ w, problem.y)
    again = sparsemep.Problem.from_json(problem.to_json())
    assert np.array_equal(again.A, problem.A)


def test_runs_are_reproducible():
    problem, _, _ = sparsemep.generate_synthetic(seed=1)
    config = sparsemep.config(seed=7)
    a = sparsemep.anneal(problem, config=config)
    b = sparsemep.anneal(problem, config=config)
    assert a.solution.to_json() == b.solution.to_json()
    assert a.trace.to_json() == b.trace.to_json()
    assert a.trace.records[0].k_d == 1


def test_constraints_from_dicts():
    p = small_problem(seed=3, d=5, k=2)
    spec = [{"kind": "at_least_one", "features": [4, 5]}]
    result = sparsemep.anneal(p, spec)
    assert result.diagnostics.constraints_satisfied
    assert set(result.solution.support) & {3, 4}


def test_transition_report():
    problem, _, _ = sparsemep.generate_synthetic(seed=0)
    result = sparsemep.anneal(problem)
    report = sparsemep.analyze_transitions(problem, result.trace)
    assert report["schema"] == "transition_report"
    assert report["persistence"]["k_hat"] >= 1


def test_errors_are_typed():
    with pytest.raises(sparsemep.ConfigError):
        sparsemep.config(beta=1.5)
    with pytest.raises(sparsemep.ConfigError):
        sparsemep.config(no_such_key=1)
    p = small_problem()
    with pytest.raises(sparsemep.ConstraintError):
        sparsemep.constraints([{"kind": "at_most_one", "features": [1, 99]}], p.d)
    disjoint = [{"kind": "at_least_one", "features": [2 * i + 1, 2 * i + 2]} for i in range(p.k + 1)]
    with pytest.raises(sparsemep.ConstraintError):
        sparsemep.anneal(p, disjoint)


@pytest.mark.skipif(not os.path.exists(DATA), reason="automobile data not present")
def test_automobile_k3():
    problem = sparsemep.load_automobile(DATA, 3)
    assert (problem.n, problem.d) == (195, 13)
    result = sparsemep.anneal(problem)
    assert result.solution.support == [5, 8, 11]
    assert abs(result.solution.residual_norm - 0.2248) <= 0.01
