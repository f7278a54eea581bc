"""Exact-k sparse regression by deterministic annealing.

Thin wrapper over the compiled ``_sparsemep`` module. Feature indices in
constraint specs are 1-based, everything returned by the solver is 0-based.
"""

import json

from ._sparsemep import (
    SCHEMA_VERSION,
    AnnealConfig,
    AnnealResult,
    AnnealTrace,
    ConfigError,
    ConstraintError,
    ConstraintSet,
    DataIntegrityError,
    DomainError,
    NumericalError,
    ParseError,
    Problem,
    ShapeError,
    SolveDiagnostics,
    SolverError,
    SparseSolution,
    SparsemepError,
    TraceRecord,
    VersionError,
    anneal,
    constraints,
    count_distinct_columns,
    entropy,
    exhaustive_best_subset,
    generate_synthetic,
    load_automobile,
    omp,
    relaxed_cost,
    update_x,
)
from ._sparsemep import analyze_transitions as _analyze_transitions

__version__ = "0.1.0"


def config(**overrides):
    """AnnealConfig with the given fields set, e.g. ``config(beta=0.9, seed=3)``."""
    c = AnnealConfig()
    for key, value in overrides.items():
        if not hasattr(c, key):
            raise ConfigError(f"unknown config key '{key}'")
        setattr(c, key, value)
    c.validate()
    return c


def analyze_transitions(problem, trace, analytic=True, beta=0.95):
    """Transition report of an annealing trace as a dict."""
    return json.loads(_analyze_transitions(problem, trace, analytic, beta))


__all__ = [name for name in dir() if not name.startswith("_") and name != "json"]
