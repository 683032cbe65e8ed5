import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cellident.optimize import (
    BoundedProblem, EvaluationError, SolverConfig, ga_minimize, local_minimize, minimize_bounded,
    pso_minimize,
)


def rosenbrock(x):
    return (1 - x[0]) ** 2 + 100 * (x[1] - x[0] ** 2) ** 2


def rastrigin(x):
    x = np.asarray(x)
    return 10 * x.size + float(np.sum(x * x - 10 * np.cos(2 * np.pi * x)))


def bowl(x):
    return float(np.sum((np.asarray(x) - 0.3) ** 2))


def test_pso_convex_1d():
    out = pso_minimize(BoundedProblem([-2.0], [2.0], lambda x: (x[0] - 0.7) ** 2), SolverConfig(population=40))
    assert abs(out.x[0] - 0.7) < 1e-4


def test_pso_rosenbrock():
    prob = BoundedProblem([-2.0, -2.0], [2.0, 2.0], rosenbrock)
    out = pso_minimize(prob, SolverConfig(population=200, max_iter=500, seed=42))
    assert out.fun < 1e-3


def test_pso_defaults():
    cfg = SolverConfig()
    assert (cfg.population, cfg.tol, cfg.patience) == (200, 1e-6, 20)
    assert (cfg.inertia, cfg.cognitive, cfg.social) == (0.729, 1.49445, 1.49445)


def test_ga_convex():
    out = ga_minimize(BoundedProblem([-1.0, -1.0], [1.0, 1.0], bowl), SolverConfig.ga_defaults(seed=3))
    assert np.max(np.abs(out.x - 0.3)) < 1e-3


def test_ga_defaults():
    cfg = SolverConfig.ga_defaults()
    assert (cfg.population, cfg.crossover, cfg.mutation, cfg.tournament) == (100, 0.9, 0.1, 3)


def test_ga_beats_random_search_on_rastrigin():
    prob = BoundedProblem([-5.12, -5.12], [5.12, 5.12], rastrigin)
    out = ga_minimize(prob, SolverConfig.ga_defaults(seed=11, max_iter=60))
    rng = np.random.default_rng(11)
    pts = rng.uniform(-5.12, 5.12, (out.evaluations, 2))
    assert out.fun <= min(rastrigin(p) for p in pts)


def test_local_quadratic():
    prob = BoundedProblem([-1.0, -1.0, -1.0], [1.0, 1.0, 1.0], bowl)
    out = local_minimize(prob, [0.9, -0.9, 0.0], SolverConfig(kind="local", max_iter=2000, xatol=1e-10))
    assert np.max(np.abs(out.x - 0.3)) < 1e-6


def test_local_stays_in_right_basin():
    def f(x):
        return float((x[0] ** 2 - 1) ** 2 + 0.1 * x[0])

    grid = np.linspace(0.0, 2.0, 10_001)
    ref = grid[np.argmin([f([g]) for g in grid])]
    out = local_minimize(BoundedProblem([-2.0], [2.0], f), [1.5], SolverConfig(kind="local", xatol=1e-10))
    assert out.x[0] > 0
    assert abs(out.x[0] - ref) < 2e-4


def test_local_iterates_feasible():
    seen = []

    def f(x):
        seen.append(np.array(x))
        return float(np.sum((np.asarray(x) - 2.0) ** 2))

    out = local_minimize(BoundedProblem([0.0, 0.0], [1.0, 1.0], f), [0.5, 0.5], SolverConfig(kind="local"))
    pts = np.array(seen)
    assert np.all(pts >= 0.0) and np.all(pts <= 1.0)
    np.testing.assert_allclose(out.x, [1.0, 1.0], atol=1e-6)


def test_local_rejects_infeasible_start():
    with pytest.raises(ValueError):
        local_minimize(BoundedProblem([0.0], [1.0], bowl), [2.0])


@pytest.mark.parametrize("kind", ["pso", "ga", "local"])
def test_seed_determinism(kind):
    prob = BoundedProblem([-2.0, -2.0], [2.0, 2.0], rosenbrock)
    cfg = SolverConfig(kind=kind, population=30, max_iter=40, seed=5)
    a, b = minimize_bounded(prob, cfg), minimize_bounded(prob, cfg)
    assert a.x.tobytes() == b.x.tobytes()
    assert a.history == b.history and a.evaluations == b.evaluations


@pytest.mark.parametrize("kind", ["pso", "ga"])
def test_best_value_non_increasing(kind):
    prob = BoundedProblem([-5.12] * 3, [5.12] * 3, rastrigin)
    out = minimize_bounded(prob, SolverConfig(kind=kind, population=30, max_iter=50, seed=1))
    assert np.all(np.diff(out.history) <= 0)


@settings(max_examples=25, deadline=None)
@given(
    st.sampled_from(["pso", "ga", "local"]),
    st.lists(st.tuples(st.floats(-10, 10), st.floats(0.01, 10)), min_size=1, max_size=4),
    st.integers(0, 1000),
    st.integers(10, 400),
)
def test_outcome_feasible_and_within_budget(kind, box, seed, max_evals):
    lo = np.array([a for a, _ in box])
    hi = lo + np.array([w for _, w in box])
    target = lo - 1.0  # optimum outside the box pushes iterates onto the bounds
    prob = BoundedProblem(lo, hi, lambda x: float(np.sum((x - target) ** 2)))
    cfg = SolverConfig(kind=kind, population=10, max_iter=30, seed=seed, max_evals=max_evals)
    out = minimize_bounded(prob, cfg)
    assert np.all(out.x >= lo) and np.all(out.x <= hi)
    assert out.evaluations <= max_evals


def test_budget_below_one_generation():
    prob = BoundedProblem([0.0], [1.0], bowl)
    with pytest.raises(ValueError):
        pso_minimize(prob, SolverConfig(population=20, max_evals=10))


def test_non_finite_objective_raises():
    prob = BoundedProblem([0.0], [1.0], lambda x: np.nan)
    with pytest.raises(EvaluationError) as exc:
        pso_minimize(prob, SolverConfig(population=5))
    assert exc.value.point.shape == (1,)


def test_batch_objective_preferred():
    calls = []

    def batch(x):
        calls.append(x.shape[0])
        return np.sum(x * x, axis=1)

    pso_minimize(BoundedProblem([-1.0], [1.0], batch_objective=batch), SolverConfig(population=8, max_iter=3))
    assert calls[0] == 8


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(kind="cmaes")
    with pytest.raises(ValueError):
        SolverConfig(population=1)
    with pytest.raises(ValueError):
        BoundedProblem([1.0], [0.0], bowl)
