"""Bounded black-box minimizers: particle swarm, genetic algorithm, simplex.

All solvers work internally on the unit box and map back to the problem
bounds, so parameters of very different magnitude are treated alike.
Population methods evaluate a whole generation at once through
``BoundedProblem.evaluate``, which uses the vectorised objective when one
is supplied.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import minimize

SOLVER_KINDS = ("pso", "ga", "local")


class EvaluationError(RuntimeError):
    """Objective returned a non-finite value inside the bounds."""

    def __init__(self, point, value):
        super().__init__(f"objective returned {value!r} at {np.asarray(point).tolist()}")
        self.point = np.asarray(point)
        self.value = value


class BudgetExceeded(Exception):
    pass


@dataclass
class BoundedProblem:
    """Minimise ``objective(x)`` for ``lower <= x <= upper``.

    ``batch_objective`` optionally maps an (n, dim) array to n values and is
    preferred by the population methods.
    """

    lower: np.ndarray
    upper: np.ndarray
    objective: Optional[Callable] = None
    batch_objective: Optional[Callable] = None
    names: tuple = ()

    def __post_init__(self):
        self.lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        self.upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if self.lower.shape != self.upper.shape or self.lower.ndim != 1:
            raise ValueError("bounds must be 1-D and of equal length")
        if np.any(self.lower >= self.upper):
            raise ValueError("lower bounds must be below upper bounds")
        if self.objective is None and self.batch_objective is None:
            raise ValueError("an objective is required")

    @property
    def dim(self) -> int:
        return self.lower.size

    def to_unit(self, x):
        return (np.asarray(x) - self.lower) / (self.upper - self.lower)

    def from_unit(self, u):
        return self.lower + np.clip(u, 0.0, 1.0) * (self.upper - self.lower)

    def evaluate(self, x) -> np.ndarray:
        x = np.atleast_2d(x)
        if self.batch_objective is not None:
            f = np.asarray(self.batch_objective(x), dtype=float).reshape(-1)
        else:
            f = np.array([self.objective(row) for row in x], dtype=float)
        bad = ~np.isfinite(f)
        if bad.any():
            i = int(np.argmax(bad))
            raise EvaluationError(x[i], f[i])
        return f


@dataclass(frozen=True)
class SolverConfig:
    kind: str = "pso"
    population: int = 200
    max_iter: int = 500
    tol: float = 1e-6
    patience: int = 20
    seed: int = 0
    max_evals: Optional[int] = None
    # particle swarm
    inertia: float = 0.729
    cognitive: float = 1.49445
    social: float = 1.49445
    # genetic algorithm
    crossover: float = 0.9
    mutation: float = 0.1
    tournament: int = 3
    elitism: int = 1
    blend_alpha: float = 0.5
    mutation_scale: float = 0.1
    # simplex
    initial_step: float = 0.1
    xatol: float = 1e-8
    fatol: float = 1e-15

    def __post_init__(self):
        if self.kind not in SOLVER_KINDS:
            raise ValueError(f"solver kind must be one of {SOLVER_KINDS}, got {self.kind!r}")
        if self.population < 2 or self.max_iter < 1 or self.patience < 1:
            raise ValueError("population >= 2, max_iter >= 1 and patience >= 1 required")
        if not self.tol > 0:
            raise ValueError("tolerance must be positive")
        if self.max_evals is not None and self.max_evals < 1:
            raise ValueError("max_evals must be positive")

    @classmethod
    def ga_defaults(cls, **kw) -> "SolverConfig":
        return cls(kind="ga", population=kw.pop("population", 100), **kw)

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class SolveOutcome:
    x: np.ndarray
    fun: float
    evaluations: int
    iterations: int
    reason: str  # "tolerance" or "budget"
    history: list = field(default_factory=list)  # best value after each iteration
    eval_history: list = field(default_factory=list)  # evaluations used after each iteration

    def to_dict(self) -> dict:
        return {"x": self.x.tolist(), "fun": self.fun, "evaluations": self.evaluations,
                "iterations": self.iterations, "reason": self.reason}

    def history_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "evaluations", "best_value"])
            for i, (n, f) in enumerate(zip(self.eval_history, self.history)):
                w.writerow([i, n, repr(float(f))])


def _stalled(history, patience, tol) -> bool:
    if len(history) <= patience:
        return False
    old, new = history[-patience - 1], history[-1]
    return old - new <= tol * abs(old)


def _budget(cfg: SolverConfig, per_iter: int) -> int:
    if cfg.max_evals is not None and cfg.max_evals < cfg.population:
        raise ValueError(f"max_evals ({cfg.max_evals}) is below one generation ({cfg.population})")
    cap = cfg.population + cfg.max_iter * per_iter
    return cap if cfg.max_evals is None else min(cap, cfg.max_evals)


def pso_minimize(problem: BoundedProblem, cfg: SolverConfig = SolverConfig()) -> SolveOutcome:
    """Global-best particle swarm with clamped positions.

    A particle pushed outside the box is clamped to it and its velocity in
    that dimension is zeroed. Stops once the global best has improved by no
    more than ``tol`` (relative) over ``patience`` iterations, or when the
    iteration or evaluation budget runs out.
    """
    rng = np.random.default_rng(cfg.seed)
    n, d = cfg.population, problem.dim
    budget = _budget(cfg, n)
    pos = rng.random((n, d))
    vel = rng.uniform(-0.1, 0.1, (n, d))
    f = problem.evaluate(problem.from_unit(pos))
    evals = n
    pbest, pbest_f = pos.copy(), f.copy()
    g = int(np.argmin(f))
    gbest, gbest_f = pos[g].copy(), float(f[g])
    history, eval_hist = [gbest_f], [evals]
    reason, it = "budget", 0
    while it < cfg.max_iter and evals + n <= budget:
        it += 1
        r1, r2 = rng.random((n, d)), rng.random((n, d))
        vel = cfg.inertia * vel + cfg.cognitive * r1 * (pbest - pos) + cfg.social * r2 * (gbest - pos)
        pos = pos + vel
        out = (pos < 0.0) | (pos > 1.0)
        pos = np.clip(pos, 0.0, 1.0)
        vel[out] = 0.0
        f = problem.evaluate(problem.from_unit(pos))
        evals += n
        better = f < pbest_f
        pbest[better], pbest_f[better] = pos[better], f[better]
        g = int(np.argmin(pbest_f))
        if pbest_f[g] < gbest_f:
            gbest, gbest_f = pbest[g].copy(), float(pbest_f[g])
        history.append(gbest_f)
        eval_hist.append(evals)
        if _stalled(history, cfg.patience, cfg.tol):
            reason = "tolerance"
            break
    return SolveOutcome(problem.from_unit(gbest), gbest_f, evals, it, reason, history, eval_hist)


def ga_minimize(problem: BoundedProblem, cfg: SolverConfig = SolverConfig.ga_defaults()) -> SolveOutcome:
    """Real-coded GA: tournament selection, BLX-alpha crossover, Gaussian
    mutation clipped to the box, and elitism."""
    rng = np.random.default_rng(cfg.seed)
    n, d = cfg.population, problem.dim
    n_elite = min(cfg.elitism, n - 1)
    budget = _budget(cfg, n - n_elite)
    pop = rng.random((n, d))
    fit = problem.evaluate(problem.from_unit(pop))
    evals = n
    history, eval_hist = [float(fit.min())], [evals]
    reason, it = "budget", 0
    while it < cfg.max_iter and evals + n - n_elite <= budget:
        it += 1
        order = np.argsort(fit, kind="stable")
        elite = pop[order[:n_elite]]
        n_child = n - n_elite
        contenders = rng.integers(0, n, (2 * n_child, cfg.tournament))
        winners = contenders[np.arange(2 * n_child), np.argmin(fit[contenders], axis=1)]
        pa, pb = pop[winners[:n_child]], pop[winners[n_child:]]
        lo, hi = np.minimum(pa, pb), np.maximum(pa, pb)
        span = hi - lo
        blend = rng.uniform(lo - cfg.blend_alpha * span, hi + cfg.blend_alpha * span)
        cross = rng.random(n_child) < cfg.crossover
        child = np.where(cross[:, None], blend, pa)
        mut = rng.random((n_child, d)) < cfg.mutation
        child = child + mut * rng.normal(0.0, cfg.mutation_scale, (n_child, d))
        child = np.clip(child, 0.0, 1.0)
        child_fit = problem.evaluate(problem.from_unit(child))
        evals += n_child
        pop = np.vstack([elite, child])
        fit = np.concatenate([fit[order[:n_elite]], child_fit])
        history.append(float(fit.min()))
        eval_hist.append(evals)
        if _stalled(history, cfg.patience, cfg.tol):
            reason = "tolerance"
            break
    b = int(np.argmin(fit))
    return SolveOutcome(problem.from_unit(pop[b]), float(fit[b]), evals, it, reason, history, eval_hist)


def local_minimize(problem: BoundedProblem, start, cfg: SolverConfig = SolverConfig(kind="local")) -> SolveOutcome:
    """Bounded Nelder-Mead descent from ``start``.

    Raises:
        ValueError: if ``start`` lies outside the bounds.
    """
    start = np.atleast_1d(np.asarray(start, dtype=float))
    if start.shape != problem.lower.shape or np.any(start < problem.lower) or np.any(start > problem.upper):
        raise ValueError(f"start point {start.tolist()} outside the bounds")
    d = problem.dim
    u0 = problem.to_unit(start)
    simplex = [u0]
    for k in range(d):
        v = u0.copy()
        v[k] = v[k] + cfg.initial_step if v[k] + cfg.initial_step <= 1.0 else v[k] - cfg.initial_step
        simplex.append(v)
    budget = cfg.max_evals if cfg.max_evals is not None else 200 * d + cfg.max_iter * (d + 2)
    state = {"n": 0, "best": np.inf, "best_u": u0, "hist": [], "evals": []}

    def fun(u):
        if state["n"] >= budget:
            raise BudgetExceeded
        val = float(problem.evaluate(problem.from_unit(u))[0])
        state["n"] += 1
        if val < state["best"]:
            state["best"], state["best_u"] = val, np.clip(np.array(u, dtype=float), 0.0, 1.0)
        return val

    def track(_):
        state["hist"].append(state["best"])
        state["evals"].append(state["n"])

    reason = "budget"
    try:
        res = minimize(fun, u0, method="Nelder-Mead", bounds=[(0.0, 1.0)] * d, callback=track,
                       options={"initial_simplex": np.array(simplex), "xatol": cfg.xatol,
                                "fatol": cfg.fatol, "maxiter": cfg.max_iter, "maxfev": budget})
        if res.status == 0:
            reason = "tolerance"
    except BudgetExceeded:
        pass
    return SolveOutcome(problem.from_unit(state["best_u"]), state["best"], state["n"],
                        len(state["hist"]), reason, state["hist"], state["evals"])


def minimize_bounded(problem: BoundedProblem, cfg: SolverConfig, start=None) -> SolveOutcome:
    """Dispatch on ``cfg.kind``; ``start`` defaults to the box centre for ``local``."""
    if cfg.kind == "pso":
        return pso_minimize(problem, cfg)
    if cfg.kind == "ga":
        return ga_minimize(problem, cfg)
    if start is None:
        start = 0.5 * (problem.lower + problem.upper)
    return local_minimize(problem, start, cfg)
