"""Sensitivity-oriented stepwise identification of the transport parameters.

Each retained parameter is first estimated alone on the pulse segment where
it is most sensitive. The parameters of one regime are then refined jointly,
inside a narrow box around those estimates, on the segment where their
sensitivities are most alike. The instantaneous set is finished before the
transient set starts, and the transient steps hold it fixed.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace

import numpy as np

from ..model.params import TRANSPORT_NAMES, TRANSPORT_SYMBOLS, CellParameters
from ..model.spme import OK, init_state, simulate_batch
from ..model.trace import VoltageTrace
from ..optimize import BoundedProblem, EvaluationError, SolveOutcome, SolverConfig, minimize_bounded
from ..profiles import PulseSet
from .objectives import STATIC, segment_cost

PRELIMINARY = "preliminary"
JOINT = "joint"
INSTANT_POOL = (1, 2, 3, 4)
TRANSIENT_POOL = tuple(range(5, 13))
JOINT_BOUND = 0.05

_BY_SYMBOL = {v: k for k, v in TRANSPORT_SYMBOLS.items()}


class EmptyScheduleError(ValueError):
    pass


class SsoStepError(RuntimeError):
    """A step failed; ``partial`` holds the values estimated so far."""

    def __init__(self, step, cause, partial):
        super().__init__(f"step {step.describe()} failed: {cause}")
        self.step = step
        self.partial = dict(partial)


def _name(p: str) -> str:
    return _BY_SYMBOL.get(p, p)


def segment_mode(number: int) -> str:
    """Objective mode of segment ``number`` (1-based, twelve segments)."""
    if not 1 <= number <= 12:
        raise ValueError(f"segment number must be 1..12, got {number}")
    return "IER"[(number - 1) // 4]


@dataclass(frozen=True)
class SsoStep:
    kind: str
    params: tuple[str, ...]  # transport field names
    segment: int  # 1..12
    mode: str
    solver: str
    regime: str  # "I" or "T"

    def describe(self) -> str:
        syms = ",".join(TRANSPORT_SYMBOLS.get(p, p) for p in self.params)
        return f"{self.kind}[{syms}]@zeta{self.segment}-{self.mode}"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": list(self.params), "segment": self.segment,
                "mode": self.mode, "solver": self.solver, "regime": self.regime}


@dataclass(frozen=True)
class SsoSchedule:
    steps: tuple[SsoStep, ...]

    def __post_init__(self):
        if not self.steps:
            raise EmptyScheduleError("schedule has no steps")
        seen_pre, seen_joint = set(), set()
        for s in self.steps:
            target = seen_pre if s.kind == PRELIMINARY else seen_joint
            for p in s.params:
                if p in target:
                    raise ValueError(f"{p} appears in more than one {s.kind} step")
                if s.kind == JOINT and p not in seen_pre:
                    raise ValueError(f"joint step for {p} precedes its preliminary step")
                target.add(p)
        if seen_pre != seen_joint:
            raise ValueError("every parameter needs one preliminary and one joint step")
        regimes = [s.regime for s in self.steps]
        if "T" in regimes and "I" in regimes[regimes.index("T"):]:
            raise ValueError("instantaneous steps must precede transient steps")

    @property
    def parameters(self) -> tuple[str, ...]:
        return tuple(p for s in self.steps if s.kind == PRELIMINARY for p in s.params)

    def __len__(self) -> int:
        return len(self.steps)

    def to_list(self) -> list:
        return [s.to_dict() for s in self.steps]


def _regime_steps(s, rows, names, pool, regime, prelim_solver, joint_solver):
    if not names:
        return []
    cols = np.asarray(pool) - 1
    sub = s[np.ix_(rows, cols)]
    order = np.argsort(-sub.mean(axis=1), kind="stable")
    steps = []
    for i in order:
        seg = int(pool[int(np.argmax(sub[i]))])
        steps.append(SsoStep(PRELIMINARY, (names[i],), seg, segment_mode(seg), prelim_solver, regime))
    spread = sub.max(axis=0) - sub.min(axis=0)
    # ties (always the case for one parameter) go to the most sensitive segment
    best = np.flatnonzero(spread <= spread.min() + 1e-12)
    seg = int(pool[best[np.argmax(sub[:, best].mean(axis=0))]])
    steps.append(SsoStep(JOINT, tuple(names[i] for i in order), seg, segment_mode(seg), joint_solver, regime))
    return steps


def build_sso_schedule(sens, assignment, prelim_solver: str = "local", joint_solver: str = "pso") -> SsoSchedule:
    """Order the identification steps from a sensitivity matrix.

    Within each regime, parameters are taken in decreasing order of their
    mean index over the regime's segment pool (segments 1-4 for the
    instantaneous set, 5-12 for the transient set). Each gets a preliminary
    step on its most sensitive segment in that pool, then the set gets one
    joint step on the segment with the smallest max-min index spread.

    Raises:
        EmptyScheduleError: if both sets are empty.
    """
    s = np.clip(np.asarray(sens.s, dtype=float), 0.0, None)
    if s.shape[1] != 12:
        raise ValueError("sensitivity matrix must have twelve segment columns")
    labels = list(sens.names)
    sets = []
    for members, pool, regime in ((assignment.set_instant, INSTANT_POOL, "I"),
                                  (assignment.set_transient, TRANSIENT_POOL, "T")):
        rows = [labels.index(p) for p in members]
        sets.append(_regime_steps(s, rows, [_name(p) for p in members], pool, regime,
                                  prelim_solver, joint_solver))
    steps = tuple(sets[0] + sets[1])
    if not steps:
        raise EmptyScheduleError("no parameters left to identify after dropping")
    return SsoSchedule(steps)


def _default_joint_solver() -> SolverConfig:
    return SolverConfig(kind="pso", population=40, max_iter=200, tol=1e-6, patience=15)


def _default_prelim_solver() -> SolverConfig:
    return SolverConfig(kind="local", max_iter=200, xatol=1e-6, initial_step=0.25)


@dataclass(frozen=True)
class SsoConfig:
    """Settings of one identification run.

    ``empirical`` fixes the dropped parameters (transport field names); any
    dropped parameter not listed is set to the midpoint of its range.
    ``draws`` preliminary runs with fresh random values for the unknown
    parameters are averaged. With ``passes > 1`` the schedule is executed
    again, each later pass starting from the previous pass's results instead
    of random values.
    """

    seed: int = 0
    draws: int = 1
    passes: int = 1
    prelim_solver: SolverConfig = field(default_factory=_default_prelim_solver)
    joint_solver: SolverConfig = field(default_factory=_default_joint_solver)
    joint_bound: float = JOINT_BOUND
    empirical: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.draws < 1 or self.passes < 1:
            raise ValueError("draws and passes must be >= 1")
        if not 0 < self.joint_bound < 1:
            raise ValueError("joint_bound must lie in (0, 1)")

    def solver_for(self, step: SsoStep) -> SolverConfig:
        base = self.prelim_solver if step.kind == PRELIMINARY else self.joint_solver
        return base if base.kind == step.solver else replace(base, kind=step.solver)

    def to_dict(self) -> dict:
        return {"seed": self.seed, "draws": self.draws, "passes": self.passes,
                "joint_bound": self.joint_bound,
                "prelim_solver": self.prelim_solver.to_dict(), "joint_solver": self.joint_solver.to_dict(),
                "empirical": dict(self.empirical)}


@dataclass
class StepRecord:
    step: SsoStep
    x: dict
    fun: float
    evaluations: int
    simulations: int
    lower: dict
    upper: dict
    wall_time: float
    reason: str
    history: list = field(default_factory=list)
    eval_history: list = field(default_factory=list)
    pass_no: int = 0

    def to_dict(self) -> dict:
        return {**self.step.to_dict(), "pass": self.pass_no, "x": self.x, "fun": self.fun,
                "evaluations": self.evaluations,
                "simulations": self.simulations, "lower": self.lower, "upper": self.upper,
                "reason": self.reason}


@dataclass
class IdentificationResult:
    """Outcome of :func:`sso_identify`.

    ``values`` is the full transport vector used for prediction; identified
    parameters are the schedule's, the rest are fixed values. ``truth`` and
    ``relative_errors`` are filled in twin mode only.
    """

    values: dict
    identified: tuple[str, ...]
    fixed: dict
    steps: list
    segment_objectives: dict
    evaluations: int
    simulations: int
    wall_time: float
    seed: int
    truth: dict | None = None
    relative_errors: dict | None = None

    @property
    def transport_vector(self) -> np.ndarray:
        return np.array([self.values[n] for n in TRANSPORT_NAMES])

    def with_truth(self, truth: dict) -> "IdentificationResult":
        errs = {n: abs(self.values[n] - truth[n]) / abs(truth[n]) for n in self.identified}
        return replace(self, truth={n: truth[n] for n in TRANSPORT_NAMES}, relative_errors=errs)

    def to_dict(self, timings: bool = False) -> dict:
        """JSON-ready record; wall-clock times only with ``timings=True``."""
        out = {
            "values": self.values,
            "identified": list(self.identified),
            "fixed": self.fixed,
            "schedule": [r.to_dict() for r in self.steps],
            "segment_objectives": self.segment_objectives,
            "evaluations": self.evaluations,
            "simulations": self.simulations,
            "seed": self.seed,
        }
        if self.truth is not None:
            out["truth"] = self.truth
            out["relative_errors"] = self.relative_errors
            out["mae_paper"] = self.relative_errors
        if timings:
            out["wall_time"] = self.wall_time
            out["step_wall_time"] = [r.wall_time for r in self.steps]
        return out

    def to_json(self, timings: bool = False) -> str:
        return json.dumps(self.to_dict(timings), indent=2, sort_keys=True)


def _measured_arrays(measured) -> list:
    return [m.voltage if isinstance(m, VoltageTrace) else np.asarray(m, dtype=float) for m in measured]


class _PulseEvaluator:
    """Counts and runs pulse simulations for batches of transport vectors."""

    def __init__(self, pulse_set: PulseSet, measured, params: CellParameters):
        self.pulse_set = pulse_set
        self.measured = _measured_arrays(measured)
        if len(self.measured) != len(pulse_set.profiles):
            raise ValueError("one measured trace per pulse profile required")
        for m, p in zip(self.measured, pulse_set.profiles):
            if m.size != len(p):
                raise ValueError("measured trace length does not match its profile")
        self.params = params
        self.init = init_state(params, *pulse_set.start)
        self.simulations = 0

    def voltage(self, pulse: int, theta) -> np.ndarray:
        p = self.pulse_set.profiles[pulse]
        theta = np.atleast_2d(theta)
        res = simulate_batch(p.samples, p.dt, self.params, theta, self.init)
        self.simulations += theta.shape[0]
        v = res.voltage.copy()
        v[res.status != OK] = np.nan
        return v

    def segment_values(self, segment: int, theta) -> np.ndarray:
        seg = self.pulse_set.segments[segment - 1]
        v = self.voltage(seg.pulse, theta)
        return segment_cost(self.measured[seg.pulse], v, self.pulse_set.cuts[seg.pulse], seg.mode)

    def all_segments(self, theta) -> dict:
        theta = np.atleast_2d(theta)
        out = {}
        volts = [self.voltage(i, theta)[0] for i in range(len(self.measured))]
        for seg in self.pulse_set.segments:
            out[seg.label] = float(segment_cost(self.measured[seg.pulse], volts[seg.pulse],
                                                self.pulse_set.cuts[seg.pulse], seg.mode))
        return out

    def total_sse(self, theta) -> np.ndarray:
        theta = np.atleast_2d(theta)
        tot = np.zeros(theta.shape[0])
        for i, m in enumerate(self.measured):
            tot += segment_cost(m, self.voltage(i, theta), None, STATIC)
        return tot

    @property
    def n_samples(self) -> int:
        return sum(m.size for m in self.measured)


def _fixed_values(space, identified, knowns: CellParameters, cfg: SsoConfig) -> dict:
    """Values for every transport field not being identified."""
    out = {}
    for n in TRANSPORT_NAMES:
        if n in identified:
            continue
        if n in cfg.empirical:
            out[n] = float(cfg.empirical[n])
        elif n in space.names:
            out[n] = float(space.midpoint(n))
        else:
            out[n] = float(getattr(knowns.transport, n))
    return out


def _run_step(step, evaluator, base, lower, upper, solver, start):
    idx = [TRANSPORT_NAMES.index(p) for p in step.params]

    def batch(x):
        theta = np.tile(base, (x.shape[0], 1))
        theta[:, idx] = x
        return evaluator.segment_values(step.segment, theta)

    problem = BoundedProblem(lower, upper, batch_objective=batch, names=step.params)
    return minimize_bounded(problem, solver, start=start)


def sso_identify(pulse_set: PulseSet, measured, schedule: SsoSchedule, space, knowns: CellParameters,
                 cfg: SsoConfig = SsoConfig(), truth: dict | None = None) -> IdentificationResult:
    """Execute ``schedule`` against measured pulse responses.

    Preliminary steps search the full range of ``space`` for one parameter;
    parameters without an estimate yet take seeded uniform draws from
    ``space``. Joint steps search ``[1 - b, 1 + b]`` times the preliminary
    estimates, ``b = cfg.joint_bound``, intersected with the range of ``space``.

    Raises:
        SsoStepError: if a step's solver fails; the error carries the
            values estimated up to that point.
    """
    t_start = time.perf_counter()
    evaluator = _PulseEvaluator(pulse_set, measured, knowns)
    rng = np.random.default_rng(cfg.seed)
    identified = schedule.parameters
    fixed = _fixed_values(space, identified, knowns, cfg)
    prelim, final = {}, {}
    records, evals = [], 0
    lo_space = dict(zip(space.names, space.lower))
    hi_space = dict(zip(space.names, space.upper))

    plan = [(i, step) for i in range(cfg.passes) for step in schedule.steps]
    for k, (pass_no, step) in enumerate(plan):
        t0 = time.perf_counter()
        sims0 = evaluator.simulations
        solver = replace(cfg.solver_for(step), seed=cfg.seed + k)
        try:
            if step.kind == PRELIMINARY:
                (p,) = step.params
                lower, upper = np.array([lo_space[p]]), np.array([hi_space[p]])
                start = 0.5 * (lower + upper)
                xs, outs = [], []
                for _ in range(cfg.draws):
                    base = _base_vector(fixed, final, prelim, space, rng)
                    out = _run_step(step, evaluator, base, lower, upper, solver, start)
                    xs.append(out.x)
                    outs.append(out)
                x = np.mean(xs, axis=0)
                prelim[p] = float(x[0])
                out = _merge(outs, x)
            else:
                est = np.array([prelim[p] for p in step.params])
                lower, upper = (1 - cfg.joint_bound) * est, (1 + cfg.joint_bound) * est
                # an estimate on a zero bound gets a box of the same relative size of its range
                for j, p in enumerate(step.params):
                    if est[j] == 0.0:
                        upper[j] = cfg.joint_bound * (hi_space[p] - lo_space[p])
                    # the box never leaves the sampling range
                    lower[j], upper[j] = max(lower[j], lo_space[p]), min(upper[j], hi_space[p])
                base = _base_vector(fixed, final, prelim, space, rng)
                out = _run_step(step, evaluator, base, lower, upper, solver, est)
                for p, v in zip(step.params, out.x):
                    final[p] = float(v)
        except EvaluationError as exc:
            raise SsoStepError(step, exc, {**prelim, **final}) from exc
        evals += out.evaluations
        records.append(StepRecord(
            step, dict(zip(step.params, map(float, out.x))), float(out.fun), out.evaluations,
            evaluator.simulations - sims0, dict(zip(step.params, map(float, lower))),
            dict(zip(step.params, map(float, upper))), time.perf_counter() - t0, out.reason,
            list(out.history), list(out.eval_history), pass_no))

    values = {**fixed, **{p: final.get(p, prelim.get(p)) for p in identified}}
    theta = np.array([values[n] for n in TRANSPORT_NAMES])
    n_sims = evaluator.simulations
    segs = evaluator.all_segments(theta)
    result = IdentificationResult(values, identified, fixed, records, segs, evals, n_sims,
                                  time.perf_counter() - t_start, cfg.seed)
    return result.with_truth(truth) if truth is not None else result


def _base_vector(fixed, final, prelim, space, rng) -> np.ndarray:
    theta = np.empty(len(TRANSPORT_NAMES))
    for i, n in enumerate(TRANSPORT_NAMES):
        if n in final:
            theta[i] = final[n]
        elif n in prelim:
            theta[i] = prelim[n]
        elif n in fixed:
            theta[i] = fixed[n]
        else:
            k = space.index(n)
            theta[i] = rng.uniform(space.lower[k], space.upper[k])
    return theta


def _merge(outs, x) -> SolveOutcome:
    if len(outs) == 1:
        return outs[0]
    return SolveOutcome(x, float(np.mean([o.fun for o in outs])), sum(o.evaluations for o in outs),
                        sum(o.iterations for o in outs), outs[-1].reason)


def pulse_rmse(pulse_set: PulseSet, measured, params: CellParameters, values: dict) -> list:
    """Voltage RMSE (V) of each pulse at the transport values ``values``."""
    ev = _PulseEvaluator(pulse_set, measured, params)
    theta = np.array([[values[n] for n in TRANSPORT_NAMES]])
    return [float(np.sqrt(segment_cost(m, ev.voltage(i, theta), None, STATIC)[0] / m.size))
            for i, m in enumerate(ev.measured)]


@dataclass
class BaselineOutcome:
    outcome: SolveOutcome
    names: tuple[str, ...]
    simulations: int
    n_samples: int

    @property
    def rmse_history(self) -> np.ndarray:
        return np.sqrt(np.asarray(self.outcome.history) / self.n_samples)

    def evaluations_to_reach(self, rmse: float) -> int | None:
        """Objective evaluations spent when the best RMSE first fell to ``rmse``."""
        hit = np.flatnonzero(self.rmse_history <= rmse)
        return int(self.outcome.eval_history[hit[0]]) if hit.size else None


def baseline_joint_pso(pulse_set: PulseSet, measured, names, space, knowns: CellParameters,
                       solver: SolverConfig, fixed: dict | None = None) -> BaselineOutcome:
    """Single-stage reference: all ``names`` at once over their full ranges,
    minimising the whole-trace squared error summed over every pulse."""
    names = tuple(_name(n) for n in names)
    ev = _PulseEvaluator(pulse_set, measured, knowns)
    fixed = fixed or {}
    base = np.array([fixed.get(n, space.midpoint(n) if n in space.names else getattr(knowns.transport, n))
                     for n in TRANSPORT_NAMES])
    idx = [TRANSPORT_NAMES.index(n) for n in names]

    def batch(x):
        theta = np.tile(base, (x.shape[0], 1))
        theta[:, idx] = x
        return ev.total_sse(theta)

    lo = np.array([space.lower[space.index(n)] for n in names])
    hi = np.array([space.upper[space.index(n)] for n in names])
    out = minimize_bounded(BoundedProblem(lo, hi, batch_objective=batch, names=names), solver)
    return BaselineOutcome(out, names, ev.simulations, ev.n_samples)
