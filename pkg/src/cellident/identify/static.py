"""Slow-time-scale identification from a quasi-static test.

The quasi-static voltage pins down the initial stoichiometries and active
volume fractions of both electrodes. From those, the usable stoichiometry
window between the voltage limits gives the cell capacity and its
SOC-OCV curve.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import least_squares

from ..model.balance import REFERENCE_STOICH, ConservationLine, OcvRangeError
from ..model.params import FARADAY, CellParameters
from ..model.static import static_voltage
from ..model.trace import VoltageTrace
from ..optimize import BoundedProblem, SolverConfig, SolveOutcome, ga_minimize, pso_minimize
from .objectives import STATIC, segment_cost

STATIC_NAMES = ("stoich_neg_t0", "stoich_pos_t0", "eps_s_neg", "eps_s_pos")
DEFAULT_V_MIN = 2.5
DEFAULT_V_MAX = 4.2
POOR_FIT_PER_SAMPLE = 1e-4  # V^2


class PoorFitWarning(UserWarning):
    pass


class WindowInfeasibleError(ValueError):
    """No stoichiometry pair in (0, 1) reaches the requested voltage."""


@dataclass(frozen=True)
class StaticIdentified:
    stoich_neg_t0: float
    stoich_pos_t0: float
    eps_s_neg: float
    eps_s_pos: float
    residual: float = 0.0
    poor_fit: bool = False
    outcome: SolveOutcome | None = None

    def __post_init__(self):
        for n in STATIC_NAMES:
            v = getattr(self, n)
            if not 0 < v < 1:
                raise ValueError(f"{n} must lie in (0, 1), got {v}")

    def as_dict(self) -> dict:
        return {n: getattr(self, n) for n in STATIC_NAMES}


def identify_quasi_static(measured: VoltageTrace, profile, knowns: CellParameters,
                          solver_cfg: SolverConfig = SolverConfig(),
                          nominal: dict | None = None, bound_frac=(0.8, 1.2),
                          nominal_capacity_mah: float = 2200.0, polish: bool = True) -> StaticIdentified:
    """Fit initial stoichiometries and solid fractions to a low-rate trace.

    Search bounds are ``bound_frac`` times the nominal values, which default
    to the fresh-cell reference state and the solid fractions in ``knowns``.
    The swarm's best point and the nominal point are then each refined by
    bounded least squares and the better result is kept; the population
    search alone stalls in the long, narrow valley of this problem.
    The fit runs on the quasi-static model; a residual above
    ``1e-4 V^2`` per sample is flagged with a :class:`PoorFitWarning`.
    """
    currents = np.asarray(profile.samples, dtype=float)
    if np.abs(currents).max() > 0.02 * nominal_capacity_mah / 1000.0 * (1 + 1e-9):
        raise ValueError("identify_quasi_static expects a low-rate profile (<= 0.02 C)")
    nominal = nominal or {
        "stoich_neg_t0": REFERENCE_STOICH[0], "stoich_pos_t0": REFERENCE_STOICH[1],
        "eps_s_neg": knowns.composition.eps_s_neg, "eps_s_pos": knowns.composition.eps_s_pos,
    }
    nom = np.array([nominal[n] for n in STATIC_NAMES])
    lower = np.clip(bound_frac[0] * nom, 1e-6, 1 - 1e-6)
    upper = np.clip(bound_frac[1] * nom, 1e-6, 1 - 1e-6)
    v_meas = measured.voltage

    def batch(x):
        v = static_voltage(currents, profile.dt, knowns, x[:, 0], x[:, 1], x[:, 2], x[:, 3])
        return segment_cost(v_meas, v, None, STATIC)

    problem = BoundedProblem(lower, upper, batch_objective=batch, names=STATIC_NAMES)
    solve = ga_minimize if solver_cfg.kind == "ga" else pso_minimize
    out = solve(problem, solver_cfg)
    if polish:
        out = _polish(out, problem, currents, profile.dt, knowns, v_meas, np.clip(nom, lower, upper))
    poor = out.fun > POOR_FIT_PER_SAMPLE * len(v_meas)
    if poor:
        warnings.warn(f"quasi-static fit residual {out.fun:.3g} V^2 above threshold", PoorFitWarning)
    return StaticIdentified(*map(float, out.x), residual=float(out.fun), poor_fit=bool(poor), outcome=out)


def _polish(out: SolveOutcome, problem: BoundedProblem, currents, dt, knowns, v_meas, nominal) -> SolveOutcome:
    def resid(z):
        return static_voltage(currents, dt, knowns, *z) - v_meas

    best_x, best_f, nfev = out.x, out.fun, 0
    for x0 in (out.x, nominal):
        res = least_squares(resid, x0, bounds=(problem.lower, problem.upper), x_scale=np.abs(x0) + 1e-12,
                            xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=200)
        nfev += res.nfev
        f = float(res.fun @ res.fun)
        if f < best_f:
            best_x, best_f = np.clip(res.x, problem.lower, problem.upper), f
    return replace(out, x=best_x, fun=best_f, evaluations=out.evaluations + nfev)


@dataclass(frozen=True)
class StoichLimits:
    stoich_neg_min: float
    stoich_neg_max: float
    stoich_pos_min: float
    stoich_pos_max: float
    gamma: float
    eps_s_neg: float
    eps_s_pos: float

    def __post_init__(self):
        if not (self.stoich_neg_min < self.stoich_neg_max and self.stoich_pos_min < self.stoich_pos_max):
            raise ValueError("stoichiometry limits must satisfy min < max")


def solve_stoich_limits(static_id: StaticIdentified, params: CellParameters,
                        v_min: float = DEFAULT_V_MIN, v_max: float = DEFAULT_V_MAX,
                        stoich_tol: float = 1e-12) -> StoichLimits:
    """Stoichiometries at the discharge (``v_min``) and charge (``v_max``) ends.

    Both ends lie on the lithium-conservation line through the identified
    initial state; each is found by bisection along that line.
    """
    if not v_min < v_max:
        raise ValueError("v_min must be below v_max")
    line = ConservationLine.through(params, static_id.stoich_neg_t0, static_id.stoich_pos_t0,
                                    static_id.eps_s_neg, static_id.eps_s_pos)
    try:
        s_low = line.solve(v_min, stoich_tol)
        s_high = line.solve(v_max, stoich_tol)
    except OcvRangeError as exc:
        raise WindowInfeasibleError(str(exc)) from exc
    xn_min, xp_max = line.point(s_low)
    xn_max, xp_min = line.point(s_high)
    return StoichLimits(float(xn_min), float(xn_max), float(xp_min), float(xp_max),
                        line.gamma, static_id.eps_s_neg, static_id.eps_s_pos)


@dataclass(frozen=True)
class MacroCharacteristics:
    """Capacity (mAh) and the SOC-OCV relation between the voltage limits.

    SOC is measured on the negative-electrode stoichiometry window.
    """

    capacity: float
    limits: StoichLimits
    params: CellParameters
    v_min: float
    v_max: float
    n_points: int = 201

    def stoich_at(self, soc):
        lim = self.limits
        soc = np.asarray(soc, dtype=float)
        xn = lim.stoich_neg_min + soc * (lim.stoich_neg_max - lim.stoich_neg_min)
        xp = lim.stoich_pos_max - soc * (lim.stoich_pos_max - lim.stoich_pos_min)
        return xn, xp

    def ocv_curve(self, soc):
        xn, xp = self.stoich_at(soc)
        m = self.params.materials
        return m.ocp_pos(xp) - m.ocp_neg(xn)

    def soc_of(self, stoich_neg):
        lim = self.limits
        return (np.asarray(stoich_neg) - lim.stoich_neg_min) / (lim.stoich_neg_max - lim.stoich_neg_min)

    @property
    def soc(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n_points)

    @property
    def ocv(self) -> np.ndarray:
        return self.ocv_curve(self.soc)

    def to_dict(self) -> dict:
        lim = self.limits
        return {
            "capacity_mAh": self.capacity,
            "v_min": self.v_min,
            "v_max": self.v_max,
            "limits": {
                "stoich_neg_min": lim.stoich_neg_min, "stoich_neg_max": lim.stoich_neg_max,
                "stoich_pos_min": lim.stoich_pos_min, "stoich_pos_max": lim.stoich_pos_max,
                "gamma": lim.gamma,
            },
            "ocv_curve": {"soc": self.soc.tolist(), "ocv_V": self.ocv.tolist()},
        }


def derive_macro(limits: StoichLimits, params: CellParameters, v_min: float = DEFAULT_V_MIN,
                 v_max: float = DEFAULT_V_MAX, n_points: int = 201) -> MacroCharacteristics:
    """Capacity from the negative-electrode window and the SOC-OCV curve."""
    g, m = params.geometry, params.materials
    coulombs = ((limits.stoich_neg_max - limits.stoich_neg_min) * m.cs_max_neg
                * limits.eps_s_neg * g.area_neg * g.thick_neg * FARADAY)
    macro = MacroCharacteristics(coulombs / 3.6, limits, params, v_min, v_max, n_points)
    if np.any(np.diff(macro.ocv) <= 0):
        warnings.warn("derived OCV curve is not strictly increasing", RuntimeWarning)
    return macro
