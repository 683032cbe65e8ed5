"""Sobol total-effect sensitivity of the transport parameters.

Each parameter's total-effect index is estimated on every one of the
twelve pulse-response segments, giving an 8 x 12 matrix. Parameters whose
largest index stays under a threshold are dropped; the rest are assigned
to the instantaneous or the transient regime by their regime means.
"""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .identify.objectives import segment_cost
from .model.params import TRANSPORT_NAMES, TRANSPORT_SYMBOLS, CellParameters
from .model.spme import OK, init_state, simulate_batch
from .profiles import PulseSet

MAX_SOBOL_DIM = 16
DROP_THRESHOLD = 0.01
MAX_FAILED_FRACTION = 0.01

# sampling ranges of the transport vector, in TRANSPORT_NAMES order
DEFAULT_LOWER = (0.0, 6.6, 0.2, 0.1, 0.1, 0.1, 0.1, 0.2)
DEFAULT_UPPER = (0.05, 100.0, 3.0, 1.5, 1.5, 1.5, 1.5, 0.45)


class DegenerateObjectiveError(ValueError):
    """Objective has zero variance over the sample."""


class ReliabilityError(RuntimeError):
    """Too many sample rows failed to simulate."""


def sobol_points(dim: int, n: int) -> np.ndarray:
    """First ``n`` points of the unscrambled Sobol sequence, origin skipped.

    Uses the Joe-Kuo direction numbers shipped with SciPy; dimensions are
    capped at :data:`MAX_SOBOL_DIM`.
    """
    if not 1 <= dim <= MAX_SOBOL_DIM:
        raise ValueError(f"Sobol dimension must be in [1, {MAX_SOBOL_DIM}], got {dim}")
    if n < 1:
        raise ValueError("n must be >= 1")
    eng = qmc.Sobol(dim, scramble=False)
    eng.fast_forward(1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)  # balance warning for non-powers of two
        return eng.random(n)


@dataclass(frozen=True)
class ParamSpace:
    names: tuple[str, ...] = TRANSPORT_NAMES
    lower: tuple[float, ...] = DEFAULT_LOWER
    upper: tuple[float, ...] = DEFAULT_UPPER

    def __post_init__(self):
        lo, hi = np.asarray(self.lower, float), np.asarray(self.upper, float)
        if not (len(self.names) == lo.size == hi.size):
            raise ValueError("names and bounds must have equal length")
        if np.any(lo >= hi):
            raise ValueError("lower bounds must be below upper bounds")

    @property
    def dim(self) -> int:
        return len(self.names)

    def scale(self, unit) -> np.ndarray:
        lo, hi = np.asarray(self.lower), np.asarray(self.upper)
        return lo + np.asarray(unit) * (hi - lo)

    def index(self, name: str) -> int:
        return self.names.index(name)

    def midpoint(self, name: str) -> float:
        k = self.index(name)
        return 0.5 * (self.lower[k] + self.upper[k])


@dataclass(frozen=True, eq=False)
class SampleMatrices:
    """``xi`` is 2M x p; ``radial(k)`` is the first half with column ``k``
    taken from the second half."""

    xi: np.ndarray

    @property
    def m(self) -> int:
        return self.xi.shape[0] // 2

    def radial(self, k: int) -> np.ndarray:
        out = self.xi[: self.m].copy()
        out[:, k] = self.xi[self.m:, k]
        return out

    def stacked(self) -> np.ndarray:
        """All 2M + p*M evaluation rows: ``xi`` then each radial matrix."""
        return np.vstack([self.xi] + [self.radial(k) for k in range(self.xi.shape[1])])


def build_matrices(space: ParamSpace, m: int) -> SampleMatrices:
    """Quasi-random base sample of 2M rows scaled to ``space``.

    The two halves come from disjoint coordinate blocks of one 2p-dimensional
    sequence so they are independent of each other.
    """
    if m < 2:
        raise ValueError("M must be >= 2")
    u = sobol_points(2 * space.dim, m)
    xi = np.vstack([u[:, : space.dim], u[:, space.dim:]])
    return SampleMatrices(space.scale(xi))


def total_effect_from_values(f_base, f_radial) -> np.ndarray:
    """Total-effect indices from evaluated objectives.

    Args:
        f_base: (2M,) objective on ``xi``.
        f_radial: (p, M) objective on each radial matrix.

    Non-finite values are excluded pairwise.
    """
    f_base = np.asarray(f_base, dtype=float)
    f_radial = np.atleast_2d(np.asarray(f_radial, dtype=float))
    m = f_radial.shape[1]
    ok = np.isfinite(f_base)
    if ok.sum() < 2:
        raise DegenerateObjectiveError("fewer than two finite objective values")
    var = np.var(f_base[ok], ddof=1)
    if not var > 0:
        raise DegenerateObjectiveError("objective is constant over the sample")
    out = np.empty(f_radial.shape[0])
    for k, fk in enumerate(f_radial):
        pair = ok[:m] & np.isfinite(fk)
        d = f_base[:m][pair] - fk[pair]
        out[k] = (d @ d) / (2.0 * pair.sum()) / var
    return out


def total_effect(objective, mats: SampleMatrices) -> np.ndarray:
    """Total-effect index of each column for a scalar ``objective(theta)``."""
    f_base = np.array([objective(x) for x in mats.xi], dtype=float)
    f_rad = np.array([[objective(x) for x in mats.radial(k)] for k in range(mats.xi.shape[1])])
    return total_effect_from_values(f_base, f_rad)


@dataclass
class SensitivityMatrix:
    s: np.ndarray  # (p, 12)
    names: tuple[str, ...]
    segments: tuple[str, ...]
    m: int = 0
    failed_rows: int = 0
    total_rows: int = 0

    def regime_means(self) -> dict:
        """Mean index per regime: columns 0-3 (I), 4-7 (E), 8-11 (R)."""
        n = self.s.shape[1] // 3
        return {mode: self.s[:, i * n:(i + 1) * n].mean(axis=1) for i, mode in enumerate("IER")}

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["parameter"] + list(self.segments))
            for name, row in zip(self.names, self.s):
                w.writerow([name] + [f"{v:.6g}" for v in row])

    @classmethod
    def from_csv(cls, path) -> "SensitivityMatrix":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        return cls(np.array([[float(v) for v in r[1:]] for r in rows[1:]]),
                   tuple(r[0] for r in rows[1:]), tuple(rows[0][1:]))

    def to_dict(self) -> dict:
        return {
            "parameters": list(self.names),
            "segments": list(self.segments),
            "matrix": self.s.tolist(),
            "regime_means": {k: v.tolist() for k, v in self.regime_means().items()},
            "M": self.m,
            "failed_rows": self.failed_rows,
            "total_rows": self.total_rows,
        }


def segment_objectives(pulse_set: PulseSet, voltages, measured) -> np.ndarray:
    """(B, 12) segment objectives from per-pulse predicted voltages (B, n_i)."""
    cols = [None] * 12
    for seg in pulse_set.segments:
        cols[seg.number - 1] = segment_cost(measured[seg.pulse], voltages[seg.pulse],
                                            pulse_set.cuts[seg.pulse], seg.mode)
    return np.column_stack(cols)


def simulate_pulse_set(pulse_set: PulseSet, params: CellParameters, theta, chunk: int = 2000):
    """Simulate every pulse for each transport row; returns (list of (B, n_i), ok mask)."""
    theta = np.atleast_2d(theta)
    init = init_state(params, *pulse_set.start)
    volts = [np.empty((theta.shape[0], len(p))) for p in pulse_set.profiles]
    ok = np.ones(theta.shape[0], dtype=bool)
    for lo in range(0, theta.shape[0], chunk):
        rows = slice(lo, lo + chunk)
        for i, p in enumerate(pulse_set.profiles):
            res = simulate_batch(p.samples, p.dt, params, theta[rows], init)
            volts[i][rows] = res.voltage
            ok[rows] &= res.status == OK
    return volts, ok


def build_sensitivity_matrix(pulse_set: PulseSet, space: ParamSpace, params_known: CellParameters,
                             m: int = 1000, measured=None) -> SensitivityMatrix:
    """Total-effect indices of every parameter on every segment objective.

    ``measured`` holds one voltage array per pulse; by default the responses
    at ``params_known.transport`` are used. One simulation per sample row
    feeds all twelve objectives.

    Raises:
        ReliabilityError: if more than 1% of the sample rows fail.
    """
    if tuple(space.names) != TRANSPORT_NAMES:
        raise ValueError("parameter space must follow the transport vector order")
    mats = build_matrices(space, m)
    if measured is None:
        ref, ok = simulate_pulse_set(pulse_set, params_known, params_known.transport.as_vector())
        if not ok[0]:
            raise RuntimeError("reference simulation failed")
        measured = [v[0] for v in ref]
    rows = mats.stacked()
    volts, ok = simulate_pulse_set(pulse_set, params_known, rows)
    failed = int((~ok).sum())
    if failed > MAX_FAILED_FRACTION * rows.shape[0]:
        raise ReliabilityError(f"{failed} of {rows.shape[0]} sample rows failed to simulate")
    f = segment_objectives(pulse_set, volts, measured)
    f[~ok] = np.nan
    p = space.dim
    f_base, f_rad = f[: 2 * m], f[2 * m:].reshape(p, m, -1)
    s = np.column_stack([total_effect_from_values(f_base[:, j], f_rad[:, :, j]) for j in range(f.shape[1])])
    return SensitivityMatrix(
        s=s, names=tuple(TRANSPORT_SYMBOLS[n] for n in space.names),
        segments=tuple(seg.label for seg in pulse_set.segments),
        m=m, failed_rows=failed, total_rows=rows.shape[0],
    )


@dataclass
class Assignment:
    set_instant: list = field(default_factory=list)
    set_transient: list = field(default_factory=list)
    dropped: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"instant": self.set_instant, "transient": self.set_transient, "dropped": self.dropped}


def assign(sens: SensitivityMatrix, threshold: float = DROP_THRESHOLD) -> Assignment:
    """Drop weak parameters and split the rest by their strongest regime.

    Negative Monte Carlo estimates are clamped to zero here only.
    """
    s = np.clip(sens.s, 0.0, None)
    n = s.shape[1] // 3
    means = np.column_stack([s[:, i * n:(i + 1) * n].mean(axis=1) for i in range(3)])
    out = Assignment()
    for name, row, mean in zip(sens.names, s, means):
        if row.max() < threshold:
            out.dropped.append(name)
        elif np.argmax(mean) == 0:
            out.set_instant.append(name)
        else:
            out.set_transient.append(name)
    return out


def heatmap_svg(sens: SensitivityMatrix, path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "cellident"
    fig, ax = plt.subplots(figsize=(9, 4.2))
    im = ax.imshow(sens.s, cmap="viridis", vmin=0.0, vmax=max(1.0, float(np.nanmax(sens.s))), aspect="auto")
    ax.set_xticks(range(len(sens.segments)), sens.segments, rotation=45, ha="right")
    ax.set_yticks(range(len(sens.names)), sens.names)
    for (i, j), v in np.ndenumerate(sens.s):
        ax.text(j, i, f"{v:.2f}", ha="center", va="center", fontsize=7,
                color="white" if v < 0.5 else "black")
    fig.colorbar(im, ax=ax, label="total-effect index")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
