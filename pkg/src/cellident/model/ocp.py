"""Tabulated half-cell open-circuit potential curves."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.interpolate import PchipInterpolator

MIN_NODES = 20


class OcpDomainError(ValueError):
    """Stoichiometry outside [0, 1]."""


@dataclass(frozen=True, eq=False)
class OcpCurve:
    """Equilibrium potential of one electrode versus lithium stoichiometry.

    Interpolation is shape-preserving piecewise-cubic (PCHIP), so it is exact
    at the nodes, continuous, and never overshoots between them.
    """

    stoich: np.ndarray
    potential: np.ndarray
    name: str = ""
    _interp: PchipInterpolator = field(init=False, repr=False)

    def __post_init__(self):
        x = np.asarray(self.stoich, dtype=float)
        u = np.asarray(self.potential, dtype=float)
        if x.ndim != 1 or x.shape != u.shape:
            raise ValueError("stoichiometry and potential must be 1-D and equal length")
        if x.size < MIN_NODES:
            raise ValueError(f"OCP curve needs at least {MIN_NODES} nodes, got {x.size}")
        if np.any(np.diff(x) <= 0):
            raise ValueError("OCP stoichiometries must be strictly increasing")
        if x[0] < 0 or x[-1] > 1:
            raise ValueError("OCP stoichiometries must lie in [0, 1]")
        if not np.all(np.isfinite(u)):
            raise ValueError("OCP potentials must be finite")
        object.__setattr__(self, "stoich", x)
        object.__setattr__(self, "potential", u)
        object.__setattr__(self, "_interp", PchipInterpolator(x, u, extrapolate=True))

    @property
    def nodes(self) -> list[tuple[float, float]]:
        return list(zip(self.stoich.tolist(), self.potential.tolist()))

    def __call__(self, stoich):
        """Vectorised evaluation without domain checks (used inside solvers)."""
        return self._interp(stoich)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["stoichiometry", "potential_V"])
            for x, u in zip(self.stoich, self.potential):
                w.writerow([repr(float(x)), repr(float(u))])

    @classmethod
    def from_csv(cls, path, name: str | None = None) -> "OcpCurve":
        path = Path(path)
        return cls._parse(path.read_text().splitlines(), name or path.stem)

    @classmethod
    def _parse(cls, lines, name):
        rows = list(csv.reader(lines))
        if not rows:
            raise ValueError(f"{name}: empty OCP file")
        header = [h.strip() for h in rows[0]]
        if header != ["stoichiometry", "potential_V"]:
            raise ValueError(f"{name}: expected header 'stoichiometry,potential_V', got {rows[0]}")
        data = np.array([[float(a), float(b)] for a, b in rows[1:] if a.strip()])
        return cls(data[:, 0], data[:, 1], name=name)


def ocp_eval(curve: OcpCurve, stoich):
    """Evaluate ``curve`` at ``stoich`` (scalar or array) in volts.

    Raises:
        OcpDomainError: if any stoichiometry lies outside [0, 1].
    """
    s = np.asarray(stoich, dtype=float)
    if np.any(~np.isfinite(s)) or np.any(s < 0.0) or np.any(s > 1.0):
        raise OcpDomainError(f"stoichiometry outside [0, 1]: {stoich!r}")
    out = curve(s)
    return float(out) if np.ndim(out) == 0 else out


def _builtin(filename: str, name: str) -> OcpCurve:
    text = resources.files("cellident.model").joinpath("data", filename).read_text()
    return OcpCurve._parse(text.splitlines(), name)


def graphite_ocp() -> OcpCurve:
    return _builtin("graphite_ocp.csv", "graphite")


def nmc811_ocp() -> OcpCurve:
    return _builtin("nmc811_ocp.csv", "nmc811")


BUILTIN_CURVES = {"graphite": graphite_ocp, "nmc811": nmc811_ocp}
