"""Electrode balancing along the lithium-conservation line.

Moving ``s`` mol of cyclable lithium from the negative to the positive
electrode changes the stoichiometries by ``-s / Q_neg`` and ``+s / Q_pos``,
where ``Q = cs_max * eps_s * A * L`` is each electrode's site capacity.
Open-circuit voltage falls monotonically along this line, so any voltage
inside its window maps to exactly one balanced state.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import bisect

from .params import CellParameters

# fresh-cell rested state used as the default anchor of the conservation line
REFERENCE_STOICH = (0.486, 0.536)


class OcvRangeError(ValueError):
    """Target voltage outside the window reachable along the conservation line."""


@dataclass(frozen=True)
class ConservationLine:
    params: CellParameters
    anchor_neg: float
    anchor_pos: float
    eps_s_neg: float
    eps_s_pos: float

    @classmethod
    def through(cls, params: CellParameters, stoich_neg: float, stoich_pos: float,
                eps_s_neg: float | None = None, eps_s_pos: float | None = None) -> "ConservationLine":
        c = params.composition
        return cls(params, float(stoich_neg), float(stoich_pos),
                   c.eps_s_neg if eps_s_neg is None else float(eps_s_neg),
                   c.eps_s_pos if eps_s_pos is None else float(eps_s_pos))

    @property
    def sites_neg(self) -> float:
        g, m = self.params.geometry, self.params.materials
        return m.cs_max_neg * self.eps_s_neg * g.area_neg * g.thick_neg

    @property
    def sites_pos(self) -> float:
        g, m = self.params.geometry, self.params.materials
        return m.cs_max_pos * self.eps_s_pos * g.area_pos * g.thick_pos

    @property
    def gamma(self) -> float:
        """Positive-to-negative active-material volume ratio."""
        g = self.params.geometry
        return (self.eps_s_pos * g.area_pos * g.thick_pos) / (self.eps_s_neg * g.area_neg * g.thick_neg)

    @property
    def span(self) -> tuple[float, float]:
        """Range of transferred lithium (mol) keeping both stoichiometries in [0, 1]."""
        qn, qp = self.sites_neg, self.sites_pos
        lo = -min((1.0 - self.anchor_neg) * qn, self.anchor_pos * qp)
        hi = min(self.anchor_neg * qn, (1.0 - self.anchor_pos) * qp)
        return lo, hi

    def point(self, s):
        return self.anchor_neg - s / self.sites_neg, self.anchor_pos + s / self.sites_pos

    def ocv(self, s):
        xn, xp = self.point(s)
        m = self.params.materials
        return m.ocp_pos(xp) - m.ocp_neg(xn)

    @property
    def window(self) -> tuple[float, float]:
        """(lowest, highest) open-circuit voltage on the line."""
        lo, hi = self.span
        return float(self.ocv(hi)), float(self.ocv(lo))

    def solve(self, target: float, stoich_tol: float = 1e-12) -> float:
        """Transferred lithium ``s`` at which the OCV equals ``target``."""
        v_lo, v_hi = self.window
        if not v_lo <= target <= v_hi:
            raise OcvRangeError(
                f"target OCV {target:.4f} V outside the reachable window [{v_lo:.4f}, {v_hi:.4f}] V"
            )
        lo, hi = self.span
        if target == v_hi:
            return lo
        if target == v_lo:
            return hi
        xtol = stoich_tol * min(self.sites_neg, self.sites_pos)
        return bisect(lambda s: float(self.ocv(s)) - target, lo, hi, xtol=xtol, maxiter=400)


def find_stoich_for_ocv(params: CellParameters, target_ocv: float,
                        anchor: tuple[float, float] = REFERENCE_STOICH):
    """Balanced stoichiometries ``(neg, pos)`` whose OCV equals ``target_ocv``.

    The pair lies on the conservation line through ``anchor``.

    Raises:
        OcvRangeError: if the target lies outside the line's OCV window.
    """
    line = ConservationLine.through(params, *anchor)
    xn, xp = line.point(line.solve(target_ocv))
    return float(np.clip(xn, 0.0, 1.0)), float(np.clip(xp, 0.0, 1.0))
