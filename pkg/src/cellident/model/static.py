"""Quasi-static stoichiometry model.

At very low current the cell voltage is the difference of the two
equilibrium potentials, and each electrode's stoichiometry moves by
coulomb counting against its active-material volume.
"""
from __future__ import annotations

import numpy as np

from .params import FARADAY, CellParameters


class DepletionError(RuntimeError):
    """An electrode stoichiometry left (0, 1)."""

    def __init__(self, electrode: str, stoich: float):
        super().__init__(f"{electrode} electrode stoichiometry left (0, 1): {stoich:.6g}")
        self.electrode = electrode
        self.stoich = stoich


def stoich_rates(params: CellParameters, eps_s_neg=None, eps_s_pos=None):
    """Stoichiometry change per coulomb for each electrode.

    Returns ``(k_neg, k_pos)`` with ``d(stoich_neg) = -k_neg * I dt`` and
    ``d(stoich_pos) = +k_pos * I dt``. ``eps_s_*`` may be arrays.
    """
    g, m, c = params.geometry, params.materials, params.composition
    e_neg = c.eps_s_neg if eps_s_neg is None else eps_s_neg
    e_pos = c.eps_s_pos if eps_s_pos is None else eps_s_pos
    k_neg = 1.0 / (FARADAY * m.cs_max_neg * np.asarray(e_neg) * g.area_neg * g.thick_neg)
    k_pos = 1.0 / (FARADAY * m.cs_max_pos * np.asarray(e_pos) * g.area_pos * g.thick_pos)
    return k_neg, k_pos


def ocv(params: CellParameters, stoich_neg, stoich_pos):
    m = params.materials
    return m.ocp_pos(stoich_pos) - m.ocp_neg(stoich_neg)


def static_step(stoich_neg: float, stoich_pos: float, current: float, dt: float,
                params: CellParameters):
    """Advance the quasi-static model by one interval.

    Positive current discharges the cell. Returns ``(voltage, stoich_neg',
    stoich_pos')`` where the voltage is evaluated at the updated state.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if not (0 < stoich_neg < 1 and 0 < stoich_pos < 1):
        raise ValueError("stoichiometries must lie in (0, 1)")
    k_neg, k_pos = stoich_rates(params)
    x_neg = stoich_neg - current * dt * float(k_neg)
    x_pos = stoich_pos + current * dt * float(k_pos)
    if not 0 < x_neg < 1:
        raise DepletionError("negative", x_neg)
    if not 0 < x_pos < 1:
        raise DepletionError("positive", x_pos)
    return float(ocv(params, x_neg, x_pos)), x_neg, x_pos


def static_voltage(currents, dt: float, params: CellParameters, stoich_neg0, stoich_pos0,
                   eps_s_neg=None, eps_s_pos=None):
    """Voltage sequence of the quasi-static model for a whole profile.

    Vectorised over a batch: ``stoich_*0`` and ``eps_s_*`` may be arrays of
    shape ``(B,)``; the result then has shape ``(B, n)``. No depletion checks
    are made; stoichiometries are clipped to [0, 1] for the OCP lookup, so
    callers that need the error semantics should use :func:`static_step`.
    """
    q = np.cumsum(np.asarray(currents, dtype=float)) * dt  # charge passed, C
    k_neg, k_pos = stoich_rates(params, eps_s_neg, eps_s_pos)
    x_neg = np.asarray(stoich_neg0, dtype=float)[..., None] - np.asarray(k_neg)[..., None] * q
    x_pos = np.asarray(stoich_pos0, dtype=float)[..., None] + np.asarray(k_pos)[..., None] * q
    return ocv(params, np.clip(x_neg, 0.0, 1.0), np.clip(x_pos, 0.0, 1.0))
