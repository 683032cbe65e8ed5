"""Least-squares objectives over whole traces or pulse segments.

``STATIC`` sums squared residuals over every sample. ``I`` sums them over
the instantaneous period. ``E`` and ``R`` compare voltage changes relative
to the first sample of the excitation or rest period, so a constant offset
between the traces cancels.
"""
from __future__ import annotations

import numpy as np

from ..model.trace import VoltageTrace

STATIC = "STATIC"
OBJECTIVE_MODES = (STATIC, "I", "E", "R")


class AlignmentError(ValueError):
    """Measured and predicted traces are not sample-aligned."""


def segment_cost(measured, predicted, cuts, mode: str):
    """Objective of ``predicted`` (n,) or (B, n) against ``measured`` (n,).

    Returns a float for 1-D input and a (B,) array for batches. ``cuts`` is
    ignored in ``STATIC`` mode.
    """
    meas = np.asarray(measured, dtype=float)
    pred = np.asarray(predicted, dtype=float)
    if pred.shape[-1] != meas.shape[-1]:
        raise AlignmentError(f"trace lengths differ: {pred.shape[-1]} vs {meas.shape[-1]}")
    if mode == STATIC:
        r = pred - meas
    elif mode == "I":
        idx = cuts.indices("I")
        r = pred[..., idx] - meas[idx]
    elif mode in ("E", "R"):
        idx, a = cuts.indices(mode), cuts.anchor(mode)
        r = (pred[..., idx] - pred[..., a, None]) - (meas[idx] - meas[a])
    else:
        raise ValueError(f"unknown objective mode {mode!r}")
    out = np.einsum("...i,...i->...", r, r)
    return float(out) if out.ndim == 0 else out


def objective_value(measured: VoltageTrace, predicted: VoltageTrace, seg, mode: str) -> float:
    """Objective between two aligned traces; ``seg`` is a SegmentedTrace (unused for STATIC)."""
    if len(measured) != len(predicted):
        raise AlignmentError(f"trace lengths differ: {len(predicted)} vs {len(measured)}")
    if not np.allclose(measured.time, predicted.time, rtol=1e-12, atol=0.0):
        raise AlignmentError("trace timestamps differ")
    cuts = None if mode == STATIC else seg.cuts
    return segment_cost(measured.voltage, predicted.voltage, cuts, mode)
