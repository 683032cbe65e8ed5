"""Accuracy metrics of an identification run."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..identify.sso import IdentificationResult, pulse_rmse


def rmse(measured, predicted) -> float:
    r = np.asarray(predicted, dtype=float) - np.asarray(measured, dtype=float)
    return float(np.sqrt(np.mean(r * r)))


def relative_errors(values: dict, truth: dict, names=None) -> dict:
    """``|estimate - truth| / |truth|`` per parameter (the paper's "MAE")."""
    names = names if names is not None else [n for n in values if n in truth]
    return {n: abs(values[n] - truth[n]) / abs(truth[n]) for n in names}


@dataclass
class MetricsReport:
    relative_errors: dict | None
    rmse: dict
    runtimes: dict = field(default_factory=dict)
    evaluations: dict = field(default_factory=dict)

    def __post_init__(self):
        if any(v < 0 for v in self.rmse.values()):
            raise ValueError("RMSE must be >= 0")

    def to_dict(self, timings: bool = False) -> dict:
        out = {"rmse_V": self.rmse, "evaluations": self.evaluations}
        if self.relative_errors is not None:
            out["relative_errors"] = self.relative_errors
        if timings:
            out["runtimes_s"] = self.runtimes
        return out


def evaluate_metrics(result: IdentificationResult, truth: dict | None, traces, pulse_set, params) -> MetricsReport:
    """Relative errors (twin mode only) and per-pulse voltage RMSE at the identified values."""
    errs = relative_errors(result.values, truth, result.identified) if truth is not None else None
    labels = [p.label for p in pulse_set.profiles]
    fit = dict(zip(labels, pulse_rmse(pulse_set, traces, params, result.values)))
    runtimes = {r.step.describe(): r.wall_time for r in result.steps}
    runtimes["total"] = result.wall_time
    return MetricsReport(errs, fit, runtimes, {"objective": result.evaluations, "simulations": result.simulations})
