"""Synthetic measurements from known parameters."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..model.balance import find_stoich_for_ocv
from ..model.params import TRANSPORT_NAMES, CellParameters
from ..model.spme import init_state, simulate
from ..model.static import static_voltage
from ..model.trace import VoltageTrace
from ..profiles import CurrentProfile
from .stages import DegradationStage

MODELS = ("spme", "static")


@dataclass
class TwinData:
    traces: list
    clean: list
    truth: dict
    start: tuple[float, float]
    noise: float
    seed: int
    model: str

    def truth_record(self) -> dict:
        return {"truth": self.truth, "start": list(self.start), "noise_V": self.noise,
                "seed": self.seed, "model": self.model}


def twin_start(stage: DegradationStage, params: CellParameters, model: str, start_ocv: float | None):
    """Rest state the twin experiments begin from.

    The quasi-static twin starts at the stage's tabulated stoichiometries;
    pulse twins start at ``start_ocv`` on the conservation line through them.
    """
    anchor = (stage.stoich_neg_t0, stage.stoich_pos_t0)
    if model == "static" or start_ocv is None:
        return anchor
    return find_stoich_for_ocv(params, start_ocv, anchor)


def generate_twin(stage: DegradationStage, profiles, noise: float = 0.0, seed: int = 0,
                  model: str = "spme", params: CellParameters | None = None,
                  start_ocv: float | None = 3.8) -> TwinData:
    """Simulate ``profiles`` with the stage truths and add Gaussian voltage noise.

    ``noise`` is the standard deviation in volts. One seeded generator draws
    the noise for all profiles in order.
    """
    if noise < 0:
        raise ValueError("noise must be >= 0")
    if model not in MODELS:
        raise ValueError(f"model must be one of {MODELS}")
    if isinstance(profiles, CurrentProfile):
        profiles = [profiles]
    p = stage.params(params)
    start = twin_start(stage, p, model, start_ocv)
    rng = np.random.default_rng(seed)
    clean, noisy = [], []
    for prof in profiles:
        if model == "static":
            v = static_voltage(prof.samples, prof.dt, p, *start)
            tr = VoltageTrace(prof.time, prof.samples, v)
        else:
            tr = simulate(prof, p, init_state(p, *start))
        clean.append(tr)
        noisy.append(tr.with_voltage(tr.voltage + rng.normal(0.0, noise, len(tr))) if noise > 0 else tr)
    truth = {**stage.to_dict(), **dict(zip(TRANSPORT_NAMES, map(float, p.transport.as_vector())))}
    return TwinData(noisy, clean, truth, tuple(map(float, start)), float(noise), int(seed), model)
