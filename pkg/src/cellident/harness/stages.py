"""Ground-truth tables of the reference cell at five points of its life."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..model.params import CellParameters, default_cell

STAGE_CYCLES = (0, 500, 1000, 1500, 2000)

# per-stage truths, indexed like STAGE_CYCLES
_STOICH_NEG = (0.486, 0.482, 0.480, 0.478, 0.477)
_STOICH_POS = (0.536, 0.535, 0.534, 0.533, 0.532)
_EPS_S_NEG = (0.665, 0.655, 0.645, 0.635, 0.624)
_EPS_S_POS = (0.519, 0.516, 0.515, 0.514, 0.513)
_EPS_E_NEG = (0.2827, 0.2762, 0.2720, 0.2686, 0.2656)
_RF_NEG = (3.34e-4, 19.26e-4, 29.80e-4, 38.28e-4, 45.56e-4)  # ohm m^2
_RF_POS = (1.46e-4, 15.45e-4, 21.86e-4, 26.78e-4, 30.93e-4)  # ohm m^2


@dataclass(frozen=True)
class DegradationStage:
    """Composition truths after ``cycles`` aging cycles.

    Transport parameters are the nominal ones at every stage.
    """

    cycles: int
    stoich_neg_t0: float
    stoich_pos_t0: float
    eps_s_neg: float
    eps_s_pos: float
    eps_e_neg: float
    film_resistance_neg: float
    film_resistance_pos: float

    @property
    def label(self) -> str:
        return f"stage-{self.cycles}"

    def params(self, base: CellParameters | None = None) -> CellParameters:
        base = base or default_cell()
        m = base.materials
        return base.with_composition(
            eps_s_neg=self.eps_s_neg, eps_s_pos=self.eps_s_pos, eps_e_neg=self.eps_e_neg,
            film_resistance_neg=self.film_resistance_neg, film_resistance_pos=self.film_resistance_pos,
            film_thickness_neg=self.film_resistance_neg * m.film_conductivity_neg,
            film_thickness_pos=self.film_resistance_pos * m.film_conductivity_pos,
        )

    @property
    def static_truth(self) -> dict:
        return {"stoich_neg_t0": self.stoich_neg_t0, "stoich_pos_t0": self.stoich_pos_t0,
                "eps_s_neg": self.eps_s_neg, "eps_s_pos": self.eps_s_pos}

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


STAGES = {c: DegradationStage(c, *vals) for c, *vals in zip(
    STAGE_CYCLES, _STOICH_NEG, _STOICH_POS, _EPS_S_NEG, _EPS_S_POS, _EPS_E_NEG, _RF_NEG, _RF_POS)}


def get_stage(cycles: int) -> DegradationStage:
    try:
        return STAGES[int(cycles)]
    except KeyError:
        raise ValueError(f"unknown stage {cycles}; available: {list(STAGES)}") from None


def aging_history(stages=None) -> np.ndarray:
    """``fit_aging`` rows from the stage truths, relative to the fresh stage.

    Film thickness growth (nm) is the film-resistance growth times the
    film conductivity of the reference cell.
    """
    stages = list(stages or STAGES.values())
    fresh = stages[0]
    m = default_cell().materials
    rows = []
    for s in stages[1:]:
        rows.append((
            s.eps_s_pos - fresh.eps_s_pos,
            s.eps_s_neg - fresh.eps_s_neg,
            s.eps_e_neg - fresh.eps_e_neg,
            (s.film_resistance_pos - fresh.film_resistance_pos) * m.film_conductivity_pos * 1e9,
            (s.film_resistance_neg - fresh.film_resistance_neg) * m.film_conductivity_neg * 1e9,
        ))
    return np.array(rows)
