"""Concentration-dependent electrolyte property fits."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PowerSeries:
    """``f(c) = sum(coef * (c / c_ref) ** power)``.

    Used for the base electrolyte diffusivity and ionic conductivity. The
    accommodation factors in :class:`TransportParams` scale these curves.
    """

    terms: tuple[tuple[float, float], ...]
    c_ref: float = 1000.0
    name: str = ""

    def __call__(self, c):
        x = np.asarray(c, dtype=float) / self.c_ref
        out = np.zeros_like(x)
        for coef, power in self.terms:
            out = out + coef * _pow(x, power)
        return out

    def to_dict(self) -> dict:
        return {"name": self.name, "c_ref": self.c_ref, "terms": [list(t) for t in self.terms]}

    @classmethod
    def from_dict(cls, d: dict) -> "PowerSeries":
        return cls(
            terms=tuple((float(a), float(b)) for a, b in d["terms"]),
            c_ref=float(d.get("c_ref", 1000.0)),
            name=d.get("name", ""),
        )


def _pow(x, p):
    # the generic np.power is several times slower than these on large batches
    if p == 0:
        return np.ones_like(x)
    if p == 1:
        return x
    if p == 2:
        return x * x
    if p == 3:
        return x * x * x
    if p == 1.5:
        return x * np.sqrt(x)
    if p == 0.5:
        return np.sqrt(x)
    return np.power(x, p)


# LiPF6 in EC:EMC (3:7), Nyman et al., Electrochim. Acta 53 (2008) 6356
NYMAN_DIFFUSIVITY = PowerSeries(
    terms=((8.794e-11, 2.0), (-3.972e-10, 1.0), (4.862e-10, 0.0)), name="nyman2008_diffusivity"
)
NYMAN_CONDUCTIVITY = PowerSeries(
    terms=((0.1297, 3.0), (-2.51, 1.5), (3.329, 1.0)), name="nyman2008_conductivity"
)
