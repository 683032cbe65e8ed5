"""Empirical aging relations for the electrolyte fraction and surface films.

Changes are signed as (stage value - fresh value), so material loss gives
negative deltas and, with negative film coefficients, positive film growth.

* film growth on the positive electrode is proportional to the loss of
  positive active material;
* the negative electrode's electrolyte fraction loss is quadratic in its
  active-material loss, and its film grows in proportion to that electrolyte
  loss;
* a film of thickness ``delta`` and conductivity ``sigma`` adds an
  area-specific resistance ``delta / sigma``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

NM = 1e-9


class AgingFitError(ValueError):
    pass


@dataclass(frozen=True)
class AgingCoefficients:
    k_f_pos: float  # nm per unit volume fraction
    k_f_neg: float  # nm per unit volume fraction
    k_e_neg: float
    b_e_neg: float
    sigma_f0_pos: float  # S/m
    sigma_f0_neg: float  # S/m
    residuals: tuple = ()

    def __post_init__(self):
        vals = (self.k_f_pos, self.k_f_neg, self.k_e_neg, self.b_e_neg, self.sigma_f0_pos, self.sigma_f0_neg)
        if not all(np.isfinite(vals)):
            raise ValueError("aging coefficients must be finite")
        if self.sigma_f0_pos <= 0 or self.sigma_f0_neg <= 0:
            raise ValueError("film conductivities must be positive")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in
                ("k_f_pos", "k_f_neg", "k_e_neg", "b_e_neg", "sigma_f0_pos", "sigma_f0_neg")}


# fitted coefficients of the reference NMC811 | graphite cell
REFERENCE_AGING = AgingCoefficients(-7.68e3, -3.76e3, 6.00, 0.659, 1.52e-5, 1.54e-5)


def fit_aging(history, sigma_f0_pos: float = 1.52e-5, sigma_f0_neg: float = 1.54e-5) -> AgingCoefficients:
    """Least-squares fit of the aging relations.

    Args:
        history: rows ``(d_eps_s_pos, d_eps_s_neg, d_eps_e_neg, film_pos_nm,
            film_neg_nm)`` with deltas relative to the fresh cell.

    Proportional fits give the film coefficients; a quadratic through the
    origin gives the electrolyte coefficients. ``residuals`` holds one
    ``(film_pos, film_neg, eps_e)`` residual triple per history row.

    Raises:
        AgingFitError: with fewer than three rows or a rank-deficient design.
    """
    h = np.asarray(history, dtype=float)
    if h.ndim != 2 or h.shape[1] != 5:
        raise AgingFitError("history rows must have five entries")
    if h.shape[0] < 3:
        raise AgingFitError("at least three history points are required")
    ds_pos, ds_neg, de_neg, f_pos, f_neg = h.T
    design = np.column_stack([ds_neg ** 2, ds_neg])
    if np.linalg.matrix_rank(design) < 2 or not np.any(ds_pos) or not np.any(de_neg):
        raise AgingFitError("history is rank-deficient")
    k_f_pos = float(ds_pos @ f_pos / (ds_pos @ ds_pos))
    k_f_neg = float(de_neg @ f_neg / (de_neg @ de_neg))
    (k_e, b_e), *_ = np.linalg.lstsq(design, de_neg, rcond=None)
    res = np.column_stack([f_pos - k_f_pos * ds_pos, f_neg - k_f_neg * de_neg, de_neg - design @ (k_e, b_e)])
    return AgingCoefficients(k_f_pos, k_f_neg, float(k_e), float(b_e), sigma_f0_pos, sigma_f0_neg,
                             tuple(map(tuple, res.tolist())))


@dataclass(frozen=True)
class AgingState:
    d_eps_e_neg: float
    film_pos: float  # m
    film_neg: float  # m
    film_resistance_pos: float  # ohm m^2
    film_resistance_neg: float  # ohm m^2


def apply_aging(coeffs: AgingCoefficients, d_eps_s_neg: float, d_eps_s_pos: float) -> AgingState:
    """Electrolyte loss, film growth and film resistance from active-material loss.

    Raises:
        ValueError: if either delta is positive.
    """
    if d_eps_s_neg > 0 or d_eps_s_pos > 0:
        raise ValueError("active-material deltas must be <= 0 (material only degrades)")
    d_eps_e = coeffs.k_e_neg * d_eps_s_neg ** 2 + coeffs.b_e_neg * d_eps_s_neg
    film_pos = coeffs.k_f_pos * d_eps_s_pos * NM
    film_neg = coeffs.k_f_neg * d_eps_e * NM
    return AgingState(d_eps_e, film_pos, film_neg, film_pos / coeffs.sigma_f0_pos, film_neg / coeffs.sigma_f0_neg)
