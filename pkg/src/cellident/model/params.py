"""Parameter records for the cell models.

Every record is a frozen dataclass; use :func:`dataclasses.replace` (or the
``with_*`` helpers on :class:`CellParameters`) to derive variants. Field names
double as the JSON keys of :func:`params_to_json`.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .ocp import BUILTIN_CURVES, OcpCurve, graphite_ocp, nmc811_ocp
from .properties import NYMAN_CONDUCTIVITY, NYMAN_DIFFUSIVITY, PowerSeries

FARADAY = 96485.33212  # C/mol
GAS_CONSTANT = 8.314462618  # J/(mol K)

# order of the transport vector used by sensitivity analysis and SSO
TRANSPORT_NAMES = (
    "contact_resistance",
    "solid_conductivity_neg",
    "solid_conductivity_pos",
    "ds_factor_neg",
    "ds_factor_pos",
    "de_factor",
    "kappa_factor",
    "transference",
)

TRANSPORT_SYMBOLS = {
    "contact_resistance": "R_c",
    "solid_conductivity_neg": "sigma_s-",
    "solid_conductivity_pos": "sigma_s+",
    "ds_factor_neg": "D_s-",
    "ds_factor_pos": "D_s+",
    "de_factor": "D_e",
    "kappa_factor": "kappa",
    "transference": "t+",
}


def _require_positive(obj, names):
    for n in names:
        v = getattr(obj, n)
        if not (np.isfinite(v) and v > 0):
            raise ValueError(f"{type(obj).__name__}.{n} must be > 0, got {v!r}")


@dataclass(frozen=True)
class CellGeometry:
    area_neg: float
    area_pos: float
    area_sep: float
    thick_neg: float
    thick_pos: float
    thick_sep: float

    def __post_init__(self):
        _require_positive(self, [f.name for f in dataclasses.fields(self)])


@dataclass(frozen=True)
class MaterialConstants:
    molar_mass_neg: float
    molar_mass_pos: float
    density_neg: float
    density_pos: float
    particle_radius_neg: float
    particle_radius_pos: float
    reaction_rate_neg: float
    reaction_rate_pos: float
    film_conductivity_neg: float
    film_conductivity_pos: float
    base_solid_diffusivity_neg: float
    base_solid_diffusivity_pos: float
    base_electrolyte_diffusivity: PowerSeries = NYMAN_DIFFUSIVITY
    base_ionic_conductivity: PowerSeries = NYMAN_CONDUCTIVITY
    transference_nominal: float = 0.38
    temperature: float = 298.15
    electrolyte_conc_nominal: float = 1000.0
    ocp_neg: OcpCurve = field(default_factory=graphite_ocp)
    ocp_pos: OcpCurve = field(default_factory=nmc811_ocp)

    def __post_init__(self):
        _require_positive(
            self,
            [
                "molar_mass_neg", "molar_mass_pos", "density_neg", "density_pos",
                "particle_radius_neg", "particle_radius_pos", "reaction_rate_neg",
                "reaction_rate_pos", "film_conductivity_neg", "film_conductivity_pos",
                "base_solid_diffusivity_neg", "base_solid_diffusivity_pos",
                "temperature", "electrolyte_conc_nominal",
            ],
        )
        probe = np.linspace(1.0, 3000.0, 64)
        for fn in (self.base_electrolyte_diffusivity, self.base_ionic_conductivity):
            if np.any(fn(probe) <= 0):
                raise ValueError(f"{fn.name or 'property'} must be positive on (0, 3000] mol/m3")

    @property
    def cs_max_neg(self) -> float:
        return self.density_neg / self.molar_mass_neg

    @property
    def cs_max_pos(self) -> float:
        return self.density_pos / self.molar_mass_pos


@dataclass(frozen=True)
class CompositionParams:
    eps_s_neg: float
    eps_s_pos: float
    eps_e_neg: float
    eps_e_sep: float
    eps_e_pos: float
    film_thickness_neg: float = 0.0
    film_thickness_pos: float = 0.0
    film_resistance_neg: float = 0.0
    film_resistance_pos: float = 0.0

    def __post_init__(self):
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"CompositionParams.{f.name} must be finite and >= 0")
        for n in ("eps_s_neg", "eps_s_pos", "eps_e_neg", "eps_e_sep", "eps_e_pos"):
            if getattr(self, n) > 1:
                raise ValueError(f"CompositionParams.{n} must lie in [0, 1]")
        if self.eps_s_neg + self.eps_e_neg > 1 or self.eps_s_pos + self.eps_e_pos > 1:
            raise ValueError("solid plus electrolyte volume fraction exceeds 1")


@dataclass(frozen=True)
class TransportParams:
    """Fast-dynamics parameters identified from the pulse test.

    ``contact_resistance`` is a lumped cell-level resistance in ohm; see
    :func:`contact_resistance_from_area_specific` for the area-specific form.
    The ``*_factor`` fields are dimensionless multipliers on the base property
    functions in :class:`MaterialConstants`.
    """

    contact_resistance: float = 6.4e-3
    solid_conductivity_neg: float = 66.5
    solid_conductivity_pos: float = 1.97
    ds_factor_neg: float = 1.0
    ds_factor_pos: float = 1.0
    de_factor: float = 1.0
    kappa_factor: float = 1.0
    transference: float = 0.38

    def __post_init__(self):
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"TransportParams.{f.name} must be finite and >= 0")
        if self.transference >= 1:
            raise ValueError("transference number must be < 1")

    def as_vector(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in TRANSPORT_NAMES], dtype=float)

    @classmethod
    def from_vector(cls, v) -> "TransportParams":
        return cls(**{n: float(x) for n, x in zip(TRANSPORT_NAMES, v)})


def contact_resistance_from_area_specific(r_area: float, area: float) -> float:
    """Convert an area-specific resistance (ohm m^2) to ohm."""
    return r_area / area


def contact_resistance_to_area_specific(r_ohm: float, area: float) -> float:
    return r_ohm * area


@dataclass(frozen=True)
class CellParameters:
    geometry: CellGeometry
    materials: MaterialConstants
    composition: CompositionParams
    transport: TransportParams = field(default_factory=TransportParams)

    def with_transport(self, transport=None, **changes) -> "CellParameters":
        t = transport if transport is not None else self.transport
        if changes:
            t = dataclasses.replace(t, **changes)
        return dataclasses.replace(self, transport=t)

    def with_composition(self, **changes) -> "CellParameters":
        return dataclasses.replace(self, composition=dataclasses.replace(self.composition, **changes))

    def active_volume(self, electrode: str) -> float:
        """Solid active-material volume eps_s * A * L of one electrode (m^3)."""
        g, c = self.geometry, self.composition
        if electrode == "neg":
            return c.eps_s_neg * g.area_neg * g.thick_neg
        if electrode == "pos":
            return c.eps_s_pos * g.area_pos * g.thick_pos
        raise ValueError(f"electrode must be 'neg' or 'pos', got {electrode!r}")


def default_geometry() -> CellGeometry:
    return CellGeometry(
        area_neg=0.0741, area_pos=0.0741, area_sep=0.0741,
        thick_neg=69.2e-6, thick_pos=65.0e-6, thick_sep=20e-6,
    )


def default_materials() -> MaterialConstants:
    return MaterialConstants(
        molar_mass_neg=72.06e-3,
        molar_mass_pos=97.28e-3,
        density_neg=2260.0,
        density_pos=4750.0,
        particle_radius_neg=5.86e-6,
        particle_radius_pos=5.22e-6,
        reaction_rate_neg=2.0e-5,
        reaction_rate_pos=2.0e-5,
        film_conductivity_neg=1.54e-5,
        film_conductivity_pos=1.52e-5,
        base_solid_diffusivity_neg=5.0e-13,
        base_solid_diffusivity_pos=3.0e-14,
    )


def default_composition() -> CompositionParams:
    r_neg, r_pos = 3.34e-4, 1.46e-4
    m = default_materials()
    return CompositionParams(
        eps_s_neg=0.665,
        eps_s_pos=0.519,
        eps_e_neg=0.2827,
        eps_e_sep=0.45,
        eps_e_pos=0.40,
        film_thickness_neg=r_neg * m.film_conductivity_neg,
        film_thickness_pos=r_pos * m.film_conductivity_pos,
        film_resistance_neg=r_neg,
        film_resistance_pos=r_pos,
    )


def default_cell() -> CellParameters:
    """Fresh NMC811 | graphite 18650-class cell used throughout the toolkit."""
    return CellParameters(default_geometry(), default_materials(), default_composition())


# ---------------------------------------------------------------- JSON I/O

def _curve_to_json(curve: OcpCurve):
    if curve.name in BUILTIN_CURVES:
        ref = BUILTIN_CURVES[curve.name]()
        if np.array_equal(ref.stoich, curve.stoich) and np.array_equal(ref.potential, curve.potential):
            return curve.name
    return {"name": curve.name, "nodes": curve.nodes}


def _curve_from_json(obj, base_dir: Path | None):
    if isinstance(obj, str):
        if obj in BUILTIN_CURVES:
            return BUILTIN_CURVES[obj]()
        path = Path(obj)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        return OcpCurve.from_csv(path)
    nodes = np.asarray(obj["nodes"], dtype=float)
    return OcpCurve(nodes[:, 0], nodes[:, 1], name=obj.get("name", ""))


def params_to_dict(p: CellParameters) -> dict:
    mat = {}
    for f in dataclasses.fields(p.materials):
        v = getattr(p.materials, f.name)
        if isinstance(v, OcpCurve):
            v = _curve_to_json(v)
        elif isinstance(v, PowerSeries):
            v = v.to_dict()
        mat[f.name] = v
    mat["cs_max_neg"] = p.materials.cs_max_neg
    mat["cs_max_pos"] = p.materials.cs_max_pos
    return {
        "geometry": dataclasses.asdict(p.geometry),
        "materials": mat,
        "composition": dataclasses.asdict(p.composition),
        "transport": dataclasses.asdict(p.transport),
    }


def params_from_dict(d: dict, base_dir: Path | None = None) -> CellParameters:
    mat = dict(d["materials"])
    cs_neg, cs_pos = mat.pop("cs_max_neg", None), mat.pop("cs_max_pos", None)
    for k in ("ocp_neg", "ocp_pos"):
        if k in mat:
            mat[k] = _curve_from_json(mat[k], base_dir)
    for k in ("base_electrolyte_diffusivity", "base_ionic_conductivity"):
        if k in mat:
            mat[k] = PowerSeries.from_dict(mat[k])
    materials = MaterialConstants(**mat)
    for given, derived in ((cs_neg, materials.cs_max_neg), (cs_pos, materials.cs_max_pos)):
        if given is not None and abs(given - derived) > 1e-9 * abs(derived):
            raise ValueError("cs_max must equal density / molar_mass")
    return CellParameters(
        geometry=CellGeometry(**d["geometry"]),
        materials=materials,
        composition=CompositionParams(**d["composition"]),
        transport=TransportParams(**d.get("transport", {})),
    )


def params_to_json(p: CellParameters, path=None) -> str:
    text = json.dumps(params_to_dict(p), indent=2)
    if path is not None:
        Path(path).write_text(text)
    return text


def params_from_json(path) -> CellParameters:
    path = Path(path)
    return params_from_dict(json.loads(path.read_text()), base_dir=path.parent)
