"""Test current profiles and pulse-response segmentation.

Sample ``k`` of a profile carries the current applied over
``(k*dt, (k+1)*dt]``; the matching voltage sample is taken at ``(k+1)*dt``.
Positive current discharges the cell.

Index conventions (0-based, ranges inclusive):

* ``onset``  last zero-current sample before the excitation edge
* ``N1``     ``onset + inst_window / dt``
* ``N2``     last excitation sample
* ``N3``     ``N2 + inst_window / dt``
* ``N``      last sample

Instantaneous period ``[0, N1] U [N2, N3]``, excitation ``[N1, N2]``,
rest ``[N3, N]``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model.balance import REFERENCE_STOICH, find_stoich_for_ocv
from .model.params import CellParameters
from .model.trace import VoltageTrace

PULSE_DURATIONS = (15.0, 30.0, 60.0, 120.0)
MODES = ("I", "E", "R")


class ProfileShapeError(ValueError):
    """Profile does not contain exactly one excitation and one release edge."""


@dataclass(frozen=True, eq=False)
class CurrentProfile:
    dt: float
    samples: np.ndarray
    label: str = ""

    def __post_init__(self):
        s = np.array(self.samples, dtype=float)
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ValueError("profile dt must be positive")
        if s.ndim != 1 or s.size == 0 or not np.all(np.isfinite(s)):
            raise ValueError("profile samples must be a non-empty finite 1-D sequence")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)
        object.__setattr__(self, "dt", float(self.dt))

    def __len__(self) -> int:
        return self.samples.size

    @property
    def time(self) -> np.ndarray:
        return self.dt * np.arange(1, self.samples.size + 1)

    @property
    def duration(self) -> float:
        return self.dt * self.samples.size

    def charge(self) -> float:
        """Net charge drawn from the cell (C)."""
        return float(self.samples.sum() * self.dt)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time_s", "current_A"])
            for t, i in zip(self.time, self.samples):
                w.writerow([f"{t:.9g}", f"{i:.9g}"])

    @classmethod
    def from_csv(cls, path, label: str | None = None) -> "CurrentProfile":
        path = Path(path)
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or [h.strip() for h in rows[0]] != ["time_s", "current_A"]:
            raise ValueError(f"{path}: expected header 'time_s,current_A'")
        data = np.array([[float(a), float(b)] for a, b in rows[1:]])
        if data.shape[0] < 1:
            raise ValueError(f"{path}: no samples")
        t = data[:, 0]
        dt = t[0] if t.size == 1 else float(np.mean(np.diff(t)))
        if not np.allclose(t, dt * np.arange(1, t.size + 1), rtol=1e-6, atol=1e-9 * dt):
            raise ValueError(f"{path}: samples must be uniformly spaced starting at dt")
        return cls(dt, data[:, 1], label or path.stem)


@dataclass(frozen=True)
class QuasiStaticConfig:
    capacity_mah: float = 2200.0
    c_rate: float = 0.01
    dt: float = 200.0
    n_samples: int = 100
    start_ocv: float = 3.8


@dataclass(frozen=True)
class PulseConfig:
    durations: tuple[float, ...] = PULSE_DURATIONS
    amplitude: float = 2.2
    pre_rest: float = 5.0
    rest: float = 100.0
    sample_rate: float = 10.0
    polarity: int = 1
    start_ocv: float = 3.8
    inst_window: float = 1.0

    def __post_init__(self):
        if self.polarity not in (1, -1):
            raise ValueError("polarity must be +1 (discharge) or -1 (charge)")
        if self.pre_rest * self.sample_rate < 1:
            raise ValueError("pre-rest must cover at least one sample")


def gen_quasi_static(params: CellParameters, cfg: QuasiStaticConfig = QuasiStaticConfig(),
                     anchor=REFERENCE_STOICH):
    """Constant low-rate discharge starting from the state at ``cfg.start_ocv``.

    Returns ``(profile, (stoich_neg0, stoich_pos0))``.

    Raises:
        OcvRangeError: if ``start_ocv`` cannot be reached on the cell's
            conservation line.
    """
    if cfg.capacity_mah <= 0:
        raise ValueError("capacity must be known and positive to set a C-rate")
    current = cfg.c_rate * cfg.capacity_mah / 1000.0
    start = find_stoich_for_ocv(params, cfg.start_ocv, anchor)
    profile = CurrentProfile(cfg.dt, np.full(cfg.n_samples, current), f"quasi-static-{cfg.c_rate:g}C")
    return profile, start


def pulse_profile(duration: float, cfg: PulseConfig = PulseConfig()) -> CurrentProfile:
    n_pre = int(round(cfg.pre_rest * cfg.sample_rate))
    n_exc = int(round(duration * cfg.sample_rate))
    n_rest = int(round(cfg.rest * cfg.sample_rate))
    samples = np.concatenate([np.zeros(n_pre), np.full(n_exc, cfg.polarity * cfg.amplitude), np.zeros(n_rest)])
    return CurrentProfile(1.0 / cfg.sample_rate, samples, f"pulse-{duration:g}s")


def gen_pulse_set(params: CellParameters, cfg: PulseConfig = PulseConfig(), anchor=REFERENCE_STOICH):
    """The four CC-pulse profiles and their common rested start state.

    Each pulse is an independent experiment from the same state. Returns
    ``(profiles, (stoich_neg0, stoich_pos0))``.
    """
    start = find_stoich_for_ocv(params, cfg.start_ocv, anchor)
    return [pulse_profile(d, cfg) for d in cfg.durations], start


@dataclass(frozen=True)
class CutPoints:
    onset: int
    n1: int
    n2: int
    n3: int
    n: int

    def indices(self, mode: str) -> np.ndarray:
        if mode == "I":
            return np.r_[0:self.n1 + 1, self.n2:self.n3 + 1]
        if mode == "E":
            return np.arange(self.n1, self.n2 + 1)
        if mode == "R":
            return np.arange(self.n3, self.n + 1)
        raise ValueError(f"unknown segment mode {mode!r}")

    def anchor(self, mode: str) -> int:
        return {"E": self.n1, "R": self.n3}[mode]


def cut_points(profile: CurrentProfile, inst_window: float = 1.0) -> CutPoints:
    """Locate N1/N2/N3/N on a single-pulse profile.

    Raises:
        ProfileShapeError: unless there is exactly one rising and one
            falling current edge with rest samples on both sides.
    """
    s = profile.samples
    scale = np.abs(s).max()
    if scale == 0:
        raise ProfileShapeError("profile has no excitation step")
    active = np.abs(s) > 1e-9 * scale
    edges = np.flatnonzero(np.diff(active.astype(int)))
    if edges.size != 2 or active[0] or active[-1]:
        raise ProfileShapeError(f"expected one excitation and one release edge, found {edges.size} edges")
    w = int(round(inst_window / profile.dt))
    if w < 1:
        raise ValueError("instantaneous window shorter than one sample")
    onset, n2 = int(edges[0]), int(edges[1])
    cp = CutPoints(onset, onset + w, n2, n2 + w, s.size - 1)
    if not 0 < cp.n1 < cp.n2 < cp.n3 < cp.n:
        raise ProfileShapeError("excitation or rest too short for the instantaneous window")
    return cp


@dataclass(frozen=True)
class SegmentedTrace:
    trace: VoltageTrace
    cuts: CutPoints
    label: str = ""

    @property
    def cut_n1(self) -> int:
        return self.cuts.n1

    @property
    def cut_n2(self) -> int:
        return self.cuts.n2

    @property
    def cut_n3(self) -> int:
        return self.cuts.n3

    @property
    def cut_n(self) -> int:
        return self.cuts.n

    @property
    def segments(self) -> dict:
        return {m: self.cuts.indices(m) for m in MODES}


def segment_trace(profile: CurrentProfile, trace: VoltageTrace, inst_window: float = 1.0) -> SegmentedTrace:
    if len(trace) != len(profile):
        raise ValueError("trace and profile lengths differ")
    return SegmentedTrace(trace, cut_points(profile, inst_window), profile.label)


@dataclass(frozen=True)
class Segment:
    """One of the twelve registered segments (zeta_1 .. zeta_12)."""

    number: int
    pulse: int
    mode: str
    label: str


@dataclass
class PulseSet:
    """Pulse profiles with their cut points and the segment registry.

    Segments 1-4 are the instantaneous periods, 5-8 the excitation
    transients and 9-12 the rest transients, each ordered by pulse.
    """

    profiles: list
    cuts: list
    start: tuple[float, float] = REFERENCE_STOICH
    traces: list = field(default_factory=list)

    def __post_init__(self):
        if len(self.profiles) != len(self.cuts):
            raise ValueError("one set of cut points per profile required")

    @classmethod
    def from_profiles(cls, profiles, start, inst_window: float = 1.0) -> "PulseSet":
        return cls(list(profiles), [cut_points(p, inst_window) for p in profiles], tuple(start))

    @property
    def segments(self) -> list[Segment]:
        out = []
        for k, mode in enumerate(MODES):
            for i, p in enumerate(self.profiles):
                dur = np.count_nonzero(p.samples) * p.dt
                out.append(Segment(k * len(self.profiles) + i + 1, i, mode, f"{dur:g}s-{mode}"))
        return out

    def segmented(self, traces) -> list[SegmentedTrace]:
        return [SegmentedTrace(t, c, p.label) for t, c, p in zip(traces, self.cuts, self.profiles)]
