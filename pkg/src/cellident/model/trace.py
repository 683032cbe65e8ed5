"""Sampled current/voltage records."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class VoltageTrace:
    """Time-stamped current (A, positive = discharge) and voltage (V)."""

    time: np.ndarray
    current: np.ndarray
    voltage: np.ndarray

    def __post_init__(self):
        t, i, v = (np.array(a, dtype=float) for a in (self.time, self.current, self.voltage))
        if not (t.ndim == i.ndim == v.ndim == 1) or not (t.size == i.size == v.size):
            raise ValueError("time, current and voltage must be 1-D arrays of equal length")
        if t.size and np.any(np.diff(t) <= 0):
            raise ValueError("trace time must be strictly increasing")
        if not np.all(np.isfinite(v)):
            raise ValueError("trace voltage must be finite")
        for name, a in (("time", t), ("current", i), ("voltage", v)):
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    def __len__(self) -> int:
        return self.time.size

    def with_voltage(self, voltage) -> "VoltageTrace":
        return VoltageTrace(self.time, self.current, voltage)

    def __eq__(self, other) -> bool:
        if not isinstance(other, VoltageTrace):
            return NotImplemented
        return (np.array_equal(self.time, other.time) and np.array_equal(self.current, other.current)
                and np.array_equal(self.voltage, other.voltage))
