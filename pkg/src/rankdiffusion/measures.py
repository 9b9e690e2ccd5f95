"""Particle configurations and their empirical measures."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class ParticleState:
    """Positions indexed by particle id at time ``t``."""

    t: float
    positions: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float)
        if pos.ndim != 1 or not np.all(np.isfinite(pos)):
            raise ValueError("positions must be a finite 1-d array")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)

    @property
    def n(self) -> int:
        return self.positions.size

    def empirical(self) -> "EmpiricalMeasure":
        return EmpiricalMeasure(np.sort(self.positions), self.t)


@dataclass(frozen=True, eq=False)
class EmpiricalMeasure:
    """Uniform measure on sorted atoms; the CDF is right-continuous."""

    atoms: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        atoms = np.array(self.atoms, dtype=float)
        if atoms.ndim != 1 or atoms.size == 0:
            raise ValueError("need at least one atom")
        if np.any(np.diff(atoms) < 0):
            atoms = np.sort(atoms)
        atoms.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)

    @property
    def n(self) -> int:
        return self.atoms.size

    def cdf(self, x):
        return np.searchsorted(self.atoms, x, side="right") / self.n

    def cdf_left(self, x):
        return np.searchsorted(self.atoms, x, side="left") / self.n

    def pair(self, f) -> float:
        """Integral of ``f`` against the measure."""
        return float(np.mean(f(self.atoms)))
