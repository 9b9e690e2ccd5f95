"""Explicit monotone finite-volume solver for the limiting CDF equation

    w_t = (Sigma(w))_xx - (Theta(w))_x

on a truncated interval with Dirichlet values 0 and 1. Diffusion is the central
three-point difference of ``Sigma(w)``; convection uses the Engquist-Osher flux.
Under the CFL bound of :func:`cfl_dt` each update is a monotone function of the
old values, so [0, 1]-valuedness and spatial monotonicity are preserved.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CflViolation, DomainError, ValidationError
from .init_law import LimitLaw, limit_cdf, limit_quantile

DEFAULT_SAFETY = 0.9
DEFAULT_DX = 0.01
_CFL_SLACK = 1e-12


@dataclass(frozen=True, eq=False)
class GridCdf:
    x_min: float
    x_max: float
    dx: float
    values: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        if not self.dx > 0:
            raise ValidationError("dx must be positive")
        cells = (self.x_max - self.x_min) / self.dx
        j = round(cells)
        if j < 1 or abs(cells - j) > 1e-6:
            raise ValidationError("x_max - x_min must be a positive multiple of dx")
        values = np.array(self.values, dtype=float)
        if values.shape != (j + 1,):
            raise ValidationError(f"expected {j + 1} values, got {values.shape}")
        if values[0] != 0.0 or values[-1] != 1.0:
            raise ValidationError("boundary values must be 0 and 1")
        if np.any(~(values >= 0.0)) or np.any(~(values <= 1.0)):
            raise ValidationError("CDF values must lie in [0, 1]")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.values.size)

    def cdf(self, x):
        return np.interp(x, self.x, self.values, left=0.0, right=1.0)

    def is_monotone(self) -> bool:
        return bool(np.all(np.diff(self.values) >= 0))

    def mean(self) -> float:
        """Mean of the measure, treating each cell's mass as sitting at its midpoint."""
        x = self.x
        return float(np.dot(0.5 * (x[1:] + x[:-1]), np.diff(self.values)))

    def pair(self, f) -> float:
        x = self.x
        return float(np.dot(f(0.5 * (x[1:] + x[:-1])), np.diff(self.values)))


@dataclass(frozen=True, eq=False)
class PdeSolution:
    x_min: float
    x_max: float
    dx: float
    times: np.ndarray
    values: np.ndarray  # (snapshots, nodes)
    dt: float
    cfl_safety: float | None
    steps: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.values.shape[1])

    def __len__(self) -> int:
        return self.times.size

    def snapshot(self, k: int) -> GridCdf:
        return GridCdf(self.x_min, self.x_max, self.dx, self.values[k], float(self.times[k]))

    def snapshots(self) -> list[GridCdf]:
        return [self.snapshot(k) for k in range(len(self))]

    def at_time(self, t: float) -> GridCdf:
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > 1e-9 * max(1.0, abs(t)):
            raise DomainError(f"no snapshot at t={t}")
        return self.snapshot(k)

    def values_at(self, t: float) -> np.ndarray:
        """Grid values at time t, linear in time between snapshots."""
        if t <= self.times[0]:
            return self.values[0]
        if t >= self.times[-1]:
            return self.values[-1]
        k = int(np.searchsorted(self.times, t, side="right")) - 1
        lam = (t - self.times[k]) / (self.times[k + 1] - self.times[k])
        return (1.0 - lam) * self.values[k] + lam * self.values[k + 1]

    def cdf_at(self, t: float, x):
        return np.interp(x, self.x, self.values_at(t), left=0.0, right=1.0)

    def metadata(self) -> dict:
        return {
            "dx": self.dx,
            "dt": self.dt,
            "x_min": self.x_min,
            "x_max": self.x_max,
            "cfl_safety": self.cfl_safety,
        }


def cfl_dt(m, dx: float, safety: float = DEFAULT_SAFETY) -> float:
    if not dx > 0:
        raise DomainError("dx must be positive")
    if not 0 < safety <= 1:
        raise DomainError(f"safety must lie in (0, 1], got {safety}")
    max_dsigma = 0.5 * m.max_sigma2
    return safety / (2.0 * max_dsigma / dx**2 + m.max_abs_mu / dx)


def eo_flux(m, a, b, root: float | None = None):
    """Engquist-Osher flux ``int_0^a max(mu, 0) + int_0^b min(mu, 0)`` for decreasing mu."""
    root = m.drift_root if root is None else root
    return m.theta(np.minimum(a, root)) + m.theta(b) - m.theta(np.minimum(b, root))


def pme_update(values: np.ndarray, m, dt: float, dx: float, root: float | None = None) -> np.ndarray:
    """One explicit step on a raw value array; the two end values are carried over."""
    s = m.big_sigma(values)
    h = eo_flux(m, values[:-1], values[1:], root)
    out = values.copy()
    out[1:-1] = (
        values[1:-1]
        + (dt / dx**2) * (s[2:] - 2.0 * s[1:-1] + s[:-2])
        - (dt / dx) * (h[1:] - h[:-1])
    )
    return out


def _check_cfl(m, dx: float, dt: float) -> None:
    limit = cfl_dt(m, dx, 1.0)
    if dt > limit * (1.0 + _CFL_SLACK):
        raise CflViolation(f"dt={dt} exceeds the stability bound {limit}")


def pme_step(g: GridCdf, m, dt: float) -> GridCdf:
    _check_cfl(m, g.dx, dt)
    values = pme_update(g.values, m, dt, g.dx)
    return GridCdf(g.x_min, g.x_max, g.dx, values, g.t + dt)


def solve_pme(
    initial: GridCdf,
    m,
    t_final: float,
    checkpoints=None,
    *,
    safety: float = DEFAULT_SAFETY,
    dt: float | None = None,
) -> PdeSolution:
    """March from ``initial.t`` to ``t_final``, landing exactly on every checkpoint.

    The snapshot list always holds the initial state and ``t_final``. ``dt``
    forces a step size (checked against the CFL bound); by default it is
    ``cfl_dt(m, dx, safety)``.
    """
    if t_final < 0:
        raise DomainError("t_final must be non-negative")
    if dt is None:
        dt = cfl_dt(m, initial.dx, safety)
        used_safety = safety
    else:
        _check_cfl(m, initial.dx, dt)
        used_safety = None
    t0 = initial.t
    targets = sorted({float(t) for t in (() if checkpoints is None else checkpoints) if t > 0} | {float(t_final)})
    targets = [t for t in targets if t > 0 and t <= t_final]
    root = m.drift_root
    values = initial.values.copy()
    times = [t0]
    snaps = [values.copy()]
    t = 0.0
    steps = 0
    for target in targets:
        remaining = target - t
        full = max(math.ceil(remaining / dt - 1e-9) - 1, 0)
        for _ in range(full):
            values = pme_update(values, m, dt, initial.dx, root)
        last = remaining - full * dt
        if last > 0:
            values = pme_update(values, m, last, initial.dx, root)
        steps += full + (last > 0)
        t = target
        times.append(t0 + target)
        snaps.append(values.copy())
    return PdeSolution(
        x_min=initial.x_min,
        x_max=initial.x_max,
        dx=initial.dx,
        times=np.array(times),
        values=np.array(snaps),
        dt=dt,
        cfl_safety=used_safety,
        steps=steps,
    )


def derive_domain(m, t_final: float, dx: float = DEFAULT_DX, tail: float = 1e-8) -> tuple[float, float]:
    """Interval holding the limiting initial law up to ``tail``, widened for transport and spreading."""
    law = LimitLaw(m)
    lo = limit_quantile(law, tail)
    hi = limit_quantile(law, 1.0 - tail)
    pad = m.max_abs_mu * t_final + 6.0 * math.sqrt(m.max_sigma2) * math.sqrt(t_final)
    return math.floor((lo - pad) / dx) * dx, math.ceil((hi + pad) / dx) * dx


def grid_from_limit_law(m, x_min: float, x_max: float, dx: float) -> GridCdf:
    j = round((x_max - x_min) / dx)
    x = x_min + dx * np.arange(j + 1)
    values = np.asarray(limit_cdf(LimitLaw(m), x), dtype=float)
    values[0], values[-1] = 0.0, 1.0
    return GridCdf(x_min, x_min + j * dx, dx, values)


def grid_from_samples(x, w, x_min: float, x_max: float, dx: float) -> GridCdf:
    """Resample a tabulated CDF onto the grid by linear interpolation."""
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    if x.ndim != 1 or x.shape != w.shape or x.size < 2 or np.any(np.diff(x) <= 0):
        raise ValidationError("CDF samples need strictly increasing x and matching w")
    if np.any(np.diff(w) < 0) or np.any(w < 0) or np.any(w > 1):
        raise ValidationError("CDF samples must be nondecreasing and within [0, 1]")
    j = round((x_max - x_min) / dx)
    grid = x_min + dx * np.arange(j + 1)
    values = np.interp(grid, x, w, left=0.0, right=1.0)
    values[0], values[-1] = 0.0, 1.0
    return GridCdf(x_min, x_min + j * dx, dx, values)
