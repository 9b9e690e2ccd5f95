"""Drift and diffusion coefficients as functions of the rank variable u in [0, 1].

Two concrete models share one evaluation interface:

* :class:`CoefficientModel` -- affine drift ``mu(u) = mu0 + mu1*u`` and affine
  variance ``sigma^2(u) = c*u + d``. Everything in the package supports it.
* :class:`TabulatedDriftModel` -- a strictly decreasing drift given on a uniform
  table (linear interpolation) with the same affine variance. Accepted by the
  particle simulator, the gap-rate computation and the PDE solver; closed forms
  for the limiting law need the affine model.

The antiderivatives ``theta`` (of mu) and ``big_sigma`` (of sigma^2 / 2) are
normalized to vanish at 0.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

from .errors import DegenerateDiffusion, DomainError, NonDecreasingDrift

MONOTONE_CHECK_POINTS = 1001


def _check_unit(u, what: str = "u") -> np.ndarray:
    arr = np.asarray(u, dtype=float)
    if np.any(~(arr >= 0.0)) or np.any(~(arr <= 1.0)):
        raise DomainError(f"{what} must lie in [0, 1]")
    return arr


def _scalar_or_array(arr: np.ndarray, like):
    return float(arr) if np.ndim(like) == 0 else arr


class _AffineVariance:
    """sigma^2(u) = c*u + d, shared by both models."""

    c: float
    d: float

    def _check_variance(self) -> None:
        if not self.d > 0 or not self.c + self.d > 0:
            raise DegenerateDiffusion(
                f"sigma^2 must be positive on [0, 1]: d={self.d}, c+d={self.c + self.d}"
            )

    def sigma2(self, u):
        arr = _check_unit(u)
        return _scalar_or_array(self.c * arr + self.d, u)

    def sigma(self, u):
        return np.sqrt(self.sigma2(u))

    def big_sigma(self, w):
        arr = _check_unit(w, "w")
        return _scalar_or_array(0.25 * self.c * arr * arr + 0.5 * self.d * arr, w)

    @property
    def max_sigma2(self) -> float:
        return max(self.d, self.c + self.d)

    @property
    def min_sigma2(self) -> float:
        return min(self.d, self.c + self.d)

    @property
    def is_constant_volatility(self) -> bool:
        return self.c == 0


@dataclass(frozen=True)
class CoefficientModel(_AffineVariance):
    """Affine coefficient pair. Construction validates the standing assumptions."""

    mu0: float
    mu1: float
    c: float
    d: float
    omega0: float = field(init=False)

    def __post_init__(self):
        for name in ("mu0", "mu1", "c", "d"):
            value = float(getattr(self, name))
            if not np.isfinite(value):
                raise DomainError(f"{name} must be finite")
            object.__setattr__(self, name, value)
        if not self.mu1 < 0:
            raise NonDecreasingDrift(f"mu1 must be negative, got {self.mu1}")
        self._check_variance()
        object.__setattr__(self, "omega0", abs(self.mu1))

    def mu(self, u):
        arr = _check_unit(u)
        return _scalar_or_array(self.mu0 + self.mu1 * arr, u)

    def theta(self, w):
        arr = _check_unit(w, "w")
        return _scalar_or_array(self.mu0 * arr + 0.5 * self.mu1 * arr * arr, w)

    @property
    def drift_root(self) -> float:
        """Sign change of mu, clamped to [0, 1]."""
        return min(max(self.mu0 / abs(self.mu1), 0.0), 1.0)

    @property
    def max_abs_mu(self) -> float:
        return max(abs(self.mu0), abs(self.mu0 + self.mu1))

    @property
    def slope_at_zero(self) -> float:
        return self.mu1

    def to_dict(self) -> dict:
        return {"mu0": self.mu0, "mu1": self.mu1, "c": self.c, "d": self.d}


@dataclass(frozen=True, eq=False)
class TabulatedDriftModel(_AffineVariance):
    """Drift tabulated at ``len(values)`` equispaced nodes of [0, 1]."""

    values: np.ndarray
    c: float
    d: float
    omega0: float = field(init=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 1 or values.size < 2 or not np.all(np.isfinite(values)):
            raise DomainError("drift table needs at least two finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "c", float(self.c))
        object.__setattr__(self, "d", float(self.d))
        probe = np.linspace(0.0, 1.0, MONOTONE_CHECK_POINTS)
        mu = self.mu(probe)
        slopes = np.diff(mu) / np.diff(probe)
        if not np.all(slopes < 0):
            raise NonDecreasingDrift("tabulated drift is not strictly decreasing")
        self._check_variance()
        object.__setattr__(self, "omega0", float(-slopes.max()))
        h = 1.0 / (values.size - 1)
        node_theta = np.concatenate(([0.0], np.cumsum(0.5 * h * (values[1:] + values[:-1]))))
        object.__setattr__(self, "_node_theta", node_theta)

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.values.size)

    def mu(self, u):
        arr = _check_unit(u)
        return _scalar_or_array(np.interp(arr, self.nodes, self.values), u)

    def theta(self, w):
        # trapezoid rule on the table nodes is exact for the interpolated drift
        arr = _check_unit(w, "w")
        nodes = self.nodes
        k = np.clip(np.searchsorted(nodes, arr, side="right") - 1, 0, nodes.size - 2)
        out = self._node_theta[k] + 0.5 * (arr - nodes[k]) * (self.values[k] + self.mu(arr))
        return _scalar_or_array(out, w)

    @cached_property
    def drift_root(self) -> float:
        if self.values[0] <= 0:
            return 0.0
        if self.values[-1] >= 0:
            return 1.0
        lo, hi = 0.0, 1.0
        while hi - lo > 1e-15:
            mid = 0.5 * (lo + hi)
            if self.mu(mid) > 0:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    @property
    def max_abs_mu(self) -> float:
        return float(np.abs(self.values).max())


def validate_model(params) -> CoefficientModel:
    """Build a validated affine model from a model, a mapping or a ``(mu0, mu1, c, d)`` tuple."""
    if isinstance(params, CoefficientModel):
        return params
    if isinstance(params, Mapping):
        return CoefficientModel(params["mu0"], params["mu1"], params["c"], params["d"])
    if isinstance(params, Sequence) and len(params) == 4:
        return CoefficientModel(*params)
    raise TypeError(f"cannot build a model from {params!r}")


def eval_mu(m, u):
    return m.mu(u)


def eval_theta_sigma(m, w):
    """Return ``(Theta(w), Sigma(w))``."""
    return m.theta(w), m.big_sigma(w)
