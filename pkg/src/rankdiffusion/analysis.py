"""Comparisons between particle measures, PDE solutions and the limiting law.

Distances are computed between CDFs: Kolmogorov-Smirnov (sup norm) and
Wasserstein-1 (L1 norm). Empirical measures are step functions and grid CDFs
are piecewise linear, so both distances are exact for those pairs. Against the
smooth limiting law, KS and W1 are exact for empirical measures (the W1 integral
uses the closed-form antiderivative of the quantile function); for grid CDFs the
law is linearized on a fine node set.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, InsufficientCheckpoints
from .init_law import (
    GapRates,
    LimitLaw,
    limit_cdf,
    limit_quantile,
    limit_quantile_integral,
    mean_abs_deviation_from_median,
    sample_initial_positions,
)
from .measures import EmpiricalMeasure, ParticleState
from .particle import rank_cdf_values, run_replicas, simulate
from .pme_solver import GridCdf, PdeSolution, grid_from_limit_law, solve_pme

TAIL = 1e-10
_LINEARIZE_NODES = 4096


@dataclass(frozen=True)
class DistanceReport:
    t: float
    ks: float
    w1: float
    n: int
    seed: int
    replica: int = 0

    def to_json(self) -> str:
        return json.dumps(asdict(self))


@dataclass(frozen=True, eq=False)
class ResidualReport:
    function_id: str
    residual: float
    times: np.ndarray
    series: np.ndarray  # |defect| at each checkpoint


# --- distances -------------------------------------------------------------


def _as_measure(obj):
    if isinstance(obj, ParticleState):
        return obj.empirical()
    return obj


def _breakpoints(obj) -> np.ndarray:
    if isinstance(obj, EmpiricalMeasure):
        return obj.atoms
    if isinstance(obj, GridCdf):
        return obj.x
    if isinstance(obj, _Linear):
        return obj.x
    return np.empty(0)


def _right(obj, x):
    if isinstance(obj, EmpiricalMeasure):
        return obj.cdf(x)
    if isinstance(obj, LimitLaw):
        return limit_cdf(obj, x)
    return obj.cdf(x)


def _left(obj, x):
    if isinstance(obj, EmpiricalMeasure):
        return obj.cdf_left(x)
    return _right(obj, x)


@dataclass(frozen=True, eq=False)
class _Linear:
    """Continuous piecewise-linear CDF through (x, F)."""

    x: np.ndarray
    values: np.ndarray

    def cdf(self, x):
        return np.interp(x, self.x, self.values, left=0.0, right=1.0)


def _law_range(law: LimitLaw) -> tuple[float, float]:
    return limit_quantile(law, TAIL), limit_quantile(law, 1.0 - TAIL)


def _linearize(law: LimitLaw, extra: np.ndarray) -> _Linear:
    lo, hi = _law_range(law)
    u = np.arange(1, _LINEARIZE_NODES) / _LINEARIZE_NODES
    inside = extra[(extra > lo) & (extra < hi)]
    x = np.unique(np.concatenate(([lo, hi], limit_quantile(law, u), inside)))
    values = np.asarray(limit_cdf(law, x), dtype=float)
    values[0], values[-1] = 0.0, 1.0
    return _Linear(x, values)


def ks_distance(a, b) -> float:
    """Sup of |F_a - F_b| over all breakpoints, using both one-sided limits at atoms."""
    a, b = _as_measure(a), _as_measure(b)
    pts = np.union1d(_breakpoints(a), _breakpoints(b))
    if pts.size == 0:
        raise TypeError("need at least one measure with breakpoints")
    right = np.abs(_right(a, pts) - _right(b, pts))
    left = np.abs(_left(a, pts) - _left(b, pts))
    return float(max(right.max(), left.max()))


def _abs_linear_integral(dl: np.ndarray, dr: np.ndarray, h: np.ndarray) -> np.ndarray:
    """int_0^h |dl + (dr - dl) s / h| ds."""
    same = dl * dr >= 0
    denom = np.where(same, 1.0, np.abs(dl) + np.abs(dr))
    crossing = h * (dl * dl + dr * dr) / (2.0 * denom)
    return np.where(same, 0.5 * h * (np.abs(dl) + np.abs(dr)), crossing)


def _w1_piecewise(a, b) -> float:
    xs = np.union1d(_breakpoints(a), _breakpoints(b))
    if xs.size < 2:
        return 0.0
    x0, x1 = xs[:-1], xs[1:]
    dl = _right(a, x0) - _right(b, x0)
    dr = _left(a, x1) - _left(b, x1)
    return float(math.fsum(_abs_linear_integral(dl, dr, x1 - x0)))


def _w1_empirical_vs_law(a: EmpiricalMeasure, law: LimitLaw) -> float:
    lo, hi = _law_range(law)
    xs = np.unique(np.concatenate(([min(lo, a.atoms[0]), max(hi, a.atoms[-1])], a.atoms)))
    x0, x1 = xs[:-1], xs[1:]
    level = a.cdf(x0)
    f0 = np.asarray(limit_cdf(law, x0), dtype=float)
    f1 = np.asarray(limit_cdf(law, x1), dtype=float)

    def antideriv(x, f):
        return x * f - limit_quantile_integral(law, f)

    i0, i1 = antideriv(x0, f0), antideriv(x1, f1)
    h = x1 - x0
    above = level * h - (i1 - i0)  # level >= F on the whole interval
    below = (i1 - i0) - level * h
    cross = (f0 < level) & (level < f1)
    safe_level = np.where(cross, level, 0.5)
    xc = np.asarray(limit_quantile(law, safe_level), dtype=float)
    ic = antideriv(xc, safe_level)
    split = (safe_level * (xc - x0) - (ic - i0)) + ((i1 - ic) - safe_level * (x1 - xc))
    pieces = np.where(cross, split, np.where(f1 <= level, above, below))
    return float(math.fsum(np.abs(pieces)))


def w1_distance(a, b) -> float:
    """Wasserstein-1 distance, i.e. the L1 distance between the two CDFs."""
    a, b = _as_measure(a), _as_measure(b)
    if isinstance(a, LimitLaw):
        a, b = b, a
    if isinstance(a, LimitLaw):
        raise TypeError("comparing two limit laws is not supported")
    if isinstance(b, LimitLaw):
        if isinstance(a, EmpiricalMeasure):
            return _w1_empirical_vs_law(a, b)
        b = _linearize(b, _breakpoints(a))
    return _w1_piecewise(a, b)


# --- weak-form residual ----------------------------------------------------


def _bspline(s: np.ndarray):
    a = np.abs(s)
    inner = a < 1.0
    outer = (a >= 1.0) & (a < 2.0)
    v = np.where(inner, (4.0 - 6.0 * a**2 + 3.0 * a**3) / 6.0, np.where(outer, (2.0 - a) ** 3 / 6.0, 0.0))
    d1 = np.where(inner, -2.0 * s + 1.5 * s * a, np.where(outer, -np.sign(s) * (2.0 - a) ** 2 / 2.0, 0.0))
    d2 = np.where(inner, -2.0 + 3.0 * a, np.where(outer, 2.0 - a, 0.0))
    return v, d1, d2


@dataclass(frozen=True)
class TestFunction:
    """Linear combination of cubic B-spline bumps ``(coef, center, width)``.

    A bump of width w is supported on ``[center - w/2, center + w/2]`` and is
    twice continuously differentiable.
    """

    __test__ = False  # not a pytest class

    terms: tuple[tuple[float, float, float], ...]

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        f = np.zeros_like(x)
        f1 = np.zeros_like(x)
        f2 = np.zeros_like(x)
        for coef, center, width in self.terms:
            k = 4.0 / width
            v, d1, d2 = _bspline(k * (x - center))
            f += coef * v
            f1 += coef * k * d1
            f2 += coef * k * k * d2
        return f, f1, f2

    def __call__(self, x):
        return self.evaluate(x)[0]

    def __add__(self, other: "TestFunction") -> "TestFunction":
        return TestFunction(self.terms + other.terms)

    def __mul__(self, alpha: float) -> "TestFunction":
        return TestFunction(tuple((alpha * c, x0, w) for c, x0, w in self.terms))

    __rmul__ = __mul__

    @property
    def id(self) -> str:
        return "+".join(f"{c:g}*bump({x0:g},{w:g})" for c, x0, w in self.terms)


def bump(center: float, width: float) -> TestFunction:
    if not width > 0:
        raise DomainError("bump width must be positive")
    return TestFunction(((1.0, float(center), float(width)),))


def _pairings(xi, m, f: TestFunction) -> tuple[float, float]:
    """``((xi, f), (xi, L_xi f))``."""
    if isinstance(xi, ParticleState):
        xi = xi.empirical()
    if isinstance(xi, EmpiricalMeasure):
        x = xi.atoms
        u = rank_cdf_values(x)
        weights = np.full(x.size, 1.0 / x.size)
    elif isinstance(xi, GridCdf):
        nodes = xi.x
        x = 0.5 * (nodes[1:] + nodes[:-1])
        u = 0.5 * (xi.values[1:] + xi.values[:-1])
        weights = np.diff(xi.values)
    else:
        raise TypeError(f"unsupported measure {type(xi).__name__}")
    v, d1, d2 = f.evaluate(x)
    gen = d1 * m.mu(u) + 0.5 * d2 * m.sigma2(u)
    return float(np.dot(weights, v)), float(np.dot(weights, gen))


def mv_residual(path, m, f: TestFunction) -> ResidualReport:
    """Largest defect of the weak McKean-Vlasov equation along a checkpointed path.

    Defect at checkpoint t_k: ``(xi_k, f) - (xi_0, f) - int_0^{t_k} (xi_s, L_xi_s f) ds``,
    time integral by the trapezoid rule over the checkpoints.
    """
    if isinstance(path, PdeSolution):
        path = path.snapshots()
    path = list(path)
    if not path:
        raise InsufficientCheckpoints("empty path")
    times = np.array([p.t for p in path], dtype=float)
    if np.any(np.diff(times) <= 0):
        raise DomainError("checkpoint times must be strictly increasing")
    pairs = np.array([_pairings(p, m, f) for p in path])
    lhs = pairs[:, 0] - pairs[0, 0]
    gen = pairs[:, 1]
    integral = np.concatenate(([0.0], np.cumsum(0.5 * np.diff(times) * (gen[1:] + gen[:-1]))))
    series = np.abs(lhs - integral)
    return ResidualReport(f.id, float(series.max()), times, series)


# --- law of large numbers --------------------------------------------------


def pde_reference(cfg) -> PdeSolution:
    """PDE solution started from the limiting law on the configured grid."""
    grid = cfg.grid
    initial = grid_from_limit_law(cfg.model, grid.x_min, grid.x_max, grid.dx)
    return solve_pme(
        initial, cfg.model, cfg.t_final, cfg.checkpoints, safety=cfg.cfl_safety, dt=cfg.pde_dt
    )


def lln_report(cfg, *, workers: int | None = None, reference: PdeSolution | None = None) -> list[DistanceReport]:
    """KS and W1 between every replica's empirical measure and the PDE solution, per checkpoint."""
    reference = pde_reference(cfg) if reference is None else reference
    runs = run_replicas(cfg, simulate, workers)
    reports = []
    for replica, measures in enumerate(runs):
        for mu_t in measures:
            w = reference.at_time(mu_t.t)
            reports.append(
                DistanceReport(
                    t=mu_t.t,
                    ks=ks_distance(mu_t, w),
                    w1=w1_distance(mu_t, w),
                    n=mu_t.n,
                    seed=cfg.seed,
                    replica=replica,
                )
            )
    return reports


def summarize(reports: Iterable[DistanceReport]) -> list[dict]:
    """Mean and max of KS and W1 per (n, t)."""
    groups: dict[tuple[int, float], list[DistanceReport]] = {}
    for r in reports:
        groups.setdefault((r.n, r.t), []).append(r)
    rows = []
    for (n, t), rs in sorted(groups.items()):
        ks = np.array([r.ks for r in rs])
        w1 = np.array([r.w1 for r in rs])
        rows.append(
            {
                "n": n,
                "t": t,
                "replicas": len(rs),
                "ks_mean": float(ks.mean()),
                "ks_max": float(ks.max()),
                "w1_mean": float(w1.mean()),
                "w1_max": float(w1.max()),
            }
        )
    return rows


# --- capital distribution --------------------------------------------------


def grid_quantile(w: GridCdf, u) -> np.ndarray:
    """Generalized inverse of the piecewise-linear grid CDF."""
    u = np.asarray(u, dtype=float)
    if np.any(~(u > 0)) or np.any(~(u < 1)):
        raise DomainError("quantile levels must lie in (0, 1)")
    v = w.values
    k = np.searchsorted(v, u, side="left")
    x = w.x
    return x[k - 1] + (u - v[k - 1]) / (v[k] - v[k - 1]) * w.dx


def capital_curve(w: GridCdf, market_size: int, j_list: Sequence[int], *, convention: str = "midrank"):
    """Log-capitalization of the j-th ranked firm read off the CDF.

    ``midrank`` uses the level ``(N - j + 1/2) / N``; ``upper`` uses ``(N - j + 1) / N``,
    which is only defined for j > 1.
    """
    if market_size < 1:
        raise DomainError("market_size must be at least 1")
    j = np.asarray(j_list, dtype=int)
    if np.any(j < 1) or np.any(j > market_size):
        raise DomainError(f"ranks must lie in 1..{market_size}")
    if convention == "midrank":
        u = (market_size - j + 0.5) / market_size
    elif convention == "upper":
        if np.any(j == 1):
            raise DomainError("the upper convention puts rank 1 at u = 1")
        u = (market_size - j + 1.0) / market_size
    else:
        raise DomainError(f"unknown convention {convention!r}")
    return u, grid_quantile(w, u)


# --- initial-law diagnostics -----------------------------------------------


def spread_diagnostics(g: GapRates, epsilon: float, replicas: int, rng) -> tuple[float, float]:
    """Spread and clustering statistics of the stationary initial configuration.

    The first is the exact mean absolute distance to the pinned median particle;
    the second a Monte Carlo estimate of the fraction of ordered pairs within
    ``epsilon`` of each other (self-pairs included).
    """
    if epsilon < 0:
        raise DomainError("epsilon must be non-negative")
    if replicas < 1:
        raise DomainError("need at least one replica")
    spread = mean_abs_deviation_from_median(g)
    n = g.n
    close = 0.0
    for _ in range(replicas):
        y = sample_initial_positions(g, rng).positions
        counts = np.searchsorted(y, y + epsilon, side="right") - np.searchsorted(y, y - epsilon, side="left")
        close += counts.sum() / n**2
    return spread, close / replicas
