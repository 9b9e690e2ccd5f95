"""Stationary gap law of the ranked system and its large-N limit.

For fixed N the consecutive spacings of the ordered particles are independent
exponentials with rates ``a_i``; :func:`compute_gap_rates` evaluates them by
direct summation of the drift over the ranks. Their partial sums of ``1/a_i``
around the median index give the finite-N quantile statistics, and the
limiting quantile function has the closed form implemented in
:func:`limit_quantile`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.special import expit, log_expit, xlogy

from .errors import DomainError, ModelError, NonPositiveRate
from .measures import ParticleState
from .model import CoefficientModel

LN2 = math.log(2.0)


def median_index(n: int) -> int:
    """1-based index of the particle pinned at the origin."""
    return n // 2 + 1 if n % 2 == 0 else (n + 1) // 2


def _compensated_cumsum(values: np.ndarray) -> np.ndarray:
    # plain cumsum drifts by ~n*eps, which shows up in D_i; add back the exact
    # rounding error of every partial sum (TwoSum), accumulated separately
    v = np.asarray(values, dtype=float)
    s = np.cumsum(v)
    prev = np.concatenate(([0.0], s[:-1]))
    vv = s - prev
    err = (prev - (s - vv)) + (v - vv)
    return s + np.cumsum(err)


@dataclass(frozen=True, eq=False)
class GapRates:
    """Rates ``rates[i-1] = a_i`` for i = 1..n-1, with the factors they are built from.

    ``drift_gap[i-1]`` is the mean drift of the lowest i ranks minus the mean
    drift of the others, ``vol_sum[i-1] = sigma^2(i/n) + sigma^2((i+1)/n)``.
    """

    n: int
    rates: np.ndarray
    drift_gap: np.ndarray
    vol_sum: np.ndarray

    @property
    def indices(self) -> np.ndarray:
        return np.arange(1, self.n)

    def bound_ratio(self) -> np.ndarray:
        """``4 * D_i / S_i``, bounded below by ``omega0 / max sigma^2``."""
        return 4.0 * self.drift_gap / self.vol_sum


def compute_gap_rates(m, n: int) -> GapRates:
    if n < 2:
        raise DomainError(f"need at least two particles, got n={n}")
    u = np.arange(1, n + 1) / n
    mu = np.asarray(m.mu(u), dtype=float)
    prefix = _compensated_cumsum(mu)[:-1]
    suffix = _compensated_cumsum(mu[::-1])[::-1][1:]
    i = np.arange(1, n)
    drift_gap = prefix / i - suffix / (n - i)
    if np.any(~(drift_gap > 0)):
        bad = int(np.argmin(drift_gap)) + 1
        raise NonPositiveRate(f"non-positive drift gap at i={bad}; drift must be decreasing")
    sig2 = np.asarray(m.sigma2(np.arange(1, n + 1) / n), dtype=float)
    vol_sum = sig2[:-1] + sig2[1:]
    rates = 4.0 * i * (n - i) / n * drift_gap / vol_sum
    for arr in (rates, drift_gap, vol_sum):
        arr.setflags(write=False)
    return GapRates(n=n, rates=rates, drift_gap=drift_gap, vol_sum=vol_sum)


def rate_bound_holds(m: CoefficientModel, n: int) -> np.ndarray:
    """Evaluate ``4 D_i / S_i >= omega0 / max sigma^2`` for every i in exact arithmetic.

    Model parameters are taken as the exact rationals their floats represent and
    the drift sums are accumulated over integers, so the comparison carries no
    rounding. For constant sigma the two sides agree exactly, which is why the
    float rates cannot be used for this check.
    """
    if not isinstance(m, CoefficientModel):
        raise ModelError("exact bound check needs the affine model")
    mu0, mu1, c, d = (Fraction(v) for v in (m.mu0, m.mu1, m.c, m.d))
    omega0 = abs(mu1)
    max_s2 = max(d, c + d)
    big_l = math.lcm(mu0.denominator, mu1.denominator)
    a0 = int(mu0 * big_l) * n
    b0 = int(mu1 * big_l)
    q = math.lcm(max_s2.denominator, omega0.denominator, c.denominator, d.denominator)
    ms, om, cq, dq = (int(v * q) for v in (max_s2, omega0, c, d))

    # worst-case magnitudes decide between int64 and Python ints
    p_max = n * (abs(a0) + abs(b0) * n)
    lhs_max = 4 * (2 * n * p_max) * abs(ms) * q
    rhs_max = abs(om) * (2 * abs(dq) * n + abs(cq) * (2 * n + 1)) * big_l * n * n
    dtype = np.int64 if max(lhs_max, rhs_max) < 2**62 else object

    j = np.arange(1, n + 1, dtype=dtype)
    scaled_mu = a0 + b0 * j  # n * L * mu(j / n), an integer
    prefix = np.cumsum(scaled_mu)
    total = prefix[-1]
    i = j[:-1]
    p_i = prefix[:-1]
    k = (n - i) * p_i - i * (total - p_i)  # D_i * n * L * i * (n - i)
    lhs = 4 * k * ms * q
    rhs = om * (2 * dq * n + cq * (2 * i + 1)) * big_l * i * (n - i)
    return np.asarray(lhs >= rhs, dtype=bool)


def sample_initial_positions(g: GapRates, rng=None, *, uniforms=None, seed=None):
    """Draw the ordered stationary configuration, pinned so the median particle sits at 0.

    Gaps are ``-log(U_i) / a_i``. Pass ``uniforms`` (values in (0, 1]) to force the
    draws instead of consuming ``rng``.
    """
    if uniforms is None:
        if rng is None:
            raise ValueError("need rng or uniforms")
        uniforms = 1.0 - rng.random(g.n - 1)
    uniforms = np.asarray(uniforms, dtype=float)
    if uniforms.shape != (g.n - 1,):
        raise DomainError(f"expected {g.n - 1} uniforms, got shape {uniforms.shape}")
    gaps = -np.log(uniforms) / g.rates
    y = np.concatenate(([0.0], np.cumsum(gaps)))
    y -= y[median_index(g.n) - 1]
    return ParticleState(t=0.0, positions=y, seed=seed)


def quantile_stats(g: GapRates, u: float) -> tuple[float, float]:
    """Mean and variance of the finite-N u-quantile of the pinned configuration."""
    if not 0.0 < u < 1.0:
        raise DomainError(f"u must lie in (0, 1), got {u}")
    if g.n < 3:
        raise DomainError("quantile statistics need n >= 3")
    mid = median_index(g.n)
    k = math.ceil(Fraction(u) * g.n)
    if u > 0.5:
        lo, hi, sign = mid, k - 1, 1.0
    else:
        lo, hi, sign = k, mid - 1, -1.0
    if hi < lo:
        return 0.0, 0.0
    inv = 1.0 / g.rates[lo - 1 : hi]
    return sign * math.fsum(inv), math.fsum(inv * inv)


def mean_abs_deviation_from_median(g: GapRates) -> float:
    """``(1/N) sum_i E|Y_i - Y_M|`` from the rates; each gap j is crossed by j or N-j particles."""
    n = g.n
    mid = median_index(n)
    j = np.arange(1, n)
    inv = 1.0 / g.rates
    weight = np.where(j < mid, j, n - j)
    return math.fsum(weight * inv) / n


@dataclass(frozen=True)
class LimitLaw:
    """Large-N limit of the pinned initial configuration (affine coefficients only)."""

    model: CoefficientModel

    def __post_init__(self):
        if not isinstance(self.model, CoefficientModel):
            raise ModelError("the limiting law has a closed form only for affine coefficients")

    @property
    def slope(self) -> float:
        return abs(self.model.slope_at_zero)

    @property
    def A(self) -> float:
        return (self.model.c + self.model.d) / self.slope

    @property
    def B(self) -> float:
        return self.model.d / self.slope

    def quantile_of_logit(self, s):
        """q at u = expit(s); accurate deep into both tails."""
        s = np.asarray(s, dtype=float)
        return -self.A * (LN2 + log_expit(-s)) + self.B * (LN2 + log_expit(s))


def limit_quantile(law: LimitLaw, u):
    arr = np.asarray(u, dtype=float)
    if np.any(~(arr > 0.0)) or np.any(~(arr < 1.0)):
        raise DomainError("u must lie in (0, 1)")
    out = -law.A * np.log(2.0 - 2.0 * arr) + law.B * np.log(2.0 * arr)
    return float(out) if np.ndim(u) == 0 else out


def _logit_by_bisection(law: LimitLaw, x: np.ndarray) -> np.ndarray:
    # q is increasing in s = logit(u); bracket by doubling, then bisect
    lo = np.full(x.shape, -1.0)
    hi = np.full(x.shape, 1.0)
    while True:
        low_bad = law.quantile_of_logit(lo) > x
        high_bad = law.quantile_of_logit(hi) < x
        if not (low_bad.any() or high_bad.any()):
            break
        lo = np.where(low_bad, 2.0 * lo, lo)
        hi = np.where(high_bad, 2.0 * hi, hi)
    # run to full float resolution: stop once no bracket has a midpoint strictly inside
    for _ in range(2200):
        mid = 0.5 * (lo + hi)
        open_ = (mid > lo) & (mid < hi)
        if not open_.any():
            break
        q = law.quantile_of_logit(mid)
        lo = np.where(open_ & (q <= x), mid, lo)
        hi = np.where(open_ & (q >= x), mid, hi)
    return 0.5 * (lo + hi)


def _limit_logit(law: LimitLaw, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise DomainError("x must be finite")
    if law.model.c == 0:
        return x / law.B
    return _logit_by_bisection(law, x)


def limit_cdf(law: LimitLaw, x):
    """The u with ``q(u) = x``; closed-form logistic when sigma is constant."""
    out = expit(_limit_logit(law, x))
    return float(out) if np.ndim(x) == 0 else out


def limit_cdf_bisection(law: LimitLaw, x):
    """Bisection-only inverse, used to cross-check the closed form."""
    x = np.asarray(x, dtype=float)
    out = expit(_logit_by_bisection(law, x))
    return float(out) if out.ndim == 0 else out


def limit_density(law: LimitLaw, x):
    s = _limit_logit(law, x)
    u = expit(s)
    out = law.slope * u * expit(-s) / (law.model.c * u + law.model.d)
    return float(out) if np.ndim(x) == 0 else out


def limit_quantile_integral(law: LimitLaw, u):
    """Antiderivative of q on [0, 1], zero at u = 0."""
    u = np.asarray(u, dtype=float)
    v = 1.0 - u
    return law.A * (xlogy(v, 2.0 * v) + u - LN2) + law.B * (xlogy(u, 2.0 * u) - u)
