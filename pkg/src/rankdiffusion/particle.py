"""Euler-Maruyama simulation of the rank-based particle system.

Each particle moves with drift ``mu(F(X_i))`` and volatility ``sigma(F(X_i))``
where ``F`` is the empirical CDF of the current configuration. Coefficients are
frozen at the start of each step; ranks are recomputed by a full sort.

Randomness: replica ``r`` of a run with seed ``s`` owns the Philox stream
``SeedSequence(s, spawn_key=(r,))``. Within a replica the draws are consumed in
a fixed order (initial gaps, then one block of N normals per step), so every
number is a function of (seed, replica, step, particle) and results do not
depend on how replicas are spread over workers.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import TYPE_CHECKING, Callable

import numpy as np

from .errors import InvalidStep, ModelError
from .init_law import LimitLaw, compute_gap_rates, limit_quantile, sample_initial_positions
from .measures import EmpiricalMeasure, ParticleState

if TYPE_CHECKING:
    from .config import RunConfig
    from .pme_solver import PdeSolution

__all__ = [
    "EmpiricalMeasure",
    "ParticleState",
    "em_step",
    "rank_cdf_values",
    "replica_stream",
    "run_replicas",
    "simulate",
    "simulate_states",
    "tagged_particle",
]


def replica_stream(seed: int, replica: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(replica,))
    return np.random.Generator(np.random.Philox(ss))


def rank_cdf_values(positions) -> np.ndarray:
    """Empirical CDF at each particle, ``#{j : x_j <= x_i} / N``; ties take the block's top rank."""
    x = np.asarray(getattr(positions, "positions", positions), dtype=float)
    order = np.argsort(x, kind="stable")
    xs = x[order]
    ranks = np.searchsorted(xs, xs, side="right")
    out = np.empty(x.size)
    out[order] = ranks / x.size
    return out


def em_step(state: ParticleState, m, dt: float, noise) -> ParticleState:
    if not dt > 0:
        raise InvalidStep(f"dt must be positive, got {dt}")
    x = state.positions
    u = rank_cdf_values(x)
    noise = np.asarray(noise, dtype=float)
    x_new = x + m.mu(u) * dt + m.sigma(u) * np.sqrt(dt) * noise
    return ParticleState(t=state.t + dt, positions=x_new, seed=state.seed)


def simulate_states(cfg: RunConfig, rng=None, *, replica: int = 0) -> list[ParticleState]:
    """Run one replica from the stationary initial law; return states at the checkpoints."""
    if rng is None:
        rng = replica_stream(cfg.seed, replica)
    rates = compute_gap_rates(cfg.model, cfg.n)
    state = sample_initial_positions(rates, rng, seed=cfg.seed)
    wanted = dict(zip(cfg.checkpoint_steps, cfg.checkpoints))
    out = []
    if 0 in wanted:
        out.append(state)
    x = state.positions.copy()
    sqrt_dt = np.sqrt(cfg.dt)
    for k in range(1, cfg.steps + 1):
        u = rank_cdf_values(x)
        x += cfg.model.mu(u) * cfg.dt + cfg.model.sigma(u) * sqrt_dt * rng.standard_normal(cfg.n)
        if k in wanted:
            out.append(ParticleState(t=wanted[k], positions=x.copy(), seed=cfg.seed))
    return out


def simulate(cfg: RunConfig, rng=None, *, replica: int = 0) -> list[EmpiricalMeasure]:
    return [s.empirical() for s in simulate_states(cfg, rng, replica=replica)]


def _replica_job(args):
    fn, cfg, replica = args
    return fn(cfg, replica=replica)


def run_replicas(cfg: RunConfig, fn: Callable = simulate_states, workers: int | None = None) -> list:
    """``fn(cfg, replica=r)`` for every replica, in replica order."""
    workers = cfg.workers if workers is None else workers
    jobs = [(fn, cfg, r) for r in range(cfg.replicas)]
    if workers <= 1 or cfg.replicas == 1:
        return [_replica_job(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_replica_job, jobs))


def tagged_particle(
    cfg: RunConfig,
    w,
    rng=None,
    *,
    paths: int = 10_000,
    x0=None,
) -> np.ndarray:
    """Terminal values of independent copies of the single-particle SDE driven by a given CDF.

    ``w`` is a :class:`~rankdiffusion.pme_solver.PdeSolution` or any callable
    ``w(t, x)`` returning CDF values. The drift is ``mu(w(t, X))`` with ``w``
    interpolated linearly in x (and in t between snapshots); the volatility is
    the constant ``sigma(0)``. Starting points are drawn from the limiting law
    unless ``x0`` is given.
    """
    m = cfg.model
    if m.c != 0:
        raise ModelError("the tagged-particle representation needs constant sigma (c = 0)")
    if rng is None:
        rng = replica_stream(cfg.seed, 0)
    cdf = w if callable(w) else w.cdf_at
    if x0 is None:
        u = rng.random(paths)
        u = np.clip(u, np.finfo(float).tiny, 1.0 - np.finfo(float).epsneg)
        x = np.asarray(limit_quantile(LimitLaw(m), u), dtype=float)
    else:
        x = np.array(np.broadcast_to(np.asarray(x0, dtype=float), (paths,)))
    vol = m.sigma(0.0) * np.sqrt(cfg.dt)
    for k in range(cfg.steps):
        t = k * cfg.dt
        u = np.clip(cdf(t, x), 0.0, 1.0)
        x = x + m.mu(u) * cfg.dt + vol * rng.standard_normal(paths)
    return x
