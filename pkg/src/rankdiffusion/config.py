"""Experiment configuration: a strict JSON schema mapped onto :class:`RunConfig`.

Example::

    {
      "model": {"mu0": 0.5, "mu1": -1.0, "c": 0.0, "d": 1.0},
      "n": 10000, "t_final": 1.0, "dt": 0.001,
      "replicas": 10, "seed": 0,
      "checkpoints": [0.0, 0.5, 1.0],
      "grid": {"dx": 0.01}
    }

Optional keys: ``grid`` (any of ``x_min``, ``x_max``, ``dx``; missing bounds are
derived from the limiting law), ``outputs``, ``workers``, ``cfl_safety`` and
``pde_dt`` (forces the PDE step instead of the CFL-derived one).
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import ConfigError, InputError, ParseError, ValidationError
from .model import CoefficientModel, validate_model
from .pme_solver import DEFAULT_DX, DEFAULT_SAFETY, cfl_dt, derive_domain

_TOP_KEYS = {
    "model",
    "n",
    "t_final",
    "dt",
    "replicas",
    "seed",
    "grid",
    "checkpoints",
    "outputs",
    "workers",
    "cfl_safety",
    "pde_dt",
}
_REQUIRED = {"model", "n", "t_final", "dt"}
_MODEL_KEYS = {"mu0", "mu1", "c", "d"}
_GRID_KEYS = {"x_min", "x_max", "dx"}
_LATTICE_TOL = 1e-9


@dataclass(frozen=True)
class GridSpec:
    x_min: float
    x_max: float
    dx: float


def _lattice_index(t: float, dt: float, what: str) -> int:
    k = round(t / dt)
    if abs(k * dt - t) > _LATTICE_TOL * max(1.0, abs(t)):
        raise ConfigError(f"{what}={t} is not a multiple of dt={dt}")
    return k


@dataclass(frozen=True)
class RunConfig:
    model: CoefficientModel
    n: int
    t_final: float
    dt: float
    replicas: int = 1
    seed: int = 0
    grid: GridSpec | None = None
    checkpoints: tuple[float, ...] = ()
    outputs: str = "outputs"
    workers: int = 1
    cfl_safety: float = DEFAULT_SAFETY
    pde_dt: float | None = None
    steps: int = field(init=False)
    checkpoint_steps: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        if not isinstance(self.model, CoefficientModel):
            raise ValidationError("model must be a CoefficientModel")
        if not isinstance(self.n, int) or self.n < 2:
            raise ValidationError(f"n must be an integer >= 2, got {self.n!r}")
        if not self.dt > 0:
            raise ValidationError("dt must be positive")
        if not self.t_final >= 0:
            raise ValidationError("t_final must be non-negative")
        if not isinstance(self.replicas, int) or self.replicas < 1:
            raise ValidationError("replicas must be an integer >= 1")
        if not isinstance(self.workers, int) or self.workers < 1:
            raise ValidationError("workers must be an integer >= 1")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ValidationError("seed must be a non-negative integer")
        if not 0 < self.cfl_safety <= 1:
            raise ValidationError("cfl_safety must lie in (0, 1]")
        steps = _lattice_index(self.t_final, self.dt, "t_final")
        checkpoints = self.checkpoints or (0.0, self.t_final)
        checkpoints = tuple(sorted({float(t) for t in checkpoints}))
        if checkpoints[0] < 0 or checkpoints[-1] > self.t_final * (1 + _LATTICE_TOL):
            raise ConfigError("checkpoints must lie within [0, t_final]")
        ks = tuple(_lattice_index(t, self.dt, "checkpoint") for t in checkpoints)
        grid = self.grid
        if grid is None:
            grid = GridSpec(*derive_domain(self.model, self.t_final, DEFAULT_DX), DEFAULT_DX)
        if not grid.dx > 0 or not grid.x_max > grid.x_min:
            raise ValidationError("grid needs dx > 0 and x_max > x_min")
        if self.pde_dt is not None:
            if not self.pde_dt > 0:
                raise ValidationError("pde_dt must be positive")
            limit = cfl_dt(self.model, grid.dx, 1.0)
            if self.pde_dt > limit:
                raise ValidationError(f"pde_dt={self.pde_dt} exceeds the CFL bound {limit:.6g}")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "checkpoints", checkpoints)
        object.__setattr__(self, "steps", steps)
        object.__setattr__(self, "checkpoint_steps", ks)

    def replace(self, **changes) -> "RunConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "model": self.model.to_dict(),
            "n": self.n,
            "t_final": self.t_final,
            "dt": self.dt,
            "replicas": self.replicas,
            "seed": self.seed,
            "grid": {"x_min": self.grid.x_min, "x_max": self.grid.x_max, "dx": self.grid.dx},
            "checkpoints": list(self.checkpoints),
            "outputs": self.outputs,
            "workers": self.workers,
            "cfl_safety": self.cfl_safety,
            "pde_dt": self.pde_dt,
        }

    def digest(self) -> str:
        """Hash of everything that affects results (not the output path or worker count)."""
        d = self.to_dict()
        del d["outputs"], d["workers"]
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _number(d: dict, key: str, where: str, *, integer: bool = False):
    value = d[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"{where}{key}: expected a number, got {value!r}")
    if integer:
        if isinstance(value, float):
            if not value.is_integer():
                raise ValidationError(f"{where}{key}: expected an integer, got {value!r}")
            value = int(value)
        return value
    value = float(value)
    if not math.isfinite(value):
        raise ValidationError(f"{where}{key}: must be finite")
    return value


def _reject_unknown(d: dict, allowed: set, where: str) -> None:
    unknown = sorted(set(d) - allowed)
    if unknown:
        raise ParseError(f"{where or 'config'}: unknown field(s) {', '.join(unknown)}")


def config_from_dict(d: dict) -> RunConfig:
    if not isinstance(d, dict):
        raise ParseError("config must be a JSON object")
    _reject_unknown(d, _TOP_KEYS, "")
    missing = sorted(_REQUIRED - set(d))
    if missing:
        raise ValidationError(f"missing required field(s) {', '.join(missing)}")
    model = d["model"]
    if not isinstance(model, dict):
        raise ParseError("model: expected an object")
    _reject_unknown(model, _MODEL_KEYS, "model")
    missing = sorted(_MODEL_KEYS - set(model))
    if missing:
        raise ValidationError(f"model: missing field(s) {', '.join(missing)}")
    params = {k: _number(model, k, "model.") for k in _MODEL_KEYS}
    kwargs = {
        "n": _number(d, "n", "", integer=True),
        "t_final": _number(d, "t_final", ""),
        "dt": _number(d, "dt", ""),
    }
    for key in ("replicas", "seed", "workers"):
        if key in d:
            kwargs[key] = _number(d, key, "", integer=True)
    for key in ("cfl_safety",):
        if key in d:
            kwargs[key] = _number(d, key, "")
    if d.get("pde_dt") is not None:
        kwargs["pde_dt"] = _number(d, "pde_dt", "")
    if "outputs" in d:
        if not isinstance(d["outputs"], str):
            raise ValidationError("outputs: expected a path string")
        kwargs["outputs"] = d["outputs"]
    if "checkpoints" in d:
        cps = d["checkpoints"]
        if not isinstance(cps, list) or not cps:
            raise ValidationError("checkpoints: expected a non-empty list")
        kwargs["checkpoints"] = tuple(
            _number({"checkpoints": v}, "checkpoints", "") for v in cps
        )
    try:
        model_obj = validate_model(params)
    except InputError as exc:
        raise type(exc)(f"model: {exc}") from exc
    if "grid" in d:
        g = d["grid"]
        if not isinstance(g, dict):
            raise ParseError("grid: expected an object")
        _reject_unknown(g, _GRID_KEYS, "grid")
        dx = _number(g, "dx", "grid.") if "dx" in g else DEFAULT_DX
        if not dx > 0:
            raise ValidationError("grid.dx must be positive")
        lo, hi = derive_domain(model_obj, kwargs["t_final"], dx)
        x_min = _number(g, "x_min", "grid.") if "x_min" in g else lo
        x_max = _number(g, "x_max", "grid.") if "x_max" in g else hi
        kwargs["grid"] = GridSpec(x_min, x_max, dx)
    return RunConfig(model=model_obj, **kwargs)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"{path}: cannot read ({exc.strerror})") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    try:
        return config_from_dict(raw)
    except InputError as exc:
        raise type(exc)(f"{path}: {exc}") from exc
