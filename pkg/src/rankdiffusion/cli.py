"""Command-line entry point: ``rankdiffusion <subcommand> --config run.json [--out DIR]``.

Exit status is 0 on success, 2 for invalid input (bad config, arguments or
stability bound), 1 for any other failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import analysis, storage
from .config import RunConfig, load_config
from .errors import InputError, ParseError, ValidationError
from .measures import EmpiricalMeasure
from .init_law import LimitLaw, compute_gap_rates, limit_quantile, quantile_stats
from .particle import replica_stream, run_replicas, simulate_states
from .pme_solver import GridCdf, grid_from_samples, solve_pme

DEFAULT_QUANTILES = tuple(round(0.05 * k, 2) for k in range(1, 20))


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", required=True, help="run configuration (JSON)")
    common.add_argument("--out", help="output directory (overrides the config)")
    common.add_argument("--seed", type=int, help="base seed (overrides the config)")
    common.add_argument("--workers", type=int, help="worker processes for replicas")

    parser = _Parser(prog="rankdiffusion", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("init", parents=[common], help="gap rates and quantile tables")
    p.add_argument("--quantiles", type=_floats, default=list(DEFAULT_QUANTILES))

    sub.add_parser("simulate", parents=[common], help="particle checkpoints per replica")

    p = sub.add_parser("pde", parents=[common], help="solve the limiting CDF equation")
    p.add_argument("--initial-csv", help="initial CDF as CSV with columns x,w")

    sub.add_parser("compare", parents=[common], help="particle vs PDE distances")

    p = sub.add_parser("capital-curve", parents=[common], help="ranked log-capitalizations")
    p.add_argument("--market-size", type=int)
    p.add_argument("--ranks", type=_ints)
    p.add_argument("--time", type=float)
    p.add_argument("--convention", choices=("midrank", "upper"), default="midrank")

    p = sub.add_parser("diagnose", parents=[common], help="initial-law spread and clustering")
    p.add_argument("--epsilon", type=float, default=0.01)
    p.add_argument("--replicas", type=int)

    p = sub.add_parser("residual", parents=[common], help="weak-form residuals of stored outputs")
    p.add_argument("--input", help="directory holding snapshots.csv / checkpoints_r*.csv")
    p.add_argument("--centers", type=_floats, default=[-2.0, -1.0, 0.0, 1.0, 2.0])
    p.add_argument("--width", type=float, default=2.0)
    return parser


def _resolve(args) -> tuple[RunConfig, Path]:
    cfg = load_config(args.config)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.workers is not None:
        changes["workers"] = args.workers
    if changes:
        cfg = cfg.replace(**changes)
    return cfg, Path(args.out or cfg.outputs)


def cmd_init(cfg: RunConfig, args, csv_header: str) -> dict[str, str]:
    g = compute_gap_rates(cfg.model, cfg.n)
    law = LimitLaw(cfg.model)
    rates = storage.csv_text(csv_header, ["i", "rate"], zip(g.indices.tolist(), g.rates.tolist()))
    rows = []
    for u in args.quantiles:
        m, v = quantile_stats(g, u)
        rows.append((u, m, v, limit_quantile(law, u)))
    quantiles = storage.csv_text(csv_header, ["u", "m", "v", "q_infinity"], rows)
    return {"rates.csv": rates, "quantiles.csv": quantiles}


def cmd_simulate(cfg: RunConfig, args, csv_header: str) -> dict[str, str]:
    files = {}
    for r, states in enumerate(run_replicas(cfg, simulate_states)):
        by_id, by_rank = [], []
        for s in states:
            ids = np.arange(s.n)
            by_id.extend(zip([s.t] * s.n, ids.tolist(), s.positions.tolist()))
            by_rank.extend(zip([s.t] * s.n, (ids + 1).tolist(), np.sort(s.positions).tolist()))
        files[f"checkpoints_r{r:03d}.csv"] = storage.csv_text(
            csv_header, ["t", "particle_id", "position"], by_id
        )
        files[f"sorted_r{r:03d}.csv"] = storage.csv_text(csv_header, ["t", "rank", "position"], by_rank)
    return files


def _solve(cfg: RunConfig, initial_csv: str | None):
    if initial_csv is None:
        return analysis.pde_reference(cfg)
    x, w = storage.read_columns(initial_csv, "x", "w")
    grid = cfg.grid
    initial = grid_from_samples(x, w, grid.x_min, grid.x_max, grid.dx)
    return solve_pme(initial, cfg.model, cfg.t_final, cfg.checkpoints, safety=cfg.cfl_safety, dt=cfg.pde_dt)


def cmd_pde(cfg: RunConfig, args, csv_header: str) -> dict[str, str]:
    sol = _solve(cfg, args.initial_csv)
    x = sol.x.tolist()
    rows = []
    for t, values in zip(sol.times.tolist(), sol.values):
        rows.extend(zip([t] * len(x), x, values.tolist()))
    meta = {**storage.header_record(cfg.digest(), cfg.seed), **sol.metadata()}
    return {
        "snapshots.csv": storage.csv_text(csv_header, ["t", "x", "w"], rows),
        "pde_meta.json": json.dumps(meta, indent=2) + "\n",
    }


def cmd_compare(cfg: RunConfig, args, csv_header: str) -> dict[str, str]:
    reports = analysis.lln_report(cfg)
    summary = analysis.summarize(reports)
    cols = ["n", "t", "replicas", "ks_mean", "ks_max", "w1_mean", "w1_max"]
    return {
        "report.jsonl": storage.jsonl_text(
            storage.header_record(cfg.digest(), cfg.seed), [vars(r) for r in reports]
        ),
        "summary.csv": storage.csv_text(csv_header, cols, ([row[c] for c in cols] for row in summary)),
    }


def cmd_capital_curve(cfg: RunConfig, args, csv_header: str) -> dict[str, str]:
    size = args.market_size or cfg.n
    ranks = args.ranks or list(range(1, min(size, 10) + 1))
    t = cfg.t_final if args.time is None else args.time
    sol = analysis.pde_reference(cfg.replace(checkpoints=(t,)) if t not in cfg.checkpoints else cfg)
    u, x = analysis.capital_curve(sol.at_time(t), size, ranks, convention=args.convention)
    return {"capital_curve.csv": storage.csv_text(csv_header, ["j", "u", "x"], zip(ranks, u.tolist(), x.tolist()))}


def cmd_diagnose(cfg: RunConfig, args, csv_header: str) -> dict[str, str]:
    g = compute_gap_rates(cfg.model, cfg.n)
    replicas = args.replicas or cfg.replicas
    spread, close = analysis.spread_diagnostics(g, args.epsilon, replicas, replica_stream(cfg.seed, 0))
    return {
        "diagnostics.csv": storage.csv_text(
            csv_header, ["n", "epsilon", "replicas", "spread", "clustering"], [(cfg.n, args.epsilon, replicas, spread, close)]
        )
    }


def _stored_paths(folder: Path):
    """(label, path of measures) for every stored PDE or particle output in ``folder``."""
    found = []
    snap = folder / "snapshots.csv"
    if snap.exists():
        t, x, w = storage.read_columns(snap, "t", "x", "w")
        path = []
        for ti in np.unique(t):
            sel = t == ti
            xs = x[sel]
            dx = float(np.mean(np.diff(xs)))
            path.append(GridCdf(float(xs[0]), float(xs[-1]), dx, w[sel], float(ti)))
        found.append((snap.name, path))
    for f in sorted(folder.glob("checkpoints_r*.csv")):
        t, pos = storage.read_columns(f, "t", "position")
        found.append((f.name, [EmpiricalMeasure(pos[t == ti], float(ti)) for ti in np.unique(t)]))
    if not found:
        raise ParseError(f"{folder}: no snapshots.csv or checkpoints_r*.csv to read")
    return found


def cmd_residual(cfg: RunConfig, args, csv_header: str, out: Path) -> dict[str, str]:
    folder = Path(args.input) if args.input else out
    rows = []
    for label, path in _stored_paths(folder):
        for c in args.centers:
            rep = analysis.mv_residual(path, cfg.model, analysis.bump(c, args.width))
            rows.append((label, c, args.width, rep.residual))
    return {"residual.csv": storage.csv_text(csv_header, ["source", "center", "width", "residual"], rows)}


COMMANDS = {
    "init": cmd_init,
    "simulate": cmd_simulate,
    "pde": cmd_pde,
    "compare": cmd_compare,
    "capital-curve": cmd_capital_curve,
    "diagnose": cmd_diagnose,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg, out = _resolve(args)
        csv_header = storage.header_line(cfg.digest(), cfg.seed)
        if args.command == "residual":
            files = cmd_residual(cfg, args, csv_header, out)
        else:
            files = COMMANDS[args.command](cfg, args, csv_header)
        storage.write_files(out, files)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - any other failure is a runtime error
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
