"""CSV / JSONL persistence.

CSV files start with a ``# config_sha256=... seed=...`` comment line; JSON and
JSONL files carry the same two keys in their first object. Floats are
written with 17 significant digits so they read back bit-exactly. Files are
staged under temporary names and renamed into place only once all of them are
written.
"""
from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ParseError


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "%.17g" % value
    return str(value)


def header_line(digest: str, seed: int) -> str:
    return f"# config_sha256={digest} seed={seed}\n"


def csv_text(header: str, columns: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    buf.write(header)
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def header_record(digest: str, seed: int) -> dict:
    return {"config_sha256": digest, "seed": seed}


def jsonl_text(header: dict, records: Iterable[dict]) -> str:
    lines = [json.dumps(header)] + [json.dumps(r) for r in records]
    return "\n".join(lines) + "\n"


def read_jsonl(path) -> tuple[dict, list[dict]]:
    """Header object and records."""
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
        objs = [json.loads(ln) for ln in lines if ln.strip()]
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if not objs:
        raise ParseError(f"{path}: empty file")
    return objs[0], objs[1:]


def write_files(out_dir, files: dict[str, str]) -> list[Path]:
    """Write ``{name: text}`` into ``out_dir`` all-or-nothing (up to the final renames)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    staged = []
    try:
        for name, text in files.items():
            fd, tmp = tempfile.mkstemp(dir=out_dir, prefix=f".{name}.", suffix=".tmp")
            staged.append((tmp, out_dir / name))
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
    except BaseException:
        for tmp, _ in staged:
            os.unlink(tmp)
        raise
    for tmp, final in staged:
        os.replace(tmp, final)
    return [final for _, final in staged]


def read_csv(path) -> tuple[list[str], np.ndarray]:
    """Column names and a float array, skipping ``#`` comment lines."""
    path = Path(path)
    try:
        lines = [ln for ln in path.read_text(encoding="utf-8").splitlines() if not ln.startswith("#")]
    except OSError as exc:
        raise ParseError(f"{path}: cannot read ({exc.strerror})") from exc
    if not lines:
        raise ParseError(f"{path}: empty file")
    reader = csv.reader(lines)
    columns = next(reader)
    try:
        data = np.array([[float(v) for v in row] for row in reader if row], dtype=float)
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return columns, data.reshape(-1, len(columns))


def read_columns(path, *names: str) -> list[np.ndarray]:
    columns, data = read_csv(path)
    missing = [n for n in names if n not in columns]
    if missing:
        raise ParseError(f"{path}: missing column(s) {', '.join(missing)}")
    return [data[:, columns.index(n)] for n in names]
