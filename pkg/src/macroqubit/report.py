"""Deterministic serialization of sweep curves.

Data files never carry timestamps or timings; those live in the manifest so
that re-running the same configuration reproduces every data file byte for
byte.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable

from .metrics import SweepCurve

FLOAT_FMT = ".9g"
_VOLATILE_KEYS = ("seconds", "wall_time_s", "started", "finished")


def fmt(v: float) -> str:
    return format(float(v), FLOAT_FMT)


def columns(curve: SweepCurve) -> list[str]:
    cols = ["x", "r", "d"]
    if any(s.success_prob is not None for s in curve.samples):
        cols.append("success_prob")
    return cols


def curve_rows(curve: SweepCurve) -> list[list[str]]:
    cols = columns(curve)
    rows = []
    for s in curve.samples:
        row = [fmt(s.x), fmt(s.R), fmt(s.value)]
        if "success_prob" in cols:
            row.append(fmt(s.success_prob) if s.success_prob is not None else "")
        rows.append(row)
    return rows


def curve_csv(curve: SweepCurve) -> str:
    lines = [",".join(columns(curve))]
    lines += [",".join(r) for r in curve_rows(curve)]
    return "\n".join(lines) + "\n"


def stable_meta(meta: dict[str, Any]) -> dict[str, Any]:
    """Curve metadata with run-to-run varying entries removed."""
    return {k: v for k, v in meta.items() if k not in _VOLATILE_KEYS}


def data_manifest(manifest: dict[str, Any]) -> dict[str, Any]:
    """Manifest as embedded in a JSON data file: no timings, no output location."""
    out = {k: v for k, v in manifest.items() if k != "timing"}
    if isinstance(out.get("config"), dict):
        out["config"] = {k: v for k, v in out["config"].items() if k != "out"}
    return out


def curve_record(curve: SweepCurve, name: str) -> dict[str, Any]:
    cols = columns(curve)
    data = []
    for s in curve.samples:
        vals = [s.x, s.R, s.value] + ([s.success_prob] if "success_prob" in cols else [])
        data.append([float(fmt(v)) if v is not None else None for v in vals])
    return {
        "name": name,
        "family": curve.family,
        "params": curve.params,
        "meta": stable_meta(curve.meta),
        "columns": cols,
        "rows": data,
    }


def atomic_write(path: Path, text: str) -> None:
    """Write via a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dumps(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def write_curves(
    out_dir: Path,
    prefix: str,
    named: Iterable[tuple[str, SweepCurve]],
    manifest: dict[str, Any],
    fmt_name: str = "csv",
) -> list[Path]:
    """Emit one CSV per curve (or one JSON document) plus ``manifest.json``."""
    out_dir = Path(out_dir)
    written = []
    named = list(named)
    if fmt_name == "csv":
        for name, curve in named:
            p = out_dir / f"{prefix}_{name}.csv"
            atomic_write(p, curve_csv(curve))
            written.append(p)
    elif fmt_name == "json":
        doc = {
            "manifest": data_manifest(manifest),
            "curves": [curve_record(c, n) for n, c in named],
        }
        p = out_dir / f"{prefix}.json"
        atomic_write(p, dumps(doc))
        written.append(p)
    else:
        raise ValueError(f"unknown format {fmt_name!r}")
    mp = out_dir / f"{prefix}_manifest.json"
    atomic_write(mp, dumps(manifest))
    written.append(mp)
    return written
