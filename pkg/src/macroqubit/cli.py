"""Command-line front end.

Exit codes: 0 success, 2 bad configuration, 3 numerical failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import math
import platform
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy

from . import __version__
from . import report, validate
from .errors import FilterError, InvariantError, MacroQubitError, TruncationError
from .metrics import FAMILIES, SweepCurve, build_pair, closed_form_curve, default_x_grid, sweep_distance
from .ofilter import filtered_sweep
from .states import DEFAULT_TAIL_TOL

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4
COMMANDS = ("fig2a", "fig2b", "fig3a", "sweep", "validate")
SPACINGS = ("default", "linear", "log")
MAX_GAIN = 2.0
MAX_ALPHA2 = 100.0


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    g: list[float] = field(default_factory=list)
    alpha2: list[float] = field(default_factory=list)
    k: list[int] = field(default_factory=list)
    family: str | None = None
    x_max: float | None = None
    x_count: int | None = None
    x_spacing: str = "default"
    cutoff: int | None = None
    tail_tol: float = DEFAULT_TAIL_TOL
    out: str = "out"
    format: str = "csv"
    threads: int = 1

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        for g in self.g:
            if not (math.isfinite(g) and 0.0 <= g <= MAX_GAIN):
                raise ConfigError(f"gain {g} outside [0, {MAX_GAIN}]")
        for a in self.alpha2:
            if not (math.isfinite(a) and 0.0 < a <= MAX_ALPHA2):
                raise ConfigError(f"alpha2 {a} outside (0, {MAX_ALPHA2}]")
        for k in self.k:
            if k < 0:
                raise ConfigError(f"threshold k must be >= 0, got {k}")
        if self.cutoff is not None and self.cutoff < 1:
            raise ConfigError(f"cutoff override must be >= 1, got {self.cutoff}")
        if not (0.0 < self.tail_tol < 1.0):
            raise ConfigError(f"tail tolerance must lie in (0, 1), got {self.tail_tol}")
        if self.x_max is not None and not (self.x_max > 0 and math.isfinite(self.x_max)):
            raise ConfigError(f"--x-max must be positive, got {self.x_max}")
        if self.x_count is not None and self.x_count < 2:
            raise ConfigError(f"--x-count must be >= 2, got {self.x_count}")
        if self.x_spacing not in SPACINGS:
            raise ConfigError(f"--x-spacing must be one of {SPACINGS}")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"--format must be csv or json, got {self.format!r}")
        if self.threads < 1:
            raise ConfigError(f"--threads must be >= 1, got {self.threads}")
        if self.command == "sweep":
            if self.family not in FAMILIES:
                raise ConfigError(f"sweep needs --family from {FAMILIES}")
            if self.family in ("coherent-pointer", "coherent-mqs"):
                if not self.alpha2:
                    raise ConfigError(f"family {self.family} needs --alpha2")
            elif not self.g:
                raise ConfigError(f"family {self.family} needs --g")
            if self.family == "filtered" and not self.k:
                raise ConfigError("family filtered needs --k")


def x_grid(cfg: RunConfig, n0: float) -> np.ndarray:
    """Abscissae for one curve, never beyond the zero-loss photon number."""
    if cfg.x_spacing == "default" and cfg.x_max is None and cfg.x_count is None:
        return default_x_grid(n0)
    top = n0 if cfg.x_max is None else min(cfg.x_max, n0)
    count = cfg.x_count or 60
    if cfg.x_spacing == "log":
        return np.concatenate([[0.0], np.logspace(math.log10(top) - 4, math.log10(top), count - 1)])
    return np.linspace(0.0, top, count)


def _n0(family: str, param: float, cfg: RunConfig) -> float:
    if family in ("coherent-pointer", "coherent-mqs"):
        return float(param)
    return build_pair(family, param, cfg.tail_tol, cfg.cutoff).n0


def _sweep(family: str, param: float, cfg: RunConfig) -> SweepCurve:
    grid = x_grid(cfg, _n0(family, param, cfg))
    return sweep_distance(family, param, grid, tail_tol=cfg.tail_tol, cutoff=cfg.cutoff, threads=cfg.threads)


def _coherent_refs(cfg: RunConfig, kinds: Sequence[str]) -> list[tuple[str, SweepCurve]]:
    out = []
    for a2 in cfg.alpha2:
        grid = x_grid(cfg, a2)
        for kind in kinds:
            out.append((f"{kind}_closed_alpha2_{a2:g}", closed_form_curve(kind, a2, grid)))
            out.append((f"{kind}_numeric_alpha2_{a2:g}", _sweep(kind, a2, cfg)))
    return out


def curves_for(cfg: RunConfig) -> list[tuple[str, SweepCurve]]:
    if cfg.command == "fig2a":
        named = [(f"equatorial_g_{g:g}", _sweep("equatorial-mqs", g, cfg)) for g in cfg.g]
        return named + _coherent_refs(cfg, ("coherent-mqs", "coherent-pointer"))
    if cfg.command == "fig2b":
        return [(f"pole_g_{g:g}", _sweep("pole-pair", g, cfg)) for g in cfg.g]
    if cfg.command == "fig3a":
        named = []
        for g in cfg.g:
            n0 = _n0("equatorial-mqs", g, cfg)
            grid = x_grid(cfg, n0)
            named.append((f"unfiltered_g_{g:g}", _sweep("equatorial-mqs", g, cfg)))
            for k in cfg.k:
                curve = filtered_sweep(g, k, grid, tail_tol=cfg.tail_tol, cutoff=cfg.cutoff, threads=cfg.threads)
                named.append((f"filtered_g_{g:g}_k_{k}", curve))
        return named
    # sweep
    fam = cfg.family
    if fam in ("coherent-pointer", "coherent-mqs"):
        return [(f"{fam}_alpha2_{a:g}", _sweep(fam, a, cfg)) for a in cfg.alpha2]
    if fam == "filtered":
        named = []
        for g in cfg.g:
            grid = x_grid(cfg, _n0("equatorial-mqs", g, cfg))
            for k in cfg.k:
                curve = filtered_sweep(g, k, grid, tail_tol=cfg.tail_tol, cutoff=cfg.cutoff, threads=cfg.threads)
                named.append((f"filtered_g_{g:g}_k_{k}", curve))
        return named
    return [(f"{fam}_g_{g:g}", _sweep(fam, g, cfg)) for g in cfg.g]


def _config_echo(cfg: RunConfig) -> dict:
    d = asdict(cfg)
    d.pop("threads")  # affects wall time only
    return d


def build_manifest(cfg: RunConfig, named: Sequence[tuple[str, SweepCurve]]) -> dict:
    curves = {}
    timing = {}
    for name, c in named:
        curves[name] = {
            "family": c.family,
            "params": c.params,
            "cutoff": c.meta.get("cutoff"),
            "tail_cutoff": c.meta.get("tail_cutoff"),
            "convergence_delta": c.meta.get("convergence_delta"),
            "n0": c.meta.get("n0"),
            "tail_tol": c.meta.get("tail_tol", cfg.tail_tol),
            "closed_form": bool(c.meta.get("closed_form", False)),
            "x": [float(report.fmt(v)) for v in c.xs],
        }
        if "seconds" in c.meta:
            timing[name] = round(float(c.meta["seconds"]), 3)
    return {
        "config": _config_echo(cfg),
        "curves": curves,
        "library_version": __version__,
        "versions": {"numpy": np.__version__, "scipy": scipy.__version__, "python": platform.python_version()},
        "timing": timing,
    }


def apply_defaults(cfg: RunConfig) -> RunConfig:
    if cfg.command == "fig2a":
        cfg.g = cfg.g or [0.8, 1.1, 1.3]
        cfg.alpha2 = cfg.alpha2 or [4.0]
    elif cfg.command == "fig2b":
        cfg.g = cfg.g or [0.8, 1.1, 1.3]
    elif cfg.command == "fig3a":
        cfg.g = cfg.g or [0.8]
        cfg.k = cfg.k or [0, 1, 2, 3, 4, 5]
    elif cfg.command == "validate":
        cfg.g = cfg.g or [0.8]
        cfg.alpha2 = cfg.alpha2 or [1.0, 4.0]
    return cfg


def parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="macroqubit", description="Decoherence of amplified macro-qubits under photon loss.")
    p.add_argument("--command", required=True, choices=COMMANDS)
    p.add_argument("--g", action="append", type=float, default=[], help="gain (repeatable)")
    p.add_argument("--alpha2", action="append", type=float, default=[], help="coherent |alpha|^2 (repeatable)")
    p.add_argument("--k", action="append", type=int, default=[], help="filter threshold (repeatable)")
    p.add_argument("--family", choices=FAMILIES, help="state family for --command sweep")
    p.add_argument("--x-max", type=float, help="largest x (clipped to the zero-loss photon number)")
    p.add_argument("--x-count", type=int, help="number of x samples")
    p.add_argument(
        "--x-spacing",
        choices=SPACINGS,
        default="default",
        help="'default' is the built-in grid unless --x-max/--x-count are given, then linear",
    )
    p.add_argument("--cutoff", type=int, help="force the Fock cutoff instead of choosing it from --tail-tol")
    p.add_argument("--tail-tol", type=float, default=DEFAULT_TAIL_TOL)
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--threads", type=int, default=1)
    return p


class _Parser(argparse.ArgumentParser):
    pass


def parse_config(argv: Sequence[str] | None) -> RunConfig:
    ns = parser().parse_args(argv)
    cfg = RunConfig(
        command=ns.command, g=ns.g, alpha2=ns.alpha2, k=ns.k, family=ns.family, x_max=ns.x_max,
        x_count=ns.x_count, x_spacing=ns.x_spacing, cutoff=ns.cutoff, tail_tol=ns.tail_tol,
        out=ns.out, format=ns.format, threads=ns.threads,
    )
    apply_defaults(cfg)
    cfg.validate()
    return cfg


def run_validate(cfg: RunConfig) -> int:
    t0 = time.perf_counter()
    checks = validate.run_suite(cfg.g, cfg.alpha2, cfg.tail_tol, cfg.cutoff)
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.detail}")
    doc = validate.report(checks)
    doc["config"] = _config_echo(cfg)
    doc["library_version"] = __version__
    # per-check timings make the report nondeterministic, so they go in a sibling file
    timings = {c["name"]: round(c.pop("seconds"), 3) for c in doc["checks"]}
    out = Path(cfg.out)
    report.atomic_write(out / "validate_report.json", report.dumps(doc))
    report.atomic_write(
        out / "validate_manifest.json",
        report.dumps({"timing": timings, "total_seconds": round(time.perf_counter() - t0, 3)}),
    )
    return EXIT_OK if doc["passed"] else EXIT_NUMERIC


def run(cfg: RunConfig) -> int:
    if cfg.command == "validate":
        return run_validate(cfg)
    named = curves_for(cfg)
    paths = report.write_curves(Path(cfg.out), cfg.command, named, build_manifest(cfg, named), cfg.format)
    for p in paths:
        print(p)
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    try:
        cfg = parse_config(argv)
    except SystemExit as exc:  # argparse usage errors
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return run(cfg)
    except (InvariantError, TruncationError, FilterError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (MacroQubitError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
