"""Orthogonality filter: keep only events with |n - m| > k.

The filter acts on the photon numbers measured in the two orthogonal
polarizations of the equatorial basis, downstream of the lossy channel. The
sign of n - m is the +-1 outcome that would be assigned to an accepted
event; it is reported alongside each sample but plays no part in the
distance between the filtered states. (The threshold response of a human
eye selects a similar region of the two-mode Fock plane; no separate
detector model is provided for it.)
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from . import states as st
from .channels import FactoredLoss, LossParams
from .errors import FilterError
from .fock import DensityOperator, TwoModeSpace
from .metrics import (
    Sample,
    SweepCurve,
    _map,
    converged_evaluation,
    default_x_grid,
    equatorial_pair,
    factored_fidelity,
    reflectivity_for,
)

MIN_SUCCESS = 1e-12


@dataclass(frozen=True)
class OFThreshold:
    k: int

    def __post_init__(self) -> None:
        if int(self.k) != self.k or self.k < 0:
            raise ValueError(f"threshold must be a nonnegative integer, got {self.k!r}")
        object.__setattr__(self, "k", int(self.k))


def _k(k: int | OFThreshold) -> int:
    return k.k if isinstance(k, OFThreshold) else OFThreshold(k).k


def of_mask(space: TwoModeSpace, k: int | OFThreshold) -> np.ndarray:
    """Boolean diagonal of the filter projector, in storage order."""
    return np.abs(space.n1 - space.n2) > _k(k)


def of_projector(space: TwoModeSpace, k: int | OFThreshold) -> sp.dia_array:
    return sp.diags_array(of_mask(space, k).astype(float), format="dia")


def apply_filter(rho: DensityOperator, k: int | OFThreshold) -> tuple[DensityOperator, float]:
    """Post-select ``rho`` on the filter; returns the renormalized state and its probability."""
    keep = of_mask(rho.space, k)
    p = float(np.diag(rho.matrix).real[keep].sum())
    if p < MIN_SUCCESS:
        raise FilterError(f"filter with k={_k(k)} accepts probability {p:.3e}; filtered state undefined")
    mat = rho.matrix * np.outer(keep, keep) / p
    return DensityOperator(rho.space, mat), p


def _row_keep(k: int):
    return lambda pts: np.abs(pts[:, 0] - pts[:, 1]) > k


def filtered_distance(g: float, k: int, R: float, *, tail_tol: float = st.DEFAULT_TAIL_TOL,
                      cutoff: int | None = None):
    """Distance between the filtered lossy |Phi^+> and |Phi^-> at one loss level."""
    pair = equatorial_pair(g, tail_tol, cutoff)
    fa = FactoredLoss(pair.first, LossParams(R))
    fb = FactoredLoss(pair.second, LossParams(R))
    return factored_fidelity(fa, fb, _row_keep(_k(k)), MIN_SUCCESS)


def filtered_sweep(
    g: float,
    k: int | OFThreshold,
    x_grid: Sequence[float] | None = None,
    *,
    tail_tol: float = st.DEFAULT_TAIL_TOL,
    cutoff: int | None = None,
    threads: int = 1,
    converge: bool = True,
) -> SweepCurve:
    """Bures distance of the two filtered equatorial macro-qubits versus x.

    Each sample records the acceptance probability. Both states have the same
    acceptance (they are mode-swapped images of each other, and the filter is
    swap symmetric); the recorded value is that of |Phi^+>.
    """
    t0 = time.perf_counter()
    kk = _k(k)
    base = equatorial_pair(g, tail_tol, cutoff)
    grid = default_x_grid(base.n0) if x_grid is None else np.asarray(x_grid, dtype=float)
    xs = np.sort(grid)
    Rs = [reflectivity_for(x, base.n0) for x in xs]
    keep = _row_keep(kk)

    def build(c):
        return base if c == cutoff or c is None else equatorial_pair(g, tail_tol, c)

    def evaluate(pair):
        def point(R: float):
            fa = FactoredLoss(pair.first, LossParams(R))
            fb = FactoredLoss(pair.second, LossParams(R))
            return factored_fidelity(fa, fb, keep, MIN_SUCCESS)

        return _map(point, Rs, threads)

    pair, results, delta = converged_evaluation(build, evaluate, cutoff, converge)
    samples = []
    plus = []
    for x, R, res in zip(xs, Rs, results):
        if not math.isclose(res.success_a, res.success_b, rel_tol=1e-9, abs_tol=1e-14):
            raise FilterError(f"acceptance differs between the two states: {res.success_a} vs {res.success_b}")
        samples.append(Sample(float(x), float(R), res.distance, float(res.success_a)))
        plus.append(float(res.plus_a))
    return SweepCurve(
        "filtered",
        {"g": float(g), "k": kk},
        samples,
        meta={
            "cutoff": pair.cutoff,
            "tail_cutoff": base.cutoff,
            "convergence_delta": delta,
            "n0": base.n0,
            "tail_tol": tail_tol,
            "outcome_plus_fraction": plus,
            "seconds": time.perf_counter() - t0,
        },
    )
