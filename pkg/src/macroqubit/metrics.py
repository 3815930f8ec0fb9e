"""Uhlmann fidelity and Bures distance, plus decoherence sweeps.

Conventions: ``F(rho, sigma) = Tr sqrt(sqrt(rho) sigma sqrt(rho))`` (not
squared) and ``D = sqrt(1 - F)``, so orthogonal states sit at D = 1 and
identical ones at D = 0.

Three independent routes to F are provided:

* :func:`fidelity` - symmetric square-root route on density matrices;
* :func:`fidelity_product_spectrum` - square roots of the spectrum of rho sigma;
* :func:`factored_fidelity` - nuclear norm of ``A^dag B`` for ``rho = A A^dag``,
  ``sigma = B B^dag``. This is the one used by the sweeps: it needs no matrix
  square root at all, so tiny eigenvalues of lossy states do not pick up the
  sqrt(eps) noise the other two routes suffer from.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from . import states as st
from .channels import FactoredLoss, LossParams
from .errors import FilterError, IncompatibleSpaceError, TruncationError
from .fock import DIAGONAL, HV, DensityOperator, PureState, TwoModeSpace, mean_photon_number
from .linalg import block_components, coset_labels, psd_sqrt

FAMILIES = ("equatorial-mqs", "pole-pair", "coherent-pointer", "coherent-mqs", "filtered")

PURE_RANK_TOL = 1e-12
CONVERGENCE_TOL = 1e-6
CUTOFF_STEP = 5
MAX_CONVERGENCE_ROUNDS = 8


def _check_pair(rho: DensityOperator, sigma: DensityOperator) -> None:
    if rho.space != sigma.space:
        raise IncompatibleSpaceError(f"space mismatch: {rho.space} vs {sigma.space}")


def _clip_unit(f: float) -> float:
    return min(1.0, max(0.0, f))


def fidelity(rho: DensityOperator, sigma: DensityOperator) -> float:
    """Uhlmann fidelity from the Hermitian square roots of both states, block by block."""
    _check_pair(rho, sigma)
    if rho.purity() > 1 - PURE_RANK_TOL and sigma.purity() > 1 - PURE_RANK_TOL:
        # both rank one: F = |<psi|phi>| = sqrt(Tr rho sigma)
        overlap = np.vdot(rho.matrix, sigma.matrix).real
        return _clip_unit(math.sqrt(max(overlap, 0.0)))
    total = 0.0
    for b in block_components(rho.matrix, sigma.matrix):
        r = rho.matrix[np.ix_(b, b)]
        s = sigma.matrix[np.ix_(b, b)]
        if not (np.any(r) and np.any(s)):
            continue
        # Tr sqrt(sqrt(r) s sqrt(r)) = ||sqrt(r) sqrt(s)||_1, which skips the outer root
        total += float(np.linalg.svd(psd_sqrt(r) @ psd_sqrt(s), compute_uv=False).sum())
    return _clip_unit(total)


def fidelity_product_spectrum(rho: DensityOperator, sigma: DensityOperator) -> float:
    """F as the sum of square roots of the eigenvalues of ``rho @ sigma``.

    rho sigma is similar to sqrt(rho) sigma sqrt(rho), so its spectrum is real
    and nonnegative up to rounding.
    """
    _check_pair(rho, sigma)
    total = 0.0
    for b in block_components(rho.matrix, sigma.matrix):
        prod = rho.matrix[np.ix_(b, b)] @ sigma.matrix[np.ix_(b, b)]
        w = np.linalg.eigvals(prod).real
        total += float(np.sqrt(np.clip(w, 0.0, None)).sum())
    return _clip_unit(total)


def bures_distance(rho: DensityOperator, sigma: DensityOperator) -> float:
    return math.sqrt(1.0 - fidelity(rho, sigma))


def pure_fidelity(a: PureState, b: PureState) -> float:
    """|<a|b>| for (re)normalized vectors."""
    a.space.require_same(b.space)
    return _clip_unit(abs(np.vdot(a.amplitudes, b.amplitudes)) / (a.norm * b.norm))


@dataclass
class FactoredFidelity:
    fidelity: float
    success_a: float = 1.0
    success_b: float = 1.0
    plus_a: float = float("nan")
    plus_b: float = float("nan")

    @property
    def distance(self) -> float:
        return math.sqrt(1.0 - self.fidelity)


def factored_fidelity(
    fa: FactoredLoss,
    fb: FactoredLoss,
    row_keep: Callable[[np.ndarray], np.ndarray] | None = None,
    min_success: float = 1e-12,
    prune_tol: float = 1e-12,
) -> FactoredFidelity:
    """Fidelity of two lossy pure states, optionally after a diagonal projector.

    ``row_keep(points)`` returns a boolean mask over (n, m) row points; the
    states are projected onto the kept rows and renormalized independently.

    Dropping a column ``c`` of A moves the nuclear norm of ``A^dag B`` by at
    most ``||c|| ||B||_op <= ||c||``, so the smallest columns are discarded
    as long as their summed norms stay below ``prune_tol`` (per state).
    """
    if fa.space != fb.space:
        raise IncompatibleSpaceError(f"space mismatch: {fa.space} vs {fb.space}")
    gens = np.concatenate([fa.generators, fb.generators])
    rows = np.unique(np.concatenate([fa.rows, fb.rows]), axis=0)
    row_lab = coset_labels(rows, gens)
    col_lab_a = coset_labels(fa.column_points(), gens)
    col_lab_b = coset_labels(fb.column_points(), gens)

    raw = 0.0
    pa = pb = 0.0
    plus_a = plus_b = 0.0
    budget_a = budget_b = prune_tol
    for lab in np.unique(np.concatenate([col_lab_a, col_lab_b])):
        r = rows[row_lab == lab]
        if row_keep is not None:
            r = r[row_keep(r)]
        if r.size == 0:
            continue
        ca = fa.cols[col_lab_a == lab]
        cb = fb.cols[col_lab_b == lab]
        A = fa.block(r, ca) if ca.size else None
        B = fb.block(r, cb) if cb.size else None
        plus = r[:, 0] > r[:, 1]
        if A is not None:
            wa = np.sum(np.abs(A) ** 2, axis=1)
            pa += wa.sum()
            plus_a += wa[plus].sum()
        if B is not None:
            wb = np.sum(np.abs(B) ** 2, axis=1)
            pb += wb.sum()
            plus_b += wb[plus].sum()
        if A is not None and B is not None:
            A, budget_a = _prune(A, budget_a)
            B, budget_b = _prune(B, budget_b)
            raw += float(np.linalg.svd(A.conj().T @ B, compute_uv=False).sum())
    if pa < min_success or pb < min_success:
        raise FilterError(f"post-selection probability too small ({pa:.3e}, {pb:.3e})")
    return FactoredFidelity(
        fidelity=_clip_unit(raw / math.sqrt(pa * pb)),
        success_a=pa,
        success_b=pb,
        plus_a=plus_a / pa,
        plus_b=plus_b / pb,
    )


def _prune(F: np.ndarray, budget: float) -> tuple[np.ndarray, float]:
    norms = np.linalg.norm(F, axis=0)
    order = np.argsort(norms)
    spent = np.cumsum(norms[order])
    ndrop = int(np.searchsorted(spent, budget, side="right"))
    if ndrop == 0:
        return F, budget
    keep = np.sort(order[ndrop:])
    return F[:, keep], budget - float(spent[ndrop - 1])


# --- closed forms for coherent-state references ---------------------------------


def coherent_pointer_distance_closed(alpha2: float, R: float) -> float:
    """D(|alpha>, |-alpha>) after loss R: sqrt(1 - exp(-2 (1-R) |alpha|^2))."""
    return math.sqrt(-math.expm1(-2.0 * (1.0 - R) * alpha2))


def coherent_mqs_distance_closed(alpha2: float, R: float) -> float:
    """Large-amplitude distance between lossy even and odd cats.

    sqrt(1 - sqrt(1 - exp(-4 R |alpha|^2))); it depends on loss only through
    the mean number of lost photons x = R |alpha|^2.
    """
    return math.sqrt(1.0 - math.sqrt(-math.expm1(-4.0 * R * alpha2)))


def coherent_mqs_distance_exact(alpha2: float, R: float) -> float:
    """Exact even/odd cat distance at finite amplitude.

    Both lossy cats are diagonal in the even/odd basis of the transmitted
    amplitude, giving F = sqrt((1 - e^{-4 R a}) / (1 - e^{-4 a})) with
    a = |alpha|^2. The closed form above drops the denominator.
    """
    if alpha2 == 0.0:
        return 1.0 if R == 0.0 else 0.0
    f = math.sqrt(math.expm1(-4.0 * R * alpha2) / math.expm1(-4.0 * alpha2))
    return math.sqrt(max(0.0, 1.0 - f))


# --- sweeps -------------------------------------------------------------------


@dataclass
class Sample:
    x: float
    R: float
    value: float
    success_prob: float | None = None


@dataclass
class SweepCurve:
    family: str
    params: dict[str, Any]
    samples: list[Sample]
    meta: dict[str, Any] = field(default_factory=dict)

    @property
    def xs(self) -> np.ndarray:
        return np.array([s.x for s in self.samples])

    @property
    def values(self) -> np.ndarray:
        return np.array([s.value for s in self.samples])

    def value_at(self, x: float, tol: float = 1e-9) -> float:
        for s in self.samples:
            if abs(s.x - x) <= tol:
                return s.value
        raise KeyError(f"no sample at x={x}")


def default_x_grid(n0: float, count: int = 60, tail_count: int = 20) -> np.ndarray:
    """Uniform samples on [0, min(4, n0)] plus points crowding the full-loss end."""
    head = np.linspace(0.0, min(4.0, n0), count)
    tail = n0 * (1.0 - np.logspace(-1.0, -4.0, tail_count))
    return np.unique(np.round(np.concatenate([head, tail]), 15))


@dataclass
class StatePair:
    """Two zero-loss states whose lossy images are compared."""

    first: PureState
    second: PureState
    n0: float

    @property
    def cutoff(self) -> int:
        return self.first.space.cutoff


def equatorial_pair(g: float, tail_tol: float = st.DEFAULT_TAIL_TOL, cutoff: int | None = None) -> StatePair:
    """|Phi^+> and |Phi^->, both in the {+, -} basis."""
    plus = st.macro_qubit(g, 0.0, DIAGONAL, tail_tol, cutoff)
    minus = st.macro_qubit(g, math.pi, DIAGONAL, tail_tol, plus.space.cutoff)
    return StatePair(plus, minus, mean_photon_number(plus))


def pole_pair(g: float, tail_tol: float = st.DEFAULT_TAIL_TOL, cutoff: int | None = None) -> StatePair:
    space = None if cutoff is None else TwoModeSpace(cutoff, HV)
    h = st.amplified_pole_state(g, "H", space, tail_tol)
    v = st.amplified_pole_state(g, "V", h.space, tail_tol)
    return StatePair(h, v, mean_photon_number(h))


def coherent_pointer_pair(alpha2: float, tail_tol: float = st.DEFAULT_TAIL_TOL, cutoff: int | None = None) -> StatePair:
    a = math.sqrt(alpha2)
    space = None if cutoff is None else TwoModeSpace(cutoff, HV)
    # the narrower of the two is fine: |alpha| and |-alpha| share a Poisson tail
    p = st.coherent_state(a, space, tail_tol)
    m = st.coherent_state(-a, p.space, tail_tol)
    return StatePair(p, m, alpha2)


def coherent_mqs_pair(alpha2: float, tail_tol: float = st.DEFAULT_TAIL_TOL, cutoff: int | None = None) -> StatePair:
    a = math.sqrt(alpha2)
    if cutoff is None:
        ce = st.coherent_mqs(a, "+", None, tail_tol).space.cutoff
        co = st.coherent_mqs(a, "-", None, tail_tol).space.cutoff
        cutoff = max(ce, co)
    space = TwoModeSpace(cutoff, HV)
    even = st.coherent_mqs(a, "+", space, tail_tol)
    odd = st.coherent_mqs(a, "-", space, tail_tol)
    return StatePair(even, odd, alpha2)


def build_pair(family: str, param: float, tail_tol: float = st.DEFAULT_TAIL_TOL, cutoff: int | None = None) -> StatePair:
    builders = {
        "equatorial-mqs": equatorial_pair,
        "pole-pair": pole_pair,
        "coherent-pointer": coherent_pointer_pair,
        "coherent-mqs": coherent_mqs_pair,
    }
    if family not in builders:
        raise ValueError(f"unknown family {family!r}; choose from {sorted(builders)}")
    return builders[family](param, tail_tol, cutoff)


def pair_distance(pair: StatePair, R: float, row_keep=None) -> FactoredFidelity:
    fa = FactoredLoss(pair.first, LossParams(R))
    fb = FactoredLoss(pair.second, LossParams(R))
    return factored_fidelity(fa, fb, row_keep)


def _map(fn, items: Sequence, threads: int) -> list:
    if threads <= 1 or len(items) < 2:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def reflectivity_for(x: float, n0: float) -> float:
    if x < 0:
        raise ValueError(f"x must be >= 0, got {x}")
    if x > n0 * (1 + 1e-12):
        raise ValueError(f"x={x} exceeds the zero-loss mean photon number {n0}")
    return min(1.0, x / n0) if n0 > 0 else 0.0


def converged_evaluation(
    build: Callable[[int | None], StatePair],
    evaluate: Callable[[StatePair], list],
    cutoff: int | None = None,
    converge: bool = True,
) -> tuple[StatePair, list, float | None]:
    """Evaluate on the tail-tolerance cutoff, then raise it until results settle.

    ``evaluate`` returns a list of :class:`FactoredFidelity`. Near D = 0 the
    square root magnifies truncation error in F, so a cutoff that holds the
    state to the tail tolerance does not by itself pin the distance down.
    The cutoff is raised in steps of :data:`CUTOFF_STEP` until no distance
    moves by more than :data:`CONVERGENCE_TOL`; the values at the larger
    cutoff are returned together with that last change. A forced ``cutoff``
    is taken as is.
    """
    pair = build(cutoff)
    vals = evaluate(pair)
    if cutoff is not None or not converge:
        return pair, vals, None
    for _ in range(MAX_CONVERGENCE_ROUNDS):
        nxt = build(pair.cutoff + CUTOFF_STEP)
        nvals = evaluate(nxt)
        delta = max((abs(a.distance - b.distance) for a, b in zip(vals, nvals)), default=0.0)
        pair, vals = nxt, nvals
        if delta < CONVERGENCE_TOL:
            return pair, vals, float(delta)
    raise TruncationError(
        f"distances still move by {delta:.2e} after raising the cutoff to {pair.cutoff}"
    )


def sweep_distance(
    family: str,
    param: float,
    x_grid: Sequence[float] | None = None,
    *,
    tail_tol: float = st.DEFAULT_TAIL_TOL,
    cutoff: int | None = None,
    threads: int = 1,
    converge: bool = True,
) -> SweepCurve:
    """Bures distance of a state pair versus mean lost photons x = R <n>_0.

    ``param`` is the gain g for the amplified families and |alpha|^2 for the
    coherent ones. See :func:`converged_evaluation` for how the cutoff is
    settled.
    """
    t0 = time.perf_counter()
    base = build_pair(family, param, tail_tol, cutoff)
    grid = default_x_grid(base.n0) if x_grid is None else np.asarray(x_grid, dtype=float)
    xs = np.sort(grid)
    Rs = [reflectivity_for(x, base.n0) for x in xs]

    def build(c):
        return base if c == cutoff or c is None else build_pair(family, param, tail_tol, c)

    def evaluate(pair):
        return _map(lambda R: pair_distance(pair, R), Rs, threads)

    pair, results, delta = converged_evaluation(build, evaluate, cutoff, converge)
    samples = [Sample(float(x), float(R), r.distance) for x, R, r in zip(xs, Rs, results)]
    key = "g" if family in ("equatorial-mqs", "pole-pair") else "alpha2"
    return SweepCurve(
        family,
        {key: float(param)},
        samples,
        meta={
            "cutoff": pair.cutoff,
            "tail_cutoff": base.cutoff,
            "convergence_delta": delta,
            "n0": base.n0,
            "tail_tol": tail_tol,
            "seconds": time.perf_counter() - t0,
        },
    )


def closed_form_curve(kind: str, alpha2: float, x_grid: Sequence[float] | None = None) -> SweepCurve:
    """Coherent reference curves evaluated from their closed forms."""
    fn = {"coherent-pointer": coherent_pointer_distance_closed, "coherent-mqs": coherent_mqs_distance_closed}[kind]
    grid = default_x_grid(alpha2) if x_grid is None else np.asarray(x_grid, dtype=float)
    samples = []
    for x in np.sort(grid):
        R = reflectivity_for(x, alpha2)
        samples.append(Sample(float(x), float(R), fn(alpha2, R)))
    return SweepCurve(kind, {"alpha2": float(alpha2)}, samples, meta={"closed_form": True})


def inflexion_points(
    xs: np.ndarray, ys: np.ndarray, rel_floor: float = 1e-9, abs_floor: float = 1e-9
) -> list[tuple[float, float]]:
    """Locations where the discrete second divided difference changes sign.

    Second differences smaller than ``rel_floor`` times the largest one, or
    than ``abs_floor``, are treated as zero and skipped, so rounding noise on a straight stretch does
    not register as a sign change. Each returned point is (x, y) at the
    sample where the new sign first appears.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    d1 = np.diff(ys) / np.diff(xs)
    mid = 0.5 * (xs[1:] + xs[:-1])
    d2 = np.diff(d1) / np.diff(mid)
    if d2.size == 0:
        return []
    floor = max(rel_floor * np.max(np.abs(d2)), abs_floor)
    out = []
    prev = 0
    for i, v in enumerate(d2):
        s = 0 if abs(v) <= floor else (1 if v > 0 else -1)
        if s == 0:
            continue
        if prev != 0 and s != prev:
            out.append((float(xs[i + 1]), float(ys[i + 1])))
        prev = s
    return out
