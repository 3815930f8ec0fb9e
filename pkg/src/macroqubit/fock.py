"""Truncated two-mode Fock space.

Basis states ``|n, m>`` (``n`` photons in the first polarization mode, ``m``
in the second) are stored row-major with ``n`` outer, so the flat index of
``|n, m>`` is ``n * (cutoff + 1) + m``.

States built by the constructors in :mod:`macroqubit.states` are truncated on
total photon number, ``n + m <= cutoff``. On that triangle every passive
polarization transformation acts exactly, which is what makes changes of
polarization basis trustworthy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Union

import numpy as np
import scipy.sparse as sp

from .errors import (
    CutoffError,
    IncompatibleSpaceError,
    InvariantError,
    NormalizationError,
    TruncationError,
)

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class PolarizationBasis:
    """Which pair of orthogonal polarizations the two modes carry.

    ``phase is None`` means the pole basis {H, V}. Otherwise the pair is the
    equatorial basis {phi, phi_perp} with Jones vectors (in H, V components)

        e_phi      = (1, exp(i phi)) / sqrt(2)
        e_phi_perp = (exp(-i phi), -1) / sqrt(2)

    The phase attached to ``e_phi_perp`` is the one under which the
    amplifier Hamiltonian reads ``(i chi / 2) exp(-i phi)
    (a_phi^2 - exp(2 i phi) a_perp^2)^dagger + h.c.``.
    """

    name: str
    phase: float | None = None

    def vectors(self) -> np.ndarray:
        """2x2 matrix whose columns are the mode Jones vectors in H, V components."""
        if self.phase is None:
            return np.eye(2, dtype=complex)
        e = np.exp(1j * self.phase)
        return np.array([[1.0, 1.0 / e], [e, -1.0]], dtype=complex) / math.sqrt(2.0)

    @property
    def is_equatorial(self) -> bool:
        return self.phase is not None

    def __str__(self) -> str:
        return self.name


def equatorial_basis(phi: float) -> PolarizationBasis:
    """Equatorial basis {phi, phi_perp}; ``phi`` is reduced mod 2 pi."""
    phi = float(phi) % TWO_PI
    if math.isclose(phi, TWO_PI, abs_tol=1e-15):
        phi = 0.0
    for name, ref in (("+-", 0.0), ("RL", math.pi / 2), ("-+", math.pi), ("LR", 1.5 * math.pi)):
        if abs(phi - ref) < 1e-14:
            return PolarizationBasis(name, ref)
    return PolarizationBasis(f"phi={phi:.15g}", phi)


HV = PolarizationBasis("HV")
DIAGONAL = equatorial_basis(0.0)
CIRCULAR = equatorial_basis(math.pi / 2)


@dataclass(frozen=True)
class TwoModeSpace:
    """Two bosonic modes, each truncated at ``cutoff`` photons."""

    cutoff: int
    basis: PolarizationBasis = HV

    def __post_init__(self) -> None:
        if int(self.cutoff) != self.cutoff or self.cutoff < 0:
            raise CutoffError(f"cutoff must be a nonnegative integer, got {self.cutoff!r}")
        object.__setattr__(self, "cutoff", int(self.cutoff))

    @property
    def dim(self) -> int:
        return (self.cutoff + 1) ** 2

    @property
    def side(self) -> int:
        return self.cutoff + 1

    def index(self, n: int, m: int) -> int:
        if not (0 <= n <= self.cutoff and 0 <= m <= self.cutoff):
            raise CutoffError(f"|{n},{m}> is outside a space with cutoff {self.cutoff}")
        return n * (self.cutoff + 1) + m

    def pairs(self) -> list[tuple[int, int]]:
        """All (n, m) in storage order."""
        c = self.cutoff
        return [(n, m) for n in range(c + 1) for m in range(c + 1)]

    @cached_property
    def n1(self) -> np.ndarray:
        """Photon number of mode 1 for every flat index."""
        return np.repeat(np.arange(self.side), self.side)

    @cached_property
    def n2(self) -> np.ndarray:
        """Photon number of mode 2 for every flat index."""
        return np.tile(np.arange(self.side), self.side)

    @cached_property
    def total(self) -> np.ndarray:
        return self.n1 + self.n2

    def with_basis(self, basis: PolarizationBasis) -> "TwoModeSpace":
        return TwoModeSpace(self.cutoff, basis)

    def require_same(self, other: "TwoModeSpace") -> None:
        if self != other:
            raise IncompatibleSpaceError(f"space mismatch: {self} vs {other}")


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class PureState:
    space: TwoModeSpace
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        amps = _frozen(self.amplitudes).reshape(-1)
        if amps.shape != (self.space.dim,):
            raise IncompatibleSpaceError(
                f"expected {self.space.dim} amplitudes, got {amps.shape[0]}"
            )
        object.__setattr__(self, "amplitudes", amps)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def grid(self) -> np.ndarray:
        """Amplitudes as a (cutoff+1, cutoff+1) array indexed [n, m]."""
        return self.amplitudes.reshape(self.space.side, self.space.side)

    def normalized(self) -> "PureState":
        nrm = self.norm
        if nrm == 0.0:
            raise NormalizationError("cannot normalize the zero vector")
        return PureState(self.space, self.amplitudes / nrm)

    def amplitude(self, n: int, m: int) -> complex:
        return complex(self.amplitudes[self.space.index(n, m)])


@dataclass(frozen=True)
class DensityOperator:
    """Hermitian, unit-trace matrix. Positivity is checked on demand."""

    space: TwoModeSpace
    matrix: np.ndarray = field(repr=False)

    HERMITIAN_TOL = 1e-12
    TRACE_TOL = 1e-10
    POSITIVITY_TOL = 1e-10

    def __post_init__(self) -> None:
        mat = _frozen(self.matrix)
        d = self.space.dim
        if mat.shape != (d, d):
            raise IncompatibleSpaceError(f"expected a {d}x{d} matrix, got {mat.shape}")
        herm = np.max(np.abs(mat - mat.conj().T)) if d else 0.0
        if herm > self.HERMITIAN_TOL:
            raise InvariantError(f"matrix is not Hermitian (max deviation {herm:.3e})")
        tr = np.trace(mat).real
        if abs(tr - 1.0) > self.TRACE_TOL:
            raise InvariantError(f"trace is {tr!r}, expected 1")
        object.__setattr__(self, "matrix", mat)

    def eigenvalues(self) -> np.ndarray:
        """Spectrum, computed block by block over the sparsity components."""
        from .linalg import block_components

        vals = [np.linalg.eigvalsh(self.matrix[np.ix_(b, b)]) for b in block_components(self.matrix)]
        return np.sort(np.concatenate(vals)) if vals else np.zeros(0)

    def min_eigenvalue(self) -> float:
        return float(self.eigenvalues()[0])

    def check_positive(self, tol: float = POSITIVITY_TOL) -> None:
        lo = self.min_eigenvalue()
        if lo < -tol:
            raise InvariantError(f"minimum eigenvalue {lo:.3e} below -{tol:.0e}")

    def purity(self) -> float:
        return float(np.vdot(self.matrix, self.matrix).real)


@dataclass(frozen=True)
class ModeUnitary:
    """Unitary 2x2 map on the mode creation operators, a_i^dag -> sum_j u[j, i] a_j^dag."""

    u: np.ndarray

    TOL = 1e-12

    def __post_init__(self) -> None:
        u = _frozen(self.u)
        if u.shape != (2, 2):
            raise InvariantError(f"mode unitary must be 2x2, got {u.shape}")
        dev = np.max(np.abs(u.conj().T @ u - np.eye(2)))
        if dev > self.TOL:
            raise InvariantError(f"u is not unitary (max |u^dag u - 1| = {dev:.3e})")
        object.__setattr__(self, "u", u)

    def __matmul__(self, other: "ModeUnitary") -> "ModeUnitary":
        return ModeUnitary(self.u @ other.u)

    @classmethod
    def basis_change(cls, source: PolarizationBasis, target: PolarizationBasis) -> "ModeUnitary":
        """Rewrites source-basis creation operators in the target basis.

        Entries below 1e-15 are rounding residue of exactly vanishing
        overlaps (e.g. between {+,-} and {-,+}) and are zeroed so the rotated
        state keeps its exact support.
        """
        u = target.vectors().conj().T @ source.vectors()
        u.real[np.abs(u.real) < 1e-15] = 0.0
        u.imag[np.abs(u.imag) < 1e-15] = 0.0
        return cls(u)

    @classmethod
    def swap(cls) -> "ModeUnitary":
        return cls(np.array([[0, 1], [1, 0]], dtype=complex))


def number_state(space: TwoModeSpace, n: int, m: int) -> PureState:
    amps = np.zeros(space.dim, dtype=complex)
    amps[space.index(n, m)] = 1.0
    return PureState(space, amps)


def inner_product(a: PureState, b: PureState) -> complex:
    """<a|b>, conjugate-linear in the first argument."""
    a.space.require_same(b.space)
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def density_from_pure(psi: PureState, tol: float = 1e-8) -> DensityOperator:
    """Projector onto ``psi``.

    States truncated from an infinite expansion are short of unit norm by at
    most their tail tolerance; the projector is divided by the squared norm so
    the result has unit trace regardless.
    """
    nrm = psi.norm
    if abs(nrm - 1.0) > tol:
        raise NormalizationError(f"state norm {nrm!r} differs from 1 by more than {tol:.0e}")
    v = psi.amplitudes / nrm
    return DensityOperator(psi.space, np.outer(v, v.conj()))


def symmetric_power_blocks(u: ModeUnitary | np.ndarray, nmax: int) -> list[np.ndarray]:
    """Action of a two-mode passive transformation on each photon-number shell.

    Block ``N`` is an (N+1)x(N+1) unitary on the shell basis ``|p, N-p>``
    (``p = 0..N``). Writing ``|n, N-n>`` as ``(sqrt(n) a1^dag |n-1, N-n> +
    sqrt(N-n) a2^dag |n, N-n-1>) / N`` and projecting the same way on the
    left expresses every entry of block N through four entries of block N-1
    with weights whose squares sum to one. That keeps rounding errors from
    growing with N; building columns by repeated creation alone does not,
    and loses unitarity beyond a few dozen photons.
    """
    m = u.u if isinstance(u, ModeUnitary) else np.asarray(u, dtype=complex)
    blocks = [np.ones((1, 1), dtype=complex)]
    for N in range(1, nmax + 1):
        prev = blocks[-1]
        k = np.arange(N + 1, dtype=float)
        sp_ = np.sqrt(k)  # sqrt(p): a mode-1 photon is removed
        sq = np.sqrt(N - k)  # sqrt(N - p): a mode-2 photon is removed
        blk = np.zeros((N + 1, N + 1), dtype=complex)
        blk[1:, 1:] += m[0, 0] * prev * np.outer(sp_[1:], sp_[1:])
        blk[:-1, 1:] += m[1, 0] * prev * np.outer(sq[:-1], sp_[1:])
        blk[1:, :-1] += m[0, 1] * prev * np.outer(sp_[1:], sq[:-1])
        blk[:-1, :-1] += m[1, 1] * prev * np.outer(sq[:-1], sq[:-1])
        blocks.append(blk / N)
    return blocks


def _shell_indices(space: TwoModeSpace, N: int) -> np.ndarray:
    p = np.arange(N + 1)
    return p * space.side + (N - p)


def lift_mode_unitary(space: TwoModeSpace, u: ModeUnitary) -> sp.csr_array:
    """Fock-space operator of a passive polarization transformation.

    Exact on every shell with ``n + m <= cutoff``. Shells above the cutoff are
    only partially represented in the truncated space; the lift acts as the
    identity there, which keeps the result unitary and the map a group
    homomorphism. States from :mod:`macroqubit.states` never populate them.
    """
    if not isinstance(u, ModeUnitary):
        u = ModeUnitary(np.asarray(u))
    c = space.cutoff
    rows, cols, vals = [], [], []
    for N, blk in enumerate(symmetric_power_blocks(u, c)):
        idx = _shell_indices(space, N)
        r, q = np.meshgrid(idx, idx, indexing="ij")
        rows.append(r.ravel())
        cols.append(q.ravel())
        vals.append(blk.ravel())
    above = np.flatnonzero(space.total > c)
    rows.append(above)
    cols.append(above)
    vals.append(np.ones(above.size, dtype=complex))
    return sp.csr_array(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(space.dim, space.dim),
    )


def apply_mode_unitary(psi: PureState, u: ModeUnitary, target: TwoModeSpace | None = None) -> PureState:
    """Apply a passive transformation shell by shell.

    The state must have no weight above the total-photon cutoff.
    """
    space = psi.space
    above = space.total > space.cutoff
    if np.any(psi.amplitudes[above] != 0):
        raise TruncationError("state populates shells above the cutoff; rotation is not exact there")
    out = np.zeros(space.dim, dtype=complex)
    for N, blk in enumerate(symmetric_power_blocks(u, space.cutoff)):
        idx = _shell_indices(space, N)
        out[idx] = blk @ psi.amplitudes[idx]
    return PureState(target or space, out)


def change_basis(psi: PureState, basis: PolarizationBasis) -> PureState:
    """Re-express ``psi`` in another polarization basis."""
    if basis == psi.space.basis:
        return psi
    u = ModeUnitary.basis_change(psi.space.basis, basis)
    return apply_mode_unitary(psi, u, psi.space.with_basis(basis))


State = Union[PureState, DensityOperator]


def mean_photon_number(state: State) -> float:
    """Total photon number <n1 + n2>."""
    tot = state.space.total
    if isinstance(state, PureState):
        w = np.abs(state.amplitudes) ** 2
        return float(np.dot(w, tot) / w.sum())
    return float(np.dot(np.diag(state.matrix).real, tot))


def mode_photon_numbers(state: State) -> tuple[float, float]:
    """(<n1>, <n2>) separately."""
    if isinstance(state, PureState):
        w = np.abs(state.amplitudes) ** 2
        w = w / w.sum()
    else:
        w = np.diag(state.matrix).real
    return float(np.dot(w, state.space.n1)), float(np.dot(w, state.space.n2))


def tail_norm_deficit(shell_weights: np.ndarray) -> np.ndarray:
    """1 - ||psi truncated at n+m <= c|| for every c, from per-shell weights.

    ``shell_weights[N]`` is the squared weight of the unit vector on shell N;
    the array must extend far enough that what it omits is negligible.
    """
    w = np.asarray(shell_weights, dtype=float)
    beyond = np.concatenate([np.cumsum(w[::-1])[::-1][1:], [0.0]])
    beyond = np.clip(beyond, 0.0, 1.0)
    return beyond / (1.0 + np.sqrt(1.0 - beyond))


def smallest_cutoff(shell_weights: np.ndarray, tail_tol: float) -> int:
    """Smallest cutoff whose truncation loses less than ``tail_tol`` of the norm."""
    deficit = tail_norm_deficit(shell_weights)
    ok = np.flatnonzero(deficit < tail_tol)
    if ok.size == 0:
        raise TruncationError(f"no cutoff up to {len(deficit) - 1} reaches tail tolerance {tail_tol:.1e}")
    return int(ok[0])
