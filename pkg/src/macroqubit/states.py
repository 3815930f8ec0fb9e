"""Closed-form state families.

Every constructor first evaluates its analytic expansion on a grid wide
enough that the omitted weight is below 1e-30, then keeps the shells with
``n + m <= cutoff``. When no space is given the cutoff is the smallest one
whose truncation loses less than ``tail_tol`` of the norm; when a space is
given its cutoff is checked against the same rule.

Amplitudes are never rescaled after truncation, so a truncated expansion is
short of unit norm by at most ``tail_tol``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.special import gammaln

from .errors import IncompatibleSpaceError, InvariantError, NormalizationError, TruncationError
from .fock import (
    DIAGONAL,
    HV,
    PolarizationBasis,
    PureState,
    TwoModeSpace,
    change_basis,
    equatorial_basis,
    smallest_cutoff,
    tail_norm_deficit,
)

DEFAULT_TAIL_TOL = 1e-8
# Weight left outside the analytic evaluation grid.
_NEGLIGIBLE_LOG = math.log(1e-34)
_MAX_GRID = 6000


@dataclass(frozen=True)
class GainParams:
    g: float

    def __post_init__(self) -> None:
        if not (self.g >= 0 and math.isfinite(self.g)):
            raise ValueError(f"gain must be finite and >= 0, got {self.g!r}")
        object.__setattr__(self, "g", float(self.g))

    @property
    def C(self) -> float:
        return math.cosh(self.g)

    @property
    def Gamma(self) -> float:
        return math.tanh(self.g)


def _gain(g: float | GainParams) -> GainParams:
    return g if isinstance(g, GainParams) else GainParams(g)


def _geometric_terms(gamma: float) -> int:
    """Number of powers of gamma^2 needed before the series is negligible."""
    if gamma == 0.0:
        return 1
    # terms decay like Gamma^(2i) times a slowly growing prefactor
    n = int(math.ceil(_NEGLIGIBLE_LOG / (2.0 * math.log(gamma)))) + 40
    if 2 * n + 2 > _MAX_GRID:
        raise TruncationError(f"Gamma={gamma:.6f} needs a grid beyond {_MAX_GRID} photons")
    return n


def _finish(
    grid: np.ndarray,
    space: TwoModeSpace | None,
    basis: PolarizationBasis,
    tail_tol: float,
    *,
    renormalize: bool = False,
) -> PureState:
    """Truncate an analytic amplitude grid onto a space chosen or checked by the tail rule."""
    side = grid.shape[0]
    n = np.arange(side)
    total = n[:, None] + n[None, :]
    weights = np.abs(grid) ** 2
    norm2 = weights.sum()
    if renormalize:
        grid = grid / math.sqrt(norm2)
        weights = weights / norm2
    elif abs(norm2 - 1.0) > 1e-12:
        raise InvariantError(f"analytic expansion sums to {norm2!r}, not 1")
    shells = np.bincount(total.ravel(), weights=weights.ravel(), minlength=2 * side - 1)
    if space is None:
        space = TwoModeSpace(smallest_cutoff(shells, tail_tol), basis)
    else:
        if space.basis != basis:
            raise IncompatibleSpaceError(f"state is built in basis {basis}, space has {space.basis}")
        deficit = tail_norm_deficit(shells)
        lost = deficit[space.cutoff] if space.cutoff < deficit.size else 0.0
        if lost >= tail_tol:
            raise TruncationError(
                f"cutoff {space.cutoff} loses {lost:.3e} of the norm (tolerance {tail_tol:.1e})"
            )
    c = space.cutoff
    k = min(side, c + 1)
    out = np.zeros((c + 1, c + 1), dtype=complex)
    keep = total[:k, :k] <= c
    out[:k, :k][keep] = grid[:k, :k][keep]
    return PureState(space, out.ravel())


def amplified_pole_state(
    gain: float | GainParams,
    pole: Literal["H", "V"] = "H",
    space: TwoModeSpace | None = None,
    tail_tol: float = DEFAULT_TAIL_TOL,
) -> PureState:
    """Amplifier output for a single H or V photon, in the {H, V} basis.

    ``C^-2 sum_i Gamma^i sqrt(i+1) |(i+1) pi, i pi_perp>``.
    """
    gp = _gain(gain)
    if pole not in ("H", "V"):
        raise ValueError(f"pole must be 'H' or 'V', got {pole!r}")
    nterms = _geometric_terms(gp.Gamma)
    i = np.arange(nterms)
    if gp.Gamma > 0:
        amp = np.exp(-2.0 * math.log(gp.C) + i * math.log(gp.Gamma) + 0.5 * np.log(i + 1.0))
    else:
        amp = (i == 0).astype(float)
    grid = np.zeros((nterms + 1, nterms + 1), dtype=complex)
    if pole == "H":
        grid[i + 1, i] = amp
    else:
        grid[i, i + 1] = amp
    return _finish(grid, space, HV, tail_tol)


def equatorial_amplitudes(gain: float | GainParams, phi: float, nmax_pairs: int) -> np.ndarray:
    """gamma_ij for 0 <= i, j < nmax_pairs, as a complex array [i, j]."""
    gp = _gain(gain)
    i = np.arange(nmax_pairs)
    if gp.Gamma == 0.0:
        mod = np.zeros((nmax_pairs, nmax_pairs))
        mod[0, 0] = 1.0
    else:
        lg_i = i * math.log(gp.Gamma / 2.0) + 0.5 * gammaln(2 * i + 2) - gammaln(i + 1)
        lg_j = i * math.log(gp.Gamma / 2.0) + 0.5 * gammaln(2 * i + 1) - gammaln(i + 1)
        mod = np.exp(lg_i[:, None] + lg_j[None, :] - 2.0 * math.log(gp.C))
    # (exp(-i phi) Gamma)^i (-exp(i phi) Gamma)^j, moduli already taken
    phase = np.exp(-1j * phi * i)[:, None] * ((-1.0) ** i * np.exp(1j * phi * i))[None, :]
    return mod * phase


def amplified_equatorial_state(
    gain: float | GainParams,
    phi: float,
    space: TwoModeSpace | None = None,
    tail_tol: float = DEFAULT_TAIL_TOL,
) -> PureState:
    """Amplifier output for an equatorial photon, in its own basis {phi, phi_perp}.

    Amplitude ``gamma_ij`` sits on ``|2i+1, 2j>``.
    """
    gp = _gain(gain)
    nterms = _geometric_terms(gp.Gamma)
    gam = equatorial_amplitudes(gp, phi, nterms)
    grid = np.zeros((2 * nterms + 1, 2 * nterms + 1), dtype=complex)
    grid[1::2, 0:-1:2] = gam
    return _finish(grid, space, equatorial_basis(phi), tail_tol)


def macro_qubit(
    gain: float | GainParams,
    phi: float,
    basis: PolarizationBasis = DIAGONAL,
    tail_tol: float = DEFAULT_TAIL_TOL,
    cutoff: int | None = None,
) -> PureState:
    """Equatorial macro-state for injection phase ``phi``, expressed in ``basis``.

    The cutoff rule is applied in the state's own basis; total photon number
    is basis independent, so the truncation carries over exactly.
    """
    own = equatorial_basis(phi)
    space = None if cutoff is None else TwoModeSpace(cutoff, own)
    psi = amplified_equatorial_state(gain, own.phase, space, tail_tol)
    return change_basis(psi, basis)


def mqs_superposition(a: PureState, b: PureState, relative: complex = 1j) -> PureState:
    """Normalized ``a + relative * b``; ``relative`` is +i or -i."""
    a.space.require_same(b.space)
    if not (abs(relative - 1j) < 1e-15 or abs(relative + 1j) < 1e-15):
        raise ValueError(f"relative phase must be +i or -i, got {relative!r}")
    vec = a.amplitudes / a.norm + relative * (b.amplitudes / b.norm)
    nrm = np.linalg.norm(vec)
    if nrm < 1e-12:
        raise NormalizationError("components cancel; superposition is null")
    return PureState(a.space, vec / nrm)


def _poisson_terms(mean: float) -> int:
    """Photon number beyond which the Poisson(mean) tail is negligible."""
    n = int(mean + 20.0 * math.sqrt(mean) + 60)
    while n < _MAX_GRID:
        logp = -mean + n * math.log(mean) - math.lgamma(n + 1) if mean > 0 else -math.inf
        if logp < _NEGLIGIBLE_LOG:
            return n
        n += 50
    raise TruncationError(f"|alpha|^2 = {mean} needs a grid beyond {_MAX_GRID} photons")


def _coherent_column(alpha: complex, nmax: int) -> np.ndarray:
    n = np.arange(nmax + 1)
    if alpha == 0:
        return (n == 0).astype(complex)
    r = abs(alpha)
    log_mod = -0.5 * r * r + n * math.log(r) - 0.5 * gammaln(n + 1)
    return np.exp(log_mod) * np.exp(1j * np.angle(alpha) * n)


def coherent_state(
    alpha: complex,
    space: TwoModeSpace | None = None,
    tail_tol: float = DEFAULT_TAIL_TOL,
) -> PureState:
    """Glauber state ``|alpha>`` in mode 1, mode 2 in vacuum."""
    nmax = _poisson_terms(abs(alpha) ** 2)
    grid = np.zeros((nmax + 1, nmax + 1), dtype=complex)
    grid[:, 0] = _coherent_column(complex(alpha), nmax)
    basis = space.basis if space is not None else HV
    return _finish(grid, space, basis, tail_tol)


def coherent_mqs(
    alpha: complex,
    sign: Literal["+", "-"] = "+",
    space: TwoModeSpace | None = None,
    tail_tol: float = DEFAULT_TAIL_TOL,
) -> PureState:
    """Even (``+``) or odd (``-``) cat ``|alpha> +- |-alpha>``, normalized numerically.

    The odd cat tends to the one-photon state as alpha -> 0.
    """
    if sign not in ("+", "-"):
        raise ValueError(f"sign must be '+' or '-', got {sign!r}")
    alpha = complex(alpha)
    nmax = _poisson_terms(abs(alpha) ** 2)
    n = np.arange(nmax + 1)
    keep = (n % 2 == 0) if sign == "+" else (n % 2 == 1)
    col = np.zeros(nmax + 1, dtype=complex)
    if abs(alpha) < 1e-8:
        col[0 if sign == "+" else 1] = 1.0
    else:
        # |alpha> +- |-alpha> doubles one parity and cancels the other
        col[keep] = 2.0 * _coherent_column(alpha, nmax)[keep]
    grid = np.zeros((nmax + 1, nmax + 1), dtype=complex)
    grid[:, 0] = col
    basis = space.basis if space is not None else HV
    return _finish(grid, space, basis, tail_tol, renormalize=True)


def equatorial_shell_weights(gain: float | GainParams) -> np.ndarray:
    """Total-photon distribution of the equatorial macro-state (phase independent)."""
    gp = _gain(gain)
    nterms = _geometric_terms(gp.Gamma)
    w = np.abs(equatorial_amplitudes(gp, 0.0, nterms)) ** 2
    i = np.arange(nterms)
    total = (2 * i + 1)[:, None] + (2 * i)[None, :]
    return np.bincount(total.ravel(), weights=w.ravel())


def equatorial_cutoff(gain: float | GainParams, tail_tol: float = DEFAULT_TAIL_TOL) -> int:
    return smallest_cutoff(equatorial_shell_weights(gain), tail_tol)
