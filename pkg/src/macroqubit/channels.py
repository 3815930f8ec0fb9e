"""Photon loss: a beam splitter of transmittivity T on both polarization modes.

The reflected modes are traced out, which leaves the single-mode Kraus maps

    K_k |n> = sqrt(binom(n, k) T^(n-k) R^k) |n-k>,   k = 0..cutoff

applied independently to each polarization (one beam splitter on the beam
attenuates both polarizations alike).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import InvariantError
from .fock import DensityOperator, PureState, TwoModeSpace
from .linalg import block_components, hermitize

POSITIVITY_REPAIR_TOL = 1e-9


@dataclass(frozen=True)
class LossParams:
    """Reflectivity ``R`` (the lost fraction); ``T = 1 - R``."""

    R: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.R <= 1.0):
            raise ValueError(f"reflectivity must lie in [0, 1], got {self.R!r}")
        object.__setattr__(self, "R", float(self.R))

    @property
    def T(self) -> float:
        return 1.0 - self.R


def _loss(loss: LossParams | float) -> LossParams:
    return loss if isinstance(loss, LossParams) else LossParams(loss)


def kraus_weights(cutoff: int, loss: LossParams | float) -> np.ndarray:
    """W[k, n] = <n-k| K_k |n> (zero where k > n)."""
    lp = _loss(loss)
    n = np.arange(cutoff + 1)
    k = n[:, None]
    nn = n[None, :]
    valid = k <= nn
    kk = np.where(valid, k, 0)
    log_binom = gammaln(nn + 1) - gammaln(kk + 1) - gammaln(nn - kk + 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        # 0 * log(0) must read as 0 so that R=0 and T=0 are exact
        t_part = np.where(nn - kk == 0, 0.0, (nn - kk) * (math.log(lp.T) if lp.T > 0 else -np.inf))
        r_part = np.where(kk == 0, 0.0, kk * (math.log(lp.R) if lp.R > 0 else -np.inf))
        w = np.exp(0.5 * (log_binom + t_part + r_part))
    return np.where(valid, w, 0.0)


def loss_kraus(cutoff: int, loss: LossParams | float) -> list[np.ndarray]:
    """Single-mode Kraus operators K_0..K_cutoff as dense matrices."""
    W = kraus_weights(cutoff, loss)
    ops = []
    for k in range(cutoff + 1):
        K = np.zeros((cutoff + 1, cutoff + 1))
        n = np.arange(k, cutoff + 1)
        K[n - k, n] = W[k, n]
        ops.append(K)
    return ops


def _attenuate_axis(t: np.ndarray, W: np.ndarray, ket_axis: int, bra_axis: int) -> np.ndarray:
    """sum_k K_k (.) K_k^dag on one mode of a 4-index density tensor."""
    side = W.shape[0]
    out = np.zeros_like(t)
    for k in range(side):
        w = W[k, k:]
        if not np.any(w):
            continue
        src = [slice(None)] * 4
        dst = [slice(None)] * 4
        src[ket_axis] = slice(k, side)
        src[bra_axis] = slice(k, side)
        dst[ket_axis] = slice(0, side - k)
        dst[bra_axis] = slice(0, side - k)
        shape_ket = [1] * 4
        shape_bra = [1] * 4
        shape_ket[ket_axis] = side - k
        shape_bra[bra_axis] = side - k
        out[tuple(dst)] += w.reshape(shape_ket) * w.reshape(shape_bra) * t[tuple(src)]
    return out


def apply_loss(rho: DensityOperator, loss: LossParams | float, *, check: bool = True) -> DensityOperator:
    """Lossy propagation of a two-mode density operator.

    The Kraus sum is contracted one mode at a time and grouped by the number
    of photons removed, so the reflected modes are never materialized. With
    ``check`` the output spectrum is inspected: eigenvalues in [-1e-9, 0) are
    clipped (with renormalization), anything lower raises.
    """
    lp = _loss(loss)
    side = rho.space.side
    W = kraus_weights(rho.space.cutoff, lp)
    t = rho.matrix.reshape(side, side, side, side)  # [n, m, n', m']
    t = _attenuate_axis(t, W, 0, 2)
    t = _attenuate_axis(t, W, 1, 3)
    mat = hermitize(t.reshape(rho.space.dim, rho.space.dim))
    mat /= np.trace(mat).real
    if check:
        mat = _repair_positivity(mat)
    return DensityOperator(rho.space, mat)


def _repair_positivity(mat: np.ndarray) -> np.ndarray:
    repaired = False
    out = mat.copy()
    for b in block_components(mat):
        sub = mat[np.ix_(b, b)]
        w, v = np.linalg.eigh(sub)
        if w[0] < -POSITIVITY_REPAIR_TOL:
            raise InvariantError(f"lossy state has eigenvalue {w[0]:.3e}; channel output is not positive")
        if w[0] < 0:
            w = np.clip(w, 0.0, None)
            out[np.ix_(b, b)] = (v * w) @ v.conj().T
            repaired = True
    if repaired:
        out = hermitize(out)
        out /= np.trace(out).real
    return out


def lossy_factor(psi: PureState, loss: LossParams | float) -> np.ndarray:
    """Columns ``(K_k (x) K_l) psi / ||psi||`` for all nonzero (k, l).

    The returned ``F`` satisfies ``apply_loss(|psi><psi|) = F F^dag``. Each
    column is the conditional (unnormalized) output given that k and l photons
    were lost from the two modes.
    """
    return FactoredLoss(psi, loss).dense()


def lossy_density(psi: PureState, loss: LossParams | float) -> DensityOperator:
    return FactoredLoss(psi, loss).density()


def lost_photon_mean(space: TwoModeSpace, rho: DensityOperator, loss: LossParams | float) -> float:
    """Mean number of photons reflected away, R <n>."""
    return _loss(loss).R * float(np.dot(np.diag(rho.matrix).real, space.total))


class FactoredLoss:
    """Lossy output of a pure state, kept as ``rho = F F^dag``.

    Columns are indexed by the photon numbers (k, l) removed from the two
    modes. The rows touched by one column all differ by vectors of the
    lattice spanned by differences of the input support, so the factor
    splits into coset blocks that can be materialized one at a time.
    """

    def __init__(self, psi: PureState, loss: LossParams | float):
        self.loss = _loss(loss)
        self.space = psi.space
        c = psi.space.cutoff
        self.grid = psi.grid() / psi.norm
        self.W = kraus_weights(c, self.loss)
        supp = self.grid != 0
        wnz = (self.W != 0).astype(np.int64)
        live = (wnz @ supp.astype(np.int64) @ wnz.T) > 0
        self.cols = np.argwhere(live)  # (k, l) pairs with a nonzero column
        pts = np.argwhere(supp)
        self.anchor = pts[0] if len(pts) else np.zeros(2, dtype=np.int64)
        self.generators = pts - self.anchor
        # rows reachable from some support point by removing photons
        down = np.flip(np.logical_or.accumulate(np.logical_or.accumulate(np.flip(supp), axis=0), axis=1))
        self.rows = np.argwhere(down)

    def column_points(self) -> np.ndarray:
        """One representative row point per column (anchor minus the loss)."""
        return self.anchor[None, :] - self.cols

    def block(self, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        """Dense sub-factor for row points ``rows`` and column pairs ``cols``."""
        c = self.space.cutoff
        a, b = rows[:, 0][:, None], rows[:, 1][:, None]
        k, l = cols[:, 0][None, :], cols[:, 1][None, :]
        N, M = a + k, b + l
        ok = (N <= c) & (M <= c)
        Nc, Mc = np.where(ok, N, 0), np.where(ok, M, 0)
        vals = self.W[np.broadcast_to(k, Nc.shape), Nc] * self.W[np.broadcast_to(l, Mc.shape), Mc]
        vals = vals * self.grid[Nc, Mc]
        return np.where(ok, vals, 0.0)

    def dense(self) -> np.ndarray:
        """The full factor, rows in storage order (small spaces only)."""
        side = self.space.side
        all_rows = np.array([(n, m) for n in range(side) for m in range(side)])
        return self.block(all_rows, self.cols)

    def density(self) -> DensityOperator:
        F = self.dense()
        return DensityOperator(self.space, hermitize(F @ F.conj().T))
