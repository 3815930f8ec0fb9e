"""Dense Hermitian helpers shared by the channel and metric code.

Lossy macro-states are block diagonal in photon-number parity (or in the
photon-number difference), and the fidelity of block-diagonal pairs is the
sum over blocks. Splitting on the exact sparsity pattern before any
eigendecomposition turns one O(d^3) problem into several much smaller ones.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.sparse import coo_array
from scipy.sparse.csgraph import connected_components


def block_components(*matrices: np.ndarray) -> list[np.ndarray]:
    """Index sets of the connected blocks of the union sparsity pattern.

    Indices whose rows and columns are zero in every matrix are dropped.
    """
    pattern = np.zeros(matrices[0].shape, dtype=bool)
    for mat in matrices:
        pattern |= mat != 0
    active = np.flatnonzero(pattern.any(axis=0) | pattern.any(axis=1))
    if active.size == 0:
        return []
    sub = pattern[np.ix_(active, active)]
    r, c = np.nonzero(sub)
    graph = coo_array((np.ones(r.size), (r, c)), shape=sub.shape)
    ncomp, labels = connected_components(graph, directed=False)
    order = np.argsort(labels, kind="stable")
    splits = np.flatnonzero(np.diff(labels[order])) + 1
    return [active[g] for g in np.split(order, splits)]


def factor_components(*factors: np.ndarray) -> list[tuple[np.ndarray, list[np.ndarray]]]:
    """Blocks shared by several column factors ``rho_i = F_i F_i^dag``.

    Returns ``(rows, [cols_0, cols_1, ...])`` for each connected component of
    the bipartite row/column support graph. Zero columns are discarded.
    """
    d = factors[0].shape[0]
    offsets = [d]
    for f in factors:
        offsets.append(offsets[-1] + f.shape[1])
    rr, cc = [], []
    for f, off in zip(factors, offsets):
        r, c = np.nonzero(f)
        rr.append(r)
        cc.append(c + off)
    r = np.concatenate(rr)
    c = np.concatenate(cc)
    total = offsets[-1]
    graph = coo_array((np.ones(r.size), (r, c)), shape=(total, total))
    _, labels = connected_components(graph, directed=False)

    used = np.zeros(total, dtype=bool)
    used[r] = True
    used[c] = True
    out = []
    for lab in np.unique(labels[used]):
        members = np.flatnonzero((labels == lab) & used)
        rows = members[members < d]
        cols = [
            members[(members >= lo) & (members < hi)] - lo
            for lo, hi in zip(offsets[:-1], offsets[1:])
        ]
        out.append((rows, cols))
    return out


def psd_sqrt(mat: np.ndarray, clip: float = 1e-10) -> np.ndarray:
    """Square root of a Hermitian positive semidefinite matrix.

    Eigenvalues in [-clip, 0) are treated as zero; anything more negative is a
    caller bug and raises.
    """
    w, v = np.linalg.eigh(mat)
    if w.size and w[0] < -clip:
        raise ValueError(f"matrix has eigenvalue {w[0]:.3e} below -{clip:.0e}")
    w = np.sqrt(np.clip(w, 0.0, None))
    return (v * w) @ v.conj().T


def hermitize(mat: np.ndarray) -> np.ndarray:
    return 0.5 * (mat + mat.conj().T)


def _hnf2(vectors: np.ndarray) -> np.ndarray:
    """Row basis (at most 2 rows) of the integer lattice spanned by 2-vectors."""
    basis = []
    # column-style Euclid on the first coordinate, then on the second
    vecs = [tuple(int(x) for x in v) for v in vectors if v[0] != 0 or v[1] != 0]
    pivot = None
    rest = []
    for v in vecs:
        if v[0] == 0:
            rest.append(v)
            continue
        if pivot is None:
            pivot = v
            continue
        a, b = pivot, v
        while b[0] != 0:
            q = a[0] // b[0]
            a, b = b, (a[0] - q * b[0], a[1] - q * b[1])
        pivot = a
        rest.append(b)
    g = 0
    for v in rest:
        g = math.gcd(g, abs(v[1]))
    if pivot is not None:
        if pivot[0] < 0:
            pivot = (-pivot[0], -pivot[1])
        if g:
            pivot = (pivot[0], pivot[1] % g)
        basis.append(pivot)
    if g:
        basis.append((0, g))
    return np.array(basis, dtype=np.int64).reshape(-1, 2)


def coset_labels(points: np.ndarray, generators: np.ndarray) -> np.ndarray:
    """Label integer points by their coset modulo the lattice of ``generators``.

    Points sharing a label differ by a lattice vector. Returns an int64 array.
    """
    pts = np.asarray(points, dtype=np.int64).reshape(-1, 2)
    basis = _hnf2(np.asarray(generators, dtype=np.int64).reshape(-1, 2))
    n, m = pts[:, 0], pts[:, 1]
    big = 1 << 20
    if basis.shape[0] == 0:
        return n * big + m
    if basis.shape[0] == 2:
        (a, b), (_, d) = basis
        t = np.floor_divide(n, a)
        return np.mod(n, a) * big + np.mod(m - t * b, d)
    p, q = basis[0]
    if p == 0:
        # lattice is (0, q) Z
        return n * big + np.mod(m, q)
    g0 = math.gcd(abs(int(p)), abs(int(q)))
    pp, qq = p // g0, q // g0
    # r1 - r2 in Z (p, q)  <=>  same transverse coordinate and step divisible by g0
    transverse = qq * n - pp * m
    _, x, y = _egcd(int(pp), int(qq))
    along = np.mod(n * x + m * y, g0)
    return transverse * big + along


def _egcd(a: int, b: int) -> tuple[int, int, int]:
    if b == 0:
        return (abs(a), 1 if a >= 0 else -1, 0)
    g, x, y = _egcd(b, a % b)
    return g, y, x - (a // b) * y
