"""Sparse symmetric helpers: inertia counting and small-end generalized eigenvalues."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import EigenFailed, FactorizationBreakdown

DENSE_LIMIT = 2000


@dataclass(frozen=True)
class Inertia:
    negative: int
    zero: int
    positive: int
    method: str


def _inertia_superlu(K):
    """Signs of the pivots of a symmetric-permutation LU (diagonal pivoting only)."""
    lu = spla.splu(K.tocsc(), permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                   options={"SymmetricMode": True})
    if not np.array_equal(lu.perm_r, lu.perm_c):
        return None
    d = lu.U.diagonal()
    scale = np.max(np.abs(d)) if d.size else 1.0
    tiny = np.abs(d) <= 1e-14 * scale
    if np.any(tiny):
        raise FactorizationBreakdown(f"{int(tiny.sum())} near-zero pivots")
    return Inertia(int(np.sum(d < 0)), 0, int(np.sum(d > 0)), "superlu-ldl")


def _inertia_dense_ldl(K):
    _, D, _ = sla.ldl(K.toarray() if sp.issparse(K) else np.asarray(K))
    # D is block diagonal with 1x1 and 2x2 blocks; its eigenvalues carry the inertia
    ev = np.linalg.eigvalsh(D)
    scale = np.max(np.abs(ev)) if ev.size else 1.0
    zero = np.abs(ev) <= 1e-14 * scale
    return Inertia(int(np.sum((ev < 0) & ~zero)), int(zero.sum()), int(np.sum((ev > 0) & ~zero)), "dense-ldl")


def inertia(K, regularize=1e-12):
    """Inertia of a symmetric sparse matrix by Sylvester's law.

    Tries a sparse factorization with symmetric pivoting, then a dense
    Bunch-Kaufman LDL^T.  On a breakdown (singular pivot) the matrix is
    shifted by ``+-regularize * ||K||``; if both shifts agree the count is
    returned, otherwise FactorizationBreakdown is raised with both counts.
    """
    K = sp.csc_matrix(K)
    try:
        res = _inertia_superlu(K)
        if res is not None:
            return res
    except (RuntimeError, FactorizationBreakdown):
        pass
    if K.shape[0] <= 20000:
        res = _inertia_dense_ldl(K)
        if res.zero == 0:
            return res
    norm = spla.norm(K, 1)
    counts = []
    for sgn in (1, -1):
        Ks = K + sgn * regularize * norm * sp.identity(K.shape[0], format="csc")
        try:
            r = _inertia_superlu(Ks)
        except (RuntimeError, FactorizationBreakdown):
            r = None
        if r is None:
            r = _inertia_dense_ldl(Ks)
        counts.append(r.negative)
    if counts[0] != counts[1]:
        raise FactorizationBreakdown(f"regularized counts differ: {counts[0]} vs {counts[1]}")
    return Inertia(counts[0], 0, K.shape[0] - counts[0], "regularized")


def dense_pencil_eigenvalues(K, M):
    """All eigenvalues of the symmetric pencil ``(K, M)`` with M SPD, ascending."""
    Kd = K.toarray() if sp.issparse(K) else np.asarray(K)
    Md = M.toarray() if sp.issparse(M) else np.asarray(M)
    return sla.eigh(Kd, Md, eigvals_only=True)


def smallest_eigenpairs(K, M, k, sigma=-1e-3, dense_limit=DENSE_LIMIT):
    """The ``k`` eigenpairs of ``(K, M)`` closest to ``sigma`` from above, ascending.

    Shift-invert Lanczos for large problems, dense solve below ``dense_limit``.
    """
    n = K.shape[0]
    k = min(k, n)
    if n <= dense_limit:
        Kd = K.toarray() if sp.issparse(K) else np.asarray(K)
        Md = M.toarray() if sp.issparse(M) else np.asarray(M)
        w, v = sla.eigh(Kd, Md, subset_by_index=[0, k - 1])
        return w, v
    if k >= n - 1:
        raise EigenFailed("too many eigenpairs requested for the sparse path")
    try:
        w, v = spla.eigsh(K.tocsc(), k=k, M=M.tocsc(), sigma=sigma, which="LM", tol=1e-12)
    except spla.ArpackNoConvergence as exc:
        raise EigenFailed(f"shift-invert Lanczos did not converge: {exc}") from exc
    order = np.argsort(w)
    w, v = w[order], v[:, order]
    res = np.linalg.norm(K @ v - (M @ v) * w, axis=0)
    ref = np.maximum(np.linalg.norm(K @ v, axis=0), 1e-300)
    if np.any(res > 1e-6 * ref + 1e-12):
        raise EigenFailed(f"eigenpair residuals too large: {res.max():.3e}")
    return w, v
