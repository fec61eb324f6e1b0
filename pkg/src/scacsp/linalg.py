"""Deterministic dense linear-algebra kernels.

Every eigendecomposition in the package routes through this module so that
sorting, eigenvector sign, and tie-breaking conventions are fixed in exactly
one place:

* eigenvalues sorted non-increasing,
* each eigenvector's largest-magnitude entry made positive,
* degenerate eigenvalue blocks ordered lexicographically (descending) by
  the sign-canonicalized eigenvector entries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DefinitenessError, NumericalError, RankError


@dataclass(frozen=True)
class RankTolerance:
    """Relative cutoff below which singular/eigen values count as zero."""

    relative: float = 1e-10

    def __post_init__(self):
        if not self.relative > 0:
            raise NumericalError("rank tolerance must be positive")


@dataclass
class SymEig:
    """Eigendecomposition with values sorted non-increasing.

    ``vectors[:, j]`` is paired with ``values[j]``.  For the plain symmetric
    problem the vectors are orthonormal; for the generalized problem
    ``gen_sym_eig(A, B)`` they are B-orthonormal (``w.T @ B @ w == 1``).
    """

    values: np.ndarray
    vectors: np.ndarray


@dataclass
class OrthoBasis:
    """Matrix with orthonormal columns spanning a range or null space."""

    columns: np.ndarray
    kind: str = "range"  # "range" or "null"
    source: str = ""  # "Sb", "Sw", "St", or "" when unattributed

    @property
    def dim(self) -> int:
        return self.columns.shape[1]


def _as_square(A, name):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise NumericalError(f"{name} must be a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise NumericalError(f"{name} contains non-finite entries")
    return A


def _canonical_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip column signs so each column's largest-magnitude entry is positive."""
    out = np.array(vectors, copy=True)
    for j in range(out.shape[1]):
        k = int(np.argmax(np.abs(out[:, j])))
        if out[k, j] < 0:
            out[:, j] = -out[:, j]
    return out


def _sort_with_ties(values: np.ndarray, vectors: np.ndarray):
    """Sort non-increasing and canonicalize degenerate blocks.

    Within a tied eigenvalue block the eigenvector basis is only determined
    up to rotation, so the block is rotated toward the coordinate axes
    (pivoted QR of the block transpose), sign-canonicalized, and ordered by
    descending lexicographic comparison of the entries. A fully degenerate
    spectrum therefore resolves to a signed permutation, and the identity
    matrix decomposes to exactly the identity basis.
    """
    order = np.argsort(-values, kind="stable")
    values = values[order]
    vectors = vectors[:, order]
    tol = 1e-12 * max(1.0, float(np.max(np.abs(values))) if values.size else 1.0)
    j = 0
    n = values.size
    while j < n:
        k = j + 1
        while k < n and values[j] - values[k] <= tol:
            k += 1
        if k - j > 1:
            block = vectors[:, j:k]
            Q = scipy.linalg.qr(block.T, mode="economic", pivoting=True)[0]
            block = _canonical_signs(block @ Q)
            # quantize entries so round-off noise cannot steer the ordering
            quant = np.where(np.abs(block) > 1e-8, block, 0.0)
            perm = sorted(range(k - j), key=lambda c: tuple(-quant[:, c]))
            vectors[:, j:k] = block[:, perm]
        j = k
    return values, vectors


def sym_eig(A) -> SymEig:
    """Eigendecomposition of a symmetric matrix with deterministic ordering.

    The input is symmetrized as (A + A.T)/2 first; asymmetry beyond 1e-9
    relative to max|A| is an error.
    """
    A = _as_square(A, "sym_eig input")
    scale = max(1.0, float(np.max(np.abs(A))))
    if float(np.max(np.abs(A - A.T))) > 1e-9 * scale:
        raise NumericalError("matrix is not symmetric within 1e-9 relative asymmetry")
    S = 0.5 * (A + A.T)
    raw_values, raw_vectors = np.linalg.eigh(S)
    values = raw_values[::-1].copy()
    vectors = _canonical_signs(raw_vectors[:, ::-1])
    values, vectors = _sort_with_ties(values, vectors)
    return SymEig(values=values, vectors=vectors)


def gen_sym_eig(A, B, tol: RankTolerance = RankTolerance()) -> SymEig:
    """Solve A w = lambda B w for symmetric A and SPD B.

    Reduced to a standard symmetric problem through the Cholesky factor of B.
    Returned columns satisfy ``w.T @ B @ w == 1``; values sorted non-increasing.
    """
    A = _as_square(A, "gen_sym_eig A")
    B = _as_square(B, "gen_sym_eig B")
    if A.shape != B.shape:
        raise NumericalError(f"A and B shapes differ: {A.shape} vs {B.shape}")
    Bs = 0.5 * (B + B.T)
    beig = np.linalg.eigvalsh(Bs)
    if beig[0] <= tol.relative * max(beig[-1], 0.0):
        raise DefinitenessError(
            f"B is not positive definite: smallest eigenvalue {beig[0]:.6e} "
            f"vs largest {beig[-1]:.6e}"
        )
    L = np.linalg.cholesky(Bs)
    M = scipy.linalg.solve_triangular(L, 0.5 * (A + A.T), lower=True)
    M = scipy.linalg.solve_triangular(L, M.T, lower=True).T
    inner = sym_eig(0.5 * (M + M.T))
    W = scipy.linalg.solve_triangular(L.T, inner.vectors, lower=False)
    return SymEig(values=inner.values, vectors=_canonical_signs(W))


def whitening_transform(C, tol: RankTolerance = RankTolerance()) -> np.ndarray:
    """Whitening matrix P with P.T @ C @ P = I for SPD C.

    Built as U * diag(values)^(-1/2) from the canonicalized eigendecomposition.
    """
    eig = sym_eig(C)
    lam_max = float(eig.values[0]) if eig.values.size else 0.0
    if lam_max <= 0.0:
        deficient = int(eig.values.size)
    else:
        deficient = int(np.sum(eig.values <= tol.relative * lam_max))
    if deficient:
        raise RankError(
            f"matrix is rank deficient: {deficient} of {eig.values.size} "
            "eigenvalues fall at or below the rank tolerance"
        )
    return eig.vectors / np.sqrt(eig.values)


def vec(M) -> np.ndarray:
    """Stack the columns of M into a single vector."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise NumericalError(f"vec expects a 2-d matrix, got ndim={M.ndim}")
    return M.reshape(-1, order="F").copy()


def unvec(v, n: int | None = None) -> np.ndarray:
    """Inverse of :func:`vec`: rebuild an n-by-n matrix column by column."""
    v = np.asarray(v, dtype=float).reshape(-1)
    if n is None:
        n = math.isqrt(v.size)
    if n * n != v.size:
        raise NumericalError(f"vector of length {v.size} is not a stacked {n}x{n} matrix")
    return v.reshape(n, n, order="F").copy()


def _centered_svd(samples: np.ndarray, center: np.ndarray, tol: RankTolerance):
    """Economy SVD of centered sample columns; returns (U, s, rank)."""
    X = np.asarray(samples, dtype=float)
    if X.ndim != 2 or X.shape[1] < 1:
        raise NumericalError("samples must be a matrix with at least one column")
    c = np.asarray(center, dtype=float).reshape(-1)
    if c.size != X.shape[0]:
        raise NumericalError(
            f"center length {c.size} does not match sample dimension {X.shape[0]}"
        )
    U, s, _ = np.linalg.svd(X - c[:, None], full_matrices=False)
    if s.size == 0 or s[0] <= 0.0:
        rank = 0
    else:
        rank = int(np.sum(s > tol.relative * s[0]))
    return U, s, rank


def range_null_bases(
    samples, center, tol: RankTolerance = RankTolerance(), source: str = ""
) -> tuple[OrthoBasis, int]:
    """Orthonormal range basis and rank of the centered sample columns.

    The null space is never materialized here; callers apply the projector
    I - U @ U.T built from the returned range basis instead.
    """
    U, _, rank = _centered_svd(samples, center, tol)
    basis = OrthoBasis(columns=U[:, :rank].copy(), kind="range", source=source)
    return basis, rank
