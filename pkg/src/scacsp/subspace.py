"""Subspace enhancements: extra spatial filters from chosen scatter
subspaces, null-space reduction (CNSR / BNSR), and the empirical
filter-by-component accuracy grid.

Null spaces are always intersected with the symmetric-vec subspace before
use: antisymmetric directions carry no sample information, and restricting
to the N_c (N_c + 1)/2 symmetric coordinates keeps bases small. A subspace
whose symmetric-restricted dimension is zero is "semi-empty".
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .classify import lda_train, lda_predict_many, accuracy
from .csp import FilterBank
from .errors import ConfigError, NumericalError, SemiEmptyError
from .linalg import OrthoBasis, RankTolerance, sym_eig, unvec, vec
from .preprocess import CovarianceSet, TrialSet, covariances, trial_covariance
from .scacsp import (
    ScatterTriple,
    _direction_filters,
    feature_projector,
    scatter_matrices,
    vectorize_covariances,
)

SUBSPACE_TAGS = ("Sb_range", "Sb_null", "Sw_range", "Sw_null", "St_range", "St_null")
_DEDUPE_COS = 1.0 - 1e-6


@dataclass(frozen=True)
class SubspaceSelector:
    """Set of scatter-subspace tags, kept in canonical order."""

    tags: tuple

    def __init__(self, tags):
        if isinstance(tags, str):
            tags = (tags,)
        tags = tuple(tags)
        unknown = [t for t in tags if t not in SUBSPACE_TAGS]
        if unknown:
            raise ConfigError(f"unknown subspace tags {unknown}; valid: {SUBSPACE_TAGS}")
        ordered = tuple(t for t in SUBSPACE_TAGS if t in tags)
        object.__setattr__(self, "tags", ordered)

    def __iter__(self):
        return iter(self.tags)

    def __len__(self):
        return len(self.tags)


def symmetric_vec_basis(n: int) -> np.ndarray:
    """Orthonormal basis of vectorized symmetric n-by-n matrices,
    n (n + 1) / 2 columns."""
    cols = []
    for j in range(n):
        for i in range(j + 1):
            E = np.zeros((n, n))
            if i == j:
                E[i, i] = 1.0
            else:
                E[i, j] = E[j, i] = 1.0 / np.sqrt(2.0)
            cols.append(vec(E))
    return np.stack(cols, axis=1)


def _range_basis(scatter: ScatterTriple, tag: str) -> OrthoBasis:
    return {
        "Sb": scatter.Sb_range,
        "Sw": scatter.Sw_range,
        "St": scatter.St_range,
    }[tag.split("_")[0]]


def subspace_dim(scatter: ScatterTriple, tag: str) -> int:
    """Dimension of the tagged subspace, with null spaces restricted to the
    symmetric-vec coordinates."""
    base = _range_basis(scatter, tag)
    if tag.endswith("range"):
        return base.dim
    return scatter.sym_dim - base.dim


def is_semi_empty(scatter: ScatterTriple, tag: str) -> bool:
    return subspace_dim(scatter, tag) == 0


def subspace_basis(
    scatter: ScatterTriple, tag: str, tol: RankTolerance = RankTolerance()
) -> np.ndarray:
    """Orthonormal basis columns of the tagged subspace.

    Range bases come straight from the scatter; null bases are materialized
    only within the symmetric-vec subspace, as the orthogonal complement of
    the range restricted there.
    """
    base = _range_basis(scatter, tag)
    if tag.endswith("range"):
        return base.columns
    B = symmetric_vec_basis(scatter.n_channels)
    U = base.columns
    N = B - U @ (U.T @ B)
    Un, s, _ = np.linalg.svd(N, full_matrices=False)
    keep = s > 0.5  # singular values are ~1 for complement directions, ~0 otherwise
    return Un[:, keep].copy()


def extra_filters(
    scatter: ScatterTriple,
    selector: SubspaceSelector,
    m: int,
    tol: RankTolerance = RankTolerance(),
    dedupe_against: np.ndarray | None = None,
) -> FilterBank:
    """Extra spatial filters pooled from the selected scatter subspaces.

    Every basis vector of every selected (non-semi-empty) subspace is
    reshaped, symmetrized, and eigendecomposed; the pooled eigenpairs are
    ranked by absolute eigenvalue, near-duplicate eigenvectors are dropped
    (|cosine| > 1 - 1e-6 keeps the higher-score one, and anything matching
    ``dedupe_against`` columns is dropped), and the top m survivors are
    mapped through the whitener.
    """
    if len(selector) == 0:
        raise ConfigError("subspace selector is empty")
    if scatter.whitener is None:
        raise ConfigError("scatter carries no whitener; build it from covariances")
    live = [t for t in selector if not is_semi_empty(scatter, t)]
    if not live:
        raise SemiEmptyError(
            f"all selected subspaces are semi-empty: {tuple(selector)}"
        )
    n_c = scatter.n_channels
    pool = []  # (|lambda|, order, u, tag)
    order = 0
    for tag in live:
        basis = subspace_basis(scatter, tag, tol)
        for j in range(basis.shape[1]):
            eig = _direction_filters(basis[:, j], n_c)
            for k in range(n_c):
                pool.append((abs(float(eig.values[k])), order, eig.vectors[:, k], tag))
                order += 1
    pool.sort(key=lambda item: (-item[0], item[1]))
    kept = []
    anchors = (
        [dedupe_against[:, j] for j in range(dedupe_against.shape[1])]
        if dedupe_against is not None
        else []
    )
    for score, _, u, tag in pool:
        if len(kept) == m:
            break
        duplicate = any(
            abs(float(u @ w)) > _DEDUPE_COS for w in anchors
        ) or any(abs(float(u @ w)) > _DEDUPE_COS for _, w, _ in kept)
        if not duplicate:
            kept.append((score, u, tag))
    if len(kept) < m:
        warnings.warn(
            f"only {len(kept)} distinct extra filters available, requested {m}"
        )
    if not kept:
        raise NumericalError("no extra filters survived deduplication")
    U = np.stack([u for _, u, _ in kept], axis=1)
    return FilterBank(
        filters=scatter.whitener @ U,
        scores=np.array([s for s, _, _ in kept]),
        provenance=[f"extra:{tag}" for _, _, tag in kept],
        whitener=scatter.whitener,
        whitened_vectors=U,
    )


@dataclass
class NsrProjector:
    """Null-space reduction as a projection onto the complement's range.

    Removing the components in the target null space (r - Q Q.T r) equals
    keeping the range components U U.T r, so only the range basis is stored.
    ``applicable`` is False when the target null space is semi-empty, in
    which case there is nothing to remove.
    """

    mode: str  # "CNSR", "BNSR", or "none"
    range_basis: OrthoBasis | None
    applicable: bool = True

    def reduce(self, r: np.ndarray) -> np.ndarray:
        """r minus its target-null-space components (vector or column matrix)."""
        if self.mode == "none" or self.range_basis is None:
            return np.asarray(r, dtype=float)
        U = self.range_basis.columns
        return U @ (U.T @ np.asarray(r, dtype=float))


def nsr_projector(scatter: ScatterTriple, mode: str) -> NsrProjector:
    """Build the CNSR (target S_t^null) or BNSR (target S_b^null) reduction.

    When the target null space is semi-empty the projector is flagged
    inapplicable with a warning instead of raising, mirroring the fallback
    from CNSR to BNSR on semi-full-rank data.
    """
    mode = mode.upper()
    if mode not in ("CNSR", "BNSR"):
        raise ConfigError(f"NSR mode must be CNSR or BNSR, got {mode!r}")
    target = "St_null" if mode == "CNSR" else "Sb_null"
    keep = _range_basis(scatter, target)
    if is_semi_empty(scatter, target):
        warnings.warn(
            f"{mode} is inapplicable: {target} is semi-empty (scatter is "
            "semi-full rank), components to remove are all zero"
        )
        return NsrProjector(mode=mode, range_basis=keep, applicable=False)
    return NsrProjector(mode=mode, range_basis=keep, applicable=True)


def reduce_features(proj: NsrProjector, V: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Null-space-reduced linear features V.T @ (I - Q Q.T) @ r."""
    if not proj.applicable:
        raise NumericalError(
            f"{proj.mode} projector is inapplicable (target null space is "
            "semi-empty); fall back to the other NSR mode"
        )
    return np.asarray(V).T @ proj.reduce(r)


# ---------------------------------------------------------------------------
# Empirical filter-subspace x component-subspace accuracy grid
# ---------------------------------------------------------------------------

COMPONENT_TAGS = SUBSPACE_TAGS + ("None",)


@dataclass
class GridResult:
    """Accuracy per (filter subspace, component subspace) cell; NaN = absent."""

    filter_tags: tuple
    component_tags: tuple
    train_accuracy: np.ndarray
    test_accuracy: np.ndarray

    def cell(self, filter_tag: str, component_tag: str, session: str = "test") -> float:
        i = self.filter_tags.index(filter_tag)
        j = self.component_tags.index(component_tag)
        table = self.train_accuracy if session == "train" else self.test_accuracy
        return float(table[i, j])


def _component_project(scatter: ScatterTriple, tag: str, R: np.ndarray) -> np.ndarray:
    """Project sample columns onto the tagged subspace (or pass through)."""
    if tag == "None":
        return R
    U = _range_basis(scatter, tag).columns
    kept = U @ (U.T @ R)
    return kept if tag.endswith("range") else R - kept


def empirical_grid(
    train: TrialSet,
    test: TrialSet,
    m: int = 3,
    tol: RankTolerance = RankTolerance(),
) -> GridResult:
    """Accuracy of every (filter source, component projection) combination.

    For each filter-source subspace, 2 m (N_omega - 1) filters are extracted
    by the pooled-eigenpair procedure; samples are projected onto the
    component subspace (computed from training scatters only); raw linear
    features feed an LDA. Semi-empty rows/columns are left NaN, matching the
    omissions on semi-full-rank data.
    """
    cov = covariances(train, tol)
    v = vectorize_covariances(cov)
    scatter = scatter_matrices(v, tol)
    P = cov.whitener
    r_train = v.samples
    r_test = np.stack(
        [vec(P.T @ trial_covariance(X) @ P) for X in test.trials], axis=1
    )
    n_filters = 2 * m * (cov.n_classes - 1)
    n_f = len(SUBSPACE_TAGS)
    n_comp = len(COMPONENT_TAGS)
    train_acc = np.full((n_f, n_comp), np.nan)
    test_acc = np.full((n_f, n_comp), np.nan)
    for i, ftag in enumerate(SUBSPACE_TAGS):
        if is_semi_empty(scatter, ftag):
            continue
        bank = extra_filters(scatter, SubspaceSelector((ftag,)), n_filters, tol)
        V = feature_projector(bank)
        for j, ctag in enumerate(COMPONENT_TAGS):
            if ctag != "None" and is_semi_empty(scatter, ctag):
                continue
            ftr = (V.T @ _component_project(scatter, ctag, r_train)).T
            fte = (V.T @ _component_project(scatter, ctag, r_test)).T
            # absolute floor keeps LDA solvable on all-constant component features
            ridge = 1e-6 * float(np.mean(np.var(ftr, axis=0))) + 1e-30
            lda = lda_train(ftr, train.labels, ridge=ridge)
            train_acc[i, j] = accuracy(lda_predict_many(lda, ftr), train.labels)
            test_acc[i, j] = accuracy(lda_predict_many(lda, fte), test.labels)
    return GridResult(
        filter_tags=SUBSPACE_TAGS,
        component_tags=COMPONENT_TAGS,
        train_accuracy=train_acc,
        test_accuracy=test_acc,
    )
