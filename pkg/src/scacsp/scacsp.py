"""Scatter matrices over vectorized whitened covariances and the scaCSP
spatial-filter family built on them.

The scatter matrices live in the N_c^2-dimensional vectorized covariance
space. They are represented by their centered-sample factorizations
(S = D @ D.T) and orthonormal range bases; the explicit N_c^2 x N_c^2
matrices are only formed on request via ``materialize=True``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .csp import FilterBank
from .errors import ConfigError, DataError, DegenerateClassError
from .linalg import OrthoBasis, RankTolerance, sym_eig, unvec, vec
from .preprocess import CovarianceSet


@dataclass
class VecCovSamples:
    """Vectorized whitened trial covariances with class and grand means.

    ``samples[:, i]`` is vec(R_i); the grand mean is the class-size-weighted
    combination of the class means (which differs from the vectorization of
    the composite covariance whenever classes are unbalanced).
    """

    samples: np.ndarray  # (N_c^2, n)
    class_means: np.ndarray  # (N_c^2, N_omega)
    grand_mean: np.ndarray  # (N_c^2,)
    labels: np.ndarray  # (n,)
    class_sizes: np.ndarray  # (N_omega,)
    n_channels: int
    whitener: np.ndarray | None = None


@dataclass
class DaVector:
    """Unit-norm per-filter normalized band-power differences."""

    entries: np.ndarray

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=float).reshape(-1)


@dataclass
class ScatterTriple:
    """Range bases, per-direction eigenvalues, and detected ranks of the
    between-class, within-class, and total scatter matrices."""

    Sb_range: OrthoBasis
    Sw_range: OrthoBasis
    St_range: OrthoBasis
    eig_b: np.ndarray
    eig_w: np.ndarray
    eig_t: np.ndarray
    ranks: tuple[int, int, int]  # (rank_b, rank_w, rank_t)
    semi_full_w: bool
    semi_full_t: bool
    sym_dim: int  # N_c (N_c + 1) / 2
    n_channels: int
    factors: dict = field(default_factory=dict)  # centered-sample factor per scatter
    whitener: np.ndarray | None = None
    explicit: dict | None = None

    def matvec(self, which: str, x: np.ndarray) -> np.ndarray:
        """Apply S_b / S_w / S_t to a vector through its factorization."""
        D = self.factors[which]
        return D @ (D.T @ x)


def vectorize_covariances(cov: CovarianceSet) -> VecCovSamples:
    """Stack vec(R_i) for every trial and form class and grand means."""
    n = cov.n_trials
    samples = np.stack([vec(cov.whitened_per_trial[i]) for i in range(n)], axis=1)
    sizes = cov.class_sizes
    class_means = np.stack(
        [
            samples[:, cov.labels == k].mean(axis=1)
            for k in range(1, cov.n_classes + 1)
        ],
        axis=1,
    )
    grand = (class_means * sizes) .sum(axis=1) / sizes.sum()
    return VecCovSamples(
        samples=samples,
        class_means=class_means,
        grand_mean=grand,
        labels=cov.labels.copy(),
        class_sizes=sizes,
        n_channels=cov.n_channels,
        whitener=cov.whitener,
    )


def _oriented_sb_basis(
    class_means: np.ndarray,
    grand_mean: np.ndarray,
    class_sizes: np.ndarray,
    tol: RankTolerance,
):
    """Orthonormal S_b range basis via the class-mean deviation Gram matrix.

    Cheap (N_omega x N_omega eigenproblem) and equivalent to eigendecomposing
    S_b itself. Each basis vector is oriented so that its projection onto the
    first class deviation with non-negligible overlap is positive; in the
    binary case this aligns the single direction with the class-1 deviation.
    """
    D = (class_means - grand_mean[:, None]) * np.sqrt(class_sizes)
    G = D.T @ D
    eig = sym_eig(G)
    sv = np.sqrt(np.maximum(eig.values, 0.0))
    rank = int(np.sum(sv > tol.relative * sv[0])) if sv.size and sv[0] > 0 else 0
    V = D @ (eig.vectors[:, :rank] / sv[:rank])
    devs = class_means - grand_mean[:, None]
    dev_scale = np.linalg.norm(devs, axis=0)
    for j in range(rank):
        proj = V[:, j] @ devs
        for k in range(devs.shape[1]):
            if abs(proj[k]) > 1e-12 * max(dev_scale[k], 1.0):
                if proj[k] < 0:
                    V[:, j] = -V[:, j]
                break
    return V, eig.values[:rank].copy(), rank, D


def scatter_matrices(
    v: VecCovSamples,
    tol: RankTolerance = RankTolerance(),
    materialize: bool = False,
) -> ScatterTriple:
    """Range bases, eigenvalues, and ranks of S_b, S_w, S_t.

    Ranks are counted on singular values of the centered-sample factors at the
    relative tolerance; a scatter is flagged semi-full when its rank reaches
    N_c (N_c + 1) / 2, the ceiling imposed by covariance symmetry.
    """
    if v.samples.shape[1] < 2:
        raise DataError("need at least 2 samples to form scatter matrices")
    n_c = v.n_channels
    Db_unit, eig_b, rank_b, Db = _oriented_sb_basis(
        v.class_means, v.grand_mean, v.class_sizes, tol
    )
    Dw = np.array(v.samples, copy=True)
    for k in range(v.class_means.shape[1]):
        Dw[:, v.labels == k + 1] -= v.class_means[:, [k]]
    Dt = v.samples - v.grand_mean[:, None]
    Uw, sw, rank_w = _svd_range(Dw, tol)
    Ut, st, rank_t = _svd_range(Dt, tol)
    sym_dim = n_c * (n_c + 1) // 2
    triple = ScatterTriple(
        Sb_range=OrthoBasis(columns=Db_unit, kind="range", source="Sb"),
        Sw_range=OrthoBasis(columns=Uw[:, :rank_w].copy(), kind="range", source="Sw"),
        St_range=OrthoBasis(columns=Ut[:, :rank_t].copy(), kind="range", source="St"),
        eig_b=eig_b,
        eig_w=(sw[:rank_w] ** 2).copy(),
        eig_t=(st[:rank_t] ** 2).copy(),
        ranks=(rank_b, rank_w, rank_t),
        semi_full_w=rank_w == sym_dim,
        semi_full_t=rank_t == sym_dim,
        sym_dim=sym_dim,
        n_channels=n_c,
        factors={"Sb": Db, "Sw": Dw, "St": Dt},
        whitener=v.whitener,
    )
    if materialize:
        triple.explicit = {
            "Sb": Db @ Db.T,
            "Sw": Dw @ Dw.T,
            "St": Dt @ Dt.T,
        }
    return triple


def _svd_range(D: np.ndarray, tol: RankTolerance):
    U, s, _ = np.linalg.svd(D, full_matrices=False)
    if s.size == 0 or s[0] <= 0.0:
        return U, s, 0
    return U, s, int(np.sum(s > tol.relative * s[0]))


def _direction_filters(v_i: np.ndarray, n_c: int):
    """Symmetrize-unvec-eigendecompose one scatter direction."""
    A = unvec(v_i, n_c)
    A = 0.5 * (A + A.T)
    return sym_eig(A)


def _select(values: np.ndarray, m: int, selection: str) -> np.ndarray:
    n = values.size
    if selection == "tails":
        if 2 * m > n:
            raise ConfigError(f"need 2m <= {n} for tail selection, got m={m}")
        return np.concatenate([np.arange(m), np.arange(n - m, n)])
    if selection == "abs":
        if m > n:
            raise ConfigError(f"need m <= {n}, got m={m}")
        return np.argsort(-np.abs(values), kind="stable")[:m]
    raise ConfigError(f"unknown selection mode {selection!r}")


def degenerate_gap(cov: CovarianceSet) -> float:
    """||2 d1_tilde - 1||_2, equal to the Frobenius distance between the two
    whitened class-mean covariances."""
    P = cov.whitener
    R1 = P.T @ cov.class_means[0] @ P
    R2 = P.T @ cov.class_means[1] @ P
    return float(np.linalg.norm(R1 - R2))


def scacsp_binary_train(
    cov: CovarianceSet,
    m: int,
    selection: str = "tails",
    tol: RankTolerance = RankTolerance(),
) -> tuple[FilterBank, DaVector]:
    """Binary scaCSP: eigendecompose the single S_b range direction.

    With the default per-tail selection (m filters per tail of the score
    vector) the bank matches classical CSP's m-largest / m-smallest choice
    filter for filter; ``selection="abs"`` instead takes the 2m filters of
    largest absolute score.
    """
    if cov.n_classes != 2:
        raise DataError(f"binary scaCSP needs 2 classes, got {cov.n_classes}")
    n_c = cov.n_channels
    gap = degenerate_gap(cov)
    if gap < 1e-12 * np.sqrt(n_c):
        raise DegenerateClassError(
            f"class-mean covariances coincide: ||2 d1_tilde - 1||_2 = {gap:.3e} "
            "is below threshold, so the score normalization is undefined"
        )
    v = vectorize_covariances(cov)
    V, _, rank, _ = _oriented_sb_basis(v.class_means, v.grand_mean, v.class_sizes, tol)
    if rank < 1:
        raise DegenerateClassError("between-class scatter has empty range")
    eig = _direction_filters(V[:, 0], n_c)
    d_a = DaVector(entries=eig.values)
    if selection == "tails":
        idx = _select(eig.values, m, "tails")
    else:
        idx = _select(eig.values, 2 * m, "abs")
    U = eig.vectors[:, idx]
    bank = FilterBank(
        filters=cov.whitener @ U,
        scores=eig.values[idx].copy(),
        provenance=["scacsp"] * idx.size,
        whitener=cov.whitener,
        whitened_vectors=U.copy(),
    )
    return bank, d_a


def scacsp_multi_train(
    cov: CovarianceSet,
    m: int,
    selection: str = "abs",
    tol: RankTolerance = RankTolerance(),
) -> tuple[FilterBank, list[DaVector]]:
    """Multi-class scaCSP over the N_omega - 1 between-class scatter directions.

    Each direction is reshaped, symmetrized, and eigendecomposed; ``m``
    eigenvectors of largest absolute eigenvalue are kept per direction
    (``selection="tails"`` instead keeps m per tail, reproducing the binary
    behaviour when N_omega = 2). Filters are concatenated in direction order.
    """
    if m < 1 or m > cov.n_channels:
        raise ConfigError(f"need 1 <= m <= {cov.n_channels}, got m={m}")
    v = vectorize_covariances(cov)
    V, _, rank, _ = _oriented_sb_basis(v.class_means, v.grand_mean, v.class_sizes, tol)
    expected = cov.n_classes - 1
    if rank < expected:
        warnings.warn(
            f"between-class scatter rank {rank} is below N_omega - 1 = {expected}; "
            "proceeding with the detected rank"
        )
    filters = []
    scores = []
    whitened = []
    d_list = []
    for i in range(rank):
        eig = _direction_filters(V[:, i], cov.n_channels)
        d_list.append(DaVector(entries=eig.values))
        idx = _select(eig.values, m, selection)
        whitened.append(eig.vectors[:, idx])
        filters.append(cov.whitener @ eig.vectors[:, idx])
        scores.append(eig.values[idx])
    U = np.concatenate(whitened, axis=1)
    bank = FilterBank(
        filters=np.concatenate(filters, axis=1),
        scores=np.concatenate(scores),
        provenance=["scacsp"] * U.shape[1],
        whitener=cov.whitener,
        whitened_vectors=U,
    )
    return bank, d_list


def feature_projector(bank: FilterBank) -> np.ndarray:
    """Columns u (x) u for each whitened-space filter vector u, so that
    features become the linear projection V.T @ vec(R)."""
    if bank.whitened_vectors is None:
        raise ConfigError(
            "bank has no whitened-space vectors; linear feature projection "
            "only applies to CSP/scaCSP-style banks"
        )
    U = bank.whitened_vectors
    return np.stack([np.kron(U[:, j], U[:, j]) for j in range(U.shape[1])], axis=1)


def scacsp_features(V_a: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Linear feature projection f = V_a.T @ r of a vectorized covariance."""
    return np.asarray(V_a).T @ np.asarray(r)


# ---------------------------------------------------------------------------
# Un-whitened formulation with the Kronecker-structured whitener
# ---------------------------------------------------------------------------


def kron_whitener_apply_t(P_c: np.ndarray, x: np.ndarray) -> np.ndarray:
    """P.T @ x for P = P_c (x) P_c, computed as vec(P_c.T @ unvec(x) @ P_c)."""
    n = P_c.shape[0]
    return vec(P_c.T @ unvec(x, n) @ P_c)


def kron_whitener_apply(P_c: np.ndarray, x: np.ndarray) -> np.ndarray:
    """P @ x for P = P_c (x) P_c, computed as vec(P_c @ unvec(x) @ P_c.T)."""
    n = P_c.shape[0]
    return vec(P_c @ unvec(x, n) @ P_c.T)


def kron_composite_apply(composite: np.ndarray, x: np.ndarray) -> np.ndarray:
    """(C (x) C) @ x computed as vec(C @ unvec(x) @ C) for symmetric C."""
    n = composite.shape[0]
    return vec(composite @ unvec(x, n) @ composite)


def unwhitened_class_deviations(cov: CovarianceSet):
    """Class-mean deviation factor of S_B over un-whitened vec(C_i) samples.

    Returns (D_B, class_means, grand_mean) with D_B columns
    sqrt(|Omega_k|) (c_k_tilde - c_tilde).
    """
    n = cov.n_trials
    samples = np.stack([vec(cov.per_trial[i]) for i in range(n)], axis=1)
    sizes = cov.class_sizes
    class_means = np.stack(
        [
            samples[:, cov.labels == k].mean(axis=1)
            for k in range(1, cov.n_classes + 1)
        ],
        axis=1,
    )
    grand = (class_means * sizes).sum(axis=1) / sizes.sum()
    D_B = (class_means - grand[:, None]) * np.sqrt(sizes)
    return D_B, class_means, grand


def scacsp_unwhitened_train(
    cov: CovarianceSet,
    m: int,
    selection: str = "abs",
    tol: RankTolerance = RankTolerance(),
) -> tuple[FilterBank, list[DaVector]]:
    """scaCSP beginning from un-whitened covariances.

    Builds the between-class scatter of vec(C_i), applies the Kronecker
    whitener P = P_c (x) P_c column by column (never forming the
    N_c^2 x N_c^2 product), and then proceeds exactly as the whitened path.
    The resulting filters match :func:`scacsp_multi_train` up to tolerance.
    """
    if m < 1 or m > cov.n_channels:
        raise ConfigError(f"need 1 <= m <= {cov.n_channels}, got m={m}")
    P_c = cov.whitener
    _, class_means, grand = unwhitened_class_deviations(cov)
    wh_means = np.stack(
        [kron_whitener_apply_t(P_c, class_means[:, k]) for k in range(cov.n_classes)],
        axis=1,
    )
    sizes = cov.class_sizes
    wh_grand = (wh_means * sizes).sum(axis=1) / sizes.sum()
    V, _, rank, _ = _oriented_sb_basis(wh_means, wh_grand, sizes, tol)
    expected = cov.n_classes - 1
    if rank < expected:
        warnings.warn(
            f"between-class scatter rank {rank} is below N_omega - 1 = {expected}; "
            "proceeding with the detected rank"
        )
    filters = []
    scores = []
    whitened = []
    d_list = []
    for i in range(rank):
        eig = _direction_filters(V[:, i], cov.n_channels)
        d_list.append(DaVector(entries=eig.values))
        idx = _select(eig.values, m, selection)
        whitened.append(eig.vectors[:, idx])
        filters.append(P_c @ eig.vectors[:, idx])
        scores.append(eig.values[idx])
    U = np.concatenate(whitened, axis=1)
    bank = FilterBank(
        filters=np.concatenate(filters, axis=1),
        scores=np.concatenate(scores),
        provenance=["scacsp"] * U.shape[1],
        whitener=P_c,
        whitened_vectors=U,
    )
    return bank, d_list
