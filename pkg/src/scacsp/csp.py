"""Classical CSP, its regularized variants (TRCSP / sCSP / sTRCSP), and the
pair-wise / one-versus-rest multi-class decompositions."""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field

import numpy as np

from .classify import LdaModel, lda_train
from .errors import ConfigError, DataError
from .linalg import RankTolerance, gen_sym_eig, sym_eig, whitening_transform
from .preprocess import CovarianceSet

DEGENERATE_TOL = 1e-12  # on ||R1_tilde - R2_tilde||_F relative to sqrt(N_c)


@dataclass(frozen=True)
class RegGrid:
    """Regularization candidate values searched by cross-validation."""

    alphas: tuple = (0.0, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0)
    betas: tuple = ()

    def __post_init__(self):
        if any(a < 0 for a in self.alphas) or any(b < 0 for b in self.betas):
            raise ConfigError("regularization values must be non-negative")


@dataclass
class FilterBank:
    """Ordered spatial filters with per-filter scores and provenance.

    ``filters[:, j]`` is the j-th spatial filter (already mapped through the
    whitener), ``scores[j]`` its eigenvalue / band-power score, and
    ``provenance[j]`` the subsystem that produced it. ``whitened_vectors``
    keeps the orthonormal pre-whitening eigenvectors u with w = P_c u for
    banks that have them (CSP / scaCSP / extra-subspace); regularized banks
    leave it None.
    """

    filters: np.ndarray  # (N_c, K)
    scores: np.ndarray  # (K,)
    provenance: list[str]
    whitener: np.ndarray
    whitened_vectors: np.ndarray | None = None

    @property
    def n_filters(self) -> int:
        return self.filters.shape[1]


def _require_binary(cov: CovarianceSet, who: str):
    if cov.n_classes != 2:
        raise DataError(f"{who} needs exactly 2 classes, got {cov.n_classes}")


def is_degenerate_binary(cov: CovarianceSet) -> bool:
    """True when the two whitened class-mean covariances coincide."""
    R1 = cov.whitener.T @ cov.class_means[0] @ cov.whitener
    R2 = cov.whitener.T @ cov.class_means[1] @ cov.whitener
    return float(np.linalg.norm(R1 - R2)) < DEGENERATE_TOL * np.sqrt(cov.n_channels)


def csp_train(cov: CovarianceSet, m: int) -> FilterBank:
    """Classical binary CSP via whitening plus PCA of the whitened class mean.

    Returns 2m filters: the m largest- and m smallest-eigenvalue columns of
    P_c @ U1_tilde, with the selected eigenvalues as scores.
    """
    _require_binary(cov, "csp_train")
    n_c = cov.n_channels
    if m < 1 or 2 * m > n_c:
        raise ConfigError(f"need 1 <= m and 2m <= {n_c} channels, got m={m}")
    P = cov.whitener
    R1 = P.T @ cov.class_means[0] @ P
    eig = sym_eig(0.5 * (R1 + R1.T))
    if float(np.max(np.abs(eig.values - 0.5))) < DEGENERATE_TOL * np.sqrt(n_c):
        warnings.warn(
            "class-mean covariances are identical; CSP eigenvalues are all 0.5 "
            "and the filter selection is degenerate"
        )
    idx = np.concatenate([np.arange(m), np.arange(n_c - m, n_c)])
    U = eig.vectors[:, idx]
    return FilterBank(
        filters=P @ U,
        scores=eig.values[idx].copy(),
        provenance=["csp"] * (2 * m),
        whitener=P,
        whitened_vectors=U.copy(),
    )


def csp_features(bank: FilterBank, trial_cov, log: bool = True) -> np.ndarray:
    """Per-filter projected variance w.T @ C @ w, log-scaled by default.

    Non-positive projected variances (possible only for numerically singular
    trial covariances) are clamped at 1e-300 before the log.
    """
    C = np.asarray(trial_cov, dtype=float)
    f = np.einsum("cj,cd,dj->j", bank.filters, C, bank.filters)
    if log:
        bad = f <= 0.0
        if np.any(bad):
            warnings.warn(
                f"{int(np.sum(bad))} non-positive projected variances clamped at 1e-300"
            )
            f = np.where(bad, 1e-300, f)
        f = np.log(f)
    return f


def _per_class_bank(
    cov: CovarianceSet, m: int, denominator: np.ndarray, provenance: str
) -> FilterBank:
    """Top-m generalized eigenvectors of (C_k_tilde, denominator) per class."""
    _require_binary(cov, provenance)
    if m < 1 or m > cov.n_channels:
        raise ConfigError(f"need 1 <= m <= {cov.n_channels} channels, got m={m}")
    filters = []
    scores = []
    for k in range(2):
        eig = gen_sym_eig(cov.class_means[k], denominator)
        filters.append(eig.vectors[:, :m])
        scores.append(eig.values[:m])
    return FilterBank(
        filters=np.concatenate(filters, axis=1),
        scores=np.concatenate(scores),
        provenance=[provenance] * (2 * m),
        whitener=cov.whitener,
        whitened_vectors=None,
    )


def trcsp_train(cov: CovarianceSet, m: int, alpha: float) -> FilterBank:
    """Tikhonov-regularized CSP: per-class maximization against C + alpha*I."""
    if alpha < 0:
        raise ConfigError("alpha must be non-negative")
    denom = cov.composite + alpha * np.eye(cov.n_channels)
    return _per_class_bank(cov, m, denom, "trcsp")


def abs_psd(M: np.ndarray) -> np.ndarray:
    """Matrix absolute value: flip the signs of all negative eigenvalues."""
    eig = sym_eig(M)
    return (eig.vectors * np.abs(eig.values)) @ eig.vectors.T


def scsp_penalty(cov: CovarianceSet) -> np.ndarray:
    """Within-class nonstationarity penalty: sum over trials of the
    sign-flipped-eigenvalue absolute difference |C_i - C_k_tilde|."""
    n_c = cov.n_channels
    P = np.zeros((n_c, n_c))
    for k in range(cov.n_classes):
        mean_k = cov.class_means[k]
        for i in cov.class_indices(k + 1):
            P += abs_psd(cov.per_trial[i] - mean_k)
    return 0.5 * (P + P.T)


def scsp_train(cov: CovarianceSet, m: int, alpha: float) -> FilterBank:
    """Stationary CSP: per-class maximization against C + alpha * P_s."""
    if alpha < 0:
        raise ConfigError("alpha must be non-negative")
    denom = cov.composite + alpha * scsp_penalty(cov)
    return _per_class_bank(cov, m, denom, "scsp")


def strcsp_train(cov: CovarianceSet, m: int, alpha: float, beta: float) -> FilterBank:
    """Stationary Tikhonov CSP: denominator C + alpha * P_s + beta * I."""
    if alpha < 0 or beta < 0:
        raise ConfigError("alpha and beta must be non-negative")
    denom = (
        cov.composite
        + alpha * scsp_penalty(cov)
        + beta * np.eye(cov.n_channels)
    )
    return _per_class_bank(cov, m, denom, "strcsp")


# ---------------------------------------------------------------------------
# Multi-class decompositions
# ---------------------------------------------------------------------------


@dataclass
class BinaryCspLda:
    """One binary CSP + LDA sub-problem inside an OVR or PW decomposition."""

    bank: FilterBank
    lda: LdaModel
    class_a: int  # "own" class for OVR; first class of the pair for PW
    class_b: int  # 0 stands for "rest" in OVR

    def features(self, trial_cov, log: bool) -> np.ndarray:
        return csp_features(self.bank, trial_cov, log=log)


@dataclass
class OvrModel:
    submodels: list[BinaryCspLda]
    log_features: bool = True


@dataclass
class PwModel:
    submodels: list[BinaryCspLda]
    log_features: bool = True


def _binary_covset(
    per_trial: np.ndarray,
    labels01: np.ndarray,
    mean_a: np.ndarray,
    mean_b: np.ndarray,
    tol: RankTolerance,
) -> CovarianceSet:
    """Assemble a two-class CovarianceSet from prepared class means."""
    composite = mean_a + mean_b
    composite = 0.5 * (composite + composite.T)
    P = whitening_transform(composite, tol)
    whitened = np.einsum("ij,njk,kl->nil", P.T, per_trial, P)
    whitened = 0.5 * (whitened + whitened.transpose(0, 2, 1))
    return CovarianceSet(
        per_trial=per_trial,
        class_means=np.stack([mean_a, mean_b]),
        composite=composite,
        whitener=P,
        whitened_per_trial=whitened,
        labels=labels01,
    )


def multiclass_ovr_train(
    cov: CovarianceSet,
    m: int,
    rest_mode: str = "class-mean",
    log: bool = True,
    ridge: float | None = None,
    tol: RankTolerance = RankTolerance(),
) -> OvrModel:
    """One-versus-rest CSP: one binary CSP + LDA problem per class.

    ``rest_mode`` selects how the pooled "rest" covariance is formed:
    "class-mean" averages the other classes' mean covariances with equal
    weight (keeps class balance), "trial-pool" averages over all rest trials.
    """
    if rest_mode not in ("class-mean", "trial-pool"):
        raise ConfigError(f"unknown rest mode {rest_mode!r}")
    submodels = []
    for k in range(1, cov.n_classes + 1):
        own = cov.class_means[k - 1]
        if rest_mode == "class-mean":
            others = [cov.class_means[j] for j in range(cov.n_classes) if j != k - 1]
            rest = np.mean(others, axis=0)
        else:
            rest = cov.per_trial[cov.labels != k].mean(axis=0)
        labels01 = np.where(cov.labels == k, 1, 2)
        bcov = _binary_covset(cov.per_trial, labels01, own, rest, tol)
        bank = csp_train(bcov, m)
        feats = np.stack([csp_features(bank, C, log=log) for C in cov.per_trial])
        submodels.append(
            BinaryCspLda(
                bank=bank,
                lda=lda_train(feats, labels01, ridge=ridge),
                class_a=k,
                class_b=0,
            )
        )
    return OvrModel(submodels=submodels, log_features=log)


def multiclass_ovr_predict(model: OvrModel, trial_cov) -> int:
    """Class whose binary classifier leans most toward "own"; ties take the
    lowest class id."""
    best_k = None
    best_val = None
    for sub in model.submodels:
        f = sub.features(trial_cov, model.log_features)
        scores = sub.lda.decision_values(f)[0]
        own = scores[list(sub.lda.class_ids).index(1)]
        rest = scores[list(sub.lda.class_ids).index(2)]
        val = own - rest
        if best_val is None or val > best_val:
            best_val = val
            best_k = sub.class_a
    return int(best_k)


def multiclass_pw_train(
    cov: CovarianceSet,
    m: int,
    log: bool = True,
    ridge: float | None = None,
    tol: RankTolerance = RankTolerance(),
) -> PwModel:
    """Pair-wise CSP: one binary CSP + LDA problem per unordered class pair."""
    submodels = []
    for a, b in itertools.combinations(range(1, cov.n_classes + 1), 2):
        pick = np.flatnonzero((cov.labels == a) | (cov.labels == b))
        per = cov.per_trial[pick]
        labels01 = np.where(cov.labels[pick] == a, 1, 2)
        mean_a = per[labels01 == 1].mean(axis=0)
        mean_b = per[labels01 == 2].mean(axis=0)
        bcov = _binary_covset(per, labels01, mean_a, mean_b, tol)
        bank = csp_train(bcov, m)
        feats = np.stack([csp_features(bank, C, log=log) for C in per])
        submodels.append(
            BinaryCspLda(
                bank=bank,
                lda=lda_train(feats, labels01, ridge=ridge),
                class_a=a,
                class_b=b,
            )
        )
    return PwModel(submodels=submodels, log_features=log)


def multiclass_pw_predict(model: PwModel, trial_cov) -> int:
    """Majority vote over pair classifiers. Vote ties are broken by the sum of
    winning-margin magnitudes among the tied classes, then by lowest id."""
    votes: dict[int, int] = {}
    margins: dict[int, float] = {}
    for sub in model.submodels:
        f = sub.features(trial_cov, model.log_features)
        scores = sub.lda.decision_values(f)[0]
        val_a = scores[list(sub.lda.class_ids).index(1)]
        val_b = scores[list(sub.lda.class_ids).index(2)]
        winner = sub.class_a if val_a >= val_b else sub.class_b
        votes[winner] = votes.get(winner, 0) + 1
        margins[winner] = margins.get(winner, 0.0) + abs(val_a - val_b)
    top = max(votes.values())
    tied = sorted(k for k, v in votes.items() if v == top)
    if len(tied) == 1:
        return tied[0]
    best_margin = max(margins[k] for k in tied)
    return min(k for k in tied if margins[k] == best_margin)
