"""Pooled-covariance LDA, stratified k-fold cross-validation, and accuracy."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import ConfigError, DataError, NumericalError

DEFAULT_RIDGE_FACTOR = 1e-6


@dataclass
class LdaModel:
    """Linear discriminant classifier with a ridge-stabilized pooled covariance.

    ``pooled_cov`` already includes the ridge term; the Cholesky factor used
    by the decision function is rebuilt lazily so the model round-trips
    through JSON without loss.
    """

    class_ids: np.ndarray
    class_means: np.ndarray  # (n_classes, n_features)
    pooled_cov: np.ndarray  # ridge included
    priors: np.ndarray
    ridge: float
    _weights: np.ndarray | None = field(default=None, repr=False)
    _biases: np.ndarray | None = field(default=None, repr=False)

    def _prepare(self):
        if self._weights is None:
            factor = cho_factor(self.pooled_cov, lower=True)
            self._weights = cho_solve(factor, self.class_means.T)  # (d, n_classes)
            self._biases = (
                -0.5 * np.sum(self.class_means.T * self._weights, axis=0)
                + np.log(self.priors)
            )
        return self._weights, self._biases

    def decision_values(self, features: np.ndarray) -> np.ndarray:
        """Per-class discriminant scores; rows align with input samples."""
        W, b = self._prepare()
        X = np.atleast_2d(np.asarray(features, dtype=float))
        return X @ W + b


def lda_train(features, labels, ridge: float | None = None) -> LdaModel:
    """Fit pooled-covariance LDA.

    ``ridge`` defaults to 1e-6 * trace(pooled)/dim and is added to the pooled
    within-class covariance before factorization.
    """
    X = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=int).reshape(-1)
    if X.ndim != 2 or X.shape[0] != y.size:
        raise DataError("features must be (n_samples, n_features) aligned with labels")
    class_ids = np.unique(y)
    if class_ids.size < 2:
        raise DataError("LDA needs at least two classes")
    counts = np.array([int(np.sum(y == c)) for c in class_ids])
    if np.any(counts < 2):
        short = class_ids[counts < 2].tolist()
        raise DataError(f"LDA needs at least two samples per class; short: {short}")
    n, d = X.shape
    means = np.stack([X[y == c].mean(axis=0) for c in class_ids])
    pooled = np.zeros((d, d))
    for j, c in enumerate(class_ids):
        dev = X[y == c] - means[j]
        pooled += dev.T @ dev
    pooled /= n - class_ids.size
    pooled = 0.5 * (pooled + pooled.T)
    if ridge is None:
        ridge = DEFAULT_RIDGE_FACTOR * float(np.trace(pooled)) / d
    pooled_r = pooled + ridge * np.eye(d)
    model = LdaModel(
        class_ids=class_ids,
        class_means=means,
        pooled_cov=pooled_r,
        priors=counts / n,
        ridge=float(ridge),
    )
    try:
        model._prepare()
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            f"pooled feature covariance is singular even with ridge {ridge:.3e}; "
            "pass a larger ridge"
        ) from exc
    return model


def lda_predict(model: LdaModel, feature) -> tuple[int, np.ndarray]:
    """Predict one sample; returns (class id, per-class decision values)."""
    scores = model.decision_values(feature)[0]
    return int(model.class_ids[int(np.argmax(scores))]), scores


def lda_predict_many(model: LdaModel, features) -> np.ndarray:
    scores = model.decision_values(features)
    return model.class_ids[np.argmax(scores, axis=1)]


def accuracy(predictions, labels) -> float:
    """Ratio of correct predictions, in [0, 1]."""
    p = np.asarray(predictions).reshape(-1)
    t = np.asarray(labels).reshape(-1)
    if p.size == 0:
        raise DataError("cannot compute accuracy of zero predictions")
    if p.size != t.size:
        raise DataError(f"{p.size} predictions vs {t.size} labels")
    return float(np.mean(p == t))


@dataclass(frozen=True)
class CvPlan:
    """Cross-validation layout: fold count, shuffle seed, stratification."""

    folds: int = 10
    seed: int = 0
    stratified: bool = True

    def __post_init__(self):
        if self.folds < 2:
            raise ConfigError("cross-validation needs at least 2 folds")


def fold_assignments(labels, plan: CvPlan) -> np.ndarray:
    """Deterministic fold index per sample, a pure function of (seed, labels).

    Stratified mode shuffles each class independently and deals its trials
    round-robin over the folds, so every fold sees every class whenever each
    class has at least ``folds`` trials.
    """
    y = np.asarray(labels, dtype=int).reshape(-1)
    rng = np.random.default_rng(plan.seed)
    out = np.empty(y.size, dtype=int)
    if plan.stratified:
        for c in np.unique(y):
            idx = np.flatnonzero(y == c)
            if idx.size < plan.folds:
                raise DataError(
                    f"class {c} has {idx.size} trials, fewer than {plan.folds} folds"
                )
            perm = rng.permutation(idx)
            out[perm] = np.arange(perm.size) % plan.folds
    else:
        perm = rng.permutation(y.size)
        out[perm] = np.arange(y.size) % plan.folds
    return out


@dataclass
class CvResult:
    """Grid-search cross-validation outcome plus the per-fold accuracy table."""

    best_alpha: float
    best_beta: float | None
    best_accuracy: float
    best_fold_accuracies: np.ndarray
    rows: list  # (alpha, beta, fold, accuracy) per evaluation
    means: list  # (alpha, beta, mean accuracy) per grid point


def cross_validate(fit, predict, labels, plan: CvPlan, grid) -> CvResult:
    """Grid-search k-fold cross-validation with per-fold retraining.

    ``fit(train_indices, alpha, beta)`` must train the full pipeline on the
    given trials only (filters included, so nothing leaks from held-out
    folds); ``predict(model, test_indices)`` returns predicted labels.
    ``grid`` needs ``alphas`` and ``betas`` attributes; an empty ``betas``
    means a one-parameter grid. Ties resolve toward the smallest alpha, then
    the smallest beta.
    """
    y = np.asarray(labels, dtype=int).reshape(-1)
    folds = fold_assignments(y, plan)
    alphas = sorted(float(a) for a in grid.alphas)
    betas = sorted(float(b) for b in grid.betas) if grid.betas else [None]
    rows = []
    means = []
    best = None
    for alpha in alphas:
        for beta in betas:
            accs = []
            for f in range(plan.folds):
                train_idx = np.flatnonzero(folds != f)
                test_idx = np.flatnonzero(folds == f)
                model = fit(train_idx, alpha, beta)
                preds = predict(model, test_idx)
                acc = accuracy(preds, y[test_idx])
                rows.append((alpha, beta, f, acc))
                accs.append(acc)
            mean_acc = float(np.mean(accs))
            means.append((alpha, beta, mean_acc))
            if best is None or mean_acc > best[2]:
                best = (alpha, beta, mean_acc, np.asarray(accs))
    return CvResult(
        best_alpha=best[0],
        best_beta=best[1],
        best_accuracy=best[2],
        best_fold_accuracies=best[3],
        rows=rows,
        means=means,
    )
