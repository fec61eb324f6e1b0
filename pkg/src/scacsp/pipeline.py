"""End-to-end training and prediction pipelines for every method, plus the
cross-validation wrapper used for regularization grid search."""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .classify import CvPlan, CvResult, LdaModel, cross_validate, lda_train
from .csp import (
    FilterBank,
    OvrModel,
    PwModel,
    RegGrid,
    csp_features,
    csp_train,
    multiclass_ovr_predict,
    multiclass_ovr_train,
    multiclass_pw_predict,
    multiclass_pw_train,
    scsp_train,
    strcsp_train,
    trcsp_train,
)
from .errors import ConfigError, NumericalError
from .linalg import RankTolerance, vec
from .preprocess import CovarianceSet, TrialSet, covariances, trial_covariance
from .scacsp import (
    feature_projector,
    scacsp_binary_train,
    scacsp_multi_train,
    scatter_matrices,
    vectorize_covariances,
)
from .subspace import NsrProjector, SubspaceSelector, extra_filters, nsr_projector

METHODS = (
    "csp",
    "trcsp",
    "scsp",
    "strcsp",
    "csp-ovr",
    "csp-pw",
    "scacsp",
    "scacsp-extrasub",
    "scacsp-nsr",
    "scacsp-nsr-extrasub",
)

REGULARIZED = {"trcsp": 1, "scsp": 1, "strcsp": 2}  # number of grid parameters

DEFAULT_REG_VALUES = (0.0, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0)


@dataclass
class PipelineConfig:
    """Everything needed to train one pipeline, with the standard defaults:
    7-31 Hz fifth-order band, m = 3, 10-fold CV, log features."""

    method: str = "csp"
    m: int = 3
    band: tuple | None = (7.0, 31.0, 5)  # (low_hz, high_hz, order); None = no filtering
    window: tuple | None = None  # (start_s, end_s) crop within each trial
    extra_subspaces: tuple = ("Sw_range",)
    extra_count: int | None = None  # defaults to 2 m
    nsr_mode: str = "auto"  # auto | cnsr | bnsr
    alphas: tuple = DEFAULT_REG_VALUES
    betas: tuple = DEFAULT_REG_VALUES
    cv_folds: int = 10
    seed: int = 0
    log_features: bool = True
    rank_tol: float = 1e-10
    ovr_rest: str = "class-mean"  # or "trial-pool"

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; valid: {METHODS}")
        if self.m < 1:
            raise ConfigError("m must be at least 1")
        if self.nsr_mode not in ("auto", "cnsr", "bnsr"):
            raise ConfigError("nsr_mode must be auto, cnsr, or bnsr")
        if self.nsr_mode != "auto" and "nsr" not in self.method:
            raise ConfigError(
                f"nsr_mode={self.nsr_mode!r} requires a scacsp-nsr method, "
                f"got {self.method!r}"
            )
        if self.ovr_rest not in ("class-mean", "trial-pool"):
            raise ConfigError("ovr_rest must be class-mean or trial-pool")
        if "extrasub" in self.method:
            SubspaceSelector(self.extra_subspaces)  # validates tags
        if self.band is not None:
            low, high, order = self.band
            if not (0 < low < high) or int(order) < 1:
                raise ConfigError(f"invalid band specification {self.band}")
            self.band = (float(low), float(high), int(order))
        if self.window is not None:
            start, end = self.window
            if not end > start:
                raise ConfigError(f"invalid window {self.window}")
            self.window = (float(start), float(end))

    @property
    def tolerance(self) -> RankTolerance:
        return RankTolerance(self.rank_tol)

    def reg_grid(self) -> RegGrid:
        n_params = REGULARIZED.get(self.method, 0)
        if n_params == 0:
            return RegGrid(alphas=(0.0,), betas=())
        if n_params == 1:
            return RegGrid(alphas=tuple(self.alphas), betas=())
        return RegGrid(alphas=tuple(self.alphas), betas=tuple(self.betas))

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("band", "window", "extra_subspaces", "alphas", "betas"):
            if d[key] is not None:
                d[key] = list(d[key])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        kwargs = dict(d)
        for key in ("band", "window", "extra_subspaces", "alphas", "betas"):
            if key in kwargs and kwargs[key] is not None:
                kwargs[key] = tuple(kwargs[key])
        unknown = set(kwargs) - {f.name for f in _config_fields()}
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        return cls(**kwargs)


def _config_fields():
    import dataclasses

    return dataclasses.fields(PipelineConfig)


@dataclass
class PipelineModel:
    """Trained, serializable pipeline: whitening + filters + classifier."""

    config: PipelineConfig
    kind: str  # quadratic | scacsp | ovr | pw
    n_channels: int
    class_count: int
    bank: FilterBank | None = None
    projector: np.ndarray | None = None  # V with columns u (x) u, scacsp kinds
    nsr: NsrProjector | None = None
    lda: LdaModel | None = None
    submodel: OvrModel | PwModel | None = None
    best_alpha: float | None = None
    best_beta: float | None = None


def _log_clamp(f: np.ndarray) -> np.ndarray:
    bad = f <= 0.0
    if np.any(bad):
        warnings.warn(
            f"{int(np.sum(bad))} non-positive feature values clamped at 1e-300"
        )
        f = np.where(bad, 1e-300, f)
    return np.log(f)


def _scacsp_feature_matrix(model: PipelineModel, covs: np.ndarray) -> np.ndarray:
    P = model.bank.whitener
    rows = []
    for C in covs:
        r = vec(P.T @ C @ P)
        if model.nsr is not None:
            r = model.nsr.reduce(r)
        rows.append(model.projector.T @ r)
    feats = np.stack(rows)
    return _log_clamp(feats) if model.config.log_features else feats


def _quadratic_feature_matrix(model: PipelineModel, covs: np.ndarray) -> np.ndarray:
    return np.stack(
        [csp_features(model.bank, C, log=model.config.log_features) for C in covs]
    )


def _train_scacsp_family(
    config: PipelineConfig, cov: CovarianceSet
) -> PipelineModel:
    tol = config.tolerance
    if cov.n_classes == 2:
        bank, _ = scacsp_binary_train(cov, config.m, selection="tails", tol=tol)
    else:
        bank, _ = scacsp_multi_train(cov, config.m, selection="abs", tol=tol)
    needs_scatter = "extrasub" in config.method or "nsr" in config.method
    scatter = None
    if needs_scatter:
        scatter = scatter_matrices(vectorize_covariances(cov), tol)
    if "extrasub" in config.method:
        count = config.extra_count if config.extra_count is not None else 2 * config.m
        extra = extra_filters(
            scatter,
            SubspaceSelector(config.extra_subspaces),
            count,
            tol,
            dedupe_against=bank.whitened_vectors,
        )
        bank = FilterBank(
            filters=np.concatenate([bank.filters, extra.filters], axis=1),
            scores=np.concatenate([bank.scores, extra.scores]),
            provenance=list(bank.provenance) + list(extra.provenance),
            whitener=bank.whitener,
            whitened_vectors=np.concatenate(
                [bank.whitened_vectors, extra.whitened_vectors], axis=1
            ),
        )
    nsr = None
    if "nsr" in config.method:
        if config.nsr_mode in ("auto", "cnsr"):
            nsr = nsr_projector(scatter, "CNSR")
            if not nsr.applicable:
                if config.nsr_mode == "cnsr":
                    raise NumericalError(
                        "CNSR is inapplicable on this data (total scatter is "
                        "semi-full rank); use nsr_mode=bnsr"
                    )
                warnings.warn("CNSR inapplicable; falling back to BNSR")
                nsr = nsr_projector(scatter, "BNSR")
        else:
            nsr = nsr_projector(scatter, "BNSR")
        if not nsr.applicable:
            raise NumericalError(
                f"{nsr.mode} is inapplicable on this data (target null space "
                "is semi-empty)"
            )
    model = PipelineModel(
        config=config,
        kind="scacsp",
        n_channels=cov.n_channels,
        class_count=cov.n_classes,
        bank=bank,
        projector=feature_projector(bank),
        nsr=nsr,
    )
    feats = _scacsp_feature_matrix(model, cov.per_trial)
    model.lda = lda_train(feats, cov.labels)
    return model


def train_pipeline(
    config: PipelineConfig,
    trials: TrialSet,
    alpha: float | None = None,
    beta: float | None = None,
) -> PipelineModel:
    """Train the configured method at one regularization point.

    ``alpha`` / ``beta`` are only consulted by the regularized methods.
    """
    tol = config.tolerance
    cov = covariances(trials, tol)
    method = config.method
    if method in ("csp", "trcsp", "scsp", "strcsp"):
        if method == "csp":
            bank = csp_train(cov, config.m)
        elif method == "trcsp":
            bank = trcsp_train(cov, config.m, alpha or 0.0)
        elif method == "scsp":
            bank = scsp_train(cov, config.m, alpha or 0.0)
        else:
            bank = strcsp_train(cov, config.m, alpha or 0.0, beta or 0.0)
        model = PipelineModel(
            config=config,
            kind="quadratic",
            n_channels=cov.n_channels,
            class_count=cov.n_classes,
            bank=bank,
            best_alpha=alpha,
            best_beta=beta,
        )
        feats = _quadratic_feature_matrix(model, cov.per_trial)
        model.lda = lda_train(feats, cov.labels)
        return model
    if method == "csp-ovr":
        sub = multiclass_ovr_train(
            cov, config.m, rest_mode=config.ovr_rest, log=config.log_features, tol=tol
        )
        return PipelineModel(
            config=config,
            kind="ovr",
            n_channels=cov.n_channels,
            class_count=cov.n_classes,
            submodel=sub,
        )
    if method == "csp-pw":
        sub = multiclass_pw_train(cov, config.m, log=config.log_features, tol=tol)
        return PipelineModel(
            config=config,
            kind="pw",
            n_channels=cov.n_channels,
            class_count=cov.n_classes,
            submodel=sub,
        )
    model = _train_scacsp_family(config, cov)
    model.best_alpha = alpha
    model.best_beta = beta
    return model


def predict_pipeline(model: PipelineModel, trials: TrialSet) -> np.ndarray:
    """Predicted class id per trial."""
    if trials.n_channels != model.n_channels:
        raise ConfigError(
            f"model expects {model.n_channels} channels, data has {trials.n_channels}"
        )
    covs = np.stack([trial_covariance(X) for X in trials.trials])
    if model.kind == "quadratic":
        feats = _quadratic_feature_matrix(model, covs)
        scores = model.lda.decision_values(feats)
        return model.lda.class_ids[np.argmax(scores, axis=1)]
    if model.kind == "scacsp":
        feats = _scacsp_feature_matrix(model, covs)
        scores = model.lda.decision_values(feats)
        return model.lda.class_ids[np.argmax(scores, axis=1)]
    if model.kind == "ovr":
        return np.array([multiclass_ovr_predict(model.submodel, C) for C in covs])
    if model.kind == "pw":
        return np.array([multiclass_pw_predict(model.submodel, C) for C in covs])
    raise ConfigError(f"unknown model kind {model.kind!r}")


def train_with_cv(
    config: PipelineConfig, trials: TrialSet
) -> tuple[PipelineModel, CvResult]:
    """Grid-search CV over the method's regularizers, then train on all trials.

    Pipelines (filters included) are retrained inside every fold, so held-out
    folds never influence filter learning. Methods without regularizers run a
    single-point CV purely to report training-phase accuracy.
    """
    grid = config.reg_grid()
    plan = CvPlan(folds=config.cv_folds, seed=config.seed, stratified=True)

    def fit(train_idx, alpha, beta):
        return train_pipeline(config, trials.subset(train_idx), alpha, beta)

    def predict(model, test_idx):
        return predict_pipeline(model, trials.subset(test_idx))

    result = cross_validate(fit, predict, trials.labels, plan, grid)
    final = train_pipeline(config, trials, result.best_alpha, result.best_beta)
    final.best_alpha = result.best_alpha
    final.best_beta = result.best_beta
    return final, result
