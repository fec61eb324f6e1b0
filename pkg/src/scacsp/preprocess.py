"""Band-pass filtering, epoch extraction, and covariance estimation.

Produces the per-trial / class-mean / whitened covariance bundle that every
filter-learning routine consumes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.signal

from .errors import ConfigError, DataError, RankError
from .linalg import RankTolerance, whitening_transform

_CENTER_SKIP = 1e-12  # rows already centered tighter than this are left untouched


def center_rows(X: np.ndarray) -> np.ndarray:
    """Remove each row's mean. Rows already centered are returned bit-identical."""
    X = np.asarray(X, dtype=float)
    means = X.mean(axis=1)
    stds = X.std(axis=1)
    mask = np.abs(means) > _CENTER_SKIP * stds
    if not np.any(mask):
        return X
    out = np.array(X, copy=True)
    out[mask] -= means[mask, None]
    return out


@dataclass
class TrialSet:
    """Labeled collection of centered multichannel trials.

    All trials share the same (n_channels, n_samples) shape, labels are class
    ids in 1..class_count with every class present, and each row is centered
    on construction.
    """

    trials: list
    labels: np.ndarray
    fs: float
    class_count: int
    channel_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        trials = [np.asarray(t, dtype=float) for t in self.trials]
        if not trials:
            raise DataError("trial set is empty")
        shape = trials[0].shape
        if len(shape) != 2:
            raise DataError("each trial must be a channels-by-samples matrix")
        for i, t in enumerate(trials):
            if t.shape != shape:
                raise DataError(
                    f"trial {i} has shape {t.shape}, expected {shape} like trial 0"
                )
        self.trials = [center_rows(t) for t in trials]
        self.labels = np.asarray(self.labels, dtype=int).reshape(-1)
        if self.labels.size != len(self.trials):
            raise DataError(
                f"{self.labels.size} labels for {len(self.trials)} trials"
            )
        if self.class_count < 1:
            raise DataError("class_count must be at least 1")
        present = set(int(v) for v in self.labels)
        expected = set(range(1, self.class_count + 1))
        if not present <= expected:
            raise DataError(f"labels outside 1..{self.class_count}: {sorted(present - expected)}")
        if present != expected:
            raise DataError(f"classes missing from trial set: {sorted(expected - present)}")
        if not self.channel_names:
            self.channel_names = [f"ch{i + 1:02d}" for i in range(shape[0])]
        elif len(self.channel_names) != shape[0]:
            raise DataError(
                f"{len(self.channel_names)} channel names for {shape[0]} channels"
            )

    @property
    def n_trials(self) -> int:
        return len(self.trials)

    @property
    def n_channels(self) -> int:
        return self.trials[0].shape[0]

    @property
    def n_samples(self) -> int:
        return self.trials[0].shape[1]

    def subset(self, indices) -> "TrialSet":
        """New TrialSet restricted to the given trial indices."""
        indices = np.asarray(indices, dtype=int).reshape(-1)
        return TrialSet(
            trials=[self.trials[i] for i in indices],
            labels=self.labels[indices],
            fs=self.fs,
            class_count=self.class_count,
            channel_names=list(self.channel_names),
        )


@dataclass(frozen=True)
class BandpassSpec:
    """Butterworth band-pass corner frequencies and order."""

    low_hz: float
    high_hz: float
    fs: float
    order: int = 5

    def __post_init__(self):
        if not (0.0 < self.low_hz < self.high_hz < self.fs / 2.0):
            raise ConfigError(
                f"band corners must satisfy 0 < {self.low_hz} < {self.high_hz} "
                f"< fs/2 = {self.fs / 2.0}"
            )
        if self.order < 1:
            raise ConfigError("filter order must be at least 1")


def butterworth_bandpass(signal, spec: BandpassSpec) -> np.ndarray:
    """Causal forward band-pass filtering, per channel.

    The filter is an analog Butterworth prototype mapped through the bilinear
    transform with frequency prewarping and realized as cascaded second-order
    sections for stability at higher orders.
    """
    x = np.asarray(signal, dtype=float)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[None, :]
    if x.ndim != 2:
        raise DataError("signal must be a channels-by-samples matrix")
    if x.shape[1] <= 3 * spec.order:
        raise DataError(
            f"signal too short: {x.shape[1]} samples for order {spec.order}"
        )
    sos = scipy.signal.butter(
        spec.order, [spec.low_hz, spec.high_hz], btype="bandpass", fs=spec.fs,
        output="sos",
    )
    y = scipy.signal.sosfilt(sos, x, axis=-1)
    return y[0] if squeeze else y


def extract_epochs(
    continuous,
    events,
    window: tuple[float, float],
    fs: float,
    class_count: int | None = None,
    channel_names: list[str] | None = None,
) -> TrialSet:
    """Cut event-locked windows out of a continuous recording.

    ``events`` is a sequence of (sample_index, label); ``window`` gives the
    slice start/end in seconds relative to each event. Trials are row-centered.
    """
    data = np.asarray(continuous, dtype=float)
    if data.ndim != 2:
        raise DataError("continuous recording must be channels-by-samples")
    start_s, end_s = window
    if not end_s > start_s:
        raise DataError(f"window end {end_s} must exceed start {start_s}")
    start_off = int(round(start_s * fs))
    stop_off = int(round(end_s * fs))
    n = data.shape[1]
    bad = [
        i
        for i, (sample, _) in enumerate(events)
        if sample + start_off < 0 or sample + stop_off > n
    ]
    if bad:
        raise DataError(f"events with out-of-bounds windows: {bad}")
    trials = [data[:, s + start_off : s + stop_off] for s, _ in events]
    labels = [int(lab) for _, lab in events]
    if class_count is None:
        class_count = max(labels)
    return TrialSet(
        trials=trials,
        labels=np.asarray(labels),
        fs=fs,
        class_count=class_count,
        channel_names=channel_names or [],
    )


@dataclass
class CovarianceSet:
    """Per-trial spatial covariances with class-mean, composite, and whitened forms."""

    per_trial: np.ndarray  # (n, N_c, N_c)
    class_means: np.ndarray  # (N_omega, N_c, N_c)
    composite: np.ndarray  # (N_c, N_c)
    whitener: np.ndarray  # P_c with P_c.T @ composite @ P_c = I
    whitened_per_trial: np.ndarray  # (n, N_c, N_c)
    labels: np.ndarray  # (n,)

    @property
    def n_trials(self) -> int:
        return self.per_trial.shape[0]

    @property
    def n_channels(self) -> int:
        return self.per_trial.shape[1]

    @property
    def n_classes(self) -> int:
        return self.class_means.shape[0]

    @property
    def class_sizes(self) -> np.ndarray:
        return np.array(
            [int(np.sum(self.labels == k)) for k in range(1, self.n_classes + 1)]
        )

    def class_indices(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.labels == k)


def trial_covariance(X: np.ndarray) -> np.ndarray:
    """Sample spatial covariance X @ X.T / (N_t - 1) of one centered trial."""
    X = np.asarray(X, dtype=float)
    C = X @ X.T / (X.shape[1] - 1)
    return 0.5 * (C + C.T)


def covariances(trials: TrialSet, tol: RankTolerance = RankTolerance()) -> CovarianceSet:
    """Estimate per-trial, class-mean, and composite covariances plus whitening.

    Class means use the plain arithmetic mean over each class's trials (no
    trace normalization); the composite is the sum of class means.
    """
    per = np.stack([trial_covariance(X) for X in trials.trials])
    means = np.stack(
        [
            per[trials.labels == k].mean(axis=0)
            for k in range(1, trials.class_count + 1)
        ]
    )
    composite = means.sum(axis=0)
    composite = 0.5 * (composite + composite.T)
    try:
        P = whitening_transform(composite, tol)
    except RankError as exc:
        raise RankError(
            f"composite covariance is rank deficient ({exc}); collect more "
            "trials or remove linearly dependent channels"
        ) from exc
    whitened = np.einsum("ij,njk,kl->nil", P.T, per, P)
    whitened = 0.5 * (whitened + whitened.transpose(0, 2, 1))
    return CovarianceSet(
        per_trial=per,
        class_means=means,
        composite=composite,
        whitener=P,
        whitened_per_trial=whitened,
        labels=trials.labels.copy(),
    )
