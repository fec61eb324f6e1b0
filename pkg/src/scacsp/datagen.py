"""Seeded synthetic multichannel data with known ground truth, plus the
brute-force oracles used to cross-check the fast linear-algebra paths.

Randomness contract: the generator is the counter-based Philox engine keyed
through ``numpy.random.SeedSequence(seed).spawn(trial_index)``, and Gaussian
variates are produced from its uniforms by the Box-Muller transform. The
stream consumed per trial is, in order: one uniform for the outlier decision,
the jitter matrix Gaussians (when nonstationarity > 0), then the data
Gaussians. This makes every trial a pure function of (seed, trial index).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.random import Generator, Philox, SeedSequence

from .errors import ConfigError, DefinitenessError, NumericalError
from .linalg import RankTolerance, gen_sym_eig
from .preprocess import TrialSet

_TINY_UNIFORM = 1e-300


def _box_muller(rng: Generator, shape) -> np.ndarray:
    """Standard normals from uniform pairs via the Box-Muller transform."""
    n = int(np.prod(shape)) if shape else 1
    m = (n + 1) // 2
    u1 = np.maximum(rng.random(m), _TINY_UNIFORM)
    u2 = rng.random(m)
    r = np.sqrt(-2.0 * np.log(u1))
    z = np.concatenate([r * np.cos(2.0 * np.pi * u2), r * np.sin(2.0 * np.pi * u2)])
    return z[:n].reshape(shape)


@dataclass
class SynthSpec:
    """Recipe for a seeded Gaussian trial set with per-class covariances."""

    n_channels: int
    n_samples: int
    trials_per_class: int
    class_covariances: list
    nonstationarity: float = 0.0  # per-trial covariance jitter scale
    outlier_rate: float = 0.0
    outlier_scale: float = 1.0
    seed: int = 0
    fs: float = 250.0

    def __post_init__(self):
        self.class_covariances = [
            np.asarray(C, dtype=float) for C in self.class_covariances
        ]
        for k, C in enumerate(self.class_covariances):
            if C.shape != (self.n_channels, self.n_channels):
                raise ConfigError(
                    f"class covariance {k} has shape {C.shape}, expected "
                    f"({self.n_channels}, {self.n_channels})"
                )
            try:
                np.linalg.cholesky(0.5 * (C + C.T))
            except np.linalg.LinAlgError as exc:
                raise NumericalError(
                    f"class covariance {k} is not symmetric positive definite"
                ) from exc
        if not 0.0 <= self.outlier_rate <= 1.0:
            raise ConfigError("outlier_rate must lie in [0, 1]")
        if self.nonstationarity < 0.0:
            raise ConfigError("nonstationarity must be non-negative")
        if self.trials_per_class < 1 or self.n_samples < 2:
            raise ConfigError("need at least 1 trial per class and 2 samples")

    @property
    def n_classes(self) -> int:
        return len(self.class_covariances)


def generate(spec: SynthSpec) -> TrialSet:
    """Draw the trial set described by ``spec``; deterministic under its seed."""
    n_total = spec.n_classes * spec.trials_per_class
    children = SeedSequence(spec.seed).spawn(n_total)
    factors = [np.linalg.cholesky(0.5 * (C + C.T)) for C in spec.class_covariances]
    trials = []
    labels = []
    idx = 0
    eye = np.eye(spec.n_channels)
    for k in range(1, spec.n_classes + 1):
        L = factors[k - 1]
        for _ in range(spec.trials_per_class):
            rng = Generator(Philox(children[idx]))
            idx += 1
            u_outlier = rng.random()
            F = L
            if spec.nonstationarity > 0.0:
                Z = _box_muller(rng, (spec.n_channels, spec.n_channels))
                F = L @ (eye + spec.nonstationarity * Z)
            if u_outlier < spec.outlier_rate:
                F = F * np.sqrt(spec.outlier_scale)
            X = F @ _box_muller(rng, (spec.n_channels, spec.n_samples))
            trials.append(X)
            labels.append(k)
    return TrialSet(
        trials=trials,
        labels=np.asarray(labels),
        fs=spec.fs,
        class_count=spec.n_classes,
    )


def oracle_rayleigh_max(A, B, mode: str = "max") -> tuple[float, np.ndarray]:
    """Independent extremizer of w.T A w / w.T B w.

    Deliberately a different algorithm from :func:`scacsp.linalg.gen_sym_eig`:
    a dense non-symmetric eigensolve of inv(B) @ A. Returns the extremal value
    and a unit-norm extremizing vector.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    beig = np.linalg.eigvalsh(0.5 * (B + B.T))
    if beig[0] <= 0.0:
        raise DefinitenessError(
            f"B is not positive definite: smallest eigenvalue {beig[0]:.6e}"
        )
    M = np.linalg.inv(B) @ A
    values, vectors = np.linalg.eig(M)
    values = np.real(values)
    if mode == "max":
        j = int(np.argmax(values))
    elif mode == "min":
        j = int(np.argmin(values))
    else:
        raise ConfigError(f"mode must be 'max' or 'min', got {mode!r}")
    w = np.real(vectors[:, j])
    w = w / np.linalg.norm(w)
    return float(values[j]), w


def oracle_scatter(v) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Literal double-loop evaluation of the three scatter matrices.

    Returns explicit (S_b, S_w, S_t) over the vectorized covariance samples.
    Guarded to n_channels <= 12 since the matrices are N_c^2 by N_c^2.
    """
    if v.n_channels > 12:
        raise ConfigError(
            f"explicit scatter oracle limited to 12 channels, got {v.n_channels}"
        )
    d = v.samples.shape[0]
    n_classes = v.class_means.shape[1]
    Sw = np.zeros((d, d))
    Sb = np.zeros((d, d))
    St = np.zeros((d, d))
    for k in range(n_classes):
        mean_k = v.class_means[:, k]
        for i in np.flatnonzero(v.labels == k + 1):
            dev = v.samples[:, i] - mean_k
            Sw += np.outer(dev, dev)
        dev_k = mean_k - v.grand_mean
        Sb += v.class_sizes[k] * np.outer(dev_k, dev_k)
    for i in range(v.samples.shape[1]):
        dev = v.samples[:, i] - v.grand_mean
        St += np.outer(dev, dev)
    return Sb, Sw, St
