"""Shared fixtures-in-spirit: random SPD matrices, filter matching, angles."""

import numpy as np


def random_spd(rng, n, spread=1.0):
    """Well-conditioned random SPD matrix."""
    A = rng.standard_normal((n, n))
    return A @ A.T * spread / n + np.eye(n)


def random_symmetric(rng, n):
    A = rng.standard_normal((n, n))
    return 0.5 * (A + A.T)


def match_columns(A, B):
    """Globally greedy column matching by maximal |cosine|.

    Returns (match, cosines): match[j] is the column of B paired with column
    j of A (each used once), cosines[j] the |cosine| of that pair.
    """
    A = np.asarray(A, float)
    B = np.asarray(B, float)
    an = A / np.linalg.norm(A, axis=0)
    bn = B / np.linalg.norm(B, axis=0)
    C = np.abs(an.T @ bn)
    work = C.copy()
    match = np.full(A.shape[1], -1, dtype=int)
    cosines = np.zeros(A.shape[1])
    for _ in range(min(A.shape[1], B.shape[1])):
        j, k = np.unravel_index(np.argmax(work), work.shape)
        match[j] = k
        cosines[j] = C[j, k]
        work[j, :] = -1.0
        work[:, k] = -1.0
    return match, cosines


def principal_angles(A, B):
    """Principal angles (radians) between the column spans of A and B."""
    from scipy.linalg import subspace_angles

    return subspace_angles(np.asarray(A, float), np.asarray(B, float))


def separable_class_covs(rng, n_channels, n_classes, strength=4.0):
    """SPD class covariances with class-specific boosted directions."""
    base = random_spd(rng, n_channels, spread=0.3)
    covs = []
    for k in range(n_classes):
        e = np.zeros(n_channels)
        e[k % n_channels] = 1.0
        covs.append(base + strength * np.outer(e, e))
    return covs
