"""Synthetic generator determinism and the brute-force oracles."""

import numpy as np
import pytest

from scacsp import (
    ConfigError,
    NumericalError,
    SynthSpec,
    covariances,
    csp_train,
    generate,
    gen_sym_eig,
    oracle_rayleigh_max,
    oracle_scatter,
    scsp_penalty,
    scatter_matrices,
    vectorize_covariances,
)

from helpers import random_spd, random_symmetric


def _basic_spec(**over):
    base = dict(
        n_channels=2,
        n_samples=500,
        trials_per_class=200,
        class_covariances=[np.diag([3.0, 1.0]), np.diag([1.0, 3.0])],
        seed=123,
    )
    base.update(over)
    return SynthSpec(**base)


class TestGenerate:
    def test_deterministic_under_seed(self):
        a = generate(_basic_spec(trials_per_class=5, n_samples=64))
        b = generate(_basic_spec(trials_per_class=5, n_samples=64))
        for Xa, Xb in zip(a.trials, b.trials):
            np.testing.assert_array_equal(Xa, Xb)
        np.testing.assert_array_equal(a.labels, b.labels)

    def test_seed_changes_data(self):
        a = generate(_basic_spec(trials_per_class=2, n_samples=32))
        b = generate(_basic_spec(trials_per_class=2, n_samples=32, seed=124))
        assert not np.array_equal(a.trials[0], b.trials[0])

    def test_csp_recovers_ground_truth_axis(self):
        ts = generate(_basic_spec())
        bank = csp_train(covariances(ts), 1)
        w = bank.filters[:, 0] / np.linalg.norm(bank.filters[:, 0])
        angle = np.degrees(np.arccos(min(abs(w[0]), 1.0)))
        assert angle <= 5.0

    def test_stationary_data_small_penalty(self):
        ts = generate(_basic_spec(trials_per_class=40, n_samples=2000))
        cov = covariances(ts)
        P = scsp_penalty(cov)
        # each |C_i - C_k| carries only O(sigma^2 / sqrt(N_t)) sampling error
        bound = 80 * 2 * 3.0 * 5.0 / np.sqrt(2000)
        assert np.linalg.norm(P) <= bound

    def test_outliers_scale_covariance(self):
        spec = _basic_spec(
            trials_per_class=50, n_samples=400, outlier_rate=0.3, outlier_scale=25.0
        )
        ts = generate(spec)
        traces = np.array([np.trace(X @ X.T) / X.shape[1] for X in ts.trials])
        big = int(np.sum(traces > 5 * np.median(traces)))
        assert 10 <= big <= 55  # around 30 of the 100 trials at rate 0.3

    def test_rejects_bad_spec(self):
        with pytest.raises(NumericalError):
            _basic_spec(class_covariances=[np.diag([1.0, -1.0]), np.eye(2)])
        with pytest.raises(ConfigError):
            _basic_spec(outlier_rate=1.5)

    def test_covariance_converges_at_root_n_rate(self):
        errs = []
        for n_t in (500, 8000):
            spec = _basic_spec(trials_per_class=30, n_samples=n_t, seed=9)
            cov = covariances(generate(spec))
            errs.append(np.max(np.abs(cov.class_means[0] - np.diag([3.0, 1.0]))))
        assert errs[1] < errs[0]
        assert errs[1] <= 3 * errs[0] * np.sqrt(500 / 8000)


class TestRayleighOracle:
    def test_agreement_with_gen_sym_eig(self):
        rng = np.random.default_rng(31)
        for _ in range(100):
            A = random_symmetric(rng, 5)
            B = random_spd(rng, 5)
            val, w = oracle_rayleigh_max(A, B)
            e = gen_sym_eig(A, B)
            assert abs(val - e.values[0]) <= 1e-8 * max(1.0, abs(val))

    def test_a_equals_b(self):
        B = random_spd(np.random.default_rng(32), 4)
        val, _ = oracle_rayleigh_max(B, B)
        assert abs(val - 1.0) <= 1e-10

    def test_2x2_closed_form(self):
        # max of Rayleigh quotient with B = I solves the quadratic
        # lambda^2 - tr(A) lambda + det(A) = 0
        rng = np.random.default_rng(33)
        for _ in range(25):
            A = random_symmetric(rng, 2)
            tr, det = np.trace(A), np.linalg.det(A)
            lam = tr / 2 + np.sqrt(tr * tr / 4 - det)
            val, _ = oracle_rayleigh_max(A, np.eye(2))
            assert abs(val - lam) <= 1e-10

    def test_min_mode(self):
        A = np.diag([3.0, -2.0])
        val, w = oracle_rayleigh_max(A, np.eye(2), mode="min")
        assert abs(val + 2.0) <= 1e-12 and abs(abs(w[1]) - 1.0) <= 1e-12


class TestScatterOracle:
    def _vec_samples(self, seed=41, n_c=4, per_class=6, classes=2):
        covs = [random_spd(np.random.default_rng(seed + k), n_c) for k in range(classes)]
        spec = SynthSpec(
            n_channels=n_c,
            n_samples=100,
            trials_per_class=per_class,
            class_covariances=covs,
            seed=seed,
        )
        return vectorize_covariances(covariances(generate(spec)))

    def test_additivity_exact(self):
        v = self._vec_samples()
        Sb, Sw, St = oracle_scatter(v)
        scale = max(1.0, np.linalg.norm(St))
        assert np.linalg.norm(St - (Sw + Sb)) <= 1e-12 * scale

    def test_single_sample_per_class_zero_within(self):
        v = self._vec_samples(per_class=1)
        _, Sw, _ = oracle_scatter(v)
        assert np.max(np.abs(Sw)) <= 1e-18

    def test_matches_factorized_representation(self):
        v = self._vec_samples(seed=43, n_c=5, per_class=8)
        Sb, Sw, St = oracle_scatter(v)
        triple = scatter_matrices(v)
        rng = np.random.default_rng(44)
        for _ in range(10):
            x = rng.standard_normal(v.samples.shape[0])
            for name, S in (("Sb", Sb), ("Sw", Sw), ("St", St)):
                lhs = triple.matvec(name, x)
                assert np.linalg.norm(lhs - S @ x) <= 1e-9 * max(
                    1.0, np.linalg.norm(S @ x)
                )

    def test_size_guard(self):
        v = self._vec_samples(n_c=4)
        v.n_channels = 13
        with pytest.raises(ConfigError):
            oracle_scatter(v)
