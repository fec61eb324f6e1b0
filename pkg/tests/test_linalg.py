"""Core linear-algebra kernels: ordering, canonicalization, reconstruction."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from scacsp import (
    NumericalError,
    DefinitenessError,
    RankError,
    RankTolerance,
    gen_sym_eig,
    range_null_bases,
    sym_eig,
    unvec,
    vec,
    whitening_transform,
)
from scacsp.datagen import oracle_rayleigh_max

from helpers import random_spd, random_symmetric


class TestSymEig:
    def test_identity(self):
        e = sym_eig(np.eye(3))
        np.testing.assert_array_equal(e.values, np.ones(3))
        np.testing.assert_allclose(e.vectors, np.eye(3), atol=1e-14)

    def test_diagonal_sorted_non_increasing(self):
        e = sym_eig(np.diag([1.0, 4.0, 2.0]))
        np.testing.assert_allclose(e.values, [4.0, 2.0, 1.0], atol=1e-14)
        # axis vectors permuted to follow the sorted values
        np.testing.assert_allclose(np.abs(e.vectors), np.eye(3)[:, [1, 2, 0]], atol=1e-14)

    def test_2x2_characteristic_polynomial_oracle(self):
        # closed-form roots of det(A - lambda I) for 2x2 symmetric A
        rng = np.random.default_rng(11)
        for _ in range(50):
            A = random_symmetric(rng, 2)
            tr, det = np.trace(A), np.linalg.det(A)
            disc = np.sqrt(max(tr * tr / 4 - det, 0.0))
            roots = np.array([tr / 2 + disc, tr / 2 - disc])
            e = sym_eig(A)
            np.testing.assert_allclose(e.values, roots, atol=1e-10)

    def test_3x3_characteristic_polynomial_oracle(self):
        rng = np.random.default_rng(12)
        for _ in range(25):
            A = random_symmetric(rng, 3)
            roots = np.sort(np.roots(np.poly(A)).real)[::-1]
            e = sym_eig(A)
            np.testing.assert_allclose(e.values, roots, atol=1e-8)

    def test_random_6x6_reconstruction(self):
        rng = np.random.default_rng(13)
        A = random_symmetric(rng, 6)
        e = sym_eig(A)
        recon = (e.vectors * e.values) @ e.vectors.T
        assert np.linalg.norm(A - recon) <= 1e-8 * max(1.0, np.linalg.norm(A))

    def test_sign_canonicalization(self):
        rng = np.random.default_rng(14)
        for _ in range(20):
            e = sym_eig(random_symmetric(rng, 5))
            for j in range(5):
                k = np.argmax(np.abs(e.vectors[:, j]))
                assert e.vectors[k, j] > 0

    def test_rejects_non_square_and_non_finite(self):
        with pytest.raises(NumericalError):
            sym_eig(np.ones((2, 3)))
        with pytest.raises(NumericalError):
            sym_eig(np.array([[1.0, np.nan], [np.nan, 1.0]]))

    def test_rejects_asymmetric(self):
        with pytest.raises(NumericalError):
            sym_eig(np.array([[1.0, 2.0], [0.0, 1.0]]))

    @settings(max_examples=40, deadline=None)
    @given(st.integers(min_value=2, max_value=16), st.integers(min_value=0, max_value=10**6))
    def test_invariants_random_sizes(self, n, seed):
        rng = np.random.default_rng(seed)
        A = random_symmetric(rng, n)
        e = sym_eig(A)
        assert np.all(np.diff(e.values) <= 1e-12 * max(1.0, np.abs(e.values).max()))
        ortho = e.vectors.T @ e.vectors
        assert np.linalg.norm(ortho - np.eye(n)) <= 1e-10
        recon = (e.vectors * e.values) @ e.vectors.T
        assert np.linalg.norm(A - recon) <= 1e-8 * max(1.0, np.linalg.norm(A))

    def test_large_size_reconstruction(self):
        rng = np.random.default_rng(15)
        A = random_symmetric(rng, 64)
        e = sym_eig(A)
        assert np.linalg.norm(e.vectors.T @ e.vectors - np.eye(64)) <= 1e-10
        recon = (e.vectors * e.values) @ e.vectors.T
        assert np.linalg.norm(A - recon) <= 1e-8 * max(1.0, np.linalg.norm(A))


class TestGenSymEig:
    def test_identity_b_reduces_to_sym_eig(self):
        e = gen_sym_eig(np.diag([2.0, 1.0]), np.eye(2))
        np.testing.assert_allclose(e.values, [2.0, 1.0], atol=1e-14)

    def test_values_in_unit_interval_for_composite_denominator(self):
        rng = np.random.default_rng(21)
        for _ in range(20):
            C1 = random_spd(rng, 5)
            C2 = random_spd(rng, 5)
            e = gen_sym_eig(C1, C1 + C2)
            assert np.all(e.values > 0.0) and np.all(e.values < 1.0)

    def test_against_inverse_multiply_oracle(self):
        rng = np.random.default_rng(22)
        for _ in range(100):
            A = random_symmetric(rng, 4)
            B = random_spd(rng, 4)
            e = gen_sym_eig(A, B)
            val, w = oracle_rayleigh_max(A, B)
            assert abs(e.values[0] - val) <= 1e-8 * max(1.0, abs(val))
            cos = abs(w @ e.vectors[:, 0]) / np.linalg.norm(e.vectors[:, 0])
            assert cos >= 1 - 1e-8

    def test_matches_whiten_then_sym_eig_path(self):
        rng = np.random.default_rng(23)
        C1 = random_spd(rng, 6)
        C2 = random_spd(rng, 6)
        comp = C1 + C2
        e = gen_sym_eig(C1, comp)
        P = whitening_transform(comp)
        e2 = sym_eig(P.T @ C1 @ P)
        np.testing.assert_allclose(e.values, e2.values, atol=1e-10)

    def test_b_normalization_and_residual(self):
        rng = np.random.default_rng(24)
        for _ in range(20):
            A = random_symmetric(rng, 6)
            B = random_spd(rng, 6)
            e = gen_sym_eig(A, B)
            norms = np.einsum("ij,jk,ki->i", e.vectors.T, B, e.vectors)
            np.testing.assert_allclose(norms, 1.0, atol=1e-10)
            for j in range(6):
                r = A @ e.vectors[:, j] - e.values[j] * (B @ e.vectors[:, j])
                assert np.linalg.norm(r) <= 1e-8 * np.linalg.norm(A) * np.linalg.norm(
                    e.vectors[:, j]
                )

    def test_rejects_indefinite_b(self):
        with pytest.raises(DefinitenessError) as err:
            gen_sym_eig(np.eye(2), np.diag([1.0, -1.0]))
        assert "eigenvalue" in str(err.value)


class TestWhitening:
    def test_identity(self):
        np.testing.assert_allclose(whitening_transform(np.eye(4)), np.eye(4), atol=1e-14)

    def test_diagonal(self):
        P = whitening_transform(np.diag([4.0, 1.0]))
        np.testing.assert_allclose(np.abs(P), np.diag([0.5, 1.0])[:, [0, 1]], atol=1e-14)

    def test_random_spd_whitens(self):
        rng = np.random.default_rng(31)
        C = random_spd(rng, 8)
        P = whitening_transform(C)
        np.testing.assert_allclose(P.T @ C @ P, np.eye(8), atol=1e-8)

    def test_involution_consistency(self):
        rng = np.random.default_rng(32)
        C = random_spd(rng, 5)
        P = whitening_transform(C)
        P2 = whitening_transform(P.T @ C @ P)
        np.testing.assert_allclose(np.abs(P2), np.eye(5), atol=1e-7)

    def test_rank_deficient_reports_count(self):
        with pytest.raises(RankError) as err:
            whitening_transform(np.diag([1.0, 1.0, 0.0, 0.0]))
        assert "2 of 4" in str(err.value)


class TestVecUnvec:
    def test_column_stacking(self):
        np.testing.assert_array_equal(
            vec(np.array([[1.0, 3.0], [2.0, 4.0]])), [1.0, 2.0, 3.0, 4.0]
        )

    def test_outer_product_is_kron(self):
        a = np.array([1.0, 2.0])
        np.testing.assert_array_equal(vec(np.outer(a, a)), [1.0, 2.0, 2.0, 4.0])
        rng = np.random.default_rng(41)
        for _ in range(20):
            a = rng.standard_normal(5)
            np.testing.assert_array_equal(vec(np.outer(a, a)), np.kron(a, a))

    def test_round_trip_exact(self):
        rng = np.random.default_rng(42)
        M = rng.standard_normal((5, 5))
        np.testing.assert_array_equal(unvec(vec(M), 5), M)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(min_value=1, max_value=9), st.integers(min_value=0, max_value=10**6))
    def test_round_trip_property(self, n, seed):
        rng = np.random.default_rng(seed)
        M = rng.standard_normal((n, n))
        np.testing.assert_array_equal(unvec(vec(M)), M)

    def test_unvec_rejects_non_square_length(self):
        with pytest.raises(NumericalError):
            unvec(np.arange(5.0))


class TestRangeNullBases:
    def test_identical_columns_rank_zero(self):
        col = np.array([1.0, 2.0, 3.0])
        samples = np.stack([col, col, col], axis=1)
        basis, rank = range_null_bases(samples, samples.mean(axis=1))
        assert rank == 0 and basis.dim == 0

    def test_known_rank(self):
        rng = np.random.default_rng(51)
        for k in (1, 3, 5):
            X = rng.standard_normal((8, k))  # independent columns a.s.
            basis, rank = range_null_bases(X, np.zeros(8))
            assert rank == k
            np.testing.assert_allclose(
                basis.columns.T @ basis.columns, np.eye(k), atol=1e-10
            )
            # basis spans the columns
            proj = basis.columns @ (basis.columns.T @ X)
            np.testing.assert_allclose(proj, X, atol=1e-8)

    def test_rank_matches_gram_eigenvalue_count(self):
        rng = np.random.default_rng(52)
        tol = RankTolerance()
        for _ in range(20):
            k = rng.integers(1, 6)
            X = rng.standard_normal((10, 7)) @ np.diag(
                np.concatenate([np.ones(int(k)), np.zeros(7 - int(k))])
            )
            center = np.zeros(10)
            _, rank = range_null_bases(X, center, tol)
            G = X.T @ X
            lam = np.linalg.eigvalsh(G)
            gram_rank = int(np.sum(lam > (tol.relative**2) * lam.max())) if lam.max() > 0 else 0
            assert rank == gram_rank
