"""Dense Cholesky sampling and the whitening transform."""

import numpy as np
import pytest

from gpforge import (
    FactorizationError,
    KernelParams,
    SampleMethod,
    cholesky_factor,
    exact_sample,
    gram,
    sample_inputs,
    whiten,
)
from gpforge._streams import LATENT, stream
from gpforge.kernel import GramMatrix


PARAMS = KernelParams(variance=1.0, lengthscale=1.0, noise_variance=0.25, dim=2)


def noisy_gram(n, seed, params=PARAMS):
    X = sample_inputs(n, params, seed=seed)
    return X, gram(X, params, jitter=params.noise_variance)


class TestCholeskyFactor:
    def test_identity(self):
        K = GramMatrix(entries=np.eye(5), jitter=1.0)
        np.testing.assert_array_equal(cholesky_factor(K), np.eye(5))

    def test_hand_worked_two_by_two(self):
        K = GramMatrix(entries=np.array([[4.0, 2.0], [2.0, 5.0]]), jitter=1.0)
        L = cholesky_factor(K)
        np.testing.assert_allclose(L, [[2.0, 0.0], [1.0, 2.0]], atol=1e-14)

    def test_reconstruction_error_small(self):
        """LL^T reproduces the input to tight relative Frobenius error."""
        _, K = noisy_gram(128, seed=42)
        L = cholesky_factor(K)
        rel = np.linalg.norm(L @ L.T - K.entries) / np.linalg.norm(K.entries)
        assert rel <= 1e-10

    def test_strictly_lower_triangular_output(self):
        _, K = noisy_gram(12, seed=8)
        L = cholesky_factor(K)
        np.testing.assert_array_equal(np.triu(L, k=1), np.zeros((12, 12)))

    def test_indefinite_matrix_reports_pivot(self):
        """A matrix with a negative eigenvalue fails, naming the pivot
        at which elimination broke down."""
        K = GramMatrix(entries=np.array([[1.0, 2.0], [2.0, 1.0]]), jitter=0.0)
        with pytest.raises(FactorizationError) as info:
            cholesky_factor(K)
        assert info.value.pivot_index == 1
        assert "pivot 1" in str(info.value)


class TestExactSample:
    def test_deterministic_per_seed(self):
        X, _ = noisy_gram(32, seed=1)
        a = exact_sample(X, PARAMS, seed=99)
        b = exact_sample(X, PARAMS, seed=99)
        np.testing.assert_array_equal(a.y, b.y)
        assert a.method is SampleMethod.Exact

    def test_scalar_case_formula(self):
        """At n=1 the draw collapses to sqrt(variance + noise) times the
        underlying standard normal."""
        X = sample_inputs(1, PARAMS, seed=5)
        s = exact_sample(X, PARAMS, seed=123)
        u1 = stream(123, LATENT).standard_normal(1)[0]
        assert s.y[0] == pytest.approx(np.sqrt(1.25) * u1, rel=1e-14)

    def test_empirical_covariance_matches_kernel(self):
        """The sample covariance over 20000 seeds agrees with the noisy
        Gram matrix entrywise to within 4 standard errors."""
        n, reps = 4, 20000
        X, K = noisy_gram(n, seed=77)
        draws = np.stack([exact_sample(X, PARAMS, seed=r).y for r in range(reps)])
        emp = draws.T @ draws / reps
        for i in range(n):
            for j in range(n):
                se = np.sqrt((K.entries[i, i] * K.entries[j, j] + K.entries[i, j] ** 2) / reps)
                assert abs(emp[i, j] - K.entries[i, j]) < 4 * se


class TestWhiten:
    def test_identity_covariance_is_noop(self):
        K = GramMatrix(entries=np.eye(3), jitter=1.0)
        y = np.array([0.3, -1.0, 2.0])
        np.testing.assert_array_equal(whiten(y, K), y)

    def test_diagonal_forward_substitution(self):
        K = GramMatrix(entries=np.diag([4.0, 9.0]), jitter=1.0)
        np.testing.assert_allclose(whiten(np.array([2.0, 3.0]), K), [1.0, 1.0], atol=1e-14)

    @pytest.mark.parametrize("n,seed", [(8, 0), (64, 1), (64, 2), (512, 3)])
    def test_round_trip_recovers_latent_draw(self, n, seed):
        """Whitening an exact sample with the same matrix returns the
        standard normal vector that generated it."""
        X, K = noisy_gram(n, seed=seed)
        s = exact_sample(X, PARAMS, seed=seed + 1000)
        u = stream(seed + 1000, LATENT).standard_normal(n)
        z = whiten(s.y, K)
        assert float(np.max(np.abs(z - u))) <= 1e-8


class TestGpSampleValidation:
    def test_rejects_non_finite_values(self):
        from gpforge import FidelitySpec

        with pytest.raises(ValueError):
            from gpforge.exact import GpSample

            GpSample(
                y=np.array([1.0, np.nan]),
                method=SampleMethod.Exact,
                params=PARAMS,
                fidelity=FidelitySpec(),
                seed=0,
            )
