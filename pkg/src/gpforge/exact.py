"""Exact Cholesky sampling and the whitening transform used for verification."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import _streams
from .bounds import FidelitySpec
from .kernel import GramMatrix, InputData, KernelParams, gram


class SampleMethod(enum.Enum):
    Exact = "exact"
    Rff = "rff"
    Ciq = "ciq"
    CiqPreconditioned = "pciq"


class FactorizationError(ValueError):
    """Raised when a Cholesky factorization hits a non-positive pivot."""

    def __init__(self, pivot_index: int):
        self.pivot_index = pivot_index
        super().__init__(
            f"matrix is not positive definite: pivot {pivot_index} is not positive"
        )


@dataclass(frozen=True)
class GpSample:
    """One draw from a sampler, with the provenance needed to reproduce it.

    y is the noisy observed vector; f, when present, is the latent
    function before the final noise stage (only the quadrature sampler
    separates the two).
    """

    y: np.ndarray
    method: SampleMethod
    params: KernelParams
    fidelity: FidelitySpec
    seed: int
    f: np.ndarray | None = None

    def __post_init__(self) -> None:
        y = np.asarray(self.y, dtype=np.float64)
        if y.ndim != 1:
            raise ValueError(f"y must be a vector, got shape {y.shape}")
        if not np.all(np.isfinite(y)):
            raise ValueError("sample contains non-finite values")
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.y.shape[0]


def cholesky_factor(K: GramMatrix) -> np.ndarray:
    """Lower-triangular L with L L^T = K.entries.

    Raises FactorizationError naming the first failing pivot when the
    matrix is not positive definite.
    """
    L, info = scipy.linalg.lapack.dpotrf(K.entries, lower=1, clean=1)
    if info > 0:
        raise FactorizationError(pivot_index=int(info) - 1)
    if info < 0:
        raise ValueError(f"illegal factorization argument at position {-info}")
    return L


def exact_sample(X: InputData, params: KernelParams, seed: int) -> GpSample:
    """Draw y = L u with L the Cholesky factor of the fully noisy Gram matrix."""
    K = gram(X, params, jitter=params.noise_variance)
    L = cholesky_factor(K)
    u = _streams.stream(seed, _streams.LATENT).standard_normal(X.n)
    y = L @ u
    return GpSample(
        y=y,
        method=SampleMethod.Exact,
        params=params,
        fidelity=FidelitySpec.for_exact(),
        seed=seed,
    )


def whiten(y: np.ndarray, K_xi: GramMatrix) -> np.ndarray:
    """Map y through the inverse Cholesky factor of K_xi.

    If y is a zero-mean Gaussian with covariance K_xi, the result is a
    standard normal vector.
    """
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 1 or y.shape[0] != K_xi.n:
        raise ValueError(f"y has shape {y.shape}, expected ({K_xi.n},)")
    L = cholesky_factor(K_xi)
    return scipy.linalg.solve_triangular(L, y, lower=True)
