"""Kernel primitives: hyperparameters, input sampling and Gram assembly.

The only covariance function provided is the isotropic squared
exponential

    k(x, x') = variance * exp(-||x - x'||^2 / (2 * lengthscale^2))

with an additive diagonal jitter supplied at Gram-assembly time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _streams


@dataclass(frozen=True)
class KernelParams:
    """Squared-exponential hyperparameters plus the observation noise level.

    variance        signal variance (>= 0)
    lengthscale     kernel lengthscale (> 0)
    noise_variance  observation noise variance (> 0)
    dim             input dimensionality (integer >= 1)
    """

    variance: float
    lengthscale: float
    noise_variance: float
    dim: int

    def __post_init__(self) -> None:
        if self.variance < 0:
            raise ValueError(f"variance must be >= 0, got {self.variance}")
        if self.lengthscale <= 0:
            raise ValueError(f"lengthscale must be > 0, got {self.lengthscale}")
        if self.noise_variance <= 0:
            raise ValueError(f"noise_variance must be > 0, got {self.noise_variance}")
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"dim must be an integer >= 1, got {self.dim}")


@dataclass(frozen=True)
class InputData:
    """A set of input locations (n x d, float64) and the seed that produced it."""

    points: np.ndarray
    seed: int | None = None

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2:
            raise ValueError(f"points must be a 2-d array, got shape {pts.shape}")
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class GramMatrix:
    """Dense kernel matrix with the diagonal jitter it was assembled with."""

    entries: np.ndarray
    jitter: float = 0.0

    def __post_init__(self) -> None:
        ent = np.asarray(self.entries, dtype=np.float64)
        if ent.ndim != 2 or ent.shape[0] != ent.shape[1]:
            raise ValueError(f"entries must be square, got shape {ent.shape}")
        object.__setattr__(self, "entries", ent)

    @property
    def n(self) -> int:
        return self.entries.shape[0]


def rbf(x: np.ndarray, x_prime: np.ndarray, params: KernelParams) -> float:
    """Evaluate k(x, x') for a single pair of d-vectors."""
    x = np.asarray(x, dtype=np.float64).ravel()
    x_prime = np.asarray(x_prime, dtype=np.float64).ravel()
    if x.shape != x_prime.shape:
        raise ValueError(
            f"dimension mismatch: x has shape {x.shape}, x' has shape {x_prime.shape}"
        )
    d2 = float(np.sum((x - x_prime) ** 2))
    return float(params.variance * np.exp(-d2 / (2.0 * params.lengthscale**2)))


def sample_inputs(n: int, params: KernelParams, seed: int) -> InputData:
    """Draw n i.i.d. input locations from Normal(0, I_d / d).

    The 1/d scaling keeps E||x - x'||^2 = 2 regardless of dimension, so
    lengthscales are comparable across d.
    """
    if n < 1:
        raise ValueError(f"need n >= 1 input points, got {n}")
    g = _streams.stream(seed, _streams.INPUTS)
    pts = g.standard_normal((n, params.dim)) / np.sqrt(params.dim)
    return InputData(points=pts, seed=seed)


def gram(X: InputData, params: KernelParams, jitter: float = 0.0) -> GramMatrix:
    """Assemble the dense Gram matrix K + jitter * I on X.

    Squared distances use the expanded form ||x||^2 + ||x'||^2 - 2 x.x'
    (one GEMM) clamped below at zero; the result is explicitly
    symmetrised and the diagonal is pinned to variance + jitter exactly.
    """
    if jitter < 0:
        raise ValueError(f"jitter must be >= 0, got {jitter}")
    pts = X.points
    if pts.shape[1] != params.dim:
        raise ValueError(
            f"dimension mismatch: inputs have d={pts.shape[1]}, params.dim={params.dim}"
        )
    sq = np.sum(pts * pts, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (pts @ pts.T)
    np.maximum(d2, 0.0, out=d2)
    K = params.variance * np.exp(-d2 / (2.0 * params.lengthscale**2))
    K = 0.5 * (K + K.T)
    np.fill_diagonal(K, params.variance + jitter)
    return GramMatrix(entries=K, jitter=float(jitter))
