"""Random-feature sampler: spectral frequencies, feature map, batch and
streaming generation.

Both generation paths reduce feature rows against the weight vector in
fixed-size chunks through the same code path, so the streaming variant
(which regenerates frequencies on the fly and never holds the full
feature matrix) emits values bitwise equal to the batch variant.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import _streams
from .bounds import FidelitySpec
from .exact import GpSample, SampleMethod
from .kernel import InputData, KernelParams, sample_inputs

# frequency rows per reduction chunk; fixed so chunk boundaries (and
# therefore floating-point accumulation order) never depend on n or D
_CHUNK_ROWS = 256


class PartialOutputError(RuntimeError):
    """Raised when a streaming sink fails after some elements were emitted."""

    def __init__(self, emitted: int, cause: Exception):
        self.emitted = emitted
        super().__init__(f"sink failed after {emitted} emitted elements: {cause}")


@dataclass(frozen=True)
class FrequencyMatrix:
    """Spectral frequencies for paired sine/cosine features.

    omegas has one row per feature pair, so D features correspond to a
    (D/2) x d matrix.
    """

    omegas: np.ndarray
    seed: int

    def __post_init__(self) -> None:
        om = np.asarray(self.omegas, dtype=np.float64)
        if om.ndim != 2 or om.shape[0] < 1:
            raise ValueError(f"omegas must be a nonempty 2-d array, got shape {om.shape}")
        object.__setattr__(self, "omegas", om)

    @property
    def D(self) -> int:
        return 2 * self.omegas.shape[0]

    @property
    def dim(self) -> int:
        return self.omegas.shape[1]


def sample_frequencies(D: int, params: KernelParams, seed: int) -> FrequencyMatrix:
    """Draw D/2 frequency rows from the spectral density Normal(0, I_d / l^2)."""
    if D < 2 or D % 2 != 0:
        raise ValueError(f"D must be an even count >= 2, got {D}")
    g = _streams.stream(seed, _streams.FREQUENCIES)
    om = g.standard_normal((D // 2, params.dim)) / params.lengthscale
    return FrequencyMatrix(omegas=om, seed=seed)


def _feature_rows(x: np.ndarray, omegas: np.ndarray, D: int) -> np.ndarray:
    """Interleaved sqrt(2/D)*(sin, cos) features of x against the given rows."""
    proj = omegas @ x
    out = np.empty(2 * omegas.shape[0])
    scale = np.sqrt(2.0 / D)
    out[0::2] = scale * np.sin(proj)
    out[1::2] = scale * np.cos(proj)
    return out


def feature_map(x: np.ndarray, freqs: FrequencyMatrix) -> np.ndarray:
    """Evaluate the D-dimensional random feature vector at a single point."""
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.shape[0] != freqs.dim:
        raise ValueError(
            f"dimension mismatch: x has length {x.shape[0]}, frequencies have d={freqs.dim}"
        )
    return _feature_rows(x, freqs.omegas, freqs.D)


def _reduce_row(x: np.ndarray, omegas: np.ndarray, w: np.ndarray, D: int) -> float:
    """Chunked dot product of the feature row at x with the weight vector."""
    acc = 0.0
    for start in range(0, omegas.shape[0], _CHUNK_ROWS):
        stop = min(start + _CHUNK_ROWS, omegas.shape[0])
        z_chunk = _feature_rows(x, omegas[start:stop], D)
        acc += float(np.dot(z_chunk, w[2 * start : 2 * stop]))
    return acc


def rff_sample(X: InputData, params: KernelParams, D: int, seed: int) -> GpSample:
    """Draw a random-feature sample on explicit inputs.

    y = sigma_f * Z w + xi with Z the feature matrix of X, w a standard
    normal weight vector and xi independent observation noise.
    """
    freqs = sample_frequencies(D, params, seed)
    w = _streams.stream(seed, _streams.WEIGHTS).standard_normal(D)
    sigma_f = np.sqrt(params.variance)
    f = np.empty(X.n)
    for i in range(X.n):
        f[i] = sigma_f * _reduce_row(X.points[i], freqs.omegas, w, D)
    xi = _streams.stream(seed, _streams.NOISE).standard_normal(X.n)
    y = f + np.sqrt(params.noise_variance) * xi
    return GpSample(
        y=y,
        f=f,
        method=SampleMethod.Rff,
        params=params,
        fidelity=FidelitySpec(D=D),
        seed=seed,
    )


def rff_sample_streaming(
    n: int,
    params: KernelParams,
    D: int,
    seed: int,
    sink: Callable[[int, float], None],
) -> None:
    """Emit a random-feature sample one element at a time.

    Inputs, frequencies, weights and noise are all regenerated from
    their seed-derived streams in fixed chunks, so peak memory is
    independent of both n and D and the emitted values equal
    rff_sample(sample_inputs(n, params, seed), params, D, seed).y
    bitwise.
    """
    if D < 2 or D % 2 != 0:
        raise ValueError(f"D must be an even count >= 2, got {D}")
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    n_rows = D // 2
    sigma_f = np.sqrt(params.variance)
    sigma_xi = np.sqrt(params.noise_variance)
    input_stream = _streams.stream(seed, _streams.INPUTS)
    noise_stream = _streams.stream(seed, _streams.NOISE)
    sqrt_d = np.sqrt(params.dim)
    for i in range(n):
        x_i = input_stream.standard_normal(params.dim) / sqrt_d
        freq_stream = _streams.stream(seed, _streams.FREQUENCIES)
        weight_stream = _streams.stream(seed, _streams.WEIGHTS)
        acc = 0.0
        for start in range(0, n_rows, _CHUNK_ROWS):
            stop = min(start + _CHUNK_ROWS, n_rows)
            omega_chunk = (
                freq_stream.standard_normal((stop - start, params.dim))
                / params.lengthscale
            )
            w_chunk = weight_stream.standard_normal(2 * (stop - start))
            z_chunk = _feature_rows(x_i, omega_chunk, D)
            acc += float(np.dot(z_chunk, w_chunk))
        y_i = sigma_f * acc + sigma_xi * float(noise_stream.standard_normal())
        try:
            sink(i, float(y_i))
        except Exception as exc:
            raise PartialOutputError(emitted=i, cause=exc) from exc
