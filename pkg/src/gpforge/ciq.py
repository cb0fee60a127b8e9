"""Quadrature-based matrix square-root products and the sampler built on them.

The square root of the noisy Gram matrix is applied to a vector through
a rational approximation: a handful of shifted linear systems, with
shifts and weights derived from Jacobi elliptic functions on the
spectral interval, solved jointly by a multi-shift minimum-residual
Krylov recurrence (or per-shift preconditioned conjugate gradients).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import _streams
from .bounds import FidelitySpec
from .exact import GpSample, SampleMethod
from .kernel import GramMatrix, InputData, KernelParams, gram
from .precond import NystromPreconditioner, apply_shifted_inverse, nystrom_factor

# AGM-style iterations converge quadratically; these caps are generous
# and the relative thresholds sit a few ulp above what float64 reaches
_AGM_TOL = 4e-16
_AGM_MAX_ITER = 64
_BREAKDOWN_REL = 1e-14


@dataclass(frozen=True)
class QuadratureScheme:
    """Shifted-system decomposition of the square root on a spectral interval.

    Applying sum_q weights[q] * K (shifts[q] I + K)^(-1) u approximates
    K^(1/2) u for any symmetric K whose spectrum lies within
    [lambda_min, lambda_max].
    """

    Q: int
    shifts: np.ndarray
    weights: np.ndarray
    lambda_min: float
    lambda_max: float

    def apply_scalar(self, a: float) -> float:
        """Evaluate the rational approximation of sqrt(a) at a scalar a."""
        return float(np.sum(self.weights * a / (self.shifts + a)))


@dataclass(frozen=True)
class SolveReport:
    """Outcome of a shifted-system solve."""

    iterations_run: int
    residual_norms: np.ndarray
    converged: np.ndarray
    breakdown: bool = False


def elliptic_K(k: float) -> float:
    """Complete elliptic integral of the first kind with modulus k."""
    if not 0 <= k < 1:
        raise ValueError(f"modulus must lie in [0, 1), got {k}")
    a, b = 1.0, math.sqrt((1.0 - k) * (1.0 + k))
    for _ in range(_AGM_MAX_ITER):
        if abs(a - b) <= _AGM_TOL * a:
            break
        a, b = 0.5 * (a + b), math.sqrt(a * b)
    return math.pi / (2.0 * a)


def _jacobi_sn_cn_dn(t: float, k: float) -> tuple[float, float, float]:
    """Jacobi sn, cn, dn via the descending Landen transformation."""
    if k < 1e-14:
        return math.sin(t), math.cos(t), 1.0
    a_list = [1.0]
    c_list = [k]
    a, b = 1.0, math.sqrt((1.0 - k) * (1.0 + k))
    n = 0
    while c_list[n] > _AGM_TOL * a_list[n] and n < _AGM_MAX_ITER:
        a, b, c = 0.5 * (a + b), math.sqrt(a * b), 0.5 * (a_list[n] - b)
        a_list.append(a)
        c_list.append(c)
        n += 1
    phi = (2.0**n) * a_list[n] * t
    phi_next = phi
    for i in range(n, 0, -1):
        s = c_list[i] / a_list[i] * math.sin(phi)
        phi_prev = 0.5 * (phi + math.asin(max(-1.0, min(1.0, s))))
        phi_next, phi = phi, phi_prev
    sn = math.sin(phi)
    cn = math.cos(phi)
    if n >= 1:
        dn = cn / math.cos(phi_next - phi)
    else:
        dn = math.sqrt(max(0.0, 1.0 - k * k * sn * sn))
    return sn, cn, dn


def jacobi_cn_dn(t: float, k: float) -> tuple[float, float]:
    """Jacobi elliptic cn(t, k) and dn(t, k)."""
    if not 0 <= k < 1:
        raise ValueError(f"modulus must lie in [0, 1), got {k}")
    _, cn, dn = _jacobi_sn_cn_dn(t, k)
    return cn, dn


def build_quadrature(lambda_min: float, lambda_max: float, Q: int) -> QuadratureScheme:
    """Place Q shifted-system nodes for the interval [lambda_min, lambda_max].

    Nodes sit at midpoints (q - 1/2) K'/Q of the complementary elliptic
    quarter period, mapped onto shifts lambda_min * (sn/cn)^2 with
    weights 2 K' sqrt(lambda_min) dn / (pi Q cn^2), all at the
    complementary modulus sqrt(1 - lambda_min/lambda_max).
    """
    if not 0 < lambda_min <= lambda_max:
        raise ValueError(
            f"need 0 < lambda_min <= lambda_max, got [{lambda_min}, {lambda_max}]"
        )
    if Q < 1:
        raise ValueError(f"Q must be >= 1, got {Q}")
    ratio = lambda_min / lambda_max
    k_comp = math.sqrt(max(0.0, 1.0 - ratio))
    Kp = elliptic_K(k_comp)
    shifts = np.empty(Q)
    weights = np.empty(Q)
    for q in range(Q):
        t_q = (q + 0.5) * Kp / Q
        sn, cn, dn = _jacobi_sn_cn_dn(t_q, k_comp)
        shifts[q] = lambda_min * (sn / cn) ** 2
        weights[q] = (2.0 * Kp * math.sqrt(lambda_min) / (math.pi * Q)) * dn / cn**2
    return QuadratureScheme(
        Q=Q,
        shifts=shifts,
        weights=weights,
        lambda_min=float(lambda_min),
        lambda_max=float(lambda_max),
    )


MatVec = Callable[[np.ndarray], np.ndarray]


def _as_matvec(K_op) -> MatVec:
    if isinstance(K_op, GramMatrix):
        entries = K_op.entries
        return lambda v: entries @ v
    if callable(K_op):
        return K_op
    A = np.asarray(K_op, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"operator matrix must be square, got shape {A.shape}")
    return lambda v: A @ v


def _msminres(
    mv: MatVec,
    shifts: np.ndarray,
    u: np.ndarray,
    J: int,
    tol: float,
) -> tuple[np.ndarray, SolveReport]:
    """Multi-shift minimum-residual solves on one shared Krylov basis.

    Each shifted system keeps its own scalar Givens recurrence; one
    operator product per iteration serves all shifts.
    """
    n = u.shape[0]
    nsh = shifts.shape[0]
    X = np.zeros((nsh, n))
    beta1 = float(np.linalg.norm(u))
    if beta1 == 0.0:
        return X, SolveReport(
            iterations_run=0,
            residual_norms=np.zeros(nsh),
            converged=np.ones(nsh, dtype=bool),
        )
    v = u / beta1
    v_old = np.zeros(n)
    beta = 0.0
    W = np.zeros((nsh, n))
    W2 = np.zeros((nsh, n))
    dbar = np.zeros(nsh)
    epsln = np.zeros(nsh)
    phibar = np.full(nsh, beta1)
    cs = np.full(nsh, -1.0)
    sn = np.zeros(nsh)
    iterations = 0
    breakdown = False
    for j in range(J):
        iterations += 1
        p = mv(v)
        if j > 0:
            p = p - beta * v_old
        alpha = float(v @ p)
        p -= alpha * v
        beta_new = float(np.linalg.norm(p))
        alpha_shifted = alpha + shifts
        oldeps = epsln
        delta = cs * dbar + sn * alpha_shifted
        gbar = sn * dbar - cs * alpha_shifted
        epsln = sn * beta_new
        dbar = -cs * beta_new
        gamma = np.maximum(np.hypot(gbar, beta_new), 1e-300)
        cs = gbar / gamma
        sn = beta_new / gamma
        phi = cs * phibar
        phibar = sn * phibar
        w_new = (v[None, :] - oldeps[:, None] * W2 - delta[:, None] * W) / gamma[:, None]
        X += phi[:, None] * w_new
        W2 = W
        W = w_new
        if beta_new <= _BREAKDOWN_REL * beta1:
            breakdown = True
            break
        v_old = v
        v = p / beta_new
        beta = beta_new
        if float(np.max(np.abs(phibar))) / beta1 <= tol:
            break
    residuals = np.abs(phibar) / beta1
    return X, SolveReport(
        iterations_run=iterations,
        residual_norms=residuals,
        converged=residuals <= tol,
        breakdown=breakdown,
    )


def _pcg_single(
    mv: MatVec,
    shift: float,
    u: np.ndarray,
    precond: NystromPreconditioner,
    J: int,
    tol: float,
) -> tuple[np.ndarray, float, int, bool]:
    """Preconditioned conjugate gradients on (shift I + K) x = u."""
    n = u.shape[0]
    x = np.zeros(n)
    b_norm = float(np.linalg.norm(u))
    if b_norm == 0.0:
        return x, 0.0, 0, False
    r = u.copy()
    z = apply_shifted_inverse(precond, r, shift)
    p = z.copy()
    rz = float(r @ z)
    residual = 1.0
    iterations = 0
    breakdown = False
    for _ in range(J):
        iterations += 1
        Ap = mv(p) + shift * p
        curvature = float(p @ Ap)
        if curvature <= 0.0:
            breakdown = True
            break
        alpha = rz / curvature
        x += alpha * p
        r -= alpha * Ap
        residual = float(np.linalg.norm(r)) / b_norm
        if residual <= tol:
            break
        z = apply_shifted_inverse(precond, r, shift)
        rz_new = float(r @ z)
        beta = rz_new / rz
        rz = rz_new
        p = z + beta * p
    return x, residual, iterations, breakdown


def shifted_solve(
    K_op,
    shifts: Sequence[float],
    u: np.ndarray,
    J: int,
    tol: float = 1e-10,
    precond: NystromPreconditioner | None = None,
) -> tuple[np.ndarray, SolveReport]:
    """Approximately solve (shift_q I + K) v_q = u for every shift at once.

    K_op may be a dense matrix, a GramMatrix or a matrix-vector
    callable. Without a preconditioner all systems share one Krylov
    basis, costing a single operator product per iteration; with one,
    each shift gets an independent preconditioned conjugate-gradient
    solve. Returns the stacked solutions (one row per shift) and a
    report; on Krylov breakdown the current iterates come back with the
    report flagging the event instead of raising.
    """
    u = np.asarray(u, dtype=np.float64)
    if u.ndim != 1:
        raise ValueError(f"u must be a vector, got shape {u.shape}")
    if J < 1:
        raise ValueError(f"J must be >= 1, got {J}")
    shift_arr = np.asarray(shifts, dtype=np.float64)
    if shift_arr.ndim != 1 or shift_arr.shape[0] < 1:
        raise ValueError("shifts must be a nonempty 1-d sequence")
    mv = _as_matvec(K_op)
    if precond is None:
        return _msminres(mv, shift_arr, u, J, tol)
    X = np.zeros((shift_arr.shape[0], u.shape[0]))
    residuals = np.zeros(shift_arr.shape[0])
    iteration_counts = np.zeros(shift_arr.shape[0], dtype=int)
    any_breakdown = False
    for q, s in enumerate(shift_arr):
        X[q], residuals[q], iteration_counts[q], broke = _pcg_single(
            mv, float(s), u, precond, J, tol
        )
        any_breakdown = any_breakdown or broke
    return X, SolveReport(
        iterations_run=int(iteration_counts.max()),
        residual_norms=residuals,
        converged=residuals <= tol,
        breakdown=any_breakdown,
    )


def spectral_envelope(K: GramMatrix) -> tuple[float, float]:
    """Analytic eigenvalue envelope [jitter, n*max_diag_signal + jitter].

    No eigenvalue estimation pass: the jitter floors the spectrum and
    the trace bound n * max_i (K_ii - jitter) caps it.
    """
    if K.jitter <= 0:
        raise ValueError(f"need a positive diagonal jitter, got {K.jitter}")
    diag_signal = float(np.max(np.diag(K.entries))) - K.jitter
    lam_max = K.n * max(0.0, diag_signal) + K.jitter
    return K.jitter, lam_max


def ciq_sqrt_mv(
    K: GramMatrix,
    u: np.ndarray,
    Q: int,
    J: int,
    precond: NystromPreconditioner | None = None,
    tol: float = 1e-10,
) -> tuple[np.ndarray, SolveReport]:
    """Approximate K^(1/2) u through Q shifted solves capped at J iterations."""
    lam_min, lam_max = spectral_envelope(K)
    scheme = build_quadrature(lam_min, lam_max, Q)
    solutions, report = shifted_solve(K, scheme.shifts, u, J, tol, precond)
    combined = scheme.weights @ solutions
    return K.entries @ combined, report


def ciq_sample(
    X: InputData,
    params: KernelParams,
    eta: float,
    Q: int,
    J: int,
    seed: int,
    precond: NystromPreconditioner | int | None = None,
) -> GpSample:
    """Draw a sample via the quadrature square root of the partially
    noisy Gram matrix.

    A fraction eta of the noise variance is folded into the kernel
    diagonal before the square root; the remainder is added afterwards
    as independent noise. `precond` may be a ready preconditioner or a
    rank, in which case the factor is built here on the assembled
    matrix.
    """
    if not 0 < eta < 1:
        raise ValueError(f"eta must lie in (0, 1), got {eta}")
    K = gram(X, params, jitter=eta * params.noise_variance)
    if isinstance(precond, int):
        precond = nystrom_factor(K, precond)
    u = _streams.stream(seed, _streams.LATENT).standard_normal(X.n)
    f_hat, _ = ciq_sqrt_mv(K, u, Q, J, precond)
    xi = _streams.stream(seed, _streams.NOISE).standard_normal(X.n)
    y = f_hat + math.sqrt((1.0 - eta) * params.noise_variance) * xi
    method = SampleMethod.Ciq if precond is None else SampleMethod.CiqPreconditioned
    return GpSample(
        y=y,
        f=f_hat,
        method=method,
        params=params,
        fidelity=FidelitySpec(eta=eta, Q=Q, J=J),
        seed=seed,
    )
