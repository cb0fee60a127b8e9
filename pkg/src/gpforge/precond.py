"""Low-rank preconditioning for the shifted solves.

A greedy pivoted partial Cholesky factor of the noiseless kernel gives
a rank-k surrogate whose shifted inverse is cheap to apply through the
Woodbury identity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import _streams
from .kernel import GramMatrix, KernelParams, gram, sample_inputs


@dataclass(frozen=True)
class NystromPreconditioner:
    """Rank-k factor F with F F^T approximating the noiseless kernel.

    noise is the diagonal level of the matrix being preconditioned, so
    (F F^T + noise I)^(-1) approximates the inverse of the full noisy
    matrix.
    """

    rank: int
    pivots: tuple[int, ...]
    factor: np.ndarray
    noise: float

    def __post_init__(self) -> None:
        F = np.asarray(self.factor, dtype=np.float64)
        if F.ndim != 2:
            raise ValueError(f"factor must be 2-d, got shape {F.shape}")
        if not np.all(np.isfinite(F)):
            raise ValueError("factor contains non-finite entries")
        if self.noise <= 0:
            raise ValueError(f"noise must be > 0, got {self.noise}")
        object.__setattr__(self, "factor", F)
        # k x k inner product cached once; every Woodbury application needs it
        object.__setattr__(self, "_gram_core", F.T @ F)

    @property
    def n(self) -> int:
        return self.factor.shape[0]


def nystrom_factor(K: GramMatrix, k: int) -> NystromPreconditioner:
    """Greedy pivoted partial Cholesky of the kernel with its jitter removed.

    Pivots maximize the residual diagonal at each step, keeping the
    approximation below the matrix in the semidefinite order. Stops
    early if the residual diagonal is exhausted, in which case the
    factor has fewer than k columns.
    """
    n = K.n
    if not 1 <= k <= n:
        raise ValueError(f"rank must satisfy 1 <= k <= n, got k={k}, n={n}")
    A = K.entries
    d = np.diag(A) - K.jitter
    F = np.zeros((n, k))
    pivots: list[int] = []
    exhausted_at = max(float(d.max()), 0.0) * 1e-14
    for m in range(k):
        i = int(np.argmax(d))
        if d[i] <= exhausted_at:
            F = F[:, :m]
            break
        pivots.append(i)
        col = A[:, i].copy()
        col[i] -= K.jitter
        if m > 0:
            col -= F[:, :m] @ F[i, :m]
        F[:, m] = col / np.sqrt(d[i])
        d -= F[:, m] ** 2
    return NystromPreconditioner(
        rank=F.shape[1], pivots=tuple(pivots), factor=F, noise=K.jitter
    )


def apply_shifted_inverse(
    P: NystromPreconditioner, v: np.ndarray, extra_shift: float = 0.0
) -> np.ndarray:
    """(F F^T + (noise + extra_shift) I)^(-1) v via the Woodbury identity."""
    s = P.noise + extra_shift
    if s <= 0:
        raise ValueError(f"total shift must be > 0, got {s}")
    v = np.asarray(v, dtype=np.float64)
    k = P.factor.shape[1]
    if k == 0:
        return v / s
    core = P._gram_core + s * np.eye(k)
    try:
        c_factor = scipy.linalg.cho_factor(core, lower=True)
    except scipy.linalg.LinAlgError as exc:
        raise ValueError(f"singular Woodbury core despite positive shift: {exc}") from exc
    t = scipy.linalg.cho_solve(c_factor, P.factor.T @ v)
    return (v - P.factor @ t) / s


def apply_inverse(P: NystromPreconditioner, v: np.ndarray) -> np.ndarray:
    """(F F^T + noise I)^(-1) v."""
    return apply_shifted_inverse(P, v, 0.0)


def preconditioned_condition_bound(
    lambda_kp1: float, n: int, eta: float, sigma_xi2: float, k: int
) -> float:
    """Condition-number bound for the preconditioned noisy kernel."""
    if lambda_kp1 < 0:
        raise ValueError(f"lambda_kp1 must be >= 0, got {lambda_kp1}")
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    if sigma_xi2 <= 0 or not 0 < eta <= 1:
        raise ValueError("need sigma_xi2 > 0 and eta in (0, 1]")
    return 1.0 + 2.0 * lambda_kp1 * np.sqrt(4.0 * k * (n - k) + 1.0) / (eta * sigma_xi2)


def _power_iteration_deviation(
    K: np.ndarray, P: NystromPreconditioner, iterations: int, seed: int
) -> float:
    """Operator norm of I - P_inv K, estimated by power iteration on its
    normal matrix."""
    n = K.shape[0]
    v = _streams.stream(seed, _streams.LATENT).standard_normal(n)
    v /= np.linalg.norm(v)
    nr = 0.0
    for _ in range(iterations):
        Mv = v - apply_inverse(P, K @ v)
        MtMv = Mv - K @ apply_inverse(P, Mv)
        nr = float(np.linalg.norm(MtMv))
        if nr == 0.0:
            return 0.0
        v = MtMv / nr
    return float(np.sqrt(nr))


def effectiveness_sweep(
    n_list: list[int],
    lengthscale_grid: list[float],
    params_base: KernelParams,
    seed: int,
    k_rule=None,
    power_iterations: int = 40,
) -> list[tuple[int, float, float]]:
    """Preconditioner quality over a (size, lengthscale) grid.

    For each cell, draws inputs, assembles the noisy Gram matrix,
    builds the rank-floor(sqrt(n)) factor (or k_rule(n)) and reports
    how far the preconditioned matrix sits from the identity in
    operator norm. Larger values mean the preconditioner helps less.
    """
    if k_rule is None:
        k_rule = lambda n: max(1, int(np.sqrt(n)))
    rows: list[tuple[int, float, float]] = []
    for n in n_list:
        for ls in lengthscale_grid:
            params = KernelParams(
                variance=params_base.variance,
                lengthscale=ls,
                noise_variance=params_base.noise_variance,
                dim=params_base.dim,
            )
            cell_seed = _streams.derive_seed(seed, n, int(1e9 * ls) & ((1 << 60) - 1))
            X = sample_inputs(n, params, cell_seed)
            K = gram(X, params, jitter=params.noise_variance)
            P = nystrom_factor(K, k_rule(n))
            metric = _power_iteration_deviation(
                K.entries, P, power_iterations, cell_seed
            )
            rows.append((n, ls, metric))
    return rows
