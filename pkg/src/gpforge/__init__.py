"""Scalable Gaussian process prior sampling with certified fidelity.

Samplers (exact Cholesky, random features, quadrature square roots),
the closed-form fidelity calculators that size their parameters, and a
statistical harness that verifies samples against the exact law.
"""

from .bounds import (
    DecayModel,
    FidelitySpec,
    belkin_lambda_bound,
    chi_mean,
    ciq_error_bound,
    ciq_min_iterations,
    ciq_min_quadrature,
    condition_number_bound,
    decay_regime,
    error_rate_bounds,
    indistinguishability_epsilon,
    kl_frobenius_bound,
    kl_gaussian_marginal,
    precond_min_iterations,
    rff_element_budget,
    rff_min_features,
    tv_from_kl,
)
from .ciq import (
    QuadratureScheme,
    SolveReport,
    build_quadrature,
    ciq_sample,
    ciq_sqrt_mv,
    elliptic_K,
    jacobi_cn_dn,
    shifted_solve,
    spectral_envelope,
)
from .exact import (
    FactorizationError,
    GpSample,
    SampleMethod,
    cholesky_factor,
    exact_sample,
    whiten,
)
from .kernel import (
    GramMatrix,
    InputData,
    KernelParams,
    gram,
    rbf,
    sample_inputs,
)
from .precond import (
    NystromPreconditioner,
    apply_inverse,
    apply_shifted_inverse,
    effectiveness_sweep,
    nystrom_factor,
    preconditioned_condition_bound,
)
from .rff import (
    FrequencyMatrix,
    PartialOutputError,
    feature_map,
    rff_sample,
    rff_sample_streaming,
    sample_frequencies,
)
from .stats import (
    CvmResult,
    ExperimentCell,
    ExperimentConfig,
    ExperimentReport,
    binomial_ci,
    cvm_statistic,
    cvm_test,
    fidelity_rescaler,
    rejection_rate_experiment,
    report_csv_lines,
    report_to_json,
)

__version__ = "0.1.0"

__all__ = [
    "DecayModel",
    "FidelitySpec",
    "belkin_lambda_bound",
    "chi_mean",
    "ciq_error_bound",
    "ciq_min_iterations",
    "ciq_min_quadrature",
    "condition_number_bound",
    "decay_regime",
    "error_rate_bounds",
    "indistinguishability_epsilon",
    "kl_frobenius_bound",
    "kl_gaussian_marginal",
    "precond_min_iterations",
    "rff_element_budget",
    "rff_min_features",
    "tv_from_kl",
    "QuadratureScheme",
    "SolveReport",
    "build_quadrature",
    "ciq_sample",
    "ciq_sqrt_mv",
    "elliptic_K",
    "jacobi_cn_dn",
    "shifted_solve",
    "spectral_envelope",
    "FactorizationError",
    "GpSample",
    "SampleMethod",
    "cholesky_factor",
    "exact_sample",
    "whiten",
    "GramMatrix",
    "InputData",
    "KernelParams",
    "gram",
    "rbf",
    "sample_inputs",
    "NystromPreconditioner",
    "apply_inverse",
    "apply_shifted_inverse",
    "effectiveness_sweep",
    "nystrom_factor",
    "preconditioned_condition_bound",
    "FrequencyMatrix",
    "PartialOutputError",
    "feature_map",
    "rff_sample",
    "rff_sample_streaming",
    "sample_frequencies",
    "CvmResult",
    "ExperimentCell",
    "ExperimentConfig",
    "ExperimentReport",
    "binomial_ci",
    "cvm_statistic",
    "cvm_test",
    "fidelity_rescaler",
    "rejection_rate_experiment",
    "report_csv_lines",
    "report_to_json",
    "__version__",
]
