"""Command-line front end: fidelity calculators, samplers, experiments
and verification over files.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration
error. The environment variable GPFORGE_SEED, when set, overrides the
base seed from both flags and config files.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import bounds as bounds_mod
from . import precond as precond_mod
from .bounds import DecayModel, FidelitySpec
from .ciq import ciq_sample
from .exact import GpSample, SampleMethod, exact_sample, whiten
from .kernel import InputData, KernelParams, gram, sample_inputs
from .rff import rff_sample
from .stats import (
    ExperimentConfig,
    cvm_test,
    rejection_rate_experiment,
    report_csv_lines,
    report_to_json,
)

SCHEMA_VERSION = 1

_CONFIG_KEYS = {
    "schema_version",
    "method",
    "n_list",
    "params",
    "fidelity_grid",
    "fidelity_as_fraction",
    "eta",
    "alpha",
    "epsilon",
    "repeats",
    "base_seed",
    "output",
}
_PARAM_KEYS = {"variance", "lengthscale", "noise_variance", "dim"}

_METHOD_NAMES = {
    "exact": SampleMethod.Exact,
    "rff": SampleMethod.Rff,
    "ciq": SampleMethod.Ciq,
    "pciq": SampleMethod.CiqPreconditioned,
}


class UsageError(ValueError):
    """Invalid flags or configuration; maps to exit code 2."""


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def _resolve_seed(seed: int) -> int:
    env = os.environ.get("GPFORGE_SEED")
    if env is None:
        return seed
    try:
        return int(env)
    except ValueError as exc:
        raise UsageError(f"GPFORGE_SEED must be an integer, got {env!r}") from exc


def _params_from_args(args: argparse.Namespace) -> KernelParams:
    try:
        return KernelParams(
            variance=args.variance,
            lengthscale=args.lengthscale,
            noise_variance=args.noise_variance,
            dim=args.dim,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _add_kernel_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--variance", type=float, default=1.0, help="signal variance")
    parser.add_argument("--lengthscale", type=float, default=1.0, help="kernel lengthscale")
    parser.add_argument(
        "--noise-variance", type=float, default=0.25, help="observation noise variance"
    )
    parser.add_argument("--dim", type=int, default=2, help="input dimension")


def cmd_bounds(args: argparse.Namespace) -> int:
    """Print the fidelity parameters sufficient for the requested budget."""
    method = _METHOD_NAMES[args.method]
    params = _params_from_args(args)
    sigma_xi2 = params.noise_variance
    sigma_xi = math.sqrt(sigma_xi2)
    payload: dict[str, object] = {
        "method": args.method,
        "n": args.n,
        "epsilon": args.eps,
        "delta": args.delta,
        "delta_Q": None,
        "eta": args.eta,
        "D": None,
        "Q": None,
        "J": None,
        "kappa_bound": bounds_mod.condition_number_bound(
            args.n, args.eta, sigma_xi2, params.variance
        ),
        "regime": None,
    }
    try:
        model = DecayModel(
            c1=args.c1, c2=args.c2, sigma_f=math.sqrt(params.variance), dim=params.dim
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    _, regime, _ = bounds_mod.decay_regime(args.n, model)
    payload["regime"] = regime
    if method is SampleMethod.Rff:
        payload["D"] = bounds_mod.rff_min_features(args.n, args.eps, args.delta, sigma_xi2)
    elif method in (SampleMethod.Ciq, SampleMethod.CiqPreconditioned):
        cap = args.eps * sigma_xi * math.sqrt(1.0 - args.eta)
        delta_Q = args.delta_q if args.delta_q is not None else 0.5 * cap
        if not 0 < delta_Q < cap:
            raise UsageError(
                f"delta_Q={delta_Q} violates 0 < delta_Q < eps*sigma_xi*sqrt(1-eta) = {cap}"
            )
        payload["delta_Q"] = delta_Q
        Q = bounds_mod.ciq_min_quadrature(args.n, args.eta, sigma_xi2, delta_Q)
        payload["Q"] = Q
        if method is SampleMethod.Ciq:
            payload["J"] = bounds_mod.ciq_min_iterations(
                args.n, args.eta, sigma_xi2, args.eps, delta_Q, Q
            )
        else:
            k = max(1, math.isqrt(args.n))
            lam_kp1 = bounds_mod.belkin_lambda_bound(k + 1, args.n, model)
            payload["J"] = bounds_mod.precond_min_iterations(
                lam_kp1, args.n, args.eta, sigma_xi2, args.eps, delta_Q, args.c_tilde
            )
    print(json.dumps(payload, indent=None if args.json else 2))
    return 0


def _load_inputs(path: str, params: KernelParams) -> InputData:
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise UsageError(f"inputs file {path} is empty")
    header = lines[0].strip().split(",")
    expected = [f"x{i}" for i in range(params.dim)]
    if header != expected:
        raise UsageError(
            f"inputs file header {header} does not match dimension {params.dim}"
        )
    pts = np.array(
        [[float(v) for v in line.split(",")] for line in lines[1:] if line.strip()]
    )
    if pts.ndim != 2 or pts.shape[1] != params.dim:
        raise UsageError(f"inputs file {path} is not an n x {params.dim} table")
    return InputData(points=pts, seed=None)


def _write_sample(sample: GpSample, output: str) -> None:
    lines = ["index,y"]
    for i, value in enumerate(sample.y):
        lines.append(f"{i},{_fmt(value)}")
    Path(output).write_text("\n".join(lines) + "\n")
    fid = sample.fidelity
    sidecar = {
        "method": sample.method.value,
        "params": {
            "variance": sample.params.variance,
            "lengthscale": sample.params.lengthscale,
            "noise_variance": sample.params.noise_variance,
            "dim": sample.params.dim,
        },
        "fidelity": {
            "epsilon": fid.epsilon,
            "delta": fid.delta,
            "delta_Q": fid.delta_Q,
            "eta": fid.eta,
            "D": fid.D,
            "Q": fid.Q,
            "J": fid.J,
        },
        "seed": sample.seed,
        "n": sample.n,
    }
    Path(output + ".json").write_text(json.dumps(sidecar, indent=2) + "\n")


def cmd_sample(args: argparse.Namespace) -> int:
    """Generate one sample and write it as CSV plus a JSON sidecar."""
    method = _METHOD_NAMES[args.method]
    params = _params_from_args(args)
    seed = _resolve_seed(args.seed)
    if args.inputs is not None:
        X = _load_inputs(args.inputs, params)
        if args.n is not None and args.n != X.n:
            raise UsageError(f"--n {args.n} contradicts inputs file with {X.n} rows")
    else:
        if args.n is None:
            raise UsageError("either --n or --inputs is required")
        X = sample_inputs(args.n, params, seed)
    if method is SampleMethod.Exact:
        sample = exact_sample(X, params, seed)
    elif method is SampleMethod.Rff:
        if args.features is None:
            raise UsageError("--features is required for the rff method")
        if args.features % 2 != 0 or args.features < 2:
            raise UsageError(f"--features must be an even count >= 2, got {args.features}")
        sample = rff_sample(X, params, args.features, seed)
    else:
        eta = args.eta
        Q, J = args.quadrature, args.iterations
        if Q is None or J is None:
            spec = FidelitySpec.for_ciq(X.n, params, epsilon=args.eps, eta=eta)
            Q = Q if Q is not None else spec.Q
            J = J if J is not None else spec.J
        rank = None
        if method is SampleMethod.CiqPreconditioned:
            rank = args.rank if args.rank is not None else max(1, math.isqrt(X.n))
        sample = ciq_sample(X, params, eta, Q, J, seed, precond=rank)
    _write_sample(sample, args.output)
    return 0


def _parse_config_file(path: str) -> dict:
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot parse config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise UsageError("config must be a JSON object")
    if raw.get("schema_version") != SCHEMA_VERSION:
        raise UsageError(
            f"config schema_version must be {SCHEMA_VERSION}, got {raw.get('schema_version')!r}"
        )
    unknown = set(raw) - _CONFIG_KEYS
    if unknown:
        raise UsageError(f"unknown config fields: {sorted(unknown)}")
    if "params" in raw:
        if not isinstance(raw["params"], dict):
            raise UsageError("config params must be an object")
        unknown_params = set(raw["params"]) - _PARAM_KEYS
        if unknown_params:
            raise UsageError(f"unknown params fields: {sorted(unknown_params)}")
    return raw


def _build_experiment_config(args: argparse.Namespace) -> ExperimentConfig:
    raw = _parse_config_file(args.config) if args.config else {"schema_version": 1}
    if args.method is not None:
        raw["method"] = args.method
    if args.n_list is not None:
        raw["n_list"] = [int(v) for v in args.n_list.split(",")]
    if args.fidelity_grid is not None:
        raw["fidelity_grid"] = [float(v) for v in args.fidelity_grid.split(",")]
    for key in ("eta", "alpha", "epsilon", "repeats", "base_seed", "output"):
        value = getattr(args, key, None)
        if value is not None:
            raw[key] = value
    if args.fidelity_as_fraction:
        raw["fidelity_as_fraction"] = True
    if "method" not in raw:
        raise UsageError("config needs a method (flag --method or config file)")
    if raw["method"] not in _METHOD_NAMES:
        raise UsageError(f"unknown method {raw['method']!r}")
    if "n_list" not in raw or not raw["n_list"]:
        raise UsageError("config needs a nonempty n_list")
    params_raw = raw.get("params", {})
    try:
        params = KernelParams(
            variance=params_raw.get("variance", 1.0),
            lengthscale=params_raw.get("lengthscale", 1.0),
            noise_variance=params_raw.get("noise_variance", 0.25),
            dim=params_raw.get("dim", 2),
        )
        config = ExperimentConfig(
            method=_METHOD_NAMES[raw["method"]],
            n_list=tuple(int(v) for v in raw["n_list"]),
            params=params,
            fidelity_grid=tuple(float(v) for v in raw.get("fidelity_grid", ())),
            fidelity_as_fraction=bool(raw.get("fidelity_as_fraction", False)),
            eta=float(raw.get("eta", 0.5)),
            alpha=float(raw.get("alpha", 0.05)),
            epsilon=float(raw.get("epsilon", 0.1)),
            repeats=int(raw.get("repeats", 100)),
            base_seed=_resolve_seed(int(raw.get("base_seed", 0))),
            output=raw.get("output"),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    return config


def cmd_experiment(args: argparse.Namespace) -> int:
    """Run a rejection-rate experiment and write its CSV and JSON reports."""
    config = _build_experiment_config(args)
    if config.output is None:
        raise UsageError("config needs an output path (flag --output or config file)")
    threads = args.threads if args.threads is not None else (os.cpu_count() or 1)
    report = rejection_rate_experiment(config, threads=max(1, threads))
    out = Path(config.output)
    out.write_text("\n".join(report_csv_lines(report)) + "\n")
    Path(str(out) + ".json").write_text(report_to_json(report) + "\n")
    failed = [c for c in report.cells if c.failed]
    for cell in failed:
        print(
            f"warning: cell n={cell.n} fidelity={cell.fidelity} failed: {cell.message}",
            file=sys.stderr,
        )
    return 0


def cmd_precond_sweep(args: argparse.Namespace) -> int:
    """Sweep preconditioner quality over sizes and lengthscales."""
    params = _params_from_args(args)
    seed = _resolve_seed(args.seed)
    n_list = [int(v) for v in args.n_list.split(",")]
    lengthscales = [float(v) for v in args.lengthscales.split(",")]
    rows = precond_mod.effectiveness_sweep(n_list, lengthscales, params, seed)
    lines = ["n,lengthscale,metric"]
    for n, ls, metric in rows:
        lines.append(f"{n},{_fmt(ls)},{_fmt(metric)}")
    Path(args.output).write_text("\n".join(lines) + "\n")
    return 0


def cmd_verify(args: argparse.Namespace) -> int:
    """Whiten an existing sample file against its true covariance and test it."""
    sample_path = Path(args.sample)
    sidecar_path = Path(args.sample + ".json")
    if not sample_path.exists():
        raise UsageError(f"sample file {args.sample} not found")
    if not sidecar_path.exists():
        raise UsageError(f"sidecar {sidecar_path} not found")
    sidecar = json.loads(sidecar_path.read_text())
    params = KernelParams(
        variance=sidecar["params"]["variance"],
        lengthscale=sidecar["params"]["lengthscale"],
        noise_variance=sidecar["params"]["noise_variance"],
        dim=sidecar["params"]["dim"],
    )
    rows = sample_path.read_text().splitlines()
    if not rows or rows[0].strip() != "index,y":
        raise UsageError(f"sample file {args.sample} lacks the index,y header")
    y = np.array([float(line.split(",")[1]) for line in rows[1:] if line.strip()])
    if args.inputs is not None:
        X = _load_inputs(args.inputs, params)
    else:
        X = sample_inputs(len(y), params, sidecar["seed"])
    if X.n != len(y):
        raise UsageError(f"inputs have {X.n} rows but sample has {len(y)}")
    K_xi = gram(X, params, jitter=params.noise_variance)
    z = whiten(y, K_xi)
    result = cvm_test(z, args.alpha)
    print(
        json.dumps(
            {
                "statistic": result.statistic,
                "alpha": result.alpha,
                "critical_value": result.critical_value,
                "reject": result.reject,
            }
        )
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gpforge",
        description="Draw large approximate Gaussian process prior samples "
        "with certified fidelity, and verify them statistically.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_bounds = sub.add_parser("bounds", help="print sufficient fidelity parameters")
    p_bounds.add_argument("--method", required=True, choices=sorted(_METHOD_NAMES))
    p_bounds.add_argument("--n", type=int, required=True, help="dataset size")
    p_bounds.add_argument("--eps", type=float, required=True, help="total-variation budget")
    p_bounds.add_argument("--delta", type=float, default=0.01, help="failure probability")
    p_bounds.add_argument("--eta", type=float, default=0.5, help="noise split")
    p_bounds.add_argument(
        "--delta-q", type=float, default=None, dest="delta_q",
        help="quadrature budget (default: half its cap)",
    )
    p_bounds.add_argument("--c1", type=float, default=1.0, help="decay-model rate constant")
    p_bounds.add_argument("--c2", type=float, default=1.0, help="decay-model scale constant")
    p_bounds.add_argument(
        "--c-tilde", type=float, default=0.0, dest="c_tilde",
        help="slack constant of the preconditioned iteration bound",
    )
    p_bounds.add_argument("--json", action="store_true", help="single-line JSON output")
    _add_kernel_flags(p_bounds)
    p_bounds.set_defaults(func=cmd_bounds)

    p_sample = sub.add_parser("sample", help="draw one sample to CSV + JSON sidecar")
    p_sample.add_argument("--method", required=True, choices=sorted(_METHOD_NAMES))
    p_sample.add_argument("--n", type=int, default=None, help="number of input points")
    p_sample.add_argument("--inputs", default=None, help="CSV file of input points")
    p_sample.add_argument("--seed", type=int, default=0)
    p_sample.add_argument("--output", required=True, help="sample CSV path")
    p_sample.add_argument("--features", type=int, default=None, help="rff feature count D")
    p_sample.add_argument("--eta", type=float, default=0.5, help="ciq noise split")
    p_sample.add_argument("--eps", type=float, default=0.1, help="budget for ciq defaults")
    p_sample.add_argument("--quadrature", type=int, default=None, help="ciq node count Q")
    p_sample.add_argument("--iterations", type=int, default=None, help="ciq iteration cap J")
    p_sample.add_argument("--rank", type=int, default=None, help="pciq preconditioner rank")
    _add_kernel_flags(p_sample)
    p_sample.set_defaults(func=cmd_sample)

    p_exp = sub.add_parser("experiment", help="run a rejection-rate experiment")
    p_exp.add_argument("--config", default=None, help="JSON config file (schema_version 1)")
    p_exp.add_argument("--method", default=None, choices=sorted(_METHOD_NAMES))
    p_exp.add_argument("--n-list", default=None, dest="n_list", help="comma-separated sizes")
    p_exp.add_argument(
        "--fidelity-grid", default=None, dest="fidelity_grid",
        help="comma-separated D or J values",
    )
    p_exp.add_argument(
        "--fidelity-as-fraction", action="store_true", dest="fidelity_as_fraction",
        help="treat grid values as fractions of the growth-law rescaler",
    )
    p_exp.add_argument("--eta", type=float, default=None)
    p_exp.add_argument("--alpha", type=float, default=None)
    p_exp.add_argument("--epsilon", type=float, default=None)
    p_exp.add_argument("--repeats", type=int, default=None)
    p_exp.add_argument("--base-seed", type=int, default=None, dest="base_seed")
    p_exp.add_argument("--output", default=None)
    p_exp.add_argument("--threads", type=int, default=None, help="worker pool size")
    p_exp.set_defaults(func=cmd_experiment)

    p_sweep = sub.add_parser("precond-sweep", help="preconditioner effectiveness sweep")
    p_sweep.add_argument("--n-list", required=True, dest="n_list")
    p_sweep.add_argument("--lengthscales", required=True)
    p_sweep.add_argument("--seed", type=int, default=0)
    p_sweep.add_argument("--output", required=True)
    _add_kernel_flags(p_sweep)
    p_sweep.set_defaults(func=cmd_precond_sweep)

    p_verify = sub.add_parser("verify", help="whiten and test an existing sample file")
    p_verify.add_argument("--sample", required=True, help="sample CSV written by `sample`")
    p_verify.add_argument("--inputs", default=None, help="CSV of the inputs, if loaded")
    p_verify.add_argument("--alpha", type=float, default=0.05)
    p_verify.set_defaults(func=cmd_verify)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
