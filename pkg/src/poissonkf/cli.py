"""Command line interface: simulate, compare, sweep, theory, validate-generator.

Exit codes: 0 success, 1 usage or validation error, 2 runtime or numerical
failure.  All randomness flows from ``--seed`` (default 42).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .generator import JumpDiffusionSpec, PathDivergenceError, TestFunction, dynkin_check
from .harness import ExperimentConfig, load_config, run_comparison, run_simulate, run_theory_overlay
from .models import LinearGaussianModel
from .presets import PRESETS, preset_defaults, preset_model
from .rng import Role, RngStream
from .theory import ScalarModel, check_sampling_rate, expected_cov_odes

__all__ = ["main"]


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _add_common(parser):
    parser.add_argument("--config", type=Path, help="config file (sections [model]/[experiment]/[output])")
    parser.add_argument("--preset", choices=sorted(PRESETS), help="bundled configuration name")
    parser.add_argument("--seed", type=int, help="master seed (default 42)")
    parser.add_argument("--threads", type=int, help="worker pool size for realizations")
    parser.add_argument("--output", type=Path, help="output directory")
    parser.add_argument("--realizations", type=int, help="number of Monte Carlo realizations")
    parser.add_argument("--A", type=float, help="scalar drift override")
    parser.add_argument("--G", type=float, help="scalar diffusion override")
    parser.add_argument("--C", type=float, help="scalar observation override")
    parser.add_argument("--V", type=float, help="measurement variance override")
    parser.add_argument("--lambda", dest="lam", type=float, help="mean sampling rate override")
    parser.add_argument("--M", type=int, help="ensemble size override")
    parser.add_argument("--P0", type=float, help="initial covariance override")
    parser.add_argument("--Q0M", type=float, help="initial expected empirical covariance")
    parser.add_argument("--horizon", type=float, help="time horizon override")
    parser.add_argument("--dt", type=float, help="grid spacing override")
    parser.add_argument("--aggregate", choices=["true", "false"], help="average realizations or record one path")
    parser.add_argument("-v", "--verbosity", type=int, default=0, choices=[0, 1, 2], help="log verbosity")


def _build_parser():
    parser = _Parser(prog="poissonkf", description=__doc__)
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name, help_text in [
        ("simulate", "simulate state trajectories with Poisson-sampled observations"),
        ("compare", "run optimal vs ensemble comparison, one CSV per (lambda, M)"),
        ("sweep", "comparison with expectation-ODE and bound overlay columns (scalar models)"),
        ("theory", "evaluate the sampling-rate condition and ultimate bound"),
        ("validate-generator", "smoke-test the generator against simulated expectations"),
    ]:
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        if name == "validate-generator":
            p.add_argument("--paths", type=int, default=4000, help="Monte Carlo paths")
    return parser


def _scalar_override_model(base: LinearGaussianModel | None, args) -> LinearGaussianModel | None:
    scalar_flags = [args.A, args.G, args.C, args.V]
    if all(v is None for v in scalar_flags) and args.P0 is None:
        return base
    if base is not None and base.n == 1:
        get = lambda flag, cur: cur if flag is None else flag
        return LinearGaussianModel.scalar(
            A=get(args.A, base.A[0, 0]),
            G=get(args.G, base.G[0, 0]),
            C=get(args.C, base.C[0, 0]),
            V=get(args.V, base.V[0, 0]),
            x0_mean=base.x0_mean[0],
            P0=get(args.P0, base.x0_cov[0, 0]),
        )
    if any(v is None for v in scalar_flags):
        raise ValueError("scalar overrides require all of --A --G --C --V (or a scalar preset/config)")
    return LinearGaussianModel.scalar(
        A=args.A, G=args.G, C=args.C, V=args.V,
        P0=1.0 if args.P0 is None else args.P0,
    )


def _resolve_config(args) -> ExperimentConfig:
    """Merge config file, preset and flag overrides; flags win."""
    if args.config is not None:
        config = load_config(args.config)
    elif args.preset is not None:
        config = ExperimentConfig(model=preset_model(args.preset), preset_name=args.preset, **preset_defaults(args.preset))
    else:
        raise ValueError("give --config or --preset (or full scalar model flags)")

    model = _scalar_override_model(config.model, args)
    return ExperimentConfig(
        model=model,
        lambda_values=[args.lam] if args.lam is not None else config.lambda_values,
        M_values=[args.M] if args.M is not None else config.M_values,
        horizon=args.horizon if args.horizon is not None else config.horizon,
        grid_dt=args.dt if args.dt is not None else config.grid_dt,
        n_realizations=args.realizations if args.realizations is not None else config.n_realizations,
        master_seed=args.seed if args.seed is not None else config.master_seed,
        outputs=args.output if args.output is not None else config.outputs,
        preset_name=config.preset_name,
        aggregate=(args.aggregate == "true") if args.aggregate is not None else config.aggregate,
        threads=args.threads if args.threads is not None else config.threads,
        Q0M=args.Q0M if args.Q0M is not None else config.Q0M,
    )


def _cmd_theory(args) -> int:
    if args.config is not None or args.preset is not None:
        config = _resolve_config(args)
        lam = args.lam if args.lam is not None else config.lambda_values[0]
        M = args.M if args.M is not None else config.M_values[0]
        scalar = config.scalar_model(lam, M)
    else:
        required = {"--A": args.A, "--G": args.G, "--C": args.C, "--V": args.V, "--lambda": args.lam, "--M": args.M}
        missing = [k for k, v in required.items() if v is None]
        if missing:
            raise ValueError(f"theory needs a scalar model; missing flags: {' '.join(missing)}")
        scalar = ScalarModel(
            A=args.A, G=args.G, C=args.C, V=args.V, lam=args.lam, M=args.M,
            P0=1.0 if args.P0 is None else args.P0, Q0M=args.Q0M,
        )
    report = check_sampling_rate(scalar)
    rows = [
        ("gamma_bar", "n/a (lambda <= 2A)" if report.ultimate_bound is None and not np.isfinite(report.gamma_bar) else f"{report.gamma_bar:.12g}"),
        ("lambda_min", f"{report.lambda_min:.12g}"),
        ("feasible", "yes" if report.feasible else "no"),
        ("ultimate_bound", "infeasible" if report.ultimate_bound is None else f"{report.ultimate_bound:.12g}"),
        ("noise inequality", "holds" if report.ineq_noise else "fails"),
        ("rate inequality", "holds" if report.ineq_rate else "fails"),
    ]
    width = max(len(k) for k, _ in rows)
    print("sampling-rate feasibility report")
    for key, value in rows:
        print(f"  {key:<{width}}  {value}")
    record = dict(report.as_dict(), A=scalar.A, G=scalar.G, C=scalar.C, V=scalar.V, **{"lambda": scalar.lam}, M=scalar.M, P0=scalar.P0, Q0M=scalar.Q0M)
    print(json.dumps(record, sort_keys=True))
    if args.output is not None:
        args.output.mkdir(parents=True, exist_ok=True)
        with open(args.output / "theory_report.json", "w") as fh:
            json.dump(record, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return 0


def _cmd_validate_generator(args) -> int:
    seed = 42 if args.seed is None else args.seed
    horizon = 1.0 if args.horizon is None else args.horizon
    dt = 1e-3 if args.dt is None else args.dt
    A, G = -1.0, 1.0

    square = TestFunction(
        eval=lambda X: X[:, 0] ** 2,
        gradient=lambda X: 2.0 * X,
        hessian=lambda X: np.full((X.shape[0], 1, 1), 2.0),
    )
    ou = JumpDiffusionSpec(drift=lambda X: A * X, diffusion=lambda X: np.full((X.shape[0], 1, 1), G))
    report = dynkin_check(ou, square, [0.0], horizon, args.paths, RngStream(seed, 0, Role.STATE_NOISE), dt=dt)
    exact = G * G / (-2 * A) * -np.expm1(2 * A * horizon)
    print(f"ou second moment: mc={report.mc_estimate:.6f} dynkin={report.dynkin_estimate:.6f} "
          f"exact={exact:.6f} pooled_se={report.pooled_stderr:.2e}")
    ok = (
        abs(report.mc_estimate - exact) < 4 * report.mc_stderr + 4 * G * G * dt
        and report.discrepancy_in_se < 4.0
    )

    # jump template: generator of P -> -P^2 C^2/(P C^2 + V) jumps reproduces the expectation ODE
    lam, C, V = 5.0, 1.0, 0.5
    riccati = JumpDiffusionSpec(
        drift=lambda X: 2.0 * A * X + G * G,
        diffusion=lambda X: np.zeros((X.shape[0], 1, 1)),
        jump=lambda X, NU: -(X**2) * C * C / (X * C * C + V),
        noise=None,
        lam=lam,
    )
    ident = TestFunction(
        eval=lambda X: X[:, 0],
        gradient=lambda X: np.ones_like(X),
        hessian=lambda X: np.zeros((X.shape[0], 1, 1)),
    )
    scalar = ScalarModel(A=A, G=G, C=C, V=V, lam=lam, M=10, P0=1.0)
    traj = expected_cov_odes(scalar, horizon, min(dt, 1e-3))
    rep2 = dynkin_check(riccati, ident, [1.0], horizon, args.paths, RngStream(seed, 1, Role.STATE_NOISE), dt=dt)
    print(f"jump covariance mean: mc={rep2.mc_estimate:.6f} dynkin={rep2.dynkin_estimate:.6f} "
          f"ode={traj.P_cal[-1]:.6f} pooled_se={rep2.pooled_stderr:.2e}")
    ok = ok and abs(rep2.mc_estimate - traj.P_cal[-1]) < 4 * rep2.mc_stderr + 20 * dt and rep2.discrepancy_in_se < 4.0
    print("validate-generator:", "ok" if ok else "FAILED")
    return 0 if ok else 2


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1

    logging.basicConfig(level=[logging.WARNING, logging.INFO, logging.DEBUG][args.verbosity])
    try:
        if args.subcommand == "theory":
            return _cmd_theory(args)
        if args.subcommand == "validate-generator":
            return _cmd_validate_generator(args)
        config = _resolve_config(args)
        if config.outputs is None:
            raise ValueError("an output directory is required (--output or [output] directory)")
        if args.subcommand == "simulate":
            run_simulate(config)
        elif args.subcommand == "compare":
            run_comparison(config)
        elif args.subcommand == "sweep":
            run_theory_overlay(config)
        print(f"{args.subcommand}: outputs written to {config.outputs}")
        return 0
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (PathDivergenceError, FloatingPointError, np.linalg.LinAlgError, RuntimeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
