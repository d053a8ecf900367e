"""Monte Carlo comparison experiments with shared worlds and CSV outputs.

Each realization draws one clock, one true state path and one observation
sequence; the optimal filter, the mean-field reference and every M-particle
ensemble consume bit-identical events, with filter-internal noises on
disjoint streams.  Aggregation across realizations is an ordered reduction
by realization index, so serial and parallel execution (and repeated runs
with the same seed) produce byte-identical CSVs.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from configparser import ConfigParser
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .ensemble import run_ensemble
from .models import LinearGaussianModel
from .optimal import run_mean_field, run_optimal
from .presets import preset_defaults, preset_model
from .rng import Role, RngStream
from .sde import build_grid, sample_clock, simulate_state
from .theory import ScalarModel, check_sampling_rate, expected_cov_odes

__all__ = [
    "ExperimentConfig",
    "ComparisonSeries",
    "load_config",
    "config_to_dict",
    "config_from_dict",
    "run_comparison",
    "run_theory_overlay",
    "run_simulate",
    "CSV_HEADER",
    "CSV_HEADER_THEORY",
]

logger = logging.getLogger(__name__)

CSV_HEADER = (
    "t,mean_diff_norm,mean_diff_stderr,opt_cov_trace,opt_cov_stderr,"
    "emp_cov_trace,emp_cov_stderr,cov_gap,cov_gap_stderr"
)
CSV_HEADER_THEORY = CSV_HEADER + ",theory_P,theory_QM,theory_gap,theory_bound"

_EXPERIMENT_KEYS = {
    "preset",
    "lambda_values",
    "m_values",
    "horizon",
    "grid_dt",
    "realizations",
    "seed",
    "aggregate",
    "threads",
    "q0m",
}
_MODEL_KEYS = {"preset", "a", "g", "c", "v", "x0_mean", "x0_cov"}
_OUTPUT_KEYS = {"directory"}


@dataclass(eq=False)
class ExperimentConfig:
    """Validated description of one comparison experiment."""

    model: LinearGaussianModel
    lambda_values: list = field(default_factory=lambda: [5.0, 10.0])
    M_values: list = field(default_factory=lambda: [10, 20])
    horizon: float = 2.0
    grid_dt: float = 1e-3
    n_realizations: int = 100
    master_seed: int = 42
    outputs: Path | None = None
    preset_name: str | None = None
    aggregate: bool = True
    threads: int = 1
    Q0M: float | None = None

    def __post_init__(self):
        if not self.lambda_values:
            raise ValueError("lambda_values must be nonempty")
        for lam in self.lambda_values:
            if lam <= 0:
                raise ValueError(f"lambda_values entries must be positive, got {lam}")
        if not self.M_values:
            raise ValueError("M_values must be nonempty")
        for M in self.M_values:
            if int(M) != M or M < 2:
                raise ValueError(f"M_values entries must be integers >= 2, got {M}")
        self.M_values = [int(M) for M in self.M_values]
        if self.horizon <= 0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if self.grid_dt <= 0:
            raise ValueError(f"grid_dt must be positive, got {self.grid_dt}")
        if self.n_realizations < 1:
            raise ValueError(f"n_realizations must be at least 1, got {self.n_realizations}")
        if self.threads < 1:
            raise ValueError(f"threads must be at least 1, got {self.threads}")
        if self.outputs is not None:
            self.outputs = Path(self.outputs)

    def scalar_model(self, lam: float, M: int) -> ScalarModel:
        """Theory-layer view of a one-dimensional model."""
        m = self.model
        if m.n != 1 or m.p != 1 or m.m != 1:
            raise ValueError("the theory layer requires a scalar model (n = m = p = 1)")
        P0 = m.x0_cov[0, 0]
        if P0 <= 0:
            raise ValueError("the theory layer requires a positive initial covariance")
        return ScalarModel(
            A=m.A[0, 0], G=m.G[0, 0], C=m.C[0, 0], V=m.V[0, 0],
            lam=lam, M=M, P0=P0, Q0M=self.Q0M,
        )


@dataclass(eq=False)
class ComparisonSeries:
    """Aggregated comparison curves for one (lambda, M) pair."""

    grid: np.ndarray
    mean_diff_norm: np.ndarray
    mean_diff_stderr: np.ndarray
    opt_cov_trace: np.ndarray
    opt_cov_stderr: np.ndarray
    emp_cov_trace: np.ndarray
    emp_cov_stderr: np.ndarray
    cov_gap: np.ndarray
    cov_gap_stderr: np.ndarray
    theory_P: np.ndarray | None = None
    theory_QM: np.ndarray | None = None
    theory_gap: np.ndarray | None = None
    theory_bound: np.ndarray | None = None
    n_failed: int = 0
    n_succeeded: int = 0


def events_digest(events) -> str:
    """Hash of an observation sequence; used to assert filter fairness."""
    hasher = hashlib.sha256()
    for e in events:
        hasher.update(np.float64(e.time).tobytes())
        hasher.update(np.asarray(e.y, dtype=float).tobytes())
        hasher.update(np.asarray(e.measurement_noise, dtype=float).tobytes())
    return hasher.hexdigest()


# ---------------------------------------------------------------------------
# configuration parsing


def _parse_matrix(text: str, key: str) -> list:
    try:
        rows = [row.strip() for row in text.split(";") if row.strip()]
        return [[float(v) for v in row.split(",")] for row in rows]
    except ValueError as exc:
        raise ValueError(f"config key {key!r}: cannot parse matrix from {text!r}") from exc


def _parse_floats(text: str, key: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ValueError(f"config key {key!r}: cannot parse number list from {text!r}") from exc


def _parse_bool(text: str, key: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"config key {key!r}: expected a boolean, got {text!r}")


def load_config(path) -> ExperimentConfig:
    """Parse a sectioned key-value config file into an ExperimentConfig.

    Sections are ``[model]``, ``[experiment]`` and ``[output]``; arrays are
    comma-separated and matrix rows are separated by semicolons.  A
    ``preset`` key resolves a bundled configuration whose values explicit
    keys then override.
    """
    path = Path(path)
    if not path.exists():
        raise ValueError(f"config file {path} does not exist")
    parser = ConfigParser()
    with open(path) as fh:
        parser.read_file(fh)

    for section in parser.sections():
        if section not in ("model", "experiment", "output"):
            raise ValueError(f"unknown config section [{section}]")
    model_sec = {k.lower(): v for k, v in parser.items("model")} if parser.has_section("model") else {}
    exp_sec = {k.lower(): v for k, v in parser.items("experiment")} if parser.has_section("experiment") else {}
    out_sec = {k.lower(): v for k, v in parser.items("output")} if parser.has_section("output") else {}
    for k in model_sec:
        if k not in _MODEL_KEYS:
            raise ValueError(f"unknown key {k!r} in [model]")
    for k in exp_sec:
        if k not in _EXPERIMENT_KEYS:
            raise ValueError(f"unknown key {k!r} in [experiment]")
    for k in out_sec:
        if k not in _OUTPUT_KEYS:
            raise ValueError(f"unknown key {k!r} in [output]")

    preset = exp_sec.get("preset") or model_sec.get("preset")
    defaults: dict = {}
    model = None
    if preset is not None:
        model = preset_model(preset)
        defaults = preset_defaults(preset)

    model_keys = {k for k in model_sec if k != "preset"}
    if model_keys:
        required = {"a", "g", "c", "v"}
        if not required.issubset(model_keys):
            missing = sorted(required - model_keys)
            raise ValueError(f"[model] is missing keys: {missing}")
        A = _parse_matrix(model_sec["a"], "A")
        G = _parse_matrix(model_sec["g"], "G")
        C = _parse_matrix(model_sec["c"], "C")
        V = _parse_matrix(model_sec["v"], "V")
        n = len(A)
        x0_mean = _parse_floats(model_sec["x0_mean"], "x0_mean") if "x0_mean" in model_sec else [0.0] * n
        x0_cov = _parse_matrix(model_sec["x0_cov"], "x0_cov") if "x0_cov" in model_sec else np.eye(n).tolist()
        model = LinearGaussianModel(A=A, G=G, C=C, V=V, x0_mean=x0_mean, x0_cov=x0_cov)
    if model is None:
        raise ValueError("no model given: provide a [model] section or a preset")

    def exp_value(key, parse, fallback):
        if key in exp_sec:
            return parse(exp_sec[key], key)
        return defaults.get(_CONFIG_TO_FIELD.get(key, key), fallback)

    config = ExperimentConfig(
        model=model,
        lambda_values=exp_value("lambda_values", _parse_floats, [5.0, 10.0]),
        M_values=[int(v) for v in exp_value("m_values", _parse_floats, [10, 20])],
        horizon=exp_value("horizon", lambda t, k: float(t), 2.0),
        grid_dt=exp_value("grid_dt", lambda t, k: float(t), 1e-3),
        n_realizations=exp_value("realizations", lambda t, k: int(t), 100),
        master_seed=exp_value("seed", lambda t, k: int(t), 42),
        aggregate=exp_value("aggregate", _parse_bool, True),
        threads=exp_value("threads", lambda t, k: int(t), 1),
        Q0M=float(exp_sec["q0m"]) if "q0m" in exp_sec else None,
        outputs=Path(out_sec["directory"]) if "directory" in out_sec else None,
        preset_name=preset,
    )
    return config


_CONFIG_TO_FIELD = {
    "m_values": "M_values",
    "realizations": "n_realizations",
    "seed": "master_seed",
}


def config_to_dict(config: ExperimentConfig) -> dict:
    m = config.model
    return {
        "model": {
            "A": m.A.tolist(),
            "G": m.G.tolist(),
            "C": m.C.tolist(),
            "V": m.V.tolist(),
            "x0_mean": m.x0_mean.tolist(),
            "x0_cov": m.x0_cov.tolist(),
        },
        "lambda_values": list(config.lambda_values),
        "M_values": list(config.M_values),
        "horizon": config.horizon,
        "grid_dt": config.grid_dt,
        "n_realizations": config.n_realizations,
        "master_seed": config.master_seed,
        "outputs": str(config.outputs) if config.outputs is not None else None,
        "preset_name": config.preset_name,
        "aggregate": config.aggregate,
        "threads": config.threads,
        "Q0M": config.Q0M,
    }


def config_from_dict(data: dict) -> ExperimentConfig:
    m = data["model"]
    model = LinearGaussianModel(A=m["A"], G=m["G"], C=m["C"], V=m["V"], x0_mean=m["x0_mean"], x0_cov=m["x0_cov"])
    return ExperimentConfig(
        model=model,
        lambda_values=list(data["lambda_values"]),
        M_values=list(data["M_values"]),
        horizon=data["horizon"],
        grid_dt=data["grid_dt"],
        n_realizations=data["n_realizations"],
        master_seed=data["master_seed"],
        outputs=data["outputs"],
        preset_name=data.get("preset_name"),
        aggregate=data.get("aggregate", True),
        threads=data.get("threads", 1),
        Q0M=data.get("Q0M"),
    )


# ---------------------------------------------------------------------------
# realization pipeline


def _run_realization(args):
    """One shared world, all filters side by side.  Returns per-grid arrays."""
    model, lam, M_values, horizon, grid_dt, master_seed, r = args
    clock_rng = RngStream(master_seed, r, Role.CLOCK)
    state_rng = RngStream(master_seed, r, Role.STATE_NOISE)
    mf_rng = RngStream(master_seed, r, Role.MEANFIELD_NOISE)

    clock = sample_clock(lam, horizon, clock_rng)
    traj = simulate_state(model, clock, grid_dt, state_rng)
    events = traj.events
    digest = events_digest(events)

    optimal = run_optimal(model, clock, events, grid_dt)
    if events_digest(events) != digest:
        raise RuntimeError("observation sequence mutated by the optimal filter")
    run_mean_field(model, clock, events, optimal, grid_dt, mf_rng)
    if events_digest(events) != digest:
        raise RuntimeError("observation sequence mutated by the mean-field reference")

    grid = build_grid(horizon, grid_dt, clock.jump_times)
    uniform = build_grid(horizon, grid_dt, None)
    idx = np.searchsorted(grid, uniform)

    opt_means = np.array([s.mean for s in optimal])[idx]
    opt_trace = np.array([np.trace(s.cov) for s in optimal])[idx]

    per_M = {}
    ok = bool(np.all(np.isfinite(opt_means)) and np.all(np.isfinite(opt_trace)))
    for M in M_values:
        particle_rng = RngStream(master_seed, r, Role.PARTICLE_NOISE)
        states = run_ensemble(model, clock, events, M, grid_dt, particle_rng)
        if events_digest(events) != digest:
            raise RuntimeError("observation sequence mutated by the ensemble filter")
        emp_means = np.array([s.emp_mean for s in states])[idx]
        emp_trace = np.array([np.trace(s.emp_cov) for s in states])[idx]
        mean_diff = np.linalg.norm(opt_means - emp_means, axis=1)
        ok = ok and bool(np.all(np.isfinite(emp_means)) and np.all(np.isfinite(emp_trace)))
        per_M[M] = (mean_diff, emp_trace)
    return {"r": r, "ok": ok, "opt_trace": opt_trace, "per_M": per_M}


def _aggregate(grid, results, M_values):
    """Ordered reduction of per-realization arrays into ComparisonSeries."""
    good = [res for res in results if res["ok"]]
    n_failed = len(results) - len(good)
    if n_failed:
        failed_ids = [res["r"] for res in results if not res["ok"]]
        logger.warning("excluded %d non-finite realization(s): %s", n_failed, failed_ids)
    if not good:
        raise RuntimeError("all realizations failed (non-finite outputs)")
    R = len(good)
    opt_trace = np.stack([res["opt_trace"] for res in good])

    def sem(rows):
        if R < 2:
            return np.zeros(rows.shape[1])
        return np.std(rows, axis=0, ddof=1) / math.sqrt(R)

    out = {}
    for M in M_values:
        mean_diff = np.stack([res["per_M"][M][0] for res in good])
        emp_trace = np.stack([res["per_M"][M][1] for res in good])
        out[M] = ComparisonSeries(
            grid=grid,
            mean_diff_norm=mean_diff.mean(axis=0),
            mean_diff_stderr=sem(mean_diff),
            opt_cov_trace=opt_trace.mean(axis=0),
            opt_cov_stderr=sem(opt_trace),
            emp_cov_trace=emp_trace.mean(axis=0),
            emp_cov_stderr=sem(emp_trace),
            cov_gap=np.abs(opt_trace.mean(axis=0) - emp_trace.mean(axis=0)),
            cov_gap_stderr=sem(emp_trace - opt_trace),
            n_failed=n_failed,
            n_succeeded=R,
        )
    return out


def run_comparison(config: ExperimentConfig, command: str = "compare") -> dict:
    """Run the comparison for every (lambda, M); write CSVs and a manifest.

    Returns ``{(lam, M): ComparisonSeries}``.  With ``aggregate=False`` a
    single sample path (realization 0) is recorded instead of an average.
    """
    t_start = time.perf_counter()
    R = config.n_realizations if config.aggregate else 1
    if not config.aggregate and config.n_realizations > 1:
        logger.info("aggregate=false: recording the single sample path of realization 0")
    uniform = build_grid(config.horizon, config.grid_dt, None)

    all_series: dict = {}
    failures: dict = {}
    for lam in config.lambda_values:
        tasks = [
            (config.model, lam, config.M_values, config.horizon, config.grid_dt, config.master_seed, r)
            for r in range(R)
        ]
        if config.threads > 1 and R > 1:
            with ProcessPoolExecutor(max_workers=config.threads) as pool:
                results = list(pool.map(_run_realization, tasks, chunksize=max(1, R // (4 * config.threads))))
        else:
            results = [_run_realization(t) for t in tasks]
        series = _aggregate(uniform, results, config.M_values)
        failures[f"lambda={lam:g}"] = {
            "failed": series[config.M_values[0]].n_failed,
            "succeeded": series[config.M_values[0]].n_succeeded,
        }
        for M, s in series.items():
            all_series[(lam, M)] = s

    files = []
    if config.outputs is not None:
        config.outputs.mkdir(parents=True, exist_ok=True)
        for (lam, M), s in all_series.items():
            path = config.outputs / f"{command}_lam{lam:g}_M{M}.csv"
            write_series_csv(path, s)
            files.append(path.name)
        _write_manifest(config, command, failures, files, time.perf_counter() - t_start)
    return all_series


def run_theory_overlay(config: ExperimentConfig, command: str = "sweep") -> dict:
    """Comparison run with expectation-ODE and bound columns merged in.

    Scalar models only.  When the sampling-rate condition fails for some
    (lambda, M) the bound column carries the infeasible marker (nan) while
    the Monte Carlo and ODE columns are still produced.
    """
    t_start = time.perf_counter()
    series = run_comparison(_without_outputs(config), command=command)
    uniform = build_grid(config.horizon, config.grid_dt, None)
    # the recording grid spacing is horizon/K with K = ceil(horizon/grid_dt);
    # refine it to <= 1e-3 so ODE samples land exactly on the grid points
    spacing = config.horizon / (len(uniform) - 1)
    ode_refine = max(1, int(np.ceil(spacing / 1e-3)))
    ode_dt = spacing / ode_refine

    for (lam, M), s in series.items():
        scalar = config.scalar_model(lam, M)
        traj = expected_cov_odes(scalar, config.horizon, ode_dt)
        sub = slice(0, len(traj.grid), ode_refine)
        s.theory_P = traj.P_cal[sub]
        s.theory_QM = traj.Q_cal[sub]
        s.theory_gap = np.abs(traj.E_cal[sub])
        report = check_sampling_rate(scalar)
        bound = report.ultimate_bound if report.feasible else float("nan")
        if not report.feasible:
            logger.warning("lambda=%g, M=%d: sampling rate infeasible, bound column marked nan", lam, M)
        s.theory_bound = np.full(len(uniform), bound)

    files = []
    failures = {
        f"lambda={lam:g}": {"failed": s.n_failed, "succeeded": s.n_succeeded}
        for (lam, M), s in series.items()
    }
    if config.outputs is not None:
        config.outputs.mkdir(parents=True, exist_ok=True)
        for (lam, M), s in series.items():
            path = config.outputs / f"{command}_lam{lam:g}_M{M}.csv"
            write_series_csv(path, s)
            files.append(path.name)
        _write_manifest(config, command, failures, files, time.perf_counter() - t_start)
    return series


def _without_outputs(config: ExperimentConfig) -> ExperimentConfig:
    return ExperimentConfig(
        model=config.model,
        lambda_values=config.lambda_values,
        M_values=config.M_values,
        horizon=config.horizon,
        grid_dt=config.grid_dt,
        n_realizations=config.n_realizations,
        master_seed=config.master_seed,
        outputs=None,
        preset_name=config.preset_name,
        aggregate=config.aggregate,
        threads=config.threads,
        Q0M=config.Q0M,
    )


def run_simulate(config: ExperimentConfig, command: str = "simulate") -> list:
    """Simulate state trajectories (first lambda value) and write one CSV each."""
    t_start = time.perf_counter()
    lam = config.lambda_values[0]
    files = []
    trajectories = []
    for r in range(config.n_realizations):
        clock = sample_clock(lam, config.horizon, RngStream(config.master_seed, r, Role.CLOCK))
        traj = simulate_state(config.model, clock, config.grid_dt, RngStream(config.master_seed, r, Role.STATE_NOISE))
        trajectories.append(traj)
        if config.outputs is not None:
            config.outputs.mkdir(parents=True, exist_ok=True)
            path = config.outputs / f"trajectory_lam{lam:g}_r{r:03d}.csv"
            _write_trajectory_csv(path, config.model, traj)
            files.append(path.name)
    if config.outputs is not None:
        failures = {f"lambda={lam:g}": {"failed": 0, "succeeded": config.n_realizations}}
        _write_manifest(config, command, failures, files, time.perf_counter() - t_start)
    return trajectories


# ---------------------------------------------------------------------------
# persistence


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_series_csv(path, s: ComparisonSeries) -> None:
    """Write one ComparisonSeries with the pinned header, 17 significant digits."""
    with_theory = s.theory_P is not None
    header = CSV_HEADER_THEORY if with_theory else CSV_HEADER
    cols = [
        s.grid, s.mean_diff_norm, s.mean_diff_stderr,
        s.opt_cov_trace, s.opt_cov_stderr,
        s.emp_cov_trace, s.emp_cov_stderr,
        s.cov_gap, s.cov_gap_stderr,
    ]
    if with_theory:
        cols += [s.theory_P, s.theory_QM, s.theory_gap, s.theory_bound]
    with open(path, "w", newline="") as fh:
        fh.write(header + "\n")
        for k in range(len(s.grid)):
            fh.write(",".join(_fmt(col[k]) for col in cols) + "\n")


def _write_trajectory_csv(path, model, traj) -> None:
    header = ["t"] + [f"x{i + 1}" for i in range(model.n)] + ["event"] + [f"y{j + 1}" for j in range(model.p)]
    event_times = {e.time: e for e in traj.events}
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for k, t in enumerate(traj.grid):
            row = [_fmt(t)] + [_fmt(v) for v in traj.states[k]]
            ev = event_times.get(t)
            if ev is not None:
                row.append("1")
                row += [_fmt(v) for v in ev.y]
            else:
                row.append("0")
                row += ["nan"] * model.p
            fh.write(",".join(row) + "\n")


def _write_manifest(config: ExperimentConfig, command: str, failures: dict, files: list, wall_time: float) -> None:
    manifest = {
        "command": command,
        "version": __version__,
        "seed": config.master_seed,
        "config": config_to_dict(config),
        "failure_counts": failures,
        "files": sorted(files),
        "wall_time_s": wall_time,
    }
    with open(config.outputs / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
