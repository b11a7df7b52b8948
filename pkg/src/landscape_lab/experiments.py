"""Experiment runners with seeded reproducibility and structured output.

Each runner resolves its defaults, derives every random stream from the
master seed, computes its tables, and writes CSV or JSON files that embed
the master seed, a hash of the resolved configuration, and the package
version. Re-running with an identical configuration reproduces identical
bytes.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import __version__, rng
from .critical_points import (
    find_critical_points,
    grid_seed_points,
    refine_minimum_horizontal,
)
from .errors import InvalidConfig
from .landscape import (
    AssumptionConfig,
    RegionSamplerConfig,
    check_assumptions,
    default_phase_assumption_config,
    default_sensing_assumption_config,
    estimate_rip,
    verify_region_bounds_ms,
    verify_region_bounds_pr,
)
from .risk_models import (
    MsEmpiricalRisk,
    MsPopulationRisk,
    PrEmpiricalRisk,
    PrPopulationRisk,
    SensingGroundTruth,
    generate_phase_problem,
    generate_sensing_ensemble,
)
from .spectral import dense_euclidean_hessian

EXPERIMENTS = (
    "pr1d",
    "pr2d",
    "ms2d_rank1",
    "ms_rank2_dist",
    "assumptions",
    "regions_ms",
    "regions_pr",
    "rip",
)
VERIFICATION_EXPERIMENTS = ("assumptions", "regions_ms", "regions_pr", "rip")

# the planar signal every two-dimensional figure uses
XSTAR_PLANE = np.array([1.0, -1.0])

PR1D_GRAD_CUTOFF = 0.3963  # times ||x*||^3, marks the small-gradient bands
NEWTON_SEED_SPACING = 0.1  # critical-point seeding for the 2d experiments


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    n: int | None = None
    k: int | None = None
    r: int | None = None
    m: tuple = ()
    trials: int | None = None
    master_seed: int | None = None
    grid: tuple | None = None
    out: str | None = None
    fmt: str = "csv"
    samples: int | None = None
    epsilon: float | None = None
    eta: float | None = None
    radius: float | None = None
    n_probes: int | None = None
    rank_bound: int | None = None
    family: str | None = None

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise InvalidConfig(
                f"unknown experiment {self.experiment!r}; choose one of "
                + ", ".join(EXPERIMENTS)
            )
        if self.fmt not in ("csv", "json"):
            raise InvalidConfig(f"format must be csv or json, got {self.fmt!r}")
        if self.grid is not None:
            lo, hi, points = self.grid
            if not (hi > lo and int(points) >= 2):
                raise InvalidConfig("grid needs max > min and points >= 2")
        if self.trials is not None and self.trials < 1:
            raise InvalidConfig("trials must be at least 1")
        if any(int(v) < 1 for v in self.m):
            raise InvalidConfig("every measurement count must be at least 1")
        for name in ("n", "k", "r", "samples", "n_probes", "rank_bound"):
            value = getattr(self, name)
            if value is not None and value < 1:
                raise InvalidConfig(f"{name} must be at least 1")


@dataclass(frozen=True)
class ExperimentOutcome:
    paths: tuple
    summary: dict
    ok: bool


# ---------------------------------------------------------------------------
# output plumbing
# ---------------------------------------------------------------------------


def format_float(value: float) -> str:
    return "%.17g" % float(value)


def _format_cell(value) -> str:
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format_float(value)
    return str(value)


def config_hash(resolved: dict) -> str:
    """Hash of the resolved configuration, excluding output plumbing."""
    lines = []
    for key in sorted(resolved):
        if key in ("out", "format"):
            continue
        lines.append(f"{key}={_format_cell(resolved[key])}")
    digest = hashlib.sha256("\n".join(lines).encode("utf-8"))
    return digest.hexdigest()[:16]


def _stamp(resolved: dict) -> dict:
    return {
        "master_seed": resolved["master_seed"],
        "config_hash": config_hash(resolved),
        "version": __version__,
    }


def _echo(resolved: dict) -> dict:
    """Config as embedded in outputs: substance only, no output plumbing."""
    return {k: v for k, v in resolved.items() if k not in ("out", "format")}


def write_csv(path: str, columns, rows, metadata: dict) -> str:
    lines = [f"# {key}: {_format_cell(value)}" for key, value in metadata.items()]
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_format_cell(cell) for cell in row))
    try:
        with open(path, "w", encoding="utf-8") as handle:
            handle.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise InvalidConfig(f"cannot write {path}: {exc}") from None
    return path


def write_json(path: str, payload: dict) -> str:
    try:
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(payload, handle, indent=2, sort_keys=True)
            handle.write("\n")
    except OSError as exc:
        raise InvalidConfig(f"cannot write {path}: {exc}") from None
    return path


def _out_base(config: ExperimentConfig) -> str:
    return config.out if config.out else config.experiment


def _alternating_signal(dim: int) -> np.ndarray:
    return np.array([1.0 if i % 2 == 0 else -1.0 for i in range(dim)])


def _identity_truth(dim: int, eigvals, target_rank: int) -> SensingGroundTruth:
    lam = np.asarray(eigvals, dtype=float)
    return SensingGroundTruth(
        eigvecs=np.eye(dim)[:, : lam.shape[0]], eigvals=lam, target_rank=target_rank
    )


# ---------------------------------------------------------------------------
# pr1d: both risks on a line
# ---------------------------------------------------------------------------


def run_pr1d(config: ExperimentConfig) -> ExperimentOutcome:
    if config.n not in (None, 1):
        raise InvalidConfig("the line experiment runs in dimension one")
    master = rng.resolve_master_seed(config.master_seed)
    m = int(config.m[0]) if config.m else 30
    lo, hi, points = config.grid if config.grid else (-2.0, 2.0, 401)
    xstar = np.array([1.0])
    cutoff = (
        config.epsilon
        if config.epsilon is not None
        else PR1D_GRAD_CUTOFF * float(np.linalg.norm(xstar)) ** 3
    )

    pop = PrPopulationRisk(xstar)
    emp = PrEmpiricalRisk(
        generate_phase_problem(
            xstar, m, seed=rng.subseed(master, "pr1d-ensemble", 0)
        )
    )
    axis = np.linspace(lo, hi, int(points))
    rows = []
    for x in axis:
        point = np.array([float(x)])
        rows.append(
            (
                float(x),
                pop.value(point),
                emp.value(point),
                float(pop.euclidean_grad(point)[0]),
                float(emp.euclidean_grad(point)[0]),
                float(dense_euclidean_hessian(pop, point)[0, 0]),
                float(dense_euclidean_hessian(emp, point)[0, 0]),
            )
        )

    intervals = []
    start = None
    for i, row in enumerate(rows):
        inside = abs(row[3]) <= cutoff
        if inside and start is None:
            start = row[0]
        if not inside and start is not None:
            intervals.append([start, rows[i - 1][0]])
            start = None
    if start is not None:
        intervals.append([start, rows[-1][0]])

    resolved = {
        "experiment": "pr1d",
        "n": 1,
        "m": m,
        "master_seed": master,
        "grid_min": lo,
        "grid_max": hi,
        "grid_points": int(points),
        "epsilon": cutoff,
        "out": _out_base(config),
        "format": config.fmt,
    }
    columns = ("x", "g", "f", "dg", "df", "d2g", "d2f")
    summary = {
        "rows": len(rows),
        "small_gradient_intervals": intervals,
        **_stamp(resolved),
    }
    if config.fmt == "csv":
        metadata = {
            **_stamp(resolved),
            "experiment": "pr1d",
            "m": m,
            "epsilon": cutoff,
            "small_gradient_intervals": json.dumps(intervals),
        }
        path = write_csv(_out_base(config) + ".csv", columns, rows, metadata)
    else:
        payload = {
            "config": _echo(resolved),
            **_stamp(resolved),
            "columns": list(columns),
            "rows": [list(r) for r in rows],
            "small_gradient_intervals": intervals,
        }
        path = write_json(_out_base(config) + ".json", payload)
    return ExperimentOutcome(paths=(path,), summary=summary, ok=True)


# ---------------------------------------------------------------------------
# pr2d / ms2d_rank1: contour grids plus classified critical points
# ---------------------------------------------------------------------------


def _plane_rank_one_truth() -> SensingGroundTruth:
    norm = float(np.linalg.norm(XSTAR_PLANE))
    return SensingGroundTruth(
        eigvecs=(XSTAR_PLANE / norm).reshape(-1, 1),
        eigvals=np.array([norm**2]),
        target_rank=1,
    )


def _surface_models(config: ExperimentConfig, master: int):
    m_list = tuple(int(v) for v in config.m) if config.m else (3, 10)
    if config.experiment == "pr2d":
        surfaces = [("population", PrPopulationRisk(XSTAR_PLANE))]
        for m in m_list:
            problem = generate_phase_problem(
                XSTAR_PLANE, m, seed=rng.subseed(master, f"pr2d-m{m}", 0)
            )
            surfaces.append((f"m{m}", PrEmpiricalRisk(problem)))
    else:
        truth = _plane_rank_one_truth()
        surfaces = [("population", MsPopulationRisk(truth))]
        for m in m_list:
            ensemble = generate_sensing_ensemble(
                truth, m, seed=rng.subseed(master, f"ms2d-m{m}", 0)
            )
            surfaces.append((f"m{m}", MsEmpiricalRisk(ensemble)))
    return surfaces, m_list


def run_2d_landscape(config: ExperimentConfig) -> ExperimentOutcome:
    if config.n not in (None, 2):
        raise InvalidConfig("the contour experiments run in dimension two")
    master = rng.resolve_master_seed(config.master_seed)
    lo, hi, points = config.grid if config.grid else (-2.0, 2.0, 81)
    surfaces, m_list = _surface_models(config, master)
    factor_domain = config.experiment == "ms2d_rank1"

    axis = np.linspace(lo, hi, int(points))
    newton_seeds = grid_seed_points(lo, hi, NEWTON_SEED_SPACING, 2)

    def as_point(x1, x2):
        vec = np.array([x1, x2])
        return vec.reshape(2, 1) if factor_domain else vec

    resolved = {
        "experiment": config.experiment,
        "n": 2,
        "m_list": ",".join(str(m) for m in m_list),
        "master_seed": master,
        "grid_min": lo,
        "grid_max": hi,
        "grid_points": int(points),
        "newton_seed_spacing": NEWTON_SEED_SPACING,
        "out": _out_base(config),
        "format": config.fmt,
    }
    stamp = _stamp(resolved)
    paths = []
    surface_payloads = {}
    counts = {}
    for name, model in surfaces:
        grid_rows = [
            (float(x1), float(x2), model.value(as_point(x1, x2)))
            for x1 in axis
            for x2 in axis
        ]
        search = find_critical_points(
            model,
            [s.reshape(2, 1) for s in newton_seeds] if factor_domain else newton_seeds,
        )
        point_rows = sorted(
            (
                float(record.location.ravel()[0]),
                float(record.location.ravel()[1]),
                record.grad_norm,
                record.lambda_min,
                record.kind,
            )
            for record in search.records
        )
        counts[name] = len(point_rows)
        if config.fmt == "csv":
            metadata = {**stamp, "experiment": config.experiment, "surface": name}
            paths.append(
                write_csv(
                    f"{_out_base(config)}_{name}_grid.csv",
                    ("x1", "x2", "value"),
                    grid_rows,
                    metadata,
                )
            )
            paths.append(
                write_csv(
                    f"{_out_base(config)}_{name}_points.csv",
                    ("x1", "x2", "grad_norm", "lambda_min", "kind"),
                    point_rows,
                    metadata,
                )
            )
        else:
            surface_payloads[name] = {
                "grid": [list(r) for r in grid_rows],
                "points": [list(r) for r in point_rows],
                "n_seeds": search.n_seeds,
                "n_failed": search.n_failed,
            }
    if config.fmt == "json":
        payload = {"config": _echo(resolved), **stamp, "surfaces": surface_payloads}
        paths.append(write_json(_out_base(config) + ".json", payload))
    summary = {"critical_points": counts, **stamp}
    return ExperimentOutcome(paths=tuple(paths), summary=summary, ok=True)


# ---------------------------------------------------------------------------
# ms_rank2_dist: minima drift against measurement count
# ---------------------------------------------------------------------------


def run_ms_rank2_distance(config: ExperimentConfig) -> ExperimentOutcome:
    n = config.n if config.n is not None else 8
    k = config.k if config.k is not None else 2
    r = config.r if config.r is not None else 3
    if not (1 <= k <= r <= n):
        raise InvalidConfig("need 1 <= k <= r <= n")
    trials = config.trials if config.trials is not None else 20
    m_list = tuple(int(v) for v in config.m) if config.m else (50, 100, 200, 400, 800)
    master = rng.resolve_master_seed(config.master_seed)

    truth = _identity_truth(n, np.ones(r), k)
    ustar = truth.canonical_minimum()

    def one_trial(m: int, trial: int):
        ensemble = generate_sensing_ensemble(
            truth, m, seed=rng.subseed(master, f"ms-dist-m{m}", trial)
        )
        model = MsEmpiricalRisk(ensemble)
        refined, grad_norm = refine_minimum_horizontal(model, ustar)
        converged = grad_norm <= 1e-6 * (1.0 + model.value_scale)
        # distance to the population minimum set: with a degenerate top
        # block the minima sweep a continuum, and the empirical minimum
        # tracks the set, not any single gauge orbit
        return converged, truth.minimum_set_distance(refined)

    rows = []
    detail = {}
    workers = min(trials, os.cpu_count() or 1, 8)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for m in m_list:
            futures = [pool.submit(one_trial, m, t) for t in range(trials)]
            outcomes = [f.result() for f in futures]  # trial order
            distances = [d for ok, d in outcomes if ok]
            trials_ok = len(distances)
            mean = float(np.mean(distances)) if distances else math.nan
            std = (
                float(np.std(distances, ddof=1)) if trials_ok >= 2 else 0.0
            )
            rows.append((m, trials_ok, mean, std))
            detail[str(m)] = {
                "distances": distances,
                "failed_trials": trials - trials_ok,
            }

    resolved = {
        "experiment": "ms_rank2_dist",
        "n": n,
        "k": k,
        "r": r,
        "trials": trials,
        "m_list": ",".join(str(m) for m in m_list),
        "master_seed": master,
        "out": _out_base(config),
        "format": config.fmt,
    }
    stamp = _stamp(resolved)
    columns = ("M", "trials_ok", "mean_dist", "std_dist")
    if config.fmt == "csv":
        metadata = {**stamp, "experiment": "ms_rank2_dist", "trials": trials}
        path = write_csv(_out_base(config) + ".csv", columns, rows, metadata)
    else:
        payload = {
            "config": _echo(resolved),
            **stamp,
            "columns": list(columns),
            "rows": [list(row) for row in rows],
            "per_m": detail,
        }
        path = write_json(_out_base(config) + ".json", payload)
    summary = {
        "means": {str(m): mean for m, _, mean, _ in rows},
        **stamp,
    }
    return ExperimentOutcome(paths=(path,), summary=summary, ok=True)


# ---------------------------------------------------------------------------
# verification suites
# ---------------------------------------------------------------------------


def _assumptions_report(config: ExperimentConfig, master: int):
    family = config.family or "pr"
    if family == "pr":
        n = config.n if config.n is not None else 2
        signal = _alternating_signal(n)
        m = int(config.m[0]) if config.m else 2000
        defaults = default_phase_assumption_config(signal)
        samples = config.samples if config.samples is not None else 2000
        pop = PrPopulationRisk(signal)
        emp = PrEmpiricalRisk(
            generate_phase_problem(
                signal, m, seed=rng.subseed(master, "assumptions-ensemble", 0)
            )
        )
        instance = {"family": "pr", "n": n, "m": m}
    elif family == "ms":
        n = config.n if config.n is not None else 8
        k = config.k if config.k is not None else 2
        r = config.r if config.r is not None else 3
        truth = _identity_truth(n, (1.3, 1.0, 0.08)[:r] if r <= 3 else np.ones(r), k)
        m = int(config.m[0]) if config.m else 2000
        defaults = default_sensing_assumption_config(truth)
        # horizontal Hessian assembly is the cost driver for factors
        samples = config.samples if config.samples is not None else 300
        pop = MsPopulationRisk(truth)
        emp = MsEmpiricalRisk(
            generate_sensing_ensemble(
                truth, m, seed=rng.subseed(master, "assumptions-ensemble", 0)
            )
        )
        instance = {"family": "ms", "n": n, "k": k, "r": r, "m": m}
    else:
        raise InvalidConfig(f"family must be pr or ms, got {family!r}")
    check_config = AssumptionConfig(
        epsilon=config.epsilon if config.epsilon is not None else defaults.epsilon,
        eta=config.eta if config.eta is not None else defaults.eta,
        ball_radius=config.radius if config.radius is not None else defaults.ball_radius,
        n_samples=samples,
        seed=master,
    )
    report = check_assumptions(pop, emp, check_config)
    return report.to_json_dict(), report.overall_pass, instance


def _regions_report(config: ExperimentConfig, master: int):
    samples = config.samples if config.samples is not None else 500
    sampler = RegionSamplerConfig(n_per_region=samples, seed=master)
    if config.experiment == "regions_ms":
        n = config.n if config.n is not None else 8
        k = config.k if config.k is not None else 2
        r = config.r if config.r is not None else 3
        truth = _identity_truth(n, (1.3, 1.0, 0.08)[:r] if r <= 3 else np.ones(r), k)
        report = verify_region_bounds_ms(truth, sampler)
        instance = {"family": "ms", "n": n, "k": k, "r": r}
    else:
        n = config.n if config.n is not None else 3
        signal = (
            np.array([1.2, -0.5, 0.3]) if n == 3 else _alternating_signal(n)
        )
        report = verify_region_bounds_pr(signal, sampler)
        instance = {"family": "pr", "n": n}
    return report.to_json_dict(), report.all_clear, instance


def _rip_report(config: ExperimentConfig, master: int):
    n = config.n if config.n is not None else 4
    k = config.k if config.k is not None else 1
    r = config.r if config.r is not None else 1
    truth = _identity_truth(n, np.ones(r), min(k, r))
    m = int(config.m[0]) if config.m else 2000
    # a probe rank above the ambient dimension is meaningless
    rank_bound = (
        config.rank_bound if config.rank_bound is not None else min(r + k, n)
    )
    n_probes = config.n_probes if config.n_probes is not None else 500
    ensemble = generate_sensing_ensemble(
        truth, m, seed=rng.subseed(master, "rip-ensemble", 0)
    )
    report = estimate_rip(
        ensemble,
        rank_bound=rank_bound,
        n_probes=n_probes,
        seed=master,
        epsilon=config.epsilon,
        eta=config.eta,
    )
    instance = {"family": "ms", "n": n, "k": k, "r": r, "m": m}
    return report.to_json_dict(), report.within_threshold, instance


def run_verification(config: ExperimentConfig) -> ExperimentOutcome:
    if config.fmt != "json":
        raise InvalidConfig("verification reports are JSON only")
    master = rng.resolve_master_seed(config.master_seed)
    if config.experiment == "assumptions":
        report, ok, instance = _assumptions_report(config, master)
    elif config.experiment in ("regions_ms", "regions_pr"):
        report, ok, instance = _regions_report(config, master)
    else:
        report, ok, instance = _rip_report(config, master)
    resolved = {
        "experiment": config.experiment,
        "master_seed": master,
        "out": _out_base(config),
        "format": config.fmt,
        **{key: value for key, value in instance.items() if key != "family"},
        "family": instance["family"],
    }
    stamp = _stamp(resolved)
    payload = {
        "config": _echo(resolved),
        **stamp,
        "ok": ok,
        "report": report,
    }
    path = write_json(_out_base(config) + ".json", payload)
    summary = {"ok": ok, **stamp}
    return ExperimentOutcome(paths=(path,), summary=summary, ok=ok)


RUNNERS = {
    "pr1d": run_pr1d,
    "pr2d": run_2d_landscape,
    "ms2d_rank1": run_2d_landscape,
    "ms_rank2_dist": run_ms_rank2_distance,
    "assumptions": run_verification,
    "regions_ms": run_verification,
    "regions_pr": run_verification,
    "rip": run_verification,
}


def run(config: ExperimentConfig) -> ExperimentOutcome:
    return RUNNERS[config.experiment](config)
