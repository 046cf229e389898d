"""End-to-end experiment pipelines and batch suites.

A run goes model → (covariance) → field → peaks → dimension or bound
estimates, once per replicate, then aggregates and checks the declared
targets.  Replicates are independent draws keyed by ``(seed, replicate)``,
so the numeric payload does not depend on the number of worker threads.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional

import numpy as np

from . import __version__, io
from .bounds import (
    borell_tis_bound,
    calibrate_lopes,
    estimate_mu,
    lopes_bound,
    lopes_constants,
    lower_tail_table,
    sample_cube_maxima,
    tail_frequency,
)
from .config import ExperimentConfig, Target, load_config
from .covariance import SelfSimilarHeatTable
from .dimension import (
    covering_series,
    estimate_dim_bisection,
    shell_counts,
    slope_from_counts,
    thickness_test,
)
from .errors import ConfigError, InsufficientShells, MacropeaksError
from .fieldgen import CholeskySampler, CirculantSampler, Correlation, FieldSample
from .geometry import exp_n, skeleton_points
from .peaks import GaugeParams, extract_spacetime_peaks, extract_spatial_peaks
from .spectral import CorrelationModel, Riesz

__all__ = [
    "ExperimentRecord",
    "SuiteSummary",
    "run_experiment",
    "run_suite",
    "spatial_lattice",
    "spacetime_points",
    "EXIT_OK",
    "EXIT_CONFIG",
    "EXIT_NUMERIC",
    "EXIT_ACCEPTANCE",
]

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_ACCEPTANCE = 0, 2, 3, 4


@dataclass
class ExperimentRecord:
    """Everything a run produced.

    :meth:`payload` holds the deterministic numeric content; the remaining
    fields (tool version, wall-clock, artifact paths) are run metadata.
    """

    name: str
    config: dict
    replicates: list
    aggregates: dict
    targets: list
    passed: bool
    warnings: list = field(default_factory=list)
    version: str = __version__
    wall_clock: float = 0.0
    artifacts: list = field(default_factory=list)

    def payload(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "config": self.config,
            "replicates": self.replicates,
            "aggregates": self.aggregates,
            "targets": self.targets,
            "passed": self.passed,
            "warnings": self.warnings,
        }

    def as_dict(self) -> dict[str, Any]:
        meta = {"version": self.version, "wall_clock": self.wall_clock, "artifacts": self.artifacts}
        return {"payload": self.payload(), "meta": meta}


# ---------------------------------------------------------------------------
# helpers


def _mean_stderr(values) -> dict[str, Any]:
    vals = [float(v) for v in values if v is not None and math.isfinite(v)]
    n = len(vals)
    if n == 0:
        return {"mean": math.nan, "stderr": math.nan, "n": 0}
    mean = math.fsum(vals) / n
    sd = math.sqrt(math.fsum((v - mean) ** 2 for v in vals) / (n - 1)) if n > 1 else 0.0
    return {"mean": mean, "stderr": sd / math.sqrt(n), "n": n}


def _fractions(labels) -> dict[str, Any]:
    labels = list(labels)
    counts: dict[str, int] = {}
    for lab in labels:
        counts[lab] = counts.get(lab, 0) + 1
    return {"fractions": {k: v / len(labels) for k, v in sorted(counts.items())}, "n": len(labels)}


def _field_correlation(model: CorrelationModel) -> Correlation:
    """Unit-variance correlation for the field; white noise gives i.i.d. values."""
    if model.is_function:
        return model

    def white(r):
        return (np.asarray(r, dtype=float) == 0).astype(float)

    white.__name__ = model.label
    return white


def _map(fn: Callable[[int], dict], count: int, threads: int) -> list[dict]:
    if threads <= 1 or count <= 1:
        return [fn(r) for r in range(count)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(count)))


def _n_range(cfg: ExperimentConfig) -> tuple[int, int]:
    if cfg.estimator.n_range is not None:
        return int(cfg.estimator.n_range[0]), int(cfg.estimator.n_range[1])
    return cfg.lattice.n_min, cfg.lattice.n_max


def _check_target(target: Target, aggregates: dict, replicates: list) -> dict[str, Any]:
    agg = aggregates.get(target.metric)
    out = target.model_dump(exclude_none=True)
    if agg is None:
        out.update(passed=False, observed=None, reason="metric not produced")
        return out
    if target.metric.endswith(":bracket"):
        hits = [
            r[target.metric]["lower"] is not None
            and r[target.metric]["upper"] is not None
            and r[target.metric]["lower"] - target.tol <= target.value <= r[target.metric]["upper"] + target.tol
            for r in replicates
        ]
        frac = sum(hits) / len(hits)
        out.update(observed=frac, passed=frac >= target.min_fraction)
    elif target.expect is not None:
        frac = agg["fractions"].get(target.expect, 0.0)
        out.update(observed=frac, passed=frac >= target.min_fraction)
    elif target.max is not None:
        out.update(observed=agg["mean"], passed=bool(agg["mean"] <= target.max))
    else:
        obs = agg["mean"]
        out.update(observed=obs, passed=bool(math.isfinite(obs) and abs(obs - target.value) <= target.tol))
    return out


# ---------------------------------------------------------------------------
# spatial peaks


def spatial_lattice(cfg: ExperimentConfig) -> tuple[int, float, float]:
    """``(n_points, spacing, origin)`` of the 1-D lattice covering ``[e, e^{n_max}]``.

    When thickness is requested the lattice also covers the skeleton cubes
    of the last shell, which reach ``2e^{n_max} + e^{θ n_max}``.
    """
    h = cfg.lattice.spacing
    top = exp_n(cfg.lattice.n_max)
    if "thickness" in cfg.estimator.methods and cfg.estimator.theta:
        theta = max(cfg.estimator.theta)
        top = 2.0 * exp_n(cfg.lattice.n_max) + math.exp(theta * cfg.lattice.n_max)
    origin = h * math.ceil(math.e / h)
    n_points = int(math.floor((top - origin) / h)) + 1
    return n_points, h, origin


def _spatial_sampler(cfg: ExperimentConfig):
    model = cfg.correlation.build()
    corr = _field_correlation(model)
    if cfg.lattice.generator == "circulant":
        if model.d != 1:
            raise ConfigError("lattice.generator", "circulant embedding is for d = 1 only")
        n_points, h, origin = spatial_lattice(cfg)
        sampler = CirculantSampler(corr, n_points, h, origin)
        return sampler.draw, model
    if cfg.lattice.delta is None:
        raise ConfigError("lattice.delta", "the Cholesky generator samples skeleton points and needs delta")
    pts = np.vstack(
        [skeleton_points(n, cfg.lattice.delta, model.d) for n in range(cfg.lattice.n_min, cfg.lattice.n_max + 1)]
    )
    sampler = CholeskySampler(corr, pts)
    return sampler.draw, model


def _spatial_replicate(cfg: ExperimentConfig, draw, d: int, replicate: int) -> dict[str, Any]:
    fld: FieldSample = draw(cfg.replication.seed, replicate)
    est = cfg.estimator
    n_lo, n_hi = _n_range(cfg)
    out: dict[str, Any] = {"replicate": replicate, "n_points": int(fld.points.shape[0])}
    for gamma in cfg.gauge.gamma:
        peaks = extract_spatial_peaks(fld, GaugeParams(gamma))
        key = f"gamma={gamma:g}"
        out[f"{key}:n_peaks"] = len(peaks)
        if "counting" in est.methods:
            counts = shell_counts(peaks.points, n_lo, n_hi)
            out[f"{key}:counts"] = counts.tolist()
            try:
                out[f"{key}:counting"] = slope_from_counts(np.arange(n_lo, n_hi + 1), counts, d).value
            except InsufficientShells:
                out[f"{key}:counting"] = None
        if "bisection" in est.methods:
            try:
                out[f"{key}:bisection"] = estimate_dim_bisection(peaks.points, est.n_max, est.tolerance, d).value
            except InsufficientShells:
                out[f"{key}:bisection"] = None
        if "covering" in est.methods:
            for rho in est.rho:
                res = covering_series(peaks.points, rho, est.n_max, est.threshold)
                out[f"{key}:covering:rho={rho:g}"] = {"trend": res.trend, "slope": res.slope}
        if "thickness" in est.methods:
            for theta in est.theta:
                rep = thickness_test(peaks.points, theta, (n_lo, n_hi))
                full_from = n_hi - est.min_full_shells + 1
                ok = rep.first_full is not None and rep.first_full <= full_from
                out[f"{key}:thickness:theta={theta:g}"] = {
                    "first_full": rep.first_full,
                    "occupancy": list(rep.occupancy),
                    "outcome": "certified" if ok else "not-certified",
                }
    return out


def _aggregate(cfg: ExperimentConfig, reps: list[dict], d: int) -> dict[str, Any]:
    agg: dict[str, Any] = {}
    n_lo, n_hi = _n_range(cfg)
    for key in reps[0]:
        if key in ("replicate", "n_points") or key.endswith(":counts"):
            continue
        vals = [r[key] for r in reps]
        if isinstance(vals[0], dict):
            label = "trend" if "trend" in vals[0] else "outcome"
            agg[key] = _fractions(v[label] for v in vals)
        else:
            agg[key] = _mean_stderr(vals)
        if key.endswith(":counting"):
            pooled = np.mean([r[key.replace(":counting", ":counts")] for r in reps], axis=0)
            try:
                agg[key.replace(":counting", ":counting_pooled")] = {
                    "mean": slope_from_counts(np.arange(n_lo, n_hi + 1), pooled, d).value,
                    "mean_counts": pooled.tolist(),
                }
            except InsufficientShells:
                agg[key.replace(":counting", ":counting_pooled")] = {"mean": math.nan}
    return agg


def _run_spatial(cfg: ExperimentConfig, threads: int) -> tuple[list, dict]:
    draw, model = _spatial_sampler(cfg)
    reps = _map(lambda r: _spatial_replicate(cfg, draw, model.d, r), cfg.replication.replicates, threads)
    return reps, _aggregate(cfg, reps, model.d)


# ---------------------------------------------------------------------------
# space-time peaks


def spacetime_points(n_min: int, n_max: int, delta: float) -> tuple[np.ndarray, np.ndarray]:
    """Skeleton points ``𝓘_n(δ)`` of the stretched plane ``(T, x)`` and their ``n``."""
    blocks = [skeleton_points(n, delta, 2) for n in range(n_min, n_max + 1)]
    tags = np.concatenate([np.full(b.shape[0], n) for n, b in zip(range(n_min, n_max + 1), blocks)])
    return np.vstack(blocks), tags


def _spacetime_sampler(cfg: ExperimentConfig):
    spec = cfg.equation_spec()
    if spec.d != 1 or not isinstance(spec.model, Riesz) or spec.equation.kind != "heat":
        raise ConfigError("correlation.kind", "space-time experiments support the d = 1 heat equation with a Riesz kernel")
    if cfg.lattice.delta is None:
        raise ConfigError("lattice.delta", "space-time experiments need the skeleton parameter delta")
    g = cfg.gauge.build_stretch()
    stretched, tags = spacetime_points(cfg.lattice.n_min, cfg.lattice.n_max, cfg.lattice.delta)
    times = np.asarray(g.inverse(np.log(stretched[:, 0])), dtype=float)
    if np.any(~np.isfinite(times)) or np.any(times <= 0):
        raise ConfigError("gauge.stretch", "stretch factor cannot be inverted on the sampled range")
    pos = stretched[:, 1]
    scale = times.min() ** (1.0 / spec.alpha)
    table = SelfSimilarHeatTable(spec, times.max() / times.min() * 1.001, (pos.max() - pos.min()) / scale * 1.001)
    physical = np.column_stack([times, pos])
    sampler = CholeskySampler.from_covariance(table.matrix(times, pos), physical, f"heat:{spec.model.label}")
    return sampler, table, g, stretched, tags


def _spacetime_replicate(cfg, sampler, table, g, stretched, tags, replicate: int) -> dict[str, Any]:
    fld = sampler.draw(cfg.replication.seed, replicate)
    ns = list(range(cfg.lattice.n_min, cfg.lattice.n_max + 1))
    delta = cfg.lattice.delta
    out: dict[str, Any] = {"replicate": replicate, "n_points": int(fld.points.shape[0])}
    for gamma in cfg.gauge.gamma:
        key = f"gamma={gamma:g}"
        peaks = extract_spacetime_peaks(fld, gamma, table.variance, g)
        thr = np.sqrt(2.0 * gamma * table.variance(fld.points[:, 0]) * g.forward(fld.points[:, 0]))
        hit = fld.values >= thr
        # hit fraction times the area of the sampled window estimates the unit-cube count
        est_counts = []
        for n in ns:
            mask = tags == n
            side = stretched[mask, 0].max() - stretched[mask, 0].min() + math.exp(n * delta)
            est_counts.append(hit[mask].mean() * side**2)
        try:
            upper = slope_from_counts(ns, est_counts, 2).value
        except InsufficientShells:
            upper = None
        lower, certified_theta = None, None
        for theta in sorted(cfg.estimator.theta):
            rep = thickness_test(peaks.points, theta, ns)
            if rep.first_full is not None and rep.first_full <= ns[-1] - cfg.estimator.min_full_shells + 1:
                lower, certified_theta = rep.certified_lower_bound, theta
                break
        out[f"{key}:hits"] = [int(hit[tags == n].sum()) for n in ns]
        out[f"{key}:upper"] = upper
        out[f"{key}:lower"] = lower
        out[f"{key}:bracket"] = {"lower": lower, "upper": upper, "theta": certified_theta}
    return out


def _run_spacetime(cfg: ExperimentConfig, threads: int) -> tuple[list, dict]:
    sampler, table, g, stretched, tags = _spacetime_sampler(cfg)
    reps = _map(
        lambda r: _spacetime_replicate(cfg, sampler, table, g, stretched, tags, r), cfg.replication.replicates, threads
    )
    agg: dict[str, Any] = {}
    for gamma in cfg.gauge.gamma:
        key = f"gamma={gamma:g}"
        agg[f"{key}:upper"] = _mean_stderr(r[f"{key}:upper"] for r in reps)
        agg[f"{key}:lower"] = _mean_stderr(r[f"{key}:lower"] for r in reps)
        agg[f"{key}:bracket"] = _fractions(
            "determined" if r[f"{key}:lower"] is not None and r[f"{key}:upper"] is not None else "undetermined"
            for r in reps
        )
        agg[f"{key}:hits_total"] = np.sum([r[f"{key}:hits"] for r in reps], axis=0).tolist()
    return reps, agg


# ---------------------------------------------------------------------------
# bounds


def _run_borell(cfg: ExperimentConfig, threads: int) -> tuple[list, dict]:
    model = cfg.correlation.build()
    corr = _field_correlation(model)
    anchor = [cfg.lattice.anchor] * model.d
    n = cfg.replication.replicates
    seed = cfg.replication.seed
    params = estimate_mu(corr, anchor, cfg.lattice.mesh, n, seed)
    # tail frequencies come from an independent set of maxima
    maxima = sample_cube_maxima(corr, anchor, cfg.lattice.mesh, n, seed + 1)
    mu_up = params.mu + 3.0 * params.stderr
    rows = []
    for step in (1.0, 2.0, 3.0):
        x = params.mu + step
        freq, se = tail_frequency(maxima, x)
        bound = borell_tis_bound(x, mu_up)
        rows.append(
            {"x": x, "frequency": freq, "stderr": se, "bound": bound, "dominated": bool(freq <= bound + 3.0 * se)}
        )
    agg = {
        "borell:mu": {"mean": params.mu, "stderr": params.stderr, "n": n},
        "borell:dominated": _fractions("dominated" if r["dominated"] else "exceeded" for r in rows),
    }
    return rows, agg


def _run_lopes(cfg: ExperimentConfig, threads: int) -> tuple[list, dict]:
    block = cfg.lopes
    rho0, gamma0 = float(block["rho0"]), float(block["gamma0"])
    ns = [int(v) for v in block["ns"]]
    n_rep = cfg.replication.replicates
    table = lower_tail_table(ns, rho0, gamma0, n_rep, cfg.replication.seed)
    params = lopes_constants(rho0, gamma0)
    base = table[0]
    const = calibrate_lopes(ns[0], base.probability, params) if base.probability > 0 else math.nan
    rows, mono, dom = [], [], []
    for i, est in enumerate(table):
        bound = const * lopes_bound(est.n, params)
        # the calibrated bound inherits the sampling error of the n0 estimate
        rel = bound / base.probability if base.probability > 0 else math.nan
        slack = 3.0 * math.hypot(est.stderr, base.stderr * rel)
        dominated = bool(est.probability <= bound + slack)
        if i:
            prev = table[i - 1]
            mono.append(est.probability <= prev.probability + 3.0 * math.hypot(est.stderr, prev.stderr))
        dom.append(dominated)
        rows.append({"n": est.n, "probability": est.probability, "stderr": est.stderr, "bound": bound, "dominated": dominated})
    agg = {
        "lopes:C": {"mean": const},
        "lopes:dominated": _fractions("dominated" if v else "exceeded" for v in dom),
        "lopes:monotone": _fractions("monotone" if v else "increase" for v in mono),
    }
    return rows, agg


_RUNNERS = {"spatial": _run_spatial, "spacetime": _run_spacetime, "borell": _run_borell, "lopes": _run_lopes}


def _write_artifacts(record: ExperimentRecord, out_dir: Path) -> list[str]:
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    scalar_keys = sorted({k for r in record.replicates for k, v in r.items() if isinstance(v, (int, float)) or v is None})
    if scalar_keys:
        rows = [[r.get(k) for k in scalar_keys] for r in record.replicates]
        paths.append(str(io.write_csv(out_dir / f"{record.name}_replicates.csv", scalar_keys, rows)))
    paths.append(str(out_dir / f"{record.name}.json"))
    record.artifacts = paths
    io.write_json(paths[-1], record.as_dict())
    return paths


def run_experiment(cfg, threads: int = 1, out_dir: Optional[str] = None, seed: Optional[int] = None) -> ExperimentRecord:
    """Run one configured experiment.

    Parameters
    ----------
    cfg : ExperimentConfig or path
        Parsed config or a TOML/JSON file.
    threads : int
        Worker threads for the replicate loop; results do not depend on it.
    out_dir : str, optional
        Directory for CSV/JSON artifacts; overrides ``output.dir``.
    seed : int, optional
        Overrides ``replication.seed``.
    """
    if not isinstance(cfg, ExperimentConfig):
        cfg = load_config(cfg)
    if seed is not None:
        cfg = cfg.model_copy(update={"replication": cfg.replication.model_copy(update={"seed": int(seed)})})
    start = time.perf_counter()
    reps, agg = _RUNNERS[cfg.kind](cfg, max(1, int(threads)))
    targets = [_check_target(t, agg, reps) for t in cfg.targets]
    record = ExperimentRecord(
        name=cfg.name,
        config=cfg.model_dump(mode="json"),
        replicates=io._to_jsonable(reps),
        aggregates=io._to_jsonable(agg),
        targets=io._to_jsonable(targets),
        passed=all(t["passed"] for t in targets),
        warnings=cfg.warnings(),
    )
    record.wall_clock = time.perf_counter() - start
    target_dir = out_dir or cfg.output.dir
    if target_dir:
        _write_artifacts(record, Path(target_dir))
    return record


# ---------------------------------------------------------------------------
# suites


@dataclass
class SuiteSummary:
    rows: list
    records: dict

    @property
    def exit_code(self) -> int:
        return max((r["exit_code"] for r in self.rows), default=EXIT_OK)

    def to_csv(self, path) -> Path:
        header = ["config", "status", "exit_code", "detail"]
        return io.write_csv(path, header, [[r[h] for h in header] for r in self.rows])


def run_suite(directory, threads: int = 1, out_dir: Optional[str] = None, seed: Optional[int] = None) -> SuiteSummary:
    """Run every ``*.toml`` and ``*.json`` config in ``directory``.

    Failures are recorded per config; the summary exit code is the most
    severe one seen (config error 2, numeric failure 3, unmet target 4).
    """
    directory = Path(directory)
    files = sorted(p for p in directory.iterdir() if p.suffix in (".toml", ".json"))
    rows, records = [], {}
    for path in files:
        sub = str(Path(out_dir) / path.stem) if out_dir else None
        try:
            rec = run_experiment(path, threads, sub, seed)
        except ConfigError as exc:
            rows.append({"config": path.name, "status": "config-error", "exit_code": EXIT_CONFIG, "detail": str(exc)})
            continue
        except (MacropeaksError, ArithmeticError, np.linalg.LinAlgError) as exc:
            rows.append({"config": path.name, "status": "numeric-error", "exit_code": EXIT_NUMERIC, "detail": str(exc)})
            continue
        records[path.name] = rec
        failed = [t["metric"] for t in rec.targets if not t["passed"]]
        rows.append(
            {
                "config": path.name,
                "status": "failed" if failed else "passed",
                "exit_code": EXIT_ACCEPTANCE if failed else EXIT_OK,
                "detail": ";".join(failed),
            }
        )
    summary = SuiteSummary(rows, records)
    if out_dir:
        summary.to_csv(Path(out_dir) / "summary.csv")
    return summary
