"""Observability studies: representative vector first, then K design vectors.

Part I builds one representative design observation vector from the T-point
one-dimensional sample set, maximizes the log-posterior from the true
values, and validates the maximum.  Part II repeats this for K design
observation vectors built from the rows of the (T, K) sample matrix and
aggregates estimator statistics over the runs that pass all checks.  A model
is judged observable when at least one run anywhere passes; zero passing
runs across both parts means not observable.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .models import ModelSpec
from .optimize import CheckReport, MaxResult, OptConfig, check_maximum, maximize
from .posterior import PosteriorContext
from .samples import LcdConfig, design_disturbance_matrix, representative_disturbances

__all__ = [
    "StudyConfig",
    "RunRecord",
    "PartIResult",
    "PartIIResult",
    "StudyReport",
    "OBSERVABLE",
    "NOT_OBSERVABLE",
    "make_design_observations",
    "run_part1",
    "run_part2",
    "run_study",
    "report_to_json",
    "report_from_json",
    "plot_csv",
    "render_report",
]

OBSERVABLE = "OBSERVABLE"
NOT_OBSERVABLE = "NOT_OBSERVABLE"


@dataclass(frozen=True)
class StudyConfig:
    model: ModelSpec
    T_list: tuple[int, ...] = (4, 12, 20)
    K: int = 2000
    lcd: LcdConfig = field(default_factory=LcdConfig)
    opt: OptConfig = field(default_factory=OptConfig)
    threads: int = 1
    cache_dir: str | None = None
    random_baseline: bool = False

    def __post_init__(self):
        if not self.T_list:
            raise ValueError("T_list must not be empty")
        if any(t < 1 for t in self.T_list):
            raise ValueError("every horizon must be >= 1")
        if self.K < 2:
            raise ValueError("K must be >= 2")


@dataclass(frozen=True)
class RunRecord:
    """One Part II maximization."""

    k: int
    estimates: dict[str, float] | None
    passed: bool
    reason: str | None
    converged: bool
    grad_inf_norm: float
    checks: CheckReport | None
    local_variances: dict[str, float] | None


@dataclass(frozen=True)
class PartIResult:
    horizon: int
    z_rep: np.ndarray
    max_result: MaxResult
    check_report: CheckReport
    local_variances: dict[str, float] | None

    @property
    def passed(self) -> bool:
        # the four checks decide validity; the optimizer's tighter internal
        # gradient target stays a diagnostic
        return self.check_report.passed


@dataclass(frozen=True)
class PartIIResult:
    horizon: int
    records: tuple[RunRecord, ...]
    n_passed: int
    n_failed: int
    empirical_mean: dict[str, float] | None
    empirical_variance: dict[str, float] | None
    mean_local_variance: dict[str, float] | None
    median_grad_inf_norm: float | None


@dataclass(frozen=True)
class StudyReport:
    model: ModelSpec
    T_list: tuple[int, ...]
    K: int
    seed: int
    verdict: str
    part1: tuple[PartIResult, ...]
    part2: tuple[PartIIResult, ...]
    consistency: dict[str, dict[str, bool]]
    baseline: tuple[PartIIResult, ...] | None = None

    @property
    def n_passing_total(self) -> int:
        return sum(1 for p in self.part1 if p.passed) + sum(p.n_passed for p in self.part2)


def make_design_observations(model: ModelSpec, disturbances: np.ndarray) -> np.ndarray:
    """Push disturbance values through the model at the true parameters:
    z = m(omega*) + s(omega*) * eps, elementwise."""
    omega = model.true_vector()
    m, s = model.mean_scale(omega)
    return m + s * np.asarray(disturbances, dtype=float)


def _lvar_dict(model: ModelSpec, check: CheckReport) -> dict[str, float] | None:
    if check.local_variances is None:
        return None
    return {name: float(v) for name, v in zip(model.param_names, check.local_variances)}


def run_part1(model: ModelSpec, horizon: int, cfg: StudyConfig) -> PartIResult:
    """Maximize against the representative design observation vector."""
    eps = representative_disturbances(horizon, cfg.lcd)
    z_rep = make_design_observations(model, eps)
    ctx = PosteriorContext(model, z_rep)
    result = maximize(ctx, model.true_vector(), cfg.opt)
    check = check_maximum(ctx, result, cfg.opt)
    return PartIResult(
        horizon=horizon,
        z_rep=z_rep,
        max_result=result,
        check_report=check,
        local_variances=_lvar_dict(model, check),
    )


def _run_single(model: ModelSpec, z: np.ndarray, cfg: StudyConfig, k: int) -> RunRecord:
    ctx = PosteriorContext(model, z)
    try:
        result = maximize(ctx, model.true_vector(), cfg.opt)
    except ValueError as exc:  # infeasible starting point for this realization
        return RunRecord(
            k=k, estimates=None, passed=False, reason=f"infeasible start: {exc}",
            converged=False, grad_inf_norm=float("nan"), checks=None, local_variances=None,
        )
    check = check_maximum(ctx, result, cfg.opt)
    passed = check.passed
    reason = None
    if not passed:
        failed = [
            name
            for name, ok in (
                ("gradient", check.grad_ok),
                ("hessian_pd", check.hessian_pd),
                ("eig_ratio", check.eig_ratio_ok),
                ("local_variance", check.lvar_finite),
            )
            if not ok
        ]
        reason = "checks failed: " + ",".join(failed)
        if not result.converged:
            reason += " (optimizer did not converge)"
    return RunRecord(
        k=k,
        estimates=result.estimates,
        passed=passed,
        reason=reason,
        converged=result.converged,
        grad_inf_norm=result.grad_inf_norm,
        checks=check,
        local_variances=_lvar_dict(model, check),
    )


def _aggregate(model: ModelSpec, horizon: int, records: list[RunRecord]) -> PartIIResult:
    names = model.param_names
    passing = [r for r in records if r.passed]
    n_passed = len(passing)
    mean = variance = mean_lvar = None
    median_grad = None
    if n_passed >= 1:
        est = np.array([[r.estimates[n] for n in names] for r in passing])
        mean = {n: float(v) for n, v in zip(names, est.mean(axis=0))}
        if n_passed >= 2:
            mu = est.mean(axis=0)
            var = np.sum((est - mu) ** 2, axis=0) / (n_passed - 1)
            variance = {n: float(v) for n, v in zip(names, var)}
        lvar = np.array([[r.local_variances[n] for n in names] for r in passing])
        mean_lvar = {n: float(v) for n, v in zip(names, lvar.mean(axis=0))}
        median_grad = float(np.median([r.grad_inf_norm for r in passing]))
    return PartIIResult(
        horizon=horizon,
        records=tuple(records),
        n_passed=n_passed,
        n_failed=len(records) - n_passed,
        empirical_mean=mean,
        empirical_variance=variance,
        mean_local_variance=mean_lvar,
        median_grad_inf_norm=median_grad,
    )


def run_part2(model: ModelSpec, horizon: int, count: int, cfg: StudyConfig) -> PartIIResult:
    """Maximize against K design observation vectors and aggregate statistics.

    Individual failures (non-convergence, failed checks, estimator undefined
    for a realization) are tallied, never fatal.  Aggregation order is fixed
    by k, so reports are identical across thread counts.
    """
    eps = design_disturbance_matrix(horizon, count, cfg.lcd, cache_dir=cfg.cache_dir)
    observations = make_design_observations(model, eps)
    records = _run_batch(model, observations, cfg)
    return _aggregate(model, horizon, records)


def _run_batch(model: ModelSpec, observations: np.ndarray, cfg: StudyConfig) -> list[RunRecord]:
    ks = range(observations.shape[0])
    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            records = list(
                pool.map(lambda k: _run_single(model, observations[k], cfg, k), ks)
            )
    else:
        records = [_run_single(model, observations[k], cfg, k) for k in ks]
    return records


def _baseline_part2(model: ModelSpec, horizon: int, cfg: StudyConfig) -> PartIIResult:
    # optional comparison against plain random observation vectors
    rng = np.random.default_rng([cfg.lcd.seed, 0xBA5E, horizon, cfg.K])
    eps = rng.standard_normal((cfg.K, horizon))
    observations = make_design_observations(model, eps)
    records = _run_batch(model, observations, cfg)
    return _aggregate(model, horizon, records)


def run_study(cfg: StudyConfig) -> StudyReport:
    """Run Part I and Part II for every horizon and assemble the verdict."""
    part1 = []
    part2 = []
    baseline = [] if cfg.random_baseline else None
    for horizon in cfg.T_list:
        part1.append(run_part1(cfg.model, horizon, cfg))
        part2.append(run_part2(cfg.model, horizon, cfg.K, cfg))
        if baseline is not None:
            baseline.append(_baseline_part2(cfg.model, horizon, cfg))
    n_passing = sum(1 for p in part1 if p.passed) + sum(p.n_passed for p in part2)
    verdict = OBSERVABLE if n_passing > 0 else NOT_OBSERVABLE
    return StudyReport(
        model=cfg.model,
        T_list=tuple(cfg.T_list),
        K=cfg.K,
        seed=cfg.lcd.seed,
        verdict=verdict,
        part1=tuple(part1),
        part2=tuple(part2),
        consistency=_consistency_trend(cfg.model, part2),
        baseline=tuple(baseline) if baseline is not None else None,
    )


def _consistency_trend(model: ModelSpec, part2: list[PartIIResult]) -> dict[str, dict[str, bool]]:
    """Non-increasing empirical variance and mean local variance over T,
    reported as flags (a consistent estimator should show both)."""
    out: dict[str, dict[str, bool]] = {"empirical_variance": {}, "mean_local_variance": {}}
    for key, getter in (
        ("empirical_variance", lambda p: p.empirical_variance),
        ("mean_local_variance", lambda p: p.mean_local_variance),
    ):
        for name in model.param_names:
            series = [getter(p)[name] for p in part2 if getter(p) is not None]
            out[key][name] = bool(
                len(series) >= 2
                and all(b <= a * (1.0 + 1e-9) for a, b in zip(series, series[1:]))
            )
    return out


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def _check_dict(check: CheckReport | None) -> dict | None:
    if check is None:
        return None
    return {
        "grad_ok": check.grad_ok,
        "hessian_pd": check.hessian_pd,
        "eig_ratio_ok": check.eig_ratio_ok,
        "lvar_finite": check.lvar_finite,
        "grad_inf_norm": check.grad_inf_norm,
        "eig_ratio": None if not np.isfinite(check.eig_ratio) else check.eig_ratio,
        "passed": check.passed,
        "note": check.note,
    }


def _part2_dict(model: ModelSpec, p: PartIIResult) -> dict:
    names = model.param_names
    return {
        "T": p.horizon,
        "n_runs": len(p.records),
        "n_passed": p.n_passed,
        "n_failed": p.n_failed,
        "empirical_mean": p.empirical_mean,
        "empirical_variance": p.empirical_variance,
        "mean_local_variance": p.mean_local_variance,
        "median_grad_inf_norm": p.median_grad_inf_norm,
        "estimates": {
            n: [None if r.estimates is None else r.estimates[n] for r in p.records]
            for n in names
        },
        "passed_flags": [r.passed for r in p.records],
        "failure_reasons": sorted({r.reason for r in p.records if r.reason is not None}),
    }


def report_to_dict(report: StudyReport) -> dict:
    model = report.model
    return {
        "schema": "obscheck-report/1",
        "model": model.to_dict(),
        "T_list": list(report.T_list),
        "K": report.K,
        "seed": report.seed,
        "verdict": report.verdict,
        "n_passing_total": report.n_passing_total,
        "part1": [
            {
                "T": p.horizon,
                "z_rep": [float(v) for v in p.z_rep],
                "estimate": p.max_result.estimates,
                "converged": p.max_result.converged,
                "iterations": p.max_result.iterations,
                "grad_inf_norm": p.max_result.grad_inf_norm,
                "checks": _check_dict(p.check_report),
                "local_variance": p.local_variances,
                "passed": p.passed,
            }
            for p in report.part1
        ],
        "part2": [_part2_dict(model, p) for p in report.part2],
        "consistency": report.consistency,
        "random_baseline": (
            None if report.baseline is None
            else [_part2_dict(model, p) for p in report.baseline]
        ),
    }


def report_to_json(report: StudyReport) -> str:
    return json.dumps(report_to_dict(report), sort_keys=True, indent=2) + "\n"


def report_from_json(text: str) -> dict:
    data = json.loads(text)
    if data.get("schema") != "obscheck-report/1":
        raise ValueError("not an obscheck report file")
    return data


def plot_csv(report: StudyReport) -> str:
    """Per-run estimates as a ``k,param,estimate`` stream, one commented
    section per horizon, for external plotting."""
    lines = ["k,param,estimate"]
    for p in report.part2:
        lines.append(f"# T={p.horizon}")
        for r in p.records:
            if r.estimates is None:
                continue
            for name in report.model.param_names:
                lines.append(f"{r.k},{name},{r.estimates[name]:.17g}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Text rendering
# ---------------------------------------------------------------------------


def _fmt(value, width: int = 12) -> str:
    if value is None:
        return " " * (width - 1) + "-"
    return f"{value:>{width}.6g}"


def render_report(data: dict) -> str:
    """Aligned text tables for a report dictionary (see :func:`report_to_dict`)."""
    names = [p["name"] for p in data["model"]["parameters"]]
    lines = []
    lines.append(f"model: {data['model'].get('name', '?')}")
    lines.append(f"verdict: {data['verdict']}  (passing runs: {data['n_passing_total']})")
    lines.append("")
    lines.append("Part I (representative design observation vector)")
    header = f"{'T':>4} " + " ".join(f"{n + '_hat':>12}" for n in names)
    header += " " + " ".join(f"{'LVar(' + n + ')':>12}" for n in names) + f" {'passed':>7}"
    lines.append(header)
    for p in data["part1"]:
        est = p["estimate"] or {}
        lv = p["local_variance"] or {}
        row = f"{p['T']:>4} " + " ".join(_fmt(est.get(n)) for n in names)
        row += " " + " ".join(_fmt(lv.get(n)) for n in names)
        row += f" {str(bool(p['passed'])):>7}"
        lines.append(row)
    lines.append("")
    lines.append("Part II (K design observation vectors)")
    header = f"{'T':>4} {'passed/K':>10} "
    header += " ".join(f"{'mean(' + n + ')':>12}" for n in names) + " "
    header += " ".join(f"{'var(' + n + ')':>12}" for n in names) + " "
    header += " ".join(f"{'mLVar(' + n + ')':>12}" for n in names)
    lines.append(header)
    for p in data["part2"]:
        if p["n_passed"] == 0:
            lines.append(f"{p['T']:>4} {'0 passing runs':>24}")
            continue
        mean = p["empirical_mean"] or {}
        var = p["empirical_variance"] or {}
        mlv = p["mean_local_variance"] or {}
        row = f"{p['T']:>4} {str(p['n_passed']) + '/' + str(p['n_runs']):>10} "
        row += " ".join(_fmt(mean.get(n)) for n in names) + " "
        row += " ".join(_fmt(var.get(n)) for n in names) + " "
        row += " ".join(_fmt(mlv.get(n)) for n in names)
        lines.append(row)
    reasons = sorted({r for p in data["part2"] for r in p.get("failure_reasons", [])})
    if reasons:
        lines.append("")
        lines.append("failure reasons seen: " + "; ".join(reasons))
    return "\n".join(lines) + "\n"


def write_atomic(path: str | Path, text: str) -> None:
    """Write via a sibling temp file and rename, so readers never see a
    partial file."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    tmp.replace(path)
