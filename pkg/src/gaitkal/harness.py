"""Two-phase evaluation: calibrate on one walk set, sweep methods on another.

Every method sees the same test walk for a given seed (paired design), and
results are ordered by ``(method, model, pct, seed)`` regardless of how the
trials were scheduled, so reports are byte-reproducible.
"""

from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .config import PipelineConfig, save_config
from .errors import ConfigError
from .fusion import prepare_walk, run_prepared
from .imu_core import WalkRecord
from .shs import ShsConfig, run_shs
from .stepper import FsmThresholds, calibrate_scarlet_k, calibrate_thresholds
from .velmodel import calibrate_model_k

log = logging.getLogger(__name__)

NO_MODEL = "none"


@dataclass(frozen=True)
class TrialResult:
    method: str
    model: str
    pct: float
    seed: int
    endpoint_error: float
    true_distance: float
    estimate: float = float("nan")
    rms_error: float = float("nan")

    def __post_init__(self) -> None:
        if not self.endpoint_error >= 0:
            raise ValueError("endpoint_error must be non-negative")

    @property
    def key(self) -> tuple:
        return (self.method, self.model, self.pct, self.seed)


def endpoint_error(estimated_p_final: float, truth_p_final: float) -> float:
    return abs(float(estimated_p_final) - float(truth_p_final))


@dataclass(frozen=True)
class Calibration:
    thresholds: FsmThresholds
    scarlet_K: float
    models: dict


@dataclass(frozen=True, eq=False)
class SweepReport:
    trials: tuple[TrialResult, ...]
    pcts: tuple[float, ...]
    calibration: Calibration | None = None
    config: PipelineConfig | None = None
    n_calibration: int = 0
    meta: dict = field(default_factory=dict)

    def series(self, method: str, model: str, pct: float) -> dict[int, float]:
        """``seed -> endpoint_error`` for one grid cell."""
        return {r.seed: r.endpoint_error for r in self.trials if (r.method, r.model, r.pct) == (method, model, pct)}

    def cells(self) -> list[tuple[str, str, float]]:
        return sorted({(r.method, r.model, r.pct) for r in self.trials})

    def summary(self) -> dict[tuple[str, str, float], dict]:
        """Mean and sample standard deviation (ddof=1) per grid cell."""
        out = {}
        for cell in self.cells():
            e = np.array(list(self.series(*cell).values()))
            out[cell] = {
                "n": int(e.size),
                "mean": float(e.mean()),
                "std": float(e.std(ddof=1)) if e.size >= 2 else float("nan"),
            }
        return out


def _true_distance(rec: WalkRecord) -> float:
    if rec.truth is not None:
        return float(rec.truth.true_p[-1] - rec.truth.true_p[0])
    if rec.declared_distance is None:
        raise ConfigError(f"walk {rec.label!r} has neither ground truth nor a declared distance")
    return float(rec.declared_distance)


def _walk_id(rec: WalkRecord):
    return rec.seed if rec.seed is not None else rec.label


def check_disjoint(cal_walks, test_walks) -> None:
    """Raise :class:`ConfigError` when a walk appears in both sets."""
    cal_ids = {("seed", r.seed) for r in cal_walks if r.seed is not None}
    cal_ids |= {("label", r.label) for r in cal_walks}
    cal_objs = {id(r.stream) for r in cal_walks}
    for r in test_walks:
        if ("label", r.label) in cal_ids or (r.seed is not None and ("seed", r.seed) in cal_ids) or id(r.stream) in cal_objs:
            raise ConfigError(f"walk {r.label!r} (seed {r.seed}) is in both calibration and test sets")


def calibrate(cal_walks, cfg: PipelineConfig) -> Calibration:
    """Thresholds, Scarlet K and one K per configured model, from ``cal_walks`` only."""
    cal_walks = list(cal_walks)
    if not cal_walks:
        raise ConfigError("calibration set is empty")
    thr = calibrate_thresholds(cal_walks)
    scarlet = calibrate_scarlet_k(cal_walks, thr)
    models = {}
    for tag in cfg.sweep.models:
        base = cfg.model(tag)
        k = calibrate_model_k(cal_walks, base, thr, cfg.filter, cfg.sweep.calibration_pct, "kalman")
        models[tag] = replace(base, K=k)
        log.info("calibrated %s K=%.5f", tag, k)
    return Calibration(thr, scarlet, models)


def _rms(est, truth) -> float:
    return float(np.sqrt(np.mean((np.asarray(est) - np.asarray(truth)) ** 2)))


def evaluate_walk(rec: WalkRecord, calib: Calibration, cfg: PipelineConfig, pcts, methods, models) -> list[TrialResult]:
    """All (method, model, pct) trials on one walk."""
    seed = int(_walk_id(rec)) if rec.seed is not None else -1
    dist = _true_distance(rec)
    truth_p = None if rec.truth is None else rec.truth.true_p - rec.truth.true_p[0]
    prep = prepare_walk(rec, calib.thresholds)
    out = []

    def ins_trial(method, tag, model, pct, mode):
        trace, _ = run_prepared(prep, model, cfg.filter, pct, mode)
        est = float(trace.p[-1] - trace.p[0])
        rms = _rms(trace.p - trace.p[0], truth_p) if truth_p is not None else float("nan")
        return TrialResult(method, tag, float(pct), seed, endpoint_error(est, dist), dist, est, rms)

    if "ins-raw" in methods:
        raw = ins_trial("ins-raw", NO_MODEL, None, 0.0, "kalman")
        out += [replace(raw, pct=float(p)) for p in pcts]
    if "shs" in methods:
        traj = run_shs(rec, ShsConfig(calib.thresholds, calib.scarlet_K))
        est = traj.total_distance
        rms = float("nan")
        if truth_p is not None and len(traj):
            ends = np.array([s.end_idx for s in traj.steps])
            rms = _rms(traj.x, truth_p[ends])
        out += [TrialResult("shs", NO_MODEL, float(p), seed, endpoint_error(est, dist), dist, est, rms) for p in pcts]
    for method, mode in (("ins-kalman", "kalman"), ("ins-naive", "naive")):
        if method not in methods:
            continue
        for tag in models:
            for p in pcts:
                out.append(ins_trial(method, tag, calib.models[tag], p, mode))
    return out


def _evaluate_job(args):
    return evaluate_walk(*args)


def run_two_phase_experiment(
    cal_walks,
    test_walks,
    sweep_pcts=None,
    cfg: PipelineConfig | None = None,
    jobs: int = 1,
) -> SweepReport:
    """Calibrate on ``cal_walks`` only, then evaluate every method on ``test_walks``."""
    cfg = cfg or PipelineConfig()
    cal_walks, test_walks = list(cal_walks), list(test_walks)
    if not cal_walks or not test_walks:
        raise ConfigError("calibration and test sets must both be non-empty")
    check_disjoint(cal_walks, test_walks)
    pcts = tuple(float(p) for p in (sweep_pcts if sweep_pcts is not None else cfg.sweep.pcts))
    if any(not 0 <= p <= 100 for p in pcts):
        raise ConfigError("pcts must lie in [0, 100]")
    methods, models = cfg.sweep.methods, cfg.sweep.models

    calib = calibrate(cal_walks, cfg)
    jobs_args = [(rec, calib, cfg, pcts, methods, models) for rec in test_walks]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            per_walk = list(pool.map(_evaluate_job, jobs_args))
    else:
        per_walk = [_evaluate_job(a) for a in jobs_args]
    trials = sorted((r for rs in per_walk for r in rs), key=lambda r: r.key)
    keys = [r.key for r in trials]
    if len(set(keys)) != len(keys):
        raise ConfigError("duplicate (method, model, pct, seed) trials: test walks need distinct seeds")
    return SweepReport(
        tuple(trials), pcts, calib, cfg.with_calibration(calib.thresholds, calib.scarlet_K, calib.models),
        n_calibration=len(cal_walks),
    )


def bootstrap_dominance(
    report: SweepReport,
    better: tuple[str, str],
    worse: tuple[str, str],
    pct: float,
    n_resamples: int = 1000,
    seed: int = 0,
) -> float:
    """Fraction of paired bootstrap resamples in which ``better`` has the lower mean."""
    a = report.series(*better, pct)
    b = report.series(*worse, pct)
    seeds = sorted(set(a) & set(b))
    if len(seeds) < 2:
        raise ConfigError("need at least 2 paired seeds")
    diff = np.array([a[s] - b[s] for s in seeds])
    rng = np.random.Generator(np.random.PCG64(seed))
    idx = rng.integers(0, diff.size, size=(n_resamples, diff.size))
    return float(np.mean(diff[idx].mean(axis=1) < 0))


SWEEP_COLUMNS = ("method", "model", "pct", "seed", "endpoint_error")
FIG5_COLUMNS = ("method", "model", "pct", "mean", "std", "n")


def _open(path: Path, mode: str = "w"):
    try:
        return path.open(mode, newline="", encoding="utf-8")
    except OSError as exc:
        raise OSError(f"{path}: {exc.strerror or exc}") from exc


def emit_report(report: SweepReport, out_dir: str | Path) -> dict[str, Path]:
    """Write ``sweep.csv``, ``summary.json``, ``fig5_data.csv`` (and the config used)."""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"{out_dir}: {exc.strerror or exc}") from exc
    paths = {}

    paths["sweep"] = out_dir / "sweep.csv"
    with _open(paths["sweep"]) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for r in sorted(report.trials, key=lambda r: r.key):
            w.writerow([r.method, r.model, repr(r.pct), r.seed, repr(float(r.endpoint_error))])

    summary = report.summary()
    paths["fig5"] = out_dir / "fig5_data.csv"
    with _open(paths["fig5"]) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FIG5_COLUMNS)
        for (method, model, pct), s in summary.items():
            w.writerow([method, model, repr(pct), repr(s["mean"]), repr(s["std"]), s["n"]])

    rms = {}
    for r in report.trials:
        rms.setdefault((r.method, r.model, r.pct), []).append(r.rms_error)
    doc = {
        "spread": "sample standard deviation (ddof=1) of absolute endpoint error, metres",
        "n_calibration": report.n_calibration,
        "pcts": list(report.pcts),
        "cells": [
            {
                "method": m, "model": mo, "pct": p, **s,
                "rms_along_path_mean": float(np.nanmean(rms[(m, mo, p)])) if not np.all(np.isnan(rms[(m, mo, p)])) else None,
            }
            for (m, mo, p), s in summary.items()
        ],
    }
    if report.calibration is not None:
        c = report.calibration
        doc["calibration"] = {
            "thresholds": c.thresholds.as_dict(),
            "scarlet_K": c.scarlet_K,
            "model_K": {tag: m.K for tag, m in sorted(c.models.items())},
        }
    paths["summary"] = out_dir / "summary.json"
    with _open(paths["summary"]) as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")
    if report.config is not None:
        paths["config"] = save_config(out_dir / "config.json", report.config)
    return paths
