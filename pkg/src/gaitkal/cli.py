"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure. ``GAITKAL_LOG`` sets the log level (default ``WARNING``).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .config import METHODS, load_config, save_config
from .errors import ConfigError, DataError, GaitkalError
from .fusion import run_ins_corrected, write_trace_csv
from .harness import calibrate, emit_report, endpoint_error, run_two_phase_experiment
from .imu_core import list_walks, load_walk, save_walk
from .shs import ShsConfig, run_shs, write_trajectory_csv
from .synthwalk import ensemble_walk
from .velmodel import MODEL_TYPES

log = logging.getLogger("gaitkal")


def _setup_logging() -> None:
    name = os.environ.get("GAITKAL_LOG", "WARNING").upper()
    level = getattr(logging, name, None)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if level == logging.WARNING and name != "WARNING":
        log.warning("unknown GAITKAL_LOG level %r, using WARNING", name)


def _load_dir(directory) -> list:
    paths = list_walks(directory)
    if not paths:
        raise DataError(f"{directory}: no walk CSV files")
    return [load_walk(p) for p in paths]


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    if args.seeds < 1:
        raise ConfigError("--seeds must be >= 1")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for seed in range(args.seed_start, args.seed_start + args.seeds):
        rec = ensemble_walk(seed, cfg.ensemble)
        save_walk(out / f"{rec.label}.csv", rec)
    log.info("wrote %d walks to %s", args.seeds, out)
    return 0


def cmd_localize(args) -> int:
    cfg = load_config(args.config)
    if cfg.thresholds is None:
        raise ConfigError("config has no thresholds; run `gaitkal calibrate` first")
    rec = load_walk(args.walk)
    result = {"walk": rec.label, "method": args.method}
    if args.method == "shs":
        if cfg.scarlet_K is None:
            raise ConfigError("config has no scarlet_K; run `gaitkal calibrate` first")
        traj = run_shs(rec, ShsConfig(cfg.thresholds, cfg.scarlet_K))
        estimate = traj.total_distance
        result["n_steps"] = len(traj)
        if args.trace:
            write_trajectory_csv(args.trace, traj)
    else:
        model = cfg.model(args.model)
        pct = 0.0 if args.method == "ins-raw" else args.pct
        mode = "naive" if args.method == "ins-naive" else "kalman"
        trace, diag = run_ins_corrected(rec, model, cfg.thresholds, cfg.filter, pct, mode)
        estimate = float(trace.p[-1] - trace.p[0])
        result.update(model=args.model, pct=pct, n_steps=diag.n_steps, n_corrections=len(diag.correction_idx))
        if args.trace:
            write_trace_csv(args.trace, trace, diag)
    result["distance"] = estimate
    if rec.truth is not None:
        result["endpoint_error"] = endpoint_error(estimate, rec.truth.true_p[-1] - rec.truth.true_p[0])
    print(json.dumps(result, sort_keys=True))
    return 0


def cmd_calibrate(args) -> int:
    cfg = load_config(args.config)
    walks = _load_dir(args.walks)
    calib = calibrate(walks, cfg)
    save_config(args.config_out, cfg.with_calibration(calib.thresholds, calib.scarlet_K, calib.models))
    return 0


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    cal, test = _load_dir(args.cal), _load_dir(args.test)
    report = run_two_phase_experiment(cal, test, cfg=cfg, jobs=args.jobs)
    paths = emit_report(report, args.out)
    for p in paths.values():
        log.info("wrote %s", p)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gaitkal", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate synthetic walks with truth sidecars")
    p.add_argument("--config", help="pipeline config JSON (defaults if omitted)")
    p.add_argument("--out", required=True)
    p.add_argument("--seeds", type=int, required=True, help="number of walks")
    p.add_argument("--seed-start", type=int, default=0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("localize", help="estimate the distance walked in one log")
    p.add_argument("--walk", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--method", choices=METHODS, default="ins-kalman")
    p.add_argument("--model", choices=sorted(MODEL_TYPES), default="gaussian")
    p.add_argument("--pct", type=float, default=10.0)
    p.add_argument("--trace", help="write the per-sample (INS) or per-step (SHS) trace here")
    p.set_defaults(func=cmd_localize)

    p = sub.add_parser("calibrate", help="fit thresholds and constants on a walk directory")
    p.add_argument("--walks", required=True)
    p.add_argument("--config", help="base config JSON")
    p.add_argument("--config-out", required=True)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("sweep", help="two-phase experiment over the correction-percentage grid")
    p.add_argument("--cal", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except GaitkalError as exc:
        log.error("%s", exc)
        return exc.exit_code
    except FileNotFoundError as exc:
        log.error("%s", exc)
        return DataError.exit_code
    except OSError as exc:
        log.error("%s", exc)
        return DataError.exit_code


if __name__ == "__main__":
    sys.exit(main())
