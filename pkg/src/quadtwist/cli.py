"""
Command-line front end.

    quadtwist run --scenario nominal --controller adaptive-twisting --plots
    quadtwist compare --scenario disturbance --controllers smc,twisting,adaptive-twisting
    quadtwist validate --scenario my_config.ini

Exit status: 0 success, 1 invalid input, 2 numerical failure during a run.
Outputs go below ``--out``, falling back to ``$QUADTWIST_OUT`` and then
``./quadtwist-out``.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .controllers import ControllerKind
from .errors import QuadTwistError
from .metrics import all_step_metrics, compare_controllers
from .output import atomic_write, write_manifest, write_run_csv
from .scenario import ScenarioSpec, load_scenario, run_scenario, serialize

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 1, 2
OUT_ENV = "QUADTWIST_OUT"
DEFAULT_CONTROLLERS = "smc,twisting,adaptive-twisting"


def _out_dir(args) -> str:
    return args.out or os.environ.get(OUT_ENV) or "quadtwist-out"


def _spec(args) -> ScenarioSpec:
    spec = load_scenario(args.scenario)
    return spec.with_seed(args.seed) if getattr(args, "seed", None) is not None else spec


def _manifest(spec: ScenarioSpec, **extra) -> dict:
    return {"scenario": spec.name, "scenario_hash": spec.config_hash(), "seed": spec.sim.seed,
            "version": __version__, **extra}


def cmd_run(args) -> int:
    spec = _spec(args)
    kind = ControllerKind.parse(args.controller)
    out = os.path.join(_out_dir(args), f"{spec.name}-{kind.value}")
    log = run_scenario(spec, kind)
    files = [write_run_csv(log, os.path.join(out, "run.csv"), stride=args.stride)]
    atomic_write(os.path.join(out, "scenario.ini"), serialize(spec))
    if args.plots and len(log):
        from .plots import emit_plots

        bounds = (min(spec.sliding.alpha_m), max(spec.sliding.alpha_M))
        files += emit_plots(log, out, gain_bounds=bounds)
    write_manifest(os.path.join(out, "manifest.json"),
                   _manifest(spec, controller=kind.value, files=files, failed=log.failed, error=log.error))
    if log.failed:
        print(f"run failed: {log.error}", file=sys.stderr)
        return EXIT_NUMERICAL
    for m in _safe_step_metrics(log):
        print(m)
    print(f"wrote {out}")
    return EXIT_OK


def _safe_step_metrics(log):
    try:
        return [f"{m.axis:<6} ts2%={m.settling_time_2pct:.4f}s OS={m.overshoot_pct:.3f}% "
                f"rms={np.degrees(m.rms_tracking_error):.5f}deg" for m in all_step_metrics(log)]
    except QuadTwistError as exc:
        return [f"metrics unavailable: {exc}"]


def _run_one(job):
    spec, name = job
    return name, run_scenario(spec, name)


def cmd_compare(args) -> int:
    spec = _spec(args)
    kinds = [ControllerKind.parse(c).value for c in args.controllers.split(",") if c.strip()]
    if len(kinds) < 2 or len(set(kinds)) != len(kinds):
        raise QuadTwistError("compare needs at least two distinct controllers")
    jobs = [(spec, k) for k in kinds]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            logs = dict(pool.map(_run_one, jobs))
    else:
        logs = dict(map(_run_one, jobs))
    logs = {k: logs[k] for k in kinds}
    failed = {k: log.error for k, log in logs.items() if log.failed}
    out = os.path.join(_out_dir(args), f"{spec.name}-compare")
    files = []
    if args.save_logs:
        files += [write_run_csv(log, os.path.join(out, f"{k}.csv"), stride=args.stride) for k, log in logs.items()]
    if failed:
        write_manifest(os.path.join(out, "manifest.json"),
                       _manifest(spec, controllers=kinds, files=files, failed=failed))
        for k, err in failed.items():
            print(f"{k}: run failed: {err}", file=sys.stderr)
        return EXIT_NUMERICAL
    table = compare_controllers(logs)
    files.append(atomic_write(os.path.join(out, "metrics.csv"), table.to_csv()))
    files.append(atomic_write(os.path.join(out, "comparison.txt"), table.to_text() + "\n"))
    write_manifest(os.path.join(out, "manifest.json"), _manifest(spec, controllers=kinds, files=files, failed={}))
    print(table.to_text())
    print(f"wrote {out}")
    return EXIT_OK


def cmd_validate(args) -> int:
    spec = _spec(args)
    plant = spec.plant_params()
    print(serialize(spec), end="")
    print(f"# plant inertia eigenvalues: {np.round(np.linalg.eigvalsh(plant.inertia), 6).tolist()}")
    print(f"# scenario hash: {spec.config_hash()}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="quadtwist", description="Quadcopter attitude control simulator")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--scenario", required=True, help="preset name (nominal, disturbance, variation) or INI file")
        p.add_argument("--seed", type=int, default=None, help="override the scenario seed")

    def outputs(p):
        p.add_argument("--out", default=None, help=f"output directory (default ${OUT_ENV} or ./quadtwist-out)")
        p.add_argument("--stride", type=int, default=1, help="write every N-th control sample to CSV")

    p = sub.add_parser("run", help="simulate one controller")
    common(p)
    outputs(p)
    p.add_argument("--controller", default="adaptive-twisting",
                   help="smc, twisting, atsm, adaptive-twisting or pid")
    p.add_argument("--plots", action="store_true", help="also write PNG figures")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="simulate several controllers on one scenario")
    common(p)
    outputs(p)
    p.add_argument("--controllers", default=DEFAULT_CONTROLLERS, help="comma-separated list")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.add_argument("--save-logs", action="store_true", help="also write each run's CSV log")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("validate", help="check a scenario and print it in canonical form")
    common(p)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "stride", 1) < 1 or getattr(args, "jobs", 1) < 1:
        print("error: --stride and --jobs must be positive", file=sys.stderr)
        return EXIT_INVALID
    try:
        return args.func(args)
    except QuadTwistError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
