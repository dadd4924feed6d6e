"""Command-line front end.

Subcommands:

* ``run <config> [--seed N] [--out DIR] [--sweep section.key=v1,v2 ...]``
  Train per the config; write run_log.csv, weights, trajectory.csv, the
  resolved config, and (optionally) SVG plots into the output directory.
  Sweeps expand the cartesian product of the supplied value lists and execute
  runs in parallel subprocesses, one subdirectory each; the environment
  variable VGL_LAB_THREADS caps the parallelism.
* ``verify <check> [--env E] [--seed N] [--tol X] [--out DIR]``
  Run one of the named verification suites, print its report, and write it
  as JSON.
* ``plot <dir>``
  Re-render the SVG plots from a run directory's CSV artifacts.

Exit codes: 0 success/pass, 1 usage or environment error, 2 numerical
divergence or verification failure.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import configparser
import csv
import io
import itertools
import json
import os
import sys
from pathlib import Path

from .approximator import make_approximator, save_weights, weights_to_json
from .config import load_config, parse_config, serialize_config
from .errors import SolverFailureError, VglLabError
from .learners import RUN_LOG_HEADER, train, run_log_to_csv
from .model import make_environment
from .svgplot import render_line_plot, render_scatter_path
from .targets import rollout, trajectory_to_csv
from .verify import CHECKS

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NUMERIC = 2


def _build_parser():
    parser = argparse.ArgumentParser(prog="vgl-lab",
                                     description="value-gradient learning lab")
    sub = parser.add_subparsers(dest="command")

    p_run = sub.add_parser("run", help="train per a config file")
    p_run.add_argument("config")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--out", default=None)
    p_run.add_argument("--sweep", action="append", default=[],
                       metavar="SECTION.KEY=V1,V2",
                       help="sweep a config field over several values; "
                            "repeatable, cartesian product")

    p_verify = sub.add_parser("verify", help="run a verification suite")
    p_verify.add_argument("check")
    p_verify.add_argument("--env", default=None)
    p_verify.add_argument("--seed", type=int, default=0)
    p_verify.add_argument("--tol", type=float, default=None)
    p_verify.add_argument("--out", default=".")

    p_plot = sub.add_parser("plot", help="render SVG plots from a run directory")
    p_plot.add_argument("directory")
    return parser


# -- run ------------------------------------------------------------------------


def _write_plots(out, rows, traj_states=None):
    iters = [r.iteration for r in rows]
    (out / "learning_curve.svg").write_text(render_line_plot(
        [("total reward", iters, [r.total_reward for r in rows])],
        title="learning curve", xlabel="iteration", ylabel="total reward"))
    (out / "residuals.svg").write_text(render_line_plot(
        [("value residual", iters, [r.value_residual_norm for r in rows]),
         ("gradient residual", iters, [r.gradient_residual_norm for r in rows])],
        title="target residual norms", xlabel="iteration", ylabel="residual"))
    if traj_states is not None and traj_states.shape[1] == 3:
        (out / "trajectory.svg").write_text(render_scatter_path(
            traj_states[:, 0], traj_states[:, 1],
            title="trajectory", xlabel="x0", ylabel="x1"))


def _execute_run(cfg, out_dir) -> int:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    env = make_environment(cfg.env_name, **dict(cfg.env_params))
    approx = make_approximator(cfg.approx_kind, env.state_dim, hidden=cfg.hidden)
    log = train(env, approx, cfg.learner)
    run_log_to_csv(log, out / "run_log.csv")
    save_weights(out / "weights.bin", log.final_w)
    (out / "weights.json").write_text(weights_to_json(log.final_w))
    (out / "config.ini").write_text(serialize_config(cfg))
    traj_states = None
    if not log.diverged:
        try:
            traj = rollout(env, approx, log.final_w)
            trajectory_to_csv(traj, out / "trajectory.csv")
            traj_states = traj.states
        except (SolverFailureError, VglLabError):
            pass
    if cfg.plots:
        _write_plots(out, log.rows, traj_states)
    return EXIT_NUMERIC if log.diverged else EXIT_OK


def _apply_overrides(text, overrides):
    """overrides: {(section, key): value-string}; returns new config text."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.read_string(text)
    for (section, key), value in overrides.items():
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section, key, value)
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def _parse_sweep_args(sweep_args):
    """Each arg SECTION.KEY=V1,V2,... -> list of ((section, key), [values])."""
    axes = []
    for arg in sweep_args:
        if "=" not in arg or "." not in arg.split("=", 1)[0]:
            raise VglLabError(f"bad --sweep argument {arg!r}; expected "
                              "section.key=value1,value2,...")
        target, values = arg.split("=", 1)
        section, key = target.split(".", 1)
        vals = [v.strip() for v in values.split(",") if v.strip()]
        if not vals:
            raise VglLabError(f"--sweep {arg!r} lists no values")
        axes.append(((section, key), vals))
    return axes


def _sweep_worker(config_text, out_dir):
    cfg = parse_config(config_text)
    return _execute_run(cfg, out_dir)


def _cmd_run(args) -> int:
    text = Path(args.config).read_text()
    base_overrides = {}
    if args.seed is not None:
        base_overrides[("learner", "seed")] = str(args.seed)
    if args.out is not None:
        base_overrides[("output", "directory")] = args.out

    if not args.sweep:
        cfg = parse_config(_apply_overrides(text, base_overrides))
        return _execute_run(cfg, cfg.out_dir)

    axes = _parse_sweep_args(args.sweep)
    jobs = []
    base_cfg = parse_config(_apply_overrides(text, base_overrides))
    root = Path(base_cfg.out_dir)
    for idx, combo in enumerate(itertools.product(*[vals for _, vals in axes])):
        overrides = dict(base_overrides)
        tag_parts = []
        for ((section, key), _), value in zip(axes, combo):
            overrides[(section, key)] = value
            tag_parts.append(f"{key}{value}")
        sub_dir = root / f"sweep_{idx:03d}_{'_'.join(tag_parts)}"
        job_text = _apply_overrides(text, overrides)
        parse_config(job_text)  # validate before spawning workers
        jobs.append((job_text, str(sub_dir)))

    cap = os.environ.get("VGL_LAB_THREADS")
    workers = min(len(jobs), int(cap)) if cap else min(len(jobs), os.cpu_count() or 1)
    workers = max(workers, 1)
    codes = []
    with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_sweep_worker, t, d) for t, d in jobs]
        for fut in futures:
            codes.append(fut.result())
    if any(c == EXIT_ERROR for c in codes):
        return EXIT_ERROR
    if any(c == EXIT_NUMERIC for c in codes):
        return EXIT_NUMERIC
    return EXIT_OK


# -- verify -----------------------------------------------------------------------


def _cmd_verify(args) -> int:
    if args.check not in CHECKS:
        print(f"unknown check {args.check!r}; available: "
              f"{', '.join(sorted(CHECKS))}", file=sys.stderr)
        return EXIT_ERROR
    report = CHECKS[args.check](seed=args.seed, env=args.env, tol=args.tol)
    for row in report.rows:
        print(f"  {row}")
    verdict = "PASS" if report.passed else "FAIL"
    print(f"{verdict} {report.check}: max error {report.max_error:.3e} vs "
          f"tolerance {report.tolerance:.3e} over {report.instances} instances")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"verify_{report.check}.json").write_text(json.dumps(
        {"check": report.check, "instances": report.instances,
         "max_error": report.max_error, "tolerance": report.tolerance,
         "passed": report.passed, "rows": list(report.rows)}, indent=2))
    return EXIT_OK if report.passed else EXIT_NUMERIC


# -- plot -------------------------------------------------------------------------


def _read_csv_table(path, expected_header):
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != expected_header:
        raise VglLabError(f"{path}: missing or wrong schema header")
    reader = csv.DictReader(lines[1:])
    return list(reader)


def _cmd_plot(args) -> int:
    run_dir = Path(args.directory)
    log_path = run_dir / "run_log.csv"
    if not log_path.exists():
        print(f"no run log at {log_path}", file=sys.stderr)
        return EXIT_ERROR
    table = _read_csv_table(log_path, RUN_LOG_HEADER)

    def col(name):
        return [float(row[name]) for row in table]

    iters = col("iteration")
    (run_dir / "learning_curve.svg").write_text(render_line_plot(
        [("total reward", iters, col("total_reward"))],
        title="learning curve", xlabel="iteration", ylabel="total reward"))
    (run_dir / "residuals.svg").write_text(render_line_plot(
        [("value residual", iters, col("value_residual_norm")),
         ("gradient residual", iters, col("gradient_residual_norm"))],
        title="target residual norms", xlabel="iteration", ylabel="residual"))

    traj_path = run_dir / "trajectory.csv"
    if traj_path.exists():
        rows = _read_csv_table(traj_path, "# vgl-lab trajectory v1")
        state_cols = [k for k in rows[0] if k.startswith("x")] if rows else []
        if len(state_cols) == 3:
            xs = [float(r["x0"]) for r in rows]
            ys = [float(r["x1"]) for r in rows]
            (run_dir / "trajectory.svg").write_text(render_scatter_path(
                xs, ys, title="trajectory", xlabel="x0", ylabel="x1"))
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_ERROR
    if args.command is None:
        parser.print_help()
        return EXIT_ERROR
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "verify":
            return _cmd_verify(args)
        return _cmd_plot(args)
    except SolverFailureError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except VglLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
