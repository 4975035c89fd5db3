"""Command-line interface: ``implicit-pf <command> [options]``.

Every command writes CSV to ``--out`` (or standard output).  Exit status is 0
on success, 1 on a usage or configuration error and 2 on a numerical failure.
"""

from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from . import csvio
from .azimuth import ModelParams, TruthBatch, simulate_truth_batch
from .config import load_config, resolve
from .errors import FilterError, InvalidConfigError, InvalidInputError
from .estimation import DEFAULT_WINDOW, TABLE3_RATIOS, SigmaScanRow, crossings, estimate_sigma, sigma_scan
from .experiments import ExperimentConfig, discrepancy_study, intrinsic_uncertainty, robustness_study
from .filter import run_filter_batch
from .parallel import map_chunks
from .resampling import ResamplePolicy
from .selftest import run_selftest

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2

BASE_DEFAULTS = dict(seed=0, runs=1, particles=100, steps=160, sigma=1e-6, obs_var=25e-6, resample="every",
                     smoothing=False, workers=1, x0=0.01, y0=20.0, dx1=0.002, dy1=-0.06, out=None)
COMMAND_DEFAULTS = {
    "table2": dict(runs=2000),
    "table3": dict(runs=200, particles=30),
    "estimate-sigma": dict(runs=200, particles=30),
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_help(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _add_common(p: argparse.ArgumentParser, default):
    g = p.add_argument_group("common options")
    g.add_argument("--seed", type=lambda v: int(v, 0), default=default, help="64-bit master seed")
    g.add_argument("--runs", type=int, default=default)
    g.add_argument("--particles", type=int, default=default)
    g.add_argument("--steps", type=int, default=default)
    g.add_argument("--sigma", type=float, default=default, help="motion variance per step")
    g.add_argument("--obs-var", dest="obs_var", type=float, default=default, help="bearing noise variance")
    g.add_argument("--resample", default=default, help="every | never | ratio:L | subsets:k")
    g.add_argument("--smoothing", action="store_const", const=True, default=default, help="one-step backward smoothing")
    g.add_argument("--workers", type=int, default=default, help="worker processes (results do not depend on it)")
    g.add_argument("--out", default=default, help="output CSV path (default: stdout)")
    g.add_argument("--config", default=default, help="key=value configuration file")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="implicit-pf", description=__doc__.splitlines()[0])
    _add_common(parser, None)
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True

    def command(name, help):
        p = sub.add_parser(name, help=help)
        # SUPPRESS keeps options given before the command from being reset
        _add_common(p, argparse.SUPPRESS)
        return p

    p = command("simulate", "simulate one true track and its bearings")
    p.add_argument("--run", type=int, default=0, help="run index within the seed")

    p = command("filter", "filter one bearing record")
    p.add_argument("--run", type=int, default=0)
    p.add_argument("--truth", help="truth CSV to filter instead of simulating one")
    p.add_argument("--dump-particles", dest="dump_particles", help="write the final ensemble to this CSV")

    p = command("table1", "intrinsic uncertainty of one bearing record")
    p.add_argument("--accepted", type=int, default=200, help="accepted candidates to collect")

    command("table2", "filter error statistics at steps 40, 80, 120, 160")

    p = command("table3", "mean discriminant over the ratio grid")
    p.add_argument("--ratios", default=",".join(map(str, TABLE3_RATIOS)), help="comma-separated assumed/true ratios")
    p.add_argument("--window", type=int, default=DEFAULT_WINDOW)

    p = command("fig1", "truth and baseline / perturbed / sigma-jittered reconstructions")
    p.add_argument("--perturb-x0", dest="perturb_x0", type=float, default=0.1)
    p.add_argument("--perturb-y0", dest="perturb_y0", type=float, default=0.4)
    p.add_argument("--jitter", type=float, default=0.4, help="relative sd of the assumed sigma")

    p = command("estimate-sigma", "locate where the mean discriminant crosses one")
    p.add_argument("--scan", help="table3 CSV to use instead of running a scan")
    p.add_argument("--ratios", default=",".join(map(str, TABLE3_RATIOS)))
    p.add_argument("--window", type=int, default=DEFAULT_WINDOW)

    command("selftest", "run invariant checks on the Gaussian algebra and bridge sampler")
    return parser


def _settings(args) -> dict:
    flags = {k: getattr(args, k, None) for k in BASE_DEFAULTS}
    defaults = dict(BASE_DEFAULTS, **COMMAND_DEFAULTS.get(args.command, {}))
    file_values = load_config(args.config) if getattr(args, "config", None) else {}
    st = resolve(flags, file_values, defaults)
    for key in ("runs", "particles", "steps", "workers"):
        if st[key] < 1:
            raise InvalidConfigError(f"--{key} must be >= 1, got {st[key]}")
    st["policy"] = ResamplePolicy.parse(st["resample"])
    st["model"] = ModelParams(sigma=st["sigma"], s=st["obs_var"], x0=st["x0"], y0=st["y0"], dx1=st["dx1"],
                              dy1=st["dy1"], n_steps=st["steps"])
    return st


def _experiment(st) -> ExperimentConfig:
    return ExperimentConfig(runs=st["runs"], particles=st["particles"], steps=st["steps"], smoothing=st["smoothing"],
                            policy=st["policy"], master_seed=st["seed"], model=st["model"], workers=st["workers"])


def _ratios(text: str) -> list[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise InvalidConfigError(f"bad --ratios: {exc}") from None
    if not values or any(not v > 0 for v in values):
        raise InvalidConfigError("--ratios must list positive numbers")
    return values


def _truth_rows(t: TruthBatch, r: int = 0):
    return [(k + 1, t.x[r, k], t.y[r, k], t.dx[r, k], t.dy[r, k], t.b[r, k]) for k in range(t.x.shape[1])]


def _read_truth(path) -> TruthBatch:
    rows = csvio.read_table(path, "truth")
    if not rows:
        raise InvalidInputError(f"{path}: no observations")
    if [r["step"] for r in rows] != list(range(1, len(rows) + 1)):
        raise InvalidInputError(f"{path}: steps must run 1..n")
    col = {k: np.array([[np.nan if r[k] is None else float(r[k]) for r in rows]]) for k in ("x", "y", "dx", "dy", "b")}
    if not np.all(np.isfinite(col["b"])):
        raise InvalidInputError(f"{path}: every step needs a finite bearing")
    return TruthBatch(**col)


def cmd_simulate(args, st):
    t = simulate_truth_batch(st["model"], st["seed"], [args.run])
    csvio.write(st["out"], csvio.SCHEMAS["truth"], _truth_rows(t))


def cmd_filter(args, st):
    if args.truth:
        t = _read_truth(args.truth)
        p = st["model"].with_(n_steps=t.b.shape[1])
    else:
        p = st["model"]
        t = simulate_truth_batch(p, st["seed"], [args.run])
    out = run_filter_batch(t.b, p, st["particles"], st["policy"], smoothing=st["smoothing"], seed=st["seed"],
                           runs=[args.run])
    if out.failed[0]:
        raise FilterError(f"filter failed to converge at step {out.fail_step[0]}")
    est = out.estimates[0]
    rows = []
    for k in range(est.shape[0]):
        tx, ty = t.x[0, k], t.y[0, k]
        rows.append((k + 1, est[k, 0], est[k, 1], tx, ty, est[k, 0] - tx, est[k, 1] - ty))
    csvio.write(st["out"], csvio.SCHEMAS["filter"], rows)
    if args.dump_particles:
        ens = out.ensemble
        T = est.shape[0]
        prow = [(T, i, *ens.state[0, i], ens.phase[0, i]) for i in range(ens.state.shape[1])]
        csvio.write(args.dump_particles, csvio.SCHEMAS["particles"], prow)


def cmd_table1(args, st):
    res = intrinsic_uncertainty(_experiment(st), accepted_target=args.accepted)
    rows = [(step, sx, sy, res.accepted) for step, sx, sy in zip(res.step, res.sd_x, res.sd_y)]
    csvio.write(st["out"], csvio.SCHEMAS["table1"], rows)


def cmd_table2(args, st):
    stats = discrepancy_study(_experiment(st))
    rows = [(r.step, r.mean_x, r.sd_x, r.mean_y, r.sd_y, stats.runs, st["particles"]) for r in stats.rows]
    csvio.write(st["out"], csvio.SCHEMAS["table2"], rows)


def _scan(args, st):
    return sigma_scan(_ratios(args.ratios), st["runs"], st["particles"], st["model"].with_(n_steps=args.window + 1),
                      st["seed"], J=args.window, workers=st["workers"], policy=st["policy"])


def _scan_rows(scan):
    return [(r.ratio, r.mean_D, r.se_D, r.runs, r.failures) for r in scan]


def cmd_table3(args, st):
    csvio.write(st["out"], csvio.SCHEMAS["table3"], _scan_rows(_scan(args, st)))


def cmd_estimate_sigma(args, st):
    if args.scan:
        scan = [SigmaScanRow(float(r["ratio"]), float(r["mean_D"]), math.nan if r["se_D"] is None else float(r["se_D"]),
                             int(r["runs"]), int(r["failures"])) for r in csvio.read_table(args.scan, "table3")]
    else:
        scan = _scan(args, st)
    sigma = estimate_sigma(scan, st["sigma"])
    points = ";".join("%.17g" % c for c in crossings(scan))
    csvio.write(st["out"], csvio.SCHEMAS["sigma"], [(sigma, sigma / st["sigma"], points)])


def _fig1_chunk(run_ids, cfg, perturb_x0, perturb_y0, jitter):
    return robustness_study(cfg, perturb_x0, perturb_y0, jitter, run_ids=run_ids)


def cmd_fig1(args, st):
    cfg = _experiment(st)
    parts = map_chunks(_fig1_chunk, cfg.runs, cfg.chunk, cfg.workers, cfg=cfg, perturb_x0=args.perturb_x0,
                       perturb_y0=args.perturb_y0, jitter=args.jitter)
    rows = []
    run = 0
    for part in parts:
        for i in range(part.truth.shape[0]):
            suffix = "" if cfg.runs == 1 else f"/run{run}"
            rows.extend((name + suffix, step, x, y) for name, step, x, y in part.series(i))
            run += 1
    csvio.write(st["out"], csvio.SCHEMAS["fig1"], rows)


def cmd_selftest(args, st):
    checks = run_selftest(st["seed"])
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}: {c.detail}")
    return EXIT_OK if all(c.passed for c in checks) else EXIT_NUMERICAL


COMMANDS = {
    "simulate": cmd_simulate,
    "filter": cmd_filter,
    "table1": cmd_table1,
    "table2": cmd_table2,
    "table3": cmd_table3,
    "fig1": cmd_fig1,
    "estimate-sigma": cmd_estimate_sigma,
    "selftest": cmd_selftest,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        st = _settings(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (InvalidConfigError, InvalidInputError) as exc:
        print(f"implicit-pf: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        code = COMMANDS[args.command](args, st)
    except (InvalidConfigError, InvalidInputError, OSError) as exc:
        print(f"implicit-pf: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FilterError, FloatingPointError) as exc:
        print(f"implicit-pf: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK if code is None else code


if __name__ == "__main__":
    sys.exit(main())
