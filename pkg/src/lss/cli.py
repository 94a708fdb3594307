"""Command-line interface: config ingestion, subcommand dispatch, artifact emission.

Exit codes: 0 pass/ok, 1 usage or config error, 2 experiment fail (or
blow-up), 3 refusal because the experiment's hypothesis is not met.
Every emitted file is listed on standard output, one path per line.
The environment variable LSS_SEED overrides the master seed.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, load_config
from .experiments import (
    HypothesisNotMet,
    exp_chain_coupling,
    exp_contraction,
    exp_energy_bound,
    exp_eps_sweep,
    exp_forward,
    exp_periodic,
    exp_pullback,
    exp_tail,
)
from .integrator import BlowUpError, SimConfig, default_dt, simulate
from .model import ModelSpec, SpecValidationError, geometric_profile, validate
from .reporting import write_report_files

__all__ = ["main", "entry"]


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors must exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _pair_list(text: str) -> list[tuple[int, int]]:
    pairs = []
    for chunk in text.split(","):
        if not chunk.strip():
            continue
        a, b = chunk.split(":")
        pairs.append((int(a), int(b)))
    return pairs


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lss", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, needs_config=True):
        if needs_config:
            p.add_argument("--config", required=True, help="model configuration JSON")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--seed", type=int, default=42, help="master seed (LSS_SEED overrides)")
        p.add_argument("--workers", type=int, default=1, help="parallel worker count")
        p.add_argument("--dt", type=float, default=None, help="time step (default from spec)")
        p.add_argument("--m", type=int, default=10_000, help="ensemble size")

    p = sub.add_parser("validate", help="check structure and dissipativity conditions")
    add_common(p)

    p = sub.add_parser("simulate", help="integrate one trajectory and dump it as CSV")
    add_common(p)
    p.add_argument("--s", type=float, default=0.0)
    p.add_argument("--t", type=float, default=1.0, help="end time")
    p.add_argument("--j0", type=int, default=0)
    p.add_argument("--xi-scale", type=float, default=1.0, help="geometric initial profile amplitude")

    p = sub.add_parser("energy", help="mean-square energy bound experiment")
    add_common(p)
    p.add_argument("--t", type=float, default=4.0, help="horizon length")
    p.add_argument("--times", type=int, default=20, help="number of sample times")
    p.add_argument("--j0", type=int, default=0)
    p.add_argument("--xi-scale", type=float, default=1.0)

    p = sub.add_parser("contraction", help="synchronous-pair contraction experiment")
    add_common(p)
    p.add_argument("--t", type=float, default=1.5, help="horizon length")
    p.add_argument("--times", type=int, default=12)
    p.add_argument("--j0", type=int, default=0)
    p.add_argument("--xi-scale", type=float, default=1.0)

    p = sub.add_parser("tail", help="site-tail smallness experiment")
    add_common(p)
    p.add_argument("--t", type=float, default=3.0, help="horizon length")
    p.add_argument("--cuts", type=_float_list, default=None, help="cut levels, e.g. 1,2,3,4")
    p.add_argument("--eta", type=float, default=0.05)
    p.add_argument("--j0", type=int, default=0)

    p = sub.add_parser("pullback", help="pullback Cauchy/stability experiment")
    add_common(p)
    p.add_argument("--t", type=float, default=0.0, help="fixed observation time")
    p.add_argument("--lags", type=_float_list, default=None, help="pullback lags, ascending")
    p.add_argument("--starts", type=int, default=2, help="number of distinct starts")

    p = sub.add_parser("forward", help="forward stability experiment")
    add_common(p)
    p.add_argument("--s", type=float, default=0.0, help="fixed start time")
    p.add_argument("--horizons", type=_float_list, default=None)
    p.add_argument("--starts", type=int, default=3)

    p = sub.add_parser("periodic", help="period-agreement experiment")
    add_common(p)
    p.add_argument("--t-grid", type=_float_list, default=None)

    p = sub.add_parser("eps-sweep", help="noise-intensity limit experiment")
    add_common(p)
    p.add_argument("--eps-list", type=_float_list, default=None)
    p.add_argument("--eps0", type=float, default=0.0)
    p.add_argument("--t", type=float, default=0.5, help="fixed observation time")

    p = sub.add_parser("coupling", help="chain coupling-time experiment")
    add_common(p)
    p.add_argument("--t-grid", type=_float_list, default=None)
    p.add_argument("--pairs", type=_pair_list, default=None, help="start pairs, e.g. 0:1,1:2")
    p.add_argument("--eta", type=float, default=0.05)
    return parser


def _geometric_start(spec: ModelSpec, scale: float) -> np.ndarray:
    return geometric_profile([scale], 0.5, spec.trunc_radius)[0]


def _start_palette(spec: ModelSpec, count: int) -> list[tuple[np.ndarray, int]]:
    base = _geometric_start(spec, 1.5)
    alt = base * np.where(spec.site_index % 2 == 0, 1.0, -1.0)
    palette = [
        (np.zeros(spec.dim), 0),
        (base, spec.n_regimes - 1),
        (alt, 0),
        (2.0 * base, spec.n_regimes - 1),
    ]
    if count > len(palette):
        raise ConfigError(f"at most {len(palette)} built-in starts available")
    return palette[:count]


def _trajectory_csv(traj, spec: ModelSpec, path: Path) -> Path:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        sites = [f"site_{i}" for i in spec.site_index]
        writer.writerow(["time", "regime", *sites])
        for t, reg, row in zip(traj.times, traj.regimes, traj.values):
            writer.writerow([format(t, ".17g"), int(reg), *[format(x, ".17g") for x in row]])
    return path


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    if "LSS_SEED" in os.environ:
        args.seed = int(os.environ["LSS_SEED"])

    try:
        return _dispatch(args)
    except (ConfigError, SpecValidationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except HypothesisNotMet as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return 3
    except BlowUpError as exc:
        print(f"experiment aborted: {exc}", file=sys.stderr)
        return 2


def _emit(report, out_dir) -> int:
    for path in write_report_files(report, out_dir):
        print(path)
    return 0 if report.verdict == "pass" else 2


def _dispatch(args) -> int:
    out_dir = Path(args.out)
    spec = load_config(args.config)
    report = validate(spec)
    dt = args.dt if args.dt is not None else default_dt(spec)

    if args.command == "validate":
        for key, val in report.to_dict().items():
            if key != "analytic":
                print(f"{key}={val}")
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / "condition_report.json"
        path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
        print(path)
        return 0

    if args.command == "simulate":
        cfg = SimConfig(dt=dt, s=args.s, t_end=args.t, seed=args.seed, n_traj=1)
        traj = simulate(spec, cfg, _geometric_start(spec, args.xi_scale), args.j0)
        out_dir.mkdir(parents=True, exist_ok=True)
        print(_trajectory_csv(traj, spec, out_dir / "trajectory.csv"))
        return 0

    if args.command == "energy":
        cfg = SimConfig(dt=dt, s=0.0, t_end=args.t, seed=args.seed, n_traj=args.m)
        times = np.linspace(args.t / args.times, args.t, args.times)
        rep = exp_energy_bound(spec, cfg, _geometric_start(spec, args.xi_scale), args.j0,
                               times, workers=args.workers)
        return _emit(rep, out_dir)

    if args.command == "contraction":
        cfg = SimConfig(dt=dt, s=0.0, t_end=args.t, seed=args.seed, n_traj=args.m)
        times = np.linspace(args.t / args.times, args.t, args.times)
        xi1 = _geometric_start(spec, args.xi_scale)
        rep = exp_contraction(spec, cfg, xi1, -xi1, args.j0, times, workers=args.workers)
        return _emit(rep, out_dir)

    if args.command == "tail":
        cfg = SimConfig(dt=dt, s=0.0, t_end=args.t, seed=args.seed, n_traj=args.m)
        cuts = [int(c) for c in args.cuts] if args.cuts else list(range(1, spec.trunc_radius + 1))
        rep = exp_tail(spec, cfg, np.zeros(spec.dim), args.j0, cuts, eta=args.eta,
                       workers=args.workers)
        return _emit(rep, out_dir)

    if args.command == "pullback":
        cfg = SimConfig(dt=dt, s=-1.0, t_end=0.0, seed=args.seed, n_traj=args.m)
        lag_max = 1.1 * 8.0 / report.gamma
        lags = args.lags if args.lags else list(np.linspace(lag_max / 8.0, lag_max, 8))
        rep = exp_pullback(spec, cfg, args.t, lags, _start_palette(spec, args.starts),
                           workers=args.workers)
        return _emit(rep, out_dir)

    if args.command == "forward":
        cfg = SimConfig(dt=dt, s=-1.0, t_end=0.0, seed=args.seed, n_traj=args.m)
        h_max = 1.1 * 8.0 / report.gamma
        horizons = args.horizons if args.horizons else list(np.linspace(h_max / 4.0, h_max, 4))
        rep = exp_forward(spec, cfg, args.s, horizons, _start_palette(spec, args.starts),
                          workers=args.workers)
        return _emit(rep, out_dir)

    if args.command == "periodic":
        cfg = SimConfig(dt=dt, s=-1.0, t_end=0.0, seed=args.seed, n_traj=args.m)
        if args.t_grid:
            grid = args.t_grid
        else:
            period = spec.period if spec.period is not None else 1.0
            grid = [period * frac for frac in (0.0, 0.25, 0.5, 0.75)]
        rep = exp_periodic(spec, cfg, grid, workers=args.workers)
        return _emit(rep, out_dir)

    if args.command == "eps-sweep":
        cfg = SimConfig(dt=dt, s=-1.0, t_end=0.0, seed=args.seed, n_traj=args.m)
        eps_list = args.eps_list if args.eps_list else [1.0, 0.5, 0.25, 0.125, 0.0625]
        rep = exp_eps_sweep(spec, cfg, eps_list, args.eps0, args.t, workers=args.workers)
        return _emit(rep, out_dir)

    if args.command == "coupling":
        grid = args.t_grid if args.t_grid else [0.5, 1.0, 2.0]
        if args.pairs:
            pairs = args.pairs
        else:
            pairs = [(0, j) for j in range(1, spec.n_regimes)] or [(0, 0)]
        rep = exp_chain_coupling(spec.generator, pairs, grid, args.m, seed=args.seed,
                                 eta=args.eta)
        return _emit(rep, out_dir)

    raise ConfigError(f"unknown command {args.command}")


def entry():  # console-script shim
    sys.exit(main())
