"""Command line entry point.

    thinfilm simulate CONFIG [--out DIR]
    thinfilm resume CHECKPOINT [--out DIR]
    thinfilm analyze (CONFIG | CHECKPOINT | --h H --gamma G --D D --sigma-prime S)
    thinfilm stability [--h-star ..] [--gamma-star ..] [--D ..] [--beta ..] [--L ..] [--n ..] [--q ..]
    thinfilm sweep TEMPLATE GRIDSPEC [--mode simulate|stability] [--workers N]
    thinfilm preset NAME            (print a built-in config)

Exit codes: 0 success, 2 config error, 3 degeneracy stop, 4 numerical failure.
JSON goes to stdout (or --json FILE); logs go to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import runner
from .config import PRESETS, load_config
from .core import Grid, PhysicalParams
from .errors import CheckpointError, ConfigError, DegeneracyStop, ThinFilmError
from .stability import Equilibrium, gamma_threshold_scan, spectral_bound
from .surfactant import SurfactantModel


def _emit(obj, path=None):
    text = json.dumps(runner._clean(obj), indent=2, allow_nan=False)
    if path:
        Path(path).write_text(text + "\n")
    else:
        print(text)


def _fail(exc, code, path=None):
    _emit(runner._error_record(exc, code), path)
    return code


def cmd_simulate(a):
    res = runner.simulate(a.config, a.out)
    _emit(res.summary, a.json)
    return res.exit_code


def cmd_resume(a):
    try:
        res = runner.resume(a.checkpoint, a.out)
    except CheckpointError as exc:
        return _fail(exc, runner.EXIT_CONFIG, a.json)
    _emit(res.summary, a.json)
    return res.exit_code


def cmd_analyze(a):
    try:
        if a.source is None:
            if None in (a.h, a.gamma, a.sigma_prime):
                raise ConfigError("give a config/checkpoint or all of --h --gamma --sigma-prime")
            rep = runner.analyze(point={"h": a.h, "gamma": a.gamma, "D": a.D,
                                        "sigma_prime": a.sigma_prime},
                                 alpha=a.alpha, n_lambda=a.n_lambda)
        else:
            rep = runner.analyze(a.source, alpha=a.alpha, n_lambda=a.n_lambda)
    except (ConfigError, CheckpointError, ValueError) as exc:
        return _fail(exc, runner.EXIT_CONFIG, a.json)
    _emit(rep, a.json)
    return 0


def cmd_stability(a):
    try:
        model = (SurfactantModel.from_table_file(a.table) if a.table
                 else SurfactantModel.linear(a.sigma0, a.beta))
        p = PhysicalParams(a.D, model, Grid(a.L, a.n))
        eq = Equilibrium(a.h_star, a.gamma_star)
        out = spectral_bound(eq, p, q=a.q).as_dict()
        if a.scan:
            out["gamma_scan"] = gamma_threshold_scan(a.h_star, p)
    except (ValueError, ThinFilmError) as exc:
        return _fail(exc, runner.EXIT_CONFIG if isinstance(exc, ValueError) else 4, a.json)
    _emit(out, a.json)
    return 0


def cmd_sweep(a):
    try:
        template = load_config(a.template)
        grid = runner.parse_grid_spec(Path(a.grid).read_text())
        rep = runner.sweep(template, grid, a.mode, a.out, a.workers)
    except (ConfigError, OSError) as exc:
        return _fail(exc if isinstance(exc, ConfigError) else ConfigError(str(exc)),
                     runner.EXIT_CONFIG, a.json)
    _emit(rep, a.json)
    return 0


def cmd_preset(a):
    if a.name not in PRESETS:
        return _fail(ConfigError(f"unknown preset {a.name!r}; known: {', '.join(PRESETS)}"), 2)
    sys.stdout.write(PRESETS[a.name].to_text())
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="thinfilm", description=__doc__.split("\n\n")[0])
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="cmd", required=True)

    s = sub.add_parser("simulate", help="run a config file")
    s.add_argument("config")
    s.add_argument("--out", help="output directory (overrides output.dir)")
    s.add_argument("--json", help="write the summary here instead of stdout")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("resume", help="continue from a checkpoint")
    s.add_argument("checkpoint")
    s.add_argument("--out")
    s.add_argument("--json")
    s.set_defaults(func=cmd_resume)

    s = sub.add_parser("analyze", help="ellipticity certification")
    s.add_argument("source", nargs="?")
    s.add_argument("--h", type=float)
    s.add_argument("--gamma", type=float)
    s.add_argument("--D", type=float, default=1.0)
    s.add_argument("--sigma-prime", type=float)
    s.add_argument("--alpha", type=float, default=np.pi / 2)
    s.add_argument("--n-lambda", type=int, default=64)
    s.add_argument("--json")
    s.set_defaults(func=cmd_analyze)

    s = sub.add_parser("stability", help="spectral bound at a flat state")
    s.add_argument("--h-star", type=float, default=1.0)
    s.add_argument("--gamma-star", type=float, default=1e-2)
    s.add_argument("--D", type=float, default=1.0)
    s.add_argument("--sigma0", type=float, default=1.0)
    s.add_argument("--beta", type=float, default=1.0)
    s.add_argument("--table", help="two-column (s, sigma) file instead of the linear law")
    s.add_argument("--L", type=float, default=1.0)
    s.add_argument("--n", type=int, default=128)
    s.add_argument("--q", type=float, default=1.0)
    s.add_argument("--scan", action="store_true", help="add a gamma* threshold scan")
    s.add_argument("--json")
    s.set_defaults(func=cmd_stability)

    s = sub.add_parser("sweep", help="parameter sweep")
    s.add_argument("template")
    s.add_argument("grid")
    s.add_argument("--mode", choices=("simulate", "stability"), default="simulate")
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--out")
    s.add_argument("--json")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("preset", help="print a built-in config")
    s.add_argument("name")
    s.set_defaults(func=cmd_preset)
    return ap


def main(argv=None):
    a = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * a.verbose, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return a.func(a)
    except DegeneracyStop as exc:
        return _fail(exc, runner.EXIT_DEGENERATE)
    except ThinFilmError as exc:
        return _fail(exc, runner.EXIT_NUMERICAL)


if __name__ == "__main__":
    sys.exit(main())
