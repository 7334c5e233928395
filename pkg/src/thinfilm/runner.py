"""Initial data, single runs with artifacts on disk, resume, analysis and sweeps.

Artifacts of a run named ``name`` in its output directory:

    name.csv            per-step diagnostics (first row: initial state)
    name.json           summary or error record
    name_plot.py        matplotlib script reading name.csv
    name_last.ckpt      final (or last valid) state
    name_step########.ckpt   periodic checkpoints when output.checkpoint_every > 0

The output directory is output.dir, taken relative to $THINFILM_OUTPUT_ROOT
when that variable is set.
"""

from __future__ import annotations

import itertools
import json
import logging
import math
import os
import re
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import ellipticity as ell
from .checkpoint import read_checkpoint, save_checkpoint
from .config import RunConfig, load_config, parse_config
from .core import Grid, State
from .diagnostics import TimeSeries, fit_decay
from .errors import (CheckpointError, ConfigError, DegeneracyStop, FitError, NumericalError,
                     PositivityError, ThinFilmError)
from .integrator import advance
from .stability import Equilibrium, spectral_bound

log = logging.getLogger(__name__)

OUTPUT_ROOT_ENV = "THINFILM_OUTPUT_ROOT"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DEGENERATE = 3
EXIT_NUMERICAL = 4


# --- initial data -----------------------------------------------------------------

def _profile(kind, mean_, amp, k, width, x, L, column, file_data):
    if kind == "flat":
        return np.full_like(x, mean_)
    if kind == "cosine":
        return mean_ + amp * np.cos(k * np.pi * x / L)
    if kind == "bump":
        # centred on the left wall, so the even reflection stays smooth
        return mean_ + amp * np.exp(-(x / width) ** 2)
    return file_data[:, column].astype(float)


def initial_condition(cfg: RunConfig, grid: Grid | None = None) -> State:
    grid = cfg.grid_obj() if grid is None else grid
    sc = cfg.scenario
    file_data = None
    if "file" in (sc.h_kind, sc.gamma_kind):
        try:
            file_data = np.loadtxt(sc.file, ndmin=2)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot load initial data: {exc}", key="scenario.file") from None
        if file_data.shape != (grid.n, 2):
            raise ConfigError(f"expected {grid.n} rows of (h, gamma), got shape {file_data.shape}",
                              key="scenario.file")
    x = grid.x
    h = _profile(sc.h_kind, sc.h_mean, sc.h_amp, sc.h_k, sc.bump_width, x, grid.L, 0, file_data)
    g = _profile(sc.gamma_kind, sc.gamma_mean, sc.gamma_amp, sc.gamma_k, sc.bump_width, x,
                 grid.L, 1, file_data)
    s = State(h, g, 0.0)
    if not s.is_positive():
        key = "scenario.h_amp" if not np.all(h > 0) else "scenario.gamma_amp"
        raise ConfigError(f"initial data not positive (min h = {h.min():.3g}, "
                          f"min gamma = {g.min():.3g})", key=key)
    return s


# --- output helpers --------------------------------------------------------------

def output_dir(cfg: RunConfig):
    root = os.environ.get(OUTPUT_ROOT_ENV)
    d = Path(cfg.output.dir)
    return (Path(root) / d) if root else d


def _clean(obj):
    """Replace nonfinite floats by None so JSON stays strict."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, bytes):
        return obj.hex()
    return obj


def write_json(path, obj):
    Path(path).write_text(json.dumps(_clean(obj), indent=2, allow_nan=False) + "\n")


PLOT_TEMPLATE = '''"""Plots for {name}.csv (generated)."""
import csv
import sys
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

here = Path(__file__).resolve().parent
with open(here / "{name}.csv", newline="") as fh:
    rows = list(csv.DictReader(fh))
col = {{k: np.array([float(r[k]) for r in rows]) for k in rows[0]}}
t = col["t"]

fig, ax = plt.subplots(1, 3, figsize=(13, 3.6))
ax[0].plot(t, col["energy"])
ax[0].set_xlabel("t")
ax[0].set_ylabel("energy")
m0h, m0g = col["mass_h"][0], col["mass_gamma"][0]
ax[1].semilogy(t[1:], np.abs(col["mass_h"][1:] - m0h) / abs(m0h) + 1e-300, label="h")
ax[1].semilogy(t[1:], np.abs(col["mass_gamma"][1:] - m0g) / abs(m0g) + 1e-300, label="gamma")
ax[1].set_xlabel("t")
ax[1].set_ylabel("relative mass drift")
ax[1].legend()
dist = np.hypot(col["dist_h_l2"], col["dist_gamma_l2"])
ax[2].semilogy(t, dist, label="L2")
ax[2].semilogy(t, col["dist_linf"], label="Linf")
ax[2].set_xlabel("t")
ax[2].set_ylabel("distance to flat state")
ax[2].legend()
fig.tight_layout()
out = here / "{name}.png"
fig.savefig(out, dpi=120)
print(out)
if "--show" in sys.argv:
    plt.show()
'''


def write_csv(path, series: TimeSeries):
    """CSV with the initial state as first row."""
    init = dict(series.initial)
    tmp = TimeSeries(series.params, series.h_star, series.gamma_star, init, [init] + series.rows)
    return tmp.to_csv(path)


@dataclass
class RunResult:
    exit_code: int
    out_dir: Path
    summary: dict
    files: dict = field(default_factory=dict)
    state: State | None = None
    series: TimeSeries | None = None


def _paths(out: Path, name):
    return {"csv": out / f"{name}.csv", "json": out / f"{name}.json",
            "plot": out / f"{name}_plot.py", "last": out / f"{name}_last.ckpt"}


def _error_record(exc, code):
    rec = {"status": "error", "exit_code": code, "error": {"type": type(exc).__name__,
                                                          "message": str(exc)}}
    for attr in ("key", "line", "diagnostics", "details"):
        if getattr(exc, attr, None) is not None:
            rec["error"][attr] = getattr(exc, attr)
    return rec


def run(cfg: RunConfig, out_dir=None, _resume=None) -> RunResult:
    """Simulate and write every artifact.  Never raises for run failures; see exit_code."""
    out = Path(out_dir) if out_dir is not None else output_dir(cfg)
    name = cfg.output.name
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        return RunResult(EXIT_CONFIG, out, _error_record(ConfigError(str(exc), "output.dir"), 2))
    files = _paths(out, name)
    cfg_text = cfg.to_text()
    t_wall = time.perf_counter()
    try:
        p = cfg.params()
        icfg = cfg.integrator()
        if _resume is None:
            state0 = initial_condition(cfg, p.grid)
            series, dt0, step0 = TimeSeries.start(state0, p), None, 0
        else:
            state0, series, dt0, step0 = _resume
    except (ConfigError, ValueError, OSError) as exc:
        code = EXIT_CONFIG
        rec = _error_record(exc if isinstance(exc, ConfigError) else ConfigError(str(exc)), code)
        write_json(files["json"], rec)
        return RunResult(code, out, rec, files)

    every = cfg.output.checkpoint_every
    state_box = {"state": state0, "dt": dt0 if dt0 is not None else icfg.dt_init}

    def on_step(state, rep, next_dt):
        state_box["state"], state_box["dt"] = state, next_dt
        step = step0 + len(series) - n_prev
        if every and step % every == 0:
            save_checkpoint(out / f"{name}_step{step:08d}.ckpt", state, p.grid.L, step, next_dt,
                            cfg_text)

    n_prev = len(series)
    status, code, err = "ok", EXIT_OK, None
    try:
        final, series, dt_next = advance(state0, p, icfg, callbacks=(on_step,), series=series,
                                         dt=dt0)
        state_box.update(state=final, dt=dt_next)
    except DegeneracyStop as exc:
        status, code, err = "degenerate", EXIT_DEGENERATE, exc
    except (NumericalError, PositivityError, ThinFilmError, FloatingPointError) as exc:
        status, code, err = "numerical_failure", EXIT_NUMERICAL, exc

    state = state_box["state"]
    step = step0 + len(series) - n_prev
    save_checkpoint(files["last"], state, p.grid.L, step, state_box["dt"], cfg_text)
    write_csv(files["csv"], series)
    files["plot"].write_text(PLOT_TEMPLATE.format(name=name))

    summary = {"status": status, "exit_code": code, "config_hash": cfg.hash().hex(),
               "t_final": state.t, "accepted_steps": step, "rejected_steps": series.n_rejected,
               "min_h": float(np.min(state.h)), "min_gamma": float(np.min(state.gamma)),
               "phi_offset": p.model.phi_offset,
               "wall_time_s": time.perf_counter() - t_wall}
    if err is not None:
        summary.update(_error_record(err, code))
        summary["status"] = status
    summary.update(_run_diagnostics(cfg, p, series))
    write_json(files["json"], summary)
    return RunResult(code, out, summary, files, state, series)


def _run_diagnostics(cfg, p, series: TimeSeries):
    d = {}
    drift_h, drift_g = series.conservation_drift()
    d["conservation_drift"] = {"h": drift_h, "gamma": drift_g}
    e = np.concatenate([[series.initial["energy"]], series.column("energy")])
    d["energy"] = {"initial": float(e[0]), "final": float(e[-1]),
                   "max_increase": float(np.max(np.diff(e))) if e.size > 1 else 0.0}
    if series.rows:
        diss = np.array([[r[f"diss{k}"] for k in range(1, 6)] for r in series.rows])
        d["max_dissipation_term"] = float(np.max(diss))
    d["h_star"], d["gamma_star"] = series.h_star, series.gamma_star
    try:
        d["decay"] = fit_decay(series, cfg.output.fit_norm, cfg.fit_window()).as_dict()
    except FitError as exc:
        d["decay"] = {"error": str(exc)}
    if cfg.output.stability:
        n = min(p.grid.n, cfg.stability.n_max)
        try:
            rep = spectral_bound(Equilibrium(series.h_star, series.gamma_star), p,
                                 Grid(p.grid.L, n), cfg.stability.q)
            d["stability"] = rep.as_dict()
            if "omega_fit" in d["decay"]:
                d["decay"]["omega_pred_ratio"] = d["decay"]["omega_fit"] / rep.omega_pred
        except (ThinFilmError, ValueError) as exc:
            d["stability"] = {"error": str(exc)}
    return d


def simulate(config_path, out_dir=None) -> RunResult:
    try:
        cfg = load_config(config_path)
    except ConfigError as exc:
        return RunResult(EXIT_CONFIG, Path(out_dir or "."), _error_record(exc, EXIT_CONFIG))
    return run(cfg, out_dir)


def resume(ckpt_path, out_dir=None) -> RunResult:
    """Continue from a checkpoint; earlier CSV rows next to it are kept."""
    ck = read_checkpoint(ckpt_path)
    cfg = parse_config(ck.config_text)
    if cfg.grid.n != ck.n or cfg.grid.L != ck.L:
        raise CheckpointError("checkpoint grid disagrees with its embedded config",
                              {"n": ck.n, "L": ck.L})
    out = Path(out_dir) if out_dir is not None else Path(ckpt_path).parent
    p = cfg.params()
    state = ck.state()
    csv_path = Path(ckpt_path).parent / f"{cfg.output.name}.csv"
    rows = TimeSeries.read_csv(csv_path) if csv_path.exists() else []
    if rows:
        init, rows = rows[0], [r for r in rows[1:] if r["t"] <= ck.t]
        if len(rows) != ck.step:
            log.warning("CSV has %d rows up to t=%g, checkpoint says %d steps", len(rows), ck.t,
                        ck.step)
        h_star, g_star = init["mass_h"] / p.grid.L, init["mass_gamma"] / p.grid.L
        series = TimeSeries(p, h_star, g_star, init, rows)
        series.grad = []
    else:
        series = TimeSeries.start(state, p)
    if ck.t >= cfg.time.t_end:
        raise CheckpointError("checkpoint is already at t_end", {"t": ck.t})
    return run(cfg, out, _resume=(state, series, ck.dt_next, ck.step))


# --- refinement ladder ----------------------------------------------------------

LADDER = ((64, 4e-6), (128, 2e-6), (256, 1e-6))


def dissipation_ladder(cfg: RunConfig, ladder=LADDER, steps=100):
    """Errors of the discrete dissipation identity over fixed-dt runs.

    For each (n, dt) the first ``steps`` backward Euler steps are taken and
    the maxima over steps of three gaps are recorded:

        total:  |dE/dt - diss_total|, dE/dt the difference quotient
        time:   |dE/dt - energy_rate|, energy_rate exact for the semi-discrete flow
        space:  |energy_rate - diss_total|

    The time gap is first order in dt, the space gap second order in dx, and
    total <= time + space.  Observed orders are log2 ratios of successive rungs.
    """
    from .diagnostics import dissipation_terms, energy, energy_rate
    from .integrator import newton_solve

    rows = []
    for n, dt in ladder:
        c = cfg.with_values({"grid.n": n, "time.dt_min": min(dt, cfg.time.dt_min),
                             "time.dt_init": dt, "time.dt_max": dt})
        p, icfg = c.params(), c.integrator()
        s = initial_condition(c, p.grid)
        e_old = energy(s, p.model, p.grid)
        gaps = np.zeros(3)
        for _ in range(steps):
            new, rep = newton_solve(s, dt, p, icfg)
            if not rep.accepted:
                raise NumericalError(f"ladder step rejected ({rep.reason})", {"n": n, "dt": dt})
            e_new = energy(new, p.model, p.grid)
            quot = (e_new - e_old) / dt
            rate = energy_rate(new, p)
            diss = float(np.sum(dissipation_terms(new, p)))
            gaps = np.maximum(gaps, np.abs([quot - diss, quot - rate, rate - diss]))
            s, e_old = new, e_new
        rows.append({"n": n, "dt": dt, "total": gaps[0], "time": gaps[1], "space": gaps[2]})
    orders = {k: [float(np.log2(a[k] / b[k])) for a, b in zip(rows, rows[1:])]
              for k in ("total", "time", "space")}
    return {"rows": rows, "orders": orders, "steps": steps}


# --- analysis -------------------------------------------------------------------

def certify_cells(h, gamma, sigma_prime, D, alpha=np.pi / 2, n_lambda=60, xi=(0.1, 1.0, 10.0)):
    """Batched symbol and boundary checks at a list of point values."""
    h, gamma, sp = (np.atleast_1d(np.asarray(a, float)) for a in (h, gamma, sigma_prime))
    D = np.broadcast_to(np.asarray(D, float), h.shape)
    if np.any(h <= 0) or np.any(gamma <= 0) or np.any(D <= 0):
        raise ell.DomainError("analysis needs h, gamma, D > 0")
    a11, a12, a21, a22 = h ** 3 / 3, -0.5 * h * h * sp, 0.5 * h * h * gamma, D - h * gamma * sp
    lam = ell.sector_lambdas(alpha, n_lambda)
    res = ell.batch_certify(a11, a12, a21, a22, lam, xi)
    counts = {k: int(np.sum(res[k])) for k in ("c1", "cubic", "split", "boundary")}
    bad = np.flatnonzero(res["c1"].any(1) | res["cubic"].any(1) | res["split"].any(1)
                         | res["boundary"].any(1))
    return {"n_points": int(h.size), "n_lambda": int(lam.size), "xi": list(xi),
            "alpha": float(alpha), "violations": counts,
            "n_violations": int(sum(counts.values())), "violating_points": bad.tolist()[:100],
            "min_normalized_det": res["min_norm_det"], "max_c1_root": res["max_c1_root"],
            "admissible": bool(np.all((a12 >= 0) & (a11 * a22 - a12 * a21 > 0))),
            "certified": sum(counts.values()) == 0}


def analyze(source=None, point=None, alpha=np.pi / 2, n_lambda=60):
    """Certification report for a checkpoint, a config's initial data, or point values.

    point: dict with h, gamma, D, sigma_prime.
    """
    if point is not None:
        c = ell.freeze(point["h"], point["gamma"], point["sigma_prime"], point["D"])
        rep = ell.sector_scan(c, alpha, n_lambda)
        rep["source"] = "point"
        return rep
    src = Path(source)
    try:
        ck = read_checkpoint(src)
        cfg = parse_config(ck.config_text)
        state, origin = ck.state(), "checkpoint"
    except CheckpointError as exc:
        if "bad magic" not in str(exc):
            raise
        cfg = load_config(src)
        state, origin = initial_condition(cfg), "config"
    p = cfg.params()
    sp = np.asarray(p.model.sigma_prime(state.gamma), float)
    rep = certify_cells(state.h, state.gamma, sp, p.D, alpha, n_lambda)
    rep.update(source=origin, path=str(src), t=state.t)
    return rep


# --- sweeps ------------------------------------------------------------------------

_SPACE = re.compile(r"^(lin|geom)space\(\s*([^,]+),\s*([^,]+),\s*(\d+)\s*\)$")


def parse_grid_spec(text):
    """Lines ``block.key = v1, v2, ...`` or ``block.key = geomspace(a, b, n)``."""
    grid = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected 'block.key = values'", line=lineno)
        key, rhs = (s.strip() for s in line.split("=", 1))
        m = _SPACE.match(rhs)
        if m:
            fn = np.linspace if m.group(1) == "lin" else np.geomspace
            vals = [repr(float(v)) for v in fn(float(m.group(2)), float(m.group(3)),
                                               int(m.group(4)))]
        else:
            vals = [v.strip() for v in rhs.split(",") if v.strip()]
        if not vals:
            raise ConfigError("no values", key=key, line=lineno)
        grid[key] = vals
    n = math.prod(len(v) for v in grid.values()) if grid else 0
    if n > 10_000:
        raise ConfigError(f"{n} combinations exceed the limit of 10000")
    return grid


def _sweep_job(job):
    idx, template_text, overrides, mode, out_root = job
    row = {"index": idx, "params": overrides}
    try:
        cfg = parse_config(template_text).with_values(overrides)
    except ConfigError as exc:
        row.update(status="error", error=_error_record(exc, EXIT_CONFIG)["error"])
        return row
    try:
        if mode == "stability":
            p = cfg.params()
            eq = Equilibrium(cfg.scenario.h_mean, cfg.scenario.gamma_mean)
            n = min(cfg.grid.n, cfg.stability.n_max)
            row["summary"] = spectral_bound(eq, p, Grid(cfg.grid.L, n), cfg.stability.q).as_dict()
            row["status"] = "ok"
        else:
            cfg = cfg.with_values({"output.name": f"{cfg.output.name}_{idx:04d}"})
            res = run(cfg, Path(out_root))
            row["summary"] = res.summary
            row["status"] = res.summary.get("status", "ok")
            row["exit_code"] = res.exit_code
    except Exception as exc:  # row-level record, sweep continues
        row.update(status="error", error={"type": type(exc).__name__, "message": str(exc)})
    return row


def sweep(template: RunConfig, grid: dict, mode="simulate", out_dir=None, workers=1):
    """Cartesian product of the grid, run independently, rows in product order."""
    if mode not in ("simulate", "stability"):
        raise ValueError(f"unknown sweep mode {mode!r}")
    keys = list(grid)
    combos = [dict(zip(keys, vals)) for vals in itertools.product(*(grid[k] for k in keys))]
    out = Path(out_dir) if out_dir is not None else output_dir(template)
    if mode == "simulate":
        out.mkdir(parents=True, exist_ok=True)
    text = template.to_text()
    jobs = [(i, text, c, mode, str(out)) for i, c in enumerate(combos)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            rows = list(ex.map(_sweep_job, jobs))
    else:
        rows = [_sweep_job(j) for j in jobs]
    report = {"mode": mode, "keys": keys, "n_runs": len(rows),
              "n_failed": sum(r["status"] == "error" for r in rows), "rows": rows}
    if mode == "simulate":
        write_json(out / f"{template.output.name}_sweep.json", report)
    return report
