"""Conserved quantities, energy, dissipation terms and exponential decay fits.

The energy is E = 1/2 int |h_x|^2 dx + int Phi(Gamma) dx.  Along smooth
solutions

    dE/dt = -3/2 int (h^{3/2}/3 h_xxx + h^{1/2}/2 s_x)^2
            -1/2 int (h^{3/2}/2 h_xxx + h^{1/2} s_x)^2
            -1/24 int h^3 h_xxx^2 - 1/8 int h s_x^2 - D int Phi''(Gamma) Gamma_x^2

with s = sigma(Gamma).  The discrete terms below use the face stencils of
the flux computation, for which the h-part of the identity is exact in the
semi-discrete setting and the Gamma-part holds to O(dx^2).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .core import Grid, PhysicalParams, State, face_fields
from .errors import DomainError, FitError
from .surfactant import SurfactantModel

CSV_COLUMNS = ("t", "dt", "mass_h", "mass_gamma", "energy", "diss1", "diss2", "diss3",
               "diss4", "diss5", "diss_total", "dist_h_l2", "dist_gamma_l2", "dist_linf",
               "newton_iters")


def mean(field, grid: Grid):
    """Midpoint-rule average over the domain."""
    return float(np.sum(field) * grid.dx / grid.L)


def energy(s: State, model: SurfactantModel, grid: Grid):
    if np.any(s.gamma <= 0):
        raise DomainError("energy needs gamma > 0")
    dx = grid.dx
    hx = np.diff(s.h) / dx  # interior faces; wall faces vanish by reflection
    return float(0.5 * np.sum(hx * hx) * dx + np.sum(model.phi(s.gamma)) * dx)


def dissipation_terms(s: State, p: PhysicalParams):
    """The five nonpositive terms of dE/dt, each integrated over the faces."""
    s.check_positive()
    dx = p.grid.dx
    hf, gf, gx, h3, sp = face_fields(s, p)
    sx = sp * gx
    a = hf ** 1.5 * h3
    b = np.sqrt(hf) * sx
    terms = np.array([
        -1.5 * np.sum((a / 3.0 + b / 2.0) ** 2),
        -0.5 * np.sum((a / 2.0 + b) ** 2),
        -np.sum(a * a) / 24.0,
        -np.sum(b * b) / 8.0,
        -p.D * np.sum(p.model.phi_second(gf) * gx * gx),
    ]) * dx
    return terms


def energy_rate(s: State, p: PhysicalParams):
    """Exact time derivative of the discrete energy along the semi-discrete flow."""
    from .core import rhs

    dx = p.grid.dx
    dh, dg = rhs(s, p)
    hx = np.diff(s.h) / dx
    hx_t = np.diff(dh) / dx
    return float(np.sum(hx * hx_t) * dx + np.sum(p.model.phi_prime(s.gamma) * dg) * dx)


def distances(s: State, h_star, gamma_star, grid: Grid):
    dx = grid.dx
    dh = s.h - h_star
    dg = s.gamma - gamma_star
    return (float(np.sqrt(np.sum(dh * dh) * dx)), float(np.sqrt(np.sum(dg * dg) * dx)),
            float(max(np.max(np.abs(dh)), np.max(np.abs(dg)))))


def _gradient_l2(a, grid: Grid):
    ax = np.diff(a) / grid.dx
    return float(np.sqrt(np.sum(ax * ax) * grid.dx))


@dataclass
class TimeSeries:
    """Per-accepted-step diagnostics; ``initial`` holds the same quantities at t0."""

    params: PhysicalParams
    h_star: float
    gamma_star: float
    initial: dict
    rows: list = field(default_factory=list)
    grad: list = field(default_factory=list)
    n_rejected: int = 0
    initial_grad: tuple = (0.0, 0.0)

    @classmethod
    def start(cls, s: State, p: PhysicalParams):
        g = p.grid
        h_star, gamma_star = mean(s.h, g), mean(s.gamma, g)
        ts = cls(p, h_star, gamma_star, {})
        ts.initial = ts._row(s, 0.0, 0)
        ts.initial_grad = (_gradient_l2(s.h, g), _gradient_l2(s.gamma, g))
        return ts

    def _row(self, s: State, dt, iters):
        g = self.params.grid
        d = dissipation_terms(s, self.params)
        dh, dg, dinf = distances(s, self.h_star, self.gamma_star, g)
        return {
            "t": float(s.t), "dt": float(dt),
            "mass_h": float(np.sum(s.h) * g.dx), "mass_gamma": float(np.sum(s.gamma) * g.dx),
            "energy": energy(s, self.params.model, g),
            **{f"diss{k + 1}": float(d[k]) for k in range(5)},
            "diss_total": float(np.sum(d)),
            "dist_h_l2": dh, "dist_gamma_l2": dg, "dist_linf": dinf,
            "newton_iters": int(iters),
        }

    def record(self, s: State, report):
        self.rows.append(self._row(s, report.dt_used, report.newton_iters))
        g = self.params.grid
        self.grad.append((_gradient_l2(s.h, g), _gradient_l2(s.gamma, g)))

    def __len__(self):
        return len(self.rows)

    def column(self, name):
        return np.array([r[name] for r in self.rows], dtype=float)

    def truncate(self, t_max):
        keep = [i for i, r in enumerate(self.rows) if r["t"] <= t_max]
        self.rows = [self.rows[i] for i in keep]
        self.grad = [self.grad[i] for i in keep] if len(self.grad) >= len(keep) else []

    def to_csv(self, path=None):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow([_fmt(r[c]) for c in CSV_COLUMNS])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    @staticmethod
    def read_csv(path):
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
                raise ValueError(f"{path}: unexpected CSV header")
            return [{k: (int(v) if k == "newton_iters" else float(v)) for k, v in r.items()}
                    for r in reader]

    def conservation_drift(self):
        """Largest relative deviation of both masses from their initial values."""
        m0h, m0g = self.initial["mass_h"], self.initial["mass_gamma"]
        if not self.rows:
            return 0.0, 0.0
        mh, mg = self.column("mass_h"), self.column("mass_gamma")
        return (float(np.max(np.abs(mh - m0h)) / abs(m0h)),
                float(np.max(np.abs(mg - m0g)) / abs(m0g)))


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


@dataclass(frozen=True)
class DecayEstimate:
    omega_fit: float
    M_fit: float
    window: tuple
    r2: float
    norm: str = "l2"
    n_samples: int = 0

    def as_dict(self):
        return {"omega_fit": self.omega_fit, "M_fit": self.M_fit, "window": list(self.window),
                "r2": self.r2, "norm": self.norm, "n_samples": self.n_samples}


def norm_sequence(series: TimeSeries, norm="l2"):
    """Distance to the flat equilibrium along the series, for the chosen selector."""
    if norm == "l2":
        return np.hypot(series.column("dist_h_l2"), series.column("dist_gamma_l2"))
    if norm == "linf":
        return series.column("dist_linf")
    if norm == "h1":
        if len(series.grad) != len(series.rows):
            raise FitError("H1 selector needs in-memory gradient norms (not stored in CSV)")
        grad = np.asarray(series.grad)
        l2 = np.hypot(series.column("dist_h_l2"), series.column("dist_gamma_l2"))
        return np.sqrt(l2 ** 2 + grad[:, 0] ** 2 + grad[:, 1] ** 2)
    raise ValueError(f"unknown norm selector {norm!r}")


def fit_log_linear(t, y, window=None, initial_norm=None):
    """Least-squares fit of log y = c - omega t on the window.

    M_fit = exp(c) / initial_norm floored at 1 (raw prefactor when no
    initial norm is given).
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if window is None:
        if t.size == 0:
            raise FitError("empty series")
        window = (t[0] + 0.5 * (t[-1] - t[0]), t[-1])
    t0, t1 = window
    sel = (t >= t0) & (t <= t1)
    ts, ys = t[sel], y[sel]
    if ts.size < 10:
        raise FitError(f"need at least 10 samples in the fit window, got {ts.size}")
    if np.any(~np.isfinite(ys)) or np.any(ys <= 0):
        raise FitError("nonpositive norm in the fit window (converged to round-off?)")
    z = np.log(ys)
    A = np.column_stack([np.ones_like(ts), ts])
    (c, slope), *_ = np.linalg.lstsq(A, z, rcond=None)
    resid = z - (c + slope * ts)
    ss_tot = float(np.sum((z - z.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    r2 = min(max(r2, 0.0), 1.0)
    scale = 1.0 if initial_norm is None else float(initial_norm)
    return DecayEstimate(float(-slope), float(max(1.0, np.exp(c) / scale)),
                         (float(t0), float(t1)), r2, n_samples=int(ts.size))


def fit_decay(series: TimeSeries, norm="l2", window=None):
    y = norm_sequence(series, norm)
    init = series.initial
    if norm == "l2":
        y0 = float(np.hypot(init["dist_h_l2"], init["dist_gamma_l2"]))
    elif norm == "linf":
        y0 = init["dist_linf"]
    else:
        gh, gg = series.initial_grad
        y0 = float(np.sqrt(init["dist_h_l2"] ** 2 + init["dist_gamma_l2"] ** 2 + gh ** 2 + gg ** 2))
    est = fit_log_linear(series.column("t"), y, window, y0 if y0 > 0 else None)
    return DecayEstimate(est.omega_fit, est.M_fit, est.window, est.r2, norm, est.n_samples)
