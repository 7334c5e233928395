"""Backward Euler with Newton iteration on the banded Jacobian, and adaptive stepping.

Unknowns are interleaved (h_0, G_0, h_1, G_1, ...), which makes the Jacobian
banded with 5 sub- and 5 super-diagonals (h couples to cells j-2..j+2 through
the third-derivative stencil, Gamma to j-1..j+1).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack

from .core import PhysicalParams, State, face_fields, rhs
from .errors import DegeneracyStop, NumericalError, PositivityError

log = logging.getLogger(__name__)

KL = KU = 5
_MAX_BACKTRACKS = 8


@dataclass(frozen=True)
class IntegratorConfig:
    dt_init: float = 1e-6
    dt_min: float = 1e-12
    dt_max: float = 1e-3
    t_end: float = 1.0
    newton_tol: float = 1e-10
    newton_max_iters: int = 12
    safety: float = 0.9
    target_iters: int = 4

    def __post_init__(self):
        if not (0 < self.dt_min <= self.dt_init <= self.dt_max):
            raise ValueError("need 0 < dt_min <= dt_init <= dt_max")
        if not self.newton_tol > 0 or self.newton_max_iters < 1:
            raise ValueError("Newton tolerance and iteration limit must be positive")
        if not 0 < self.safety <= 1:
            raise ValueError("safety must lie in (0, 1]")
        if self.target_iters < 1:
            raise ValueError("target_iters must be >= 1")


@dataclass(frozen=True)
class StepReport:
    accepted: bool
    dt_used: float
    newton_iters: int
    residual_norm: float
    positivity_ok: bool
    reason: str = ""


def residual(s_new: State, s_old: State, dt: float, p: PhysicalParams):
    """Backward Euler residual (u_new - u_old)/dt - rhs(u_new), interleaved."""
    if s_new.n != s_old.n or s_new.n != p.grid.n:
        raise ValueError("states and grid disagree on the number of cells")
    dh, dg = rhs(s_new, p)
    r = np.empty(2 * s_new.n)
    r[0::2] = (s_new.h - s_old.h) / dt - dh
    r[1::2] = (s_new.gamma - s_old.gamma) / dt - dg
    return r


def _face_average_weights(a_left, a_right, averaging):
    if averaging == "harmonic":
        denom = (a_left + a_right) ** 2
        return 2.0 * a_right ** 2 / denom, 2.0 * a_left ** 2 / denom
    half = np.full_like(a_left, 0.5)
    return half, half


def flux_jacobian_entries(s: State, p: PhysicalParams):
    """Derivatives of (jh, jg) at interior faces with respect to every cell they touch.

    Returns (face, cell, var, djh, djg) arrays, var 0 = h and 1 = Gamma, with
    reflected cell indices already folded back into the domain.
    """
    n, dx, D = s.n, p.grid.dx, p.D
    hf, gf, gx, h3, sp = (a[1:n] for a in face_fields(s, p))
    spp = np.asarray(p.model.sigma_second(gf), dtype=float)
    f = np.arange(1, n)

    jh_hf = hf ** 2 * h3 + hf * sp * gx
    jh_gf = 0.5 * hf ** 2 * spp * gx
    jh_gx = 0.5 * hf ** 2 * sp
    jh_h3 = hf ** 3 / 3.0
    jg_hf = hf * gf * h3 + gf * sp * gx
    jg_gf = 0.5 * hf ** 2 * h3 + hf * sp * gx + hf * gf * spp * gx
    jg_gx = hf * gf * sp - D
    jg_h3 = 0.5 * hf ** 2 * gf

    hw_l, hw_r = _face_average_weights(s.h[f - 1], s.h[f], p.averaging)
    gw_l, gw_r = _face_average_weights(s.gamma[f - 1], s.gamma[f], p.averaging)

    faces, cells, var, djh, djg = [], [], [], [], []

    def add(cell, v, a, b):
        faces.append(f)
        cells.append(cell)
        var.append(np.full(f.size, v))
        djh.append(a)
        djg.append(b)

    for offset, w in zip((-2, -1, 0, 1), (-1.0, 3.0, -3.0, 1.0)):
        w = w / dx ** 3
        add(f + offset, 0, jh_h3 * w, jg_h3 * w)
    add(f - 1, 0, jh_hf * hw_l, jg_hf * hw_l)
    add(f, 0, jh_hf * hw_r, jg_hf * hw_r)
    add(f - 1, 1, jh_gf * gw_l - jh_gx / dx, jg_gf * gw_l - jg_gx / dx)
    add(f, 1, jh_gf * gw_r + jh_gx / dx, jg_gf * gw_r + jg_gx / dx)

    cells = np.concatenate(cells)
    # even reflection: cell -1 -> 0, cell n -> n-1
    cells = np.where(cells < 0, -cells - 1, cells)
    cells = np.where(cells >= n, 2 * n - 1 - cells, cells)
    return (np.concatenate(faces), cells, np.concatenate(var),
            np.concatenate(djh), np.concatenate(djg))


def jacobian(s: State, dt: float, p: PhysicalParams):
    """Analytic Jacobian of `residual` w.r.t. s_new in LAPACK band storage.

    Row i, column j of the matrix lives at ``ab[KU + i - j, j]``.
    """
    n, dx = s.n, p.grid.dx
    face, cell, var, djh, djg = flux_jacobian_entries(s, p)
    col = 2 * cell + var
    rows, cols, vals = [], [], []
    # face f is the right face of cell f-1 (+1/dx) and the left face of cell f (-1/dx)
    for comp, d in ((0, djh), (1, djg)):
        rows += [2 * (face - 1) + comp, 2 * face + comp]
        cols += [col, col]
        vals += [d / dx, -d / dx]
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    ab = np.zeros((KL + KU + 1, 2 * n))
    np.add.at(ab, (KU + rows - cols, cols), vals)
    ab[KU, :] += 1.0 / dt
    return ab


def banded_to_dense(ab, kl=KL, ku=KU):
    m = ab.shape[1]
    a = np.zeros((m, m))
    for k in range(-kl, ku + 1):
        row = ku - k
        if k >= 0:
            a[np.arange(m - k), np.arange(k, m)] = ab[row, k:]
        else:
            a[np.arange(-k, m), np.arange(m + k)] = ab[row, :m + k]
    return a


class BandedLU:
    """LU factorization of a band matrix (LAPACK gbtrf/gbtrs)."""

    def __init__(self, ab, kl=KL, ku=KU):
        self.kl, self.ku = kl, ku
        work = np.zeros((2 * kl + ku + 1, ab.shape[1]))
        work[kl:, :] = ab
        lu, piv, info = lapack.dgbtrf(work, kl, ku, overwrite_ab=1)
        if info != 0:
            raise NumericalError(
                "singular banded Jacobian" if info > 0 else f"dgbtrf argument error {info}",
                {"lapack_info": int(info), "pivot_row": int(info) - 1,
                 "max_abs_entry": float(np.max(np.abs(ab)))})
        self.lu, self.piv = lu, piv

    def solve(self, b):
        x, info = lapack.dgbtrs(self.lu, self.kl, self.ku, b, self.piv)
        if info != 0:
            raise NumericalError(f"dgbtrs argument error {info}")
        return x


def _scaled_norm(delta, u):
    """Size of a Newton correction relative to each field's magnitude."""
    nh = np.max(np.abs(delta[0::2])) / max(np.max(np.abs(u[0::2])), 1e-300)
    ng = np.max(np.abs(delta[1::2])) / max(np.max(np.abs(u[1::2])), 1e-300)
    return float(max(nh, ng))


def _positive(u):
    return bool(np.all(np.isfinite(u)) and np.all(u > 0))


def newton_solve(s_old: State, dt: float, p: PhysicalParams, cfg: IntegratorConfig):
    """One backward Euler step.

    The reported residual norm is the Newton-weighted residual
    ||J(u)^-1 R(u)|| scaled per field, i.e. the size of the next correction;
    the raw residual carries O(eps/dx^4) round-off and cannot reach 1e-10.
    Rejections (no convergence, stall, positivity) come back as
    ``accepted=False``; a singular factorization raises NumericalError.
    """
    s_old.check_positive()
    u_old = s_old.pack()
    u = u_old.copy()
    t_new = s_old.t + dt

    def res(v):
        return residual(State.unpack(v, t_new), s_old, dt, p)

    norm = np.inf
    for it in range(1, cfg.newton_max_iters + 1):
        r = res(u)
        if not np.all(np.isfinite(r)):
            return s_old, StepReport(False, dt, it, np.inf, True, "nonfinite residual")
        lu = BandedLU(jacobian(State.unpack(u, t_new), dt, p))
        delta = -lu.solve(r)
        norm = _scaled_norm(delta, u)
        if not np.isfinite(norm):
            return s_old, StepReport(False, dt, it, np.inf, True, "nonfinite correction")
        if norm <= cfg.newton_tol:
            u = u + delta
            ok = _positive(u)
            if not ok:
                return s_old, StepReport(False, dt, it, norm, False, "positivity")
            return State.unpack(u, t_new), StepReport(True, dt, it, norm, True)

        theta = 1.0
        for _ in range(_MAX_BACKTRACKS + 1):
            trial = u + theta * delta
            if _positive(trial):
                r_trial = res(trial)
                if np.all(np.isfinite(r_trial)):
                    next_norm = _scaled_norm(lu.solve(-r_trial), trial)
                    if next_norm < norm:
                        break
            theta *= 0.5
        else:
            positive = _positive(u + delta * 2.0 ** -_MAX_BACKTRACKS)
            reason = "stalled line search" if positive else "positivity"
            return s_old, StepReport(False, dt, it, norm, positive, reason)
        u = trial
    return s_old, StepReport(False, dt, cfg.newton_max_iters, norm, True, "max iterations")


def advance(s: State, p: PhysicalParams, cfg: IntegratorConfig, callbacks=(), series=None,
            dt=None):
    """Integrate to cfg.t_end.

    dt halves on rejection and grows by min(2, safety * target_iters / iters)
    after acceptance.  Each callback is called as ``cb(state, report, next_dt)``
    after every accepted step.  Returns (final_state, series, next_dt).
    Raises DegeneracyStop when dt falls below dt_min.
    """
    from .diagnostics import TimeSeries

    if not cfg.t_end > s.t:
        raise ValueError(f"t_end = {cfg.t_end} must exceed the initial time {s.t}")
    if s.n != p.grid.n:
        raise ValueError("initial state does not match the grid")
    if not s.is_positive():
        raise PositivityError("initial data outside the positivity cone (need h > 0, gamma > 0)")
    if series is None:
        series = TimeSeries.start(s, p)

    state = s
    dt = cfg.dt_init if dt is None else float(dt)
    t_tol = 1e-12 * max(1.0, abs(cfg.t_end))
    while cfg.t_end - state.t > t_tol:
        dt_step = min(dt, cfg.t_end - state.t)
        new, rep = newton_solve(state, dt_step, p, cfg)
        if not rep.accepted:
            series.n_rejected += 1
            dt = dt_step / 2.0
            log.debug("t=%.6g rejected (%s), dt -> %.3e", state.t, rep.reason, dt)
            if dt < cfg.dt_min:
                raise DegeneracyStop(
                    f"time step underflow at t={state.t:.6g} (dt={dt:.3e} < dt_min={cfg.dt_min:.3e}, "
                    f"last rejection: {rep.reason}, min h={np.min(state.h):.3e})",
                    state=state, series=series)
            continue
        state = new
        if dt_step == dt:
            grow = min(2.0, cfg.safety * cfg.target_iters / rep.newton_iters)
            if grow > 1.0:
                dt = min(dt * grow, cfg.dt_max)
        series.record(state, rep)
        for cb in callbacks:
            cb(state, rep, dt)
    return state, series, dt
