"""Surface tension laws sigma(Gamma) and the entropy potential Phi.

Phi is fixed by Phi''(s) = -sigma'(s)/s together with the normalization
Phi(s_ref) = Phi'(s_ref) = 0 (s_ref = 1 when available) plus an additive
``phi_offset``.  The offset shifts the energy by ``L * phi_offset`` and has
no effect on any dissipation term.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import DomainError, ModelRangeError

# sigma' may be this positive at a knot before a table is rejected (spline round-off)
_MONOTONE_TOL = 1e-12


@dataclass(frozen=True)
class SurfactantModel:
    kind: str = "linear"
    sigma0: float = 1.0
    beta: float = 1.0
    phi_offset: float = 0.01
    table_s: np.ndarray | None = field(default=None, repr=False, compare=False)
    table_sigma: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in ("linear", "tabulated"):
            raise ValueError(f"unknown surface tension kind {self.kind!r}")
        if self.phi_offset < 0:
            raise ValueError("phi_offset must be nonnegative")
        if self.kind == "linear":
            if not self.sigma0 > 0:
                raise ValueError("sigma0 must be positive")
            if self.beta < 0:
                raise ValueError("beta must be nonnegative (sigma' <= 0)")
            return
        s = np.asarray(self.table_s, dtype=float)
        sig = np.asarray(self.table_sigma, dtype=float)
        if s.ndim != 1 or s.shape != sig.shape or s.size < 4:
            raise ValueError("tabulated sigma needs two equal-length columns with >= 4 rows")
        if s[0] < 0 or np.any(np.diff(s) <= 0):
            raise ValueError("table concentrations must be nonnegative and strictly increasing")
        spline = CubicSpline(s, sig)
        slope = spline(s, 1)
        if np.any(slope > _MONOTONE_TOL * max(1.0, np.max(np.abs(sig)))):
            bad = s[np.argmax(slope)]
            raise ValueError(f"tabulated sigma is increasing near s={bad:g} (sigma' > 0)")
        object.__setattr__(self, "table_s", s)
        object.__setattr__(self, "table_sigma", sig)
        object.__setattr__(self, "_spline", spline)
        object.__setattr__(self, "_phi_tables", _integrate_phi_tables(spline, s))

    @classmethod
    def linear(cls, sigma0=1.0, beta=1.0, phi_offset=0.01):
        return cls("linear", sigma0, beta, phi_offset)

    @classmethod
    def tabulated(cls, s, sigma, phi_offset=0.01):
        s = np.asarray(s, dtype=float)
        sigma = np.asarray(sigma, dtype=float)
        return cls("tabulated", float(sigma[0]), 0.0, phi_offset, s, sigma)

    @classmethod
    def from_table_file(cls, path, phi_offset=0.01):
        data = np.loadtxt(Path(path), delimiter=None, comments="#", ndmin=2)
        if data.shape[1] != 2:
            raise ValueError(f"{path}: expected two columns (s, sigma)")
        return cls.tabulated(data[:, 0], data[:, 1], phi_offset)

    @property
    def s_range(self):
        if self.kind == "linear":
            return 0.0, np.inf
        return float(self.table_s[0]), float(self.table_s[-1])

    def _check_range(self, s):
        s = _as_float(s)
        lo, hi = self.s_range
        if np.any(s < lo) or np.any(s > hi) or not np.all(np.isfinite(s)):
            raise ModelRangeError(f"concentration outside model range [{lo}, {hi}]")
        return s

    def sigma(self, s):
        s = self._check_range(s)
        if self.kind == "linear":
            return self.sigma0 - self.beta * s
        return self._spline(s)

    def sigma_prime(self, s):
        s = self._check_range(s)
        if self.kind == "linear":
            return np.full_like(s, -self.beta) if s.ndim else s.dtype.type(-self.beta)
        return self._spline(s, 1)

    def sigma_second(self, s):
        s = self._check_range(s)
        if self.kind == "linear":
            return np.zeros_like(s) if s.ndim else 0.0
        return self._spline(s, 2)

    def phi(self, s):
        s = _as_float(s)
        if np.any(s <= 0):
            raise DomainError("Phi is defined for s > 0 only")
        if self.kind == "linear":
            return self.beta * (s * np.log(s) - s + 1.0) + self.phi_offset
        self._check_range(s)
        psi, dpsi = _psi(self._phi_tables, s)
        sref = self._phi_tables["s_ref"]
        return psi - self._phi_tables["psi_ref"] - self._phi_tables["dpsi_ref"] * (s - sref) + self.phi_offset

    def phi_prime(self, s):
        s = _as_float(s)
        if np.any(s <= 0):
            raise DomainError("Phi' is defined for s > 0 only")
        if self.kind == "linear":
            return self.beta * np.log(s)
        self._check_range(s)
        _, dpsi = _psi(self._phi_tables, s)
        return dpsi - self._phi_tables["dpsi_ref"]

    def phi_second(self, s):
        s = _as_float(s)
        if np.any(s <= 0):
            raise DomainError("Phi'' is defined for s > 0 only")
        return -self.sigma_prime(s) / s

    def phi_infimum_shift(self):
        """Smallest offset keeping Phi > 0; zero for the convex normalization used here."""
        return 0.0

    def as_dict(self):
        d = {"kind": self.kind, "sigma0": self.sigma0, "beta": self.beta, "phi_offset": self.phi_offset}
        if self.kind == "tabulated":
            d["s_range"] = list(self.s_range)
        return d


def _as_float(s):
    # keeps extended precision inputs (np.longdouble) intact
    s = np.asarray(s)
    if not np.issubdtype(s.dtype, np.floating):
        s = s.astype(float)
    return s


def sigma_eval(model: SurfactantModel, s):
    return model.sigma(s)


def sigma_prime_eval(model: SurfactantModel, s):
    return model.sigma_prime(s)


def phi_eval(model: SurfactantModel, s):
    return model.phi(s)


# --- tabulated Phi ---------------------------------------------------------
#
# On spline piece i, sigma'(t) = q0 + q1 t + q2 t^2 in global t, so
# g(t) = -sigma'(t)/t integrates in closed form.  Psi is an antiderivative
# pair (Psi, Psi') accumulated at the right end of every piece, which is
# always > 0 even when the table starts at s = 0.

def _global_quadratics(spline):
    c = spline.c
    x = spline.x[:-1]
    b2, b1, b0 = 3.0 * c[0], 2.0 * c[1], c[2]
    return b0 - b1 * x + b2 * x * x, b1 - 2.0 * b2 * x, b2


def _g_int(t, q0, q1, q2):
    return -q0 * np.log(t) - q1 * t - 0.5 * q2 * t * t


def _t_int(t, q0, q1, q2):
    return -q0 * t - 0.5 * q1 * t * t - q2 * t ** 3 / 3.0


def _local(s, r, q0, q1, q2):
    """(int_r^s (s-t) g dt, int_r^s g dt)."""
    dg = _g_int(s, q0, q1, q2) - _g_int(r, q0, q1, q2)
    dt = _t_int(s, q0, q1, q2) - _t_int(r, q0, q1, q2)
    return s * dg - dt, dg


def _integrate_phi_tables(spline, knots):
    q0, q1, q2 = _global_quadratics(spline)
    right = knots[1:]
    m = right.size
    psi = np.zeros(m)
    dpsi = np.zeros(m)
    for i in range(1, m):
        a, b = right[i - 1], right[i]
        val, dval = _local(b, a, q0[i], q1[i], q2[i])
        psi[i] = psi[i - 1] + dpsi[i - 1] * (b - a) + val
        dpsi[i] = dpsi[i - 1] + dval
    tables = {"knots": knots, "right": right, "q": (q0, q1, q2), "psi": psi, "dpsi": dpsi}
    s_ref = float(np.clip(1.0, max(knots[0], 1e-300), knots[-1]))
    if s_ref <= 0:
        s_ref = float(right[0])
    p, dp = _psi(tables, np.array([s_ref]))
    tables.update(s_ref=s_ref, psi_ref=float(p[0]), dpsi_ref=float(dp[0]))
    return tables


def _psi(tables, s):
    s = np.asarray(s, dtype=float)
    knots = tables["knots"]
    idx = np.clip(np.searchsorted(knots, s, side="right") - 1, 0, knots.size - 2)
    q0, q1, q2 = (q[idx] for q in tables["q"])
    r = tables["right"][idx]
    val, dval = _local(s, r, q0, q1, q2)
    psi = tables["psi"][idx] + tables["dpsi"][idx] * (s - r) + val
    return psi, tables["dpsi"][idx] + dval
