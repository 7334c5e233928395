"""Grid, state and the conservative finite-volume fluxes of the surfactant thin-film system.

Cells j = 0..n-1 have centers x_j = (j + 1/2) dx.  Faces f = 0..n sit between
cells f-1 and f; faces 0 and n are the walls.  Both equations are written in
divergence form,

    h_t = -d/dx jh,       jh = h^3/3 h_xxx + h^2/2 sigma'(G) G_x
    G_t = -d/dx jg,       jg = h^2 G/2 h_xxx + h G sigma'(G) G_x - D G_x

so that the wall fluxes are exactly zero and mass is conserved to round-off.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import PositivityError
from .surfactant import SurfactantModel

NGHOST = 3


@dataclass(frozen=True)
class Grid:
    L: float = 1.0
    n: int = 256

    def __post_init__(self):
        if not self.L > 0:
            raise ValueError("domain length L must be positive")
        if int(self.n) != self.n or self.n < 8:
            raise ValueError("grid needs n >= 8 cells")

    @property
    def dx(self):
        return self.L / self.n

    @property
    def x(self):
        return (np.arange(self.n) + 0.5) * self.dx

    @property
    def faces(self):
        return np.arange(self.n + 1) * self.dx


@dataclass
class State:
    h: np.ndarray
    gamma: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.h = np.asarray(self.h, dtype=float)
        self.gamma = np.asarray(self.gamma, dtype=float)
        if self.h.shape != self.gamma.shape or self.h.ndim != 1:
            raise ValueError("h and gamma must be 1-D arrays of equal length")

    @property
    def n(self):
        return self.h.size

    def copy(self):
        return State(self.h.copy(), self.gamma.copy(), self.t)

    def is_positive(self):
        return bool(np.all(np.isfinite(self.h)) and np.all(np.isfinite(self.gamma))
                    and np.all(self.h > 0) and np.all(self.gamma > 0))

    def check_positive(self):
        if not self.is_positive():
            raise PositivityError(
                f"state outside the positivity cone (min h = {np.min(self.h):.3e}, "
                f"min gamma = {np.min(self.gamma):.3e})")

    def pack(self):
        """Interleaved unknown vector (h0, g0, h1, g1, ...), the banded ordering."""
        u = np.empty(2 * self.n)
        u[0::2] = self.h
        u[1::2] = self.gamma
        return u

    @classmethod
    def unpack(cls, u, t=0.0):
        return cls(u[0::2].copy(), u[1::2].copy(), t)


@dataclass(frozen=True)
class PhysicalParams:
    D: float = 1.0
    model: SurfactantModel = field(default_factory=SurfactantModel)
    grid: Grid = field(default_factory=Grid)
    averaging: str = "arithmetic"

    def __post_init__(self):
        if not self.D > 0:
            raise ValueError("surface diffusion D must be positive")
        if self.averaging not in ("arithmetic", "harmonic"):
            raise ValueError(f"unknown face averaging {self.averaging!r}")


def ghost_extend(s: State, grid: Grid | None = None):
    """Even reflection with three ghost cells per side: ghost[-k] = field[k-1]."""
    return _reflect(s.h), _reflect(s.gamma)


def _reflect(a):
    return np.concatenate([a[NGHOST - 1::-1], a, a[:-NGHOST - 1:-1]])


def third_derivative_at_faces(h_ext, dx):
    """(-h[f-2] + 3h[f-1] - 3h[f] + h[f+1]) / dx^3 at every face f = 0..n."""
    e = h_ext
    m = e.size - 2 * NGHOST
    # face f uses extended indices f+1 .. f+4; pairing the differences makes
    # wall faces of reflected data exactly zero
    return ((e[4:m + 5] - e[1:m + 2]) + 3.0 * (e[2:m + 3] - e[3:m + 4])) / dx ** 3


def face_average(left, right, averaging="arithmetic"):
    if averaging == "harmonic":
        return 2.0 * left * right / (left + right)
    return 0.5 * (left + right)


class FaceFields(NamedTuple):
    """Face values shared by the fluxes, their Jacobian and the dissipation quadrature.

    Arrays have length n+1; the wall entries carry hf, gf from the reflected
    neighbor and zero derivatives.
    """
    hf: np.ndarray
    gf: np.ndarray
    gx: np.ndarray
    h3: np.ndarray
    sp: np.ndarray


def face_fields(s: State, p: PhysicalParams) -> FaceFields:
    dx = p.grid.dx
    he, ge = ghost_extend(s)
    left = slice(NGHOST - 1, NGHOST + s.n)
    right = slice(NGHOST, NGHOST + s.n + 1)
    hf = face_average(he[left], he[right], p.averaging)
    gf = face_average(ge[left], ge[right], p.averaging)
    gx = (ge[right] - ge[left]) / dx
    h3 = third_derivative_at_faces(he, dx)
    gx[0] = gx[-1] = 0.0
    h3[0] = h3[-1] = 0.0
    sp = np.asarray(p.model.sigma_prime(gf), dtype=float)
    return FaceFields(hf, gf, gx, h3, sp)


class FluxPair(NamedTuple):
    jh: np.ndarray
    jgamma: np.ndarray


def compute_fluxes(s: State, p: PhysicalParams) -> FluxPair:
    if s.n != p.grid.n:
        raise ValueError(f"state has {s.n} cells, grid has {p.grid.n}")
    s.check_positive()
    ff = face_fields(s, p)
    jh, jg = _fluxes_from_faces(ff, p.D)
    return FluxPair(jh, jg)


def _fluxes_from_faces(ff: FaceFields, D):
    hf, gf, gx, h3, sp = ff
    marangoni = sp * gx
    jh = hf ** 3 / 3.0 * h3 + 0.5 * hf ** 2 * marangoni
    jg = 0.5 * hf ** 2 * gf * h3 + hf * gf * marangoni - D * gx
    jh[0] = jh[-1] = 0.0
    jg[0] = jg[-1] = 0.0
    return jh, jg


def divergence(flux: FluxPair, grid: Grid):
    dx = grid.dx
    return -np.diff(flux.jh) / dx, -np.diff(flux.jgamma) / dx


def rhs(s: State, p: PhysicalParams):
    """Semi-discrete right-hand side (dh/dt, dGamma/dt)."""
    return divergence(compute_fluxes(s, p), p.grid)


def mass(field, grid: Grid):
    return float(np.sum(field) * grid.dx)
