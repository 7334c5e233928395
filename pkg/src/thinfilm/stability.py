"""Linearization about a flat state, spectral bound on the zero-mean subspace, and A_q checks.

For the flat state (h*, G*), perturbations z = (z1, z2) obey

    z1_t = -a11 z1_xxxx + a12 z2_xx
    z2_t = -a21 z1_xxxx + a22 z2_xx

with the symbol entries from the ellipticity module.  Spatially, the
operators are the Neumann (even-reflection) difference Laplacian Lap and
Lap @ Lap, which is exactly what the conservative scheme reduces to at a
constant state.  The cosine modes diagonalize Lap with eigenvalues
-xi_k^2, xi_k^2 = (2/dx^2)(1 - cos(pi k / n)), so every 2x2 mode block can
be checked in closed form.

Matrices here use block ordering [z1; z2], not the interleaved order of the
Newton solver.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.linalg import eigvals, null_space

from .core import Grid, PhysicalParams
from .errors import DomainError, NumericalError

MAX_DENSE_N = 512


@dataclass(frozen=True)
class Equilibrium:
    h_star: float
    gamma_star: float

    def __post_init__(self):
        if not (self.h_star > 0 and self.gamma_star > 0):
            raise DomainError("flat equilibrium needs h* > 0 and gamma* > 0")


def coefficients(eq: Equilibrium, p: PhysicalParams):
    """(a11, a12, a21, a22) at the flat state."""
    h, g = eq.h_star, eq.gamma_star
    sp = float(p.model.sigma_prime(g))
    return h ** 3 / 3.0, -0.5 * h * h * sp, 0.5 * h * h * g, p.D - h * g * sp


def neumann_laplacian(grid: Grid):
    n, dx = grid.n, grid.dx
    lap = (np.diag(np.full(n - 1, 1.0), -1) + np.diag(np.full(n - 1, 1.0), 1)
           - 2.0 * np.eye(n))
    lap[0, 0] = lap[-1, -1] = -1.0
    return lap / dx ** 2


def mode_wavenumbers_sq(grid: Grid):
    k = np.arange(grid.n)
    return 2.0 / grid.dx ** 2 * (1.0 - np.cos(np.pi * k / grid.n))


def _check_size(grid: Grid):
    if grid.n > MAX_DENSE_N:
        raise ValueError(f"n = {grid.n} exceeds the dense limit {MAX_DENSE_N}; "
                         "use the nonlinear simulation path (simulate) for larger grids")


def assemble_linearized(eq: Equilibrium, p: PhysicalParams, grid: Grid | None = None):
    """Dense 2n x 2n matrix M with z_t = M z."""
    grid = p.grid if grid is None else grid
    _check_size(grid)
    a11, a12, a21, a22 = coefficients(eq, p)
    lap = neumann_laplacian(grid)
    bih = lap @ lap
    return np.block([[-a11 * bih, a12 * lap], [-a21 * bih, a22 * lap]])


def apply_linearized(eq: Equilibrium, p: PhysicalParams, z, grid: Grid | None = None):
    """Matrix-free action of the linearized operator via reflected differences."""
    grid = p.grid if grid is None else grid
    n, dx = grid.n, grid.dx
    z = np.asarray(z, dtype=float)
    z1, z2 = z[:n], z[n:]
    a11, a12, a21, a22 = coefficients(eq, p)

    def lap(v):
        e = np.concatenate([v[:1], v, v[-1:]])
        return (e[:-2] - 2.0 * e[1:-1] + e[2:]) / dx ** 2

    b1 = lap(lap(z1))
    l2 = lap(z2)
    return np.concatenate([-a11 * b1 + a12 * l2, -a21 * b1 + a22 * l2])


def mode_eigenvalues(eq: Equilibrium, p: PhysicalParams, grid: Grid | None = None):
    """Closed-form eigenvalues from the 2x2 block of every cosine mode, shape (n, 2)."""
    grid = p.grid if grid is None else grid
    a11, a12, a21, a22 = coefficients(eq, p)
    x2 = mode_wavenumbers_sq(grid)
    tr = -(a11 * x2 * x2 + a22 * x2)
    det = (a11 * a22 - a12 * a21) * x2 ** 3
    disc = np.sqrt(np.maximum(0.25 * (a11 * x2 * x2 - a22 * x2) ** 2 + a12 * a21 * x2 ** 3, 0.0))
    lm = 0.5 * tr - disc
    with np.errstate(divide="ignore", invalid="ignore"):
        lp = np.where(lm != 0, det / lm, 0.0)
    return np.column_stack([lp, lm])


def zero_mean_basis(n):
    """Orthonormal basis (2n x (2n-2)) of block vectors whose two fields have zero mean."""
    c = np.zeros((2, 2 * n))
    c[0, :n] = 1.0
    c[1, n:] = 1.0
    return null_space(c)


def project_zero_mean(obj):
    """Vectors: subtract each field's mean.  Square matrices: restriction Q^T M Q."""
    a = np.asarray(obj, dtype=float)
    if a.ndim == 1:
        if a.size % 2:
            raise ValueError("block vector must have even length")
        n = a.size // 2
        out = a.copy()
        out[:n] -= out[:n].mean()
        out[n:] -= out[n:].mean()
        return out
    if a.ndim == 2 and a.shape[0] == a.shape[1] and a.shape[0] % 2 == 0:
        q = zero_mean_basis(a.shape[0] // 2)
        return q.T @ a @ q
    raise ValueError("expected a block vector or a square block matrix")


def _bound(eq, p, grid):
    m = project_zero_mean(assemble_linearized(eq, p, grid))
    try:
        ev = eigvals(m)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigensolver failed: {exc}", {"n": grid.n}) from exc
    if not np.all(np.isfinite(ev)):
        raise NumericalError("eigensolver returned nonfinite values", {"n": grid.n})
    return float(np.max(ev.real)), ev


# --- A_q -----------------------------------------------------------------------

@dataclass(frozen=True)
class StabilityMatrix:
    """Quadratic form controlling the weighted energy 1/2 (q|z1_x|^2 + h*|z2|^2).

    ``matrix`` is the form derived from the linearized system, acting on
    (z1_xxx, z2_x):

        [[q h^3/3,                  (q h^2 s' - h^3 G)/4],
         [(q h^2 s' - h^3 G)/4,     h D - h^2 G s'      ]]

    ``displayed`` is the matrix with diagonal (q h^3/3, h^2 G s' - h D) and
    off-diagonal (q h^2 s' + h^3 G)/4, kept for comparison; its (2,2) entry
    is never positive.
    """
    q: float
    matrix: tuple
    displayed: tuple

    @staticmethod
    def build(eq: Equilibrium, p: PhysicalParams, q):
        h, g, D = eq.h_star, eq.gamma_star, p.D
        sp = float(p.model.sigma_prime(g))
        off = 0.25 * (q * h * h * sp - h ** 3 * g)
        m = ((q * h ** 3 / 3.0, off), (off, h * D - h * h * g * sp))
        off_d = 0.25 * (q * h * h * sp + h ** 3 * g)
        disp = ((q * h ** 3 / 3.0, off_d), (off_d, h * h * g * sp - h * D))
        return StabilityMatrix(float(q), m, disp)


@dataclass(frozen=True)
class AqResult:
    definite: bool
    eigenvalues: tuple
    displayed_definite: bool
    displayed_eigenvalues: tuple
    matrix: StabilityMatrix


def _definite(m):
    (a, b), (_, c) = m
    return bool(a > 0 and a * c - b * b > 0)


def aq_check(eq: Equilibrium, p: PhysicalParams, q):
    """Definiteness by the 2x2 criterion (leading entry and determinant positive)."""
    if not q > 0:
        raise DomainError("q must be positive")
    sm = StabilityMatrix.build(eq, p, q)
    ev = tuple(float(v) for v in np.linalg.eigvalsh(np.array(sm.matrix)))
    evd = tuple(float(v) for v in np.linalg.eigvalsh(np.array(sm.displayed)))
    return AqResult(_definite(sm.matrix), ev, _definite(sm.displayed), evd, sm)


def q_windows(p: PhysicalParams, h_star=1.0):
    """Upper ends of the q-window at G* = 0 by three routes.

    stated: 16 D / (3 |s'(0)|), the closed form quoted with the matrix;
    displayed: positivity of the constant term of the displayed eigenvalue
    quadratic, q/3 h^4 D - q^2 h^4 s'(0)^2 / 6 > 0, i.e. 2 D / s'(0)^2;
    energy: det of ``StabilityMatrix.matrix`` > 0, i.e. 16 D / (3 s'(0)^2).
    h* cancels in the last two.  Infinite when s'(0) = 0.
    """
    # tabulated laws may start above 0: use the left end of the table
    sp0 = abs(float(p.model.sigma_prime(max(0.0, p.model.s_range[0]))))
    if sp0 == 0:
        return {"stated": np.inf, "displayed": np.inf, "energy": np.inf}
    D = p.D
    return {"stated": 16.0 * D / (3.0 * sp0),
            "displayed": 2.0 * D / sp0 ** 2,
            "energy": 16.0 * D / (3.0 * sp0 ** 2)}


@dataclass
class StabilityReport:
    spectral_bound: float
    omega_pred: float
    q_window_stated: tuple
    q_used: float
    Aq_definite: bool
    n_grid: int
    spectral_bound_coarse: float
    relative_change: float
    Aq_eigenvalues: tuple
    Aq_displayed_definite: bool
    q_windows: dict
    window_disagreement: bool
    h_star: float
    gamma_star: float

    def as_dict(self):
        d = asdict(self)
        d["q_window_stated"] = [0.0, _finite(self.q_window_stated[1])]
        d["q_windows"] = {k: _finite(v) for k, v in self.q_windows.items()}
        return d


def _finite(v):
    return None if not np.isfinite(v) else float(v)


def spectral_bound(eq: Equilibrium, p: PhysicalParams, grid: Grid | None = None, q=1.0):
    """Spectral bound at n and n/2 plus the A_q verdict at q."""
    grid = p.grid if grid is None else grid
    _check_size(grid)
    sb, _ = _bound(eq, p, grid)
    if grid.n // 2 >= 8:
        sb_c, _ = _bound(eq, p, Grid(grid.L, grid.n // 2))
    else:
        sb_c = float("nan")
    rel = abs(sb - sb_c) / abs(sb) if sb != 0 else float("inf")
    aq = aq_check(eq, p, q)
    w = q_windows(p, eq.h_star)
    finite = [v for v in w.values() if np.isfinite(v)]
    disagree = bool(finite and (max(finite) - min(finite)) > 1e-12 * max(finite))
    return StabilityReport(sb, -sb, (0.0, w["stated"]), float(q), aq.definite, grid.n, sb_c, rel,
                           aq.eigenvalues, aq.displayed_definite, w, disagree,
                           eq.h_star, eq.gamma_star)


def gamma_threshold_scan(h_star, p: PhysicalParams, grid: Grid | None = None, gammas=None):
    """Spectral bound over G* samples and the largest sampled G* with a negative bound."""
    grid = p.grid if grid is None else grid
    gammas = np.geomspace(1e-6, 10.0, 15) if gammas is None else np.sort(np.asarray(gammas, float))
    rows = []
    for g in gammas:
        try:
            sb, _ = _bound(Equilibrium(h_star, float(g)), p, grid)
            rows.append({"gamma_star": float(g), "spectral_bound": sb})
        except Exception as exc:  # recorded, scan continues
            rows.append({"gamma_star": float(g), "spectral_bound": None, "error": str(exc)})
    neg = [r["gamma_star"] for r in rows if r["spectral_bound"] is not None and r["spectral_bound"] < 0]
    return {"h_star": float(h_star), "n_grid": grid.n, "rows": rows,
            "epsilon_lower_estimate": max(neg) if neg else None}
