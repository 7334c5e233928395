"""Numerical certification of parameter ellipticity and the Lopatinskii-Shapiro condition.

With frozen coefficients the leading operator has the principal symbol

    a(xi) = -[[a11 xi^4, a12 xi^2], [a21 xi^4, a22 xi^2]]

    a11 = h^3/3, a12 = -h^2 sigma'(G)/2, a21 = h^2 G/2, a22 = D - h G sigma'(G)

and d = a11 a22 - a12 a21 > 0.  The symbol condition asks that det(lam - a(xi))
has only real negative roots in lam.  The boundary condition is checked through the
half-line ODE: with z = Lambda^2 the characteristic polynomial reduces to the
cubic p(z) = d z^3 - lam a11 z^2 + lam a22 z - lam^2, which must have no roots
on (-inf, 0]; then the sextic splits 3/3 and the decaying modes are fixed by
the data (u1', u1''', u1^(5)) at the wall.

All polynomial roots come from companion-matrix eigenvalues.  The
``oracle_*`` helpers use different polynomials/matrices and serve as
independent cross-checks.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfluentRootsError, DomainError

# classification margin for "strictly" positive/negative real parts
MARGIN = 1e-10
# roots this close to the imaginary axis get the "marginal" flag
MARGINAL = 1e-9
# Hadamard-normalized determinant below this counts as a violation
DET_TOL = 1e-10


@dataclass(frozen=True)
class FrozenCoefficients:
    a11: float
    a12: float
    a21: float
    a22: float

    @property
    def d(self):
        return self.a11 * self.a22 - self.a12 * self.a21

    def is_admissible(self):
        return (self.a11 > 0 and self.a21 > 0 and self.a22 > 0 and self.a12 >= 0
                and self.d > 0)

    def as_dict(self):
        return {**asdict(self), "d": self.d}


@dataclass(frozen=True)
class DouglisNirenbergOrders:
    l: tuple = (0, 0)
    m: tuple = (4, 2)
    r: tuple = (-3, -1, -1)
    # orders of A_ij and B_ik (B = [[dx, 0], [0, dx], [dx^3, 0]])
    a_orders: tuple = ((4, 2), (4, 2))
    b_orders: tuple = ((1, None), (None, 1), (3, None))

    def check(self):
        ok_a = all(self.a_orders[i][j] <= self.l[i] + self.m[j] for i in range(2) for j in range(2))
        ok_b = all(o is None or o <= self.r[i] + self.m[k]
                   for i, row in enumerate(self.b_orders) for k, o in enumerate(row))
        return ok_a and ok_b


def freeze(h, gamma, sigma_prime, D):
    """Symbol coefficients at point values; sigma_prime is sigma'(gamma)."""
    if not (h > 0 and gamma > 0):
        raise DomainError("freeze needs h > 0 and gamma > 0")
    if not D > 0:
        raise DomainError("freeze needs D > 0")
    c = FrozenCoefficients(h ** 3 / 3.0, -0.5 * h * h * sigma_prime, 0.5 * h * h * gamma,
                           D - h * gamma * sigma_prime)
    if not c.d > 0:
        raise DomainError(f"determinant d = {c.d} is not positive (sigma' > 0?)")
    return c


def freeze_params(h, gamma, params):
    """freeze() with sigma' and D taken from PhysicalParams."""
    return freeze(h, gamma, float(params.model.sigma_prime(gamma)), params.D)


def freeze_state(state, params):
    """FrozenCoefficients at every cell of a state."""
    sp = np.asarray(params.model.sigma_prime(state.gamma), dtype=float)
    return [freeze(float(h), float(g), float(s), params.D)
            for h, g, s in zip(state.h, state.gamma, sp)]


def symbol_matrix(c: FrozenCoefficients, xi):
    x2 = xi * xi
    x4 = x2 * x2
    return -np.array([[c.a11 * x4, c.a12 * x2], [c.a21 * x4, c.a22 * x2]])


# --- symbol roots ----------------------------------------------------------

def c1_roots(c: FrozenCoefficients, xi):
    """Roots (lam_plus, lam_minus) of det(lam - a(xi)) = lam^2 + s lam + d xi^6.

    lam_minus from the quadratic formula, lam_plus = d xi^6 / lam_minus to
    avoid cancellation.  The discriminant is evaluated in the manifestly
    nonnegative form (a11 xi^4 - a22 xi^2)^2/4 + a12 a21 xi^6.
    """
    if xi == 0:
        raise DomainError("c1_roots needs xi != 0")
    return _c1_roots(c.a11, c.a12, c.a21, c.a22, xi)


def _c1_roots(a11, a12, a21, a22, xi):
    x2 = xi * xi
    s = a11 * x2 * x2 + a22 * x2
    disc = 0.25 * (a11 * x2 * x2 - a22 * x2) ** 2 + a12 * a21 * x2 ** 3
    # a negative discriminant (inadmissible input) gives NaN, flagged by the callers
    with np.errstate(invalid="ignore"):
        lam_minus = -0.5 * s - np.sqrt(disc)
    d = a11 * a22 - a12 * a21
    lam_plus = d * x2 ** 3 / lam_minus
    return lam_plus, lam_minus


def oracle_c1_roots(c: FrozenCoefficients, xi):
    """Eigenvalues of the symbol matrix, sorted descending (independent route)."""
    ev = np.linalg.eigvals(symbol_matrix(c, xi))
    return tuple(np.sort_complex(ev)[::-1])


# --- boundary ODE ----------------------------------------------------------

def cubic_coefficients(c: FrozenCoefficients, lam):
    """Coefficients of p(z), highest degree first."""
    return np.array([c.d, -lam * c.a11, lam * c.a22, -lam * lam], dtype=complex)


def companion_roots(coeffs):
    """Roots of a polynomial (highest degree first) as companion-matrix eigenvalues.

    Works on stacked coefficient rows: coeffs has shape (..., deg+1).
    """
    coeffs = np.asarray(coeffs, dtype=complex)
    deg = coeffs.shape[-1] - 1
    monic = coeffs[..., 1:] / coeffs[..., :1]
    comp = np.zeros(coeffs.shape[:-1] + (deg, deg), dtype=complex)
    comp[..., 0, :] = -monic
    idx = np.arange(deg - 1)
    comp[..., idx + 1, idx] = 1.0
    return np.linalg.eigvals(comp)


def cubic_roots(c: FrozenCoefficients, lam):
    if lam == 0:
        raise DomainError("cubic_roots needs lambda != 0")
    return companion_roots(cubic_coefficients(c, complex(lam)))


def has_nonpositive_real_root(z, scale=None):
    """True when some root lies on (-inf, 0] up to the classification margin."""
    z = np.asarray(z, dtype=complex)
    scale = np.max(np.abs(z), axis=-1, keepdims=True) if scale is None else scale
    on_axis = np.abs(z.imag) <= MARGIN * scale
    return np.any(on_axis & (z.real <= MARGIN * scale), axis=-1)


def sextic_coefficients(c: FrozenCoefficients, lam):
    """Lambda^6 - (lam/d) a11 Lambda^4 + (lam/d) a22 Lambda^2 - lam^2/d, highest first."""
    d = c.d
    return np.array([1.0, 0.0, -lam * c.a11 / d, 0.0, lam * c.a22 / d, 0.0, -lam * lam / d],
                    dtype=complex)


@dataclass
class CharPolyAnalysis:
    lam: complex
    roots_z: np.ndarray
    roots_Lambda: np.ndarray
    n_pos: int
    n_neg: int
    marginal: bool
    boundary_det: complex | None = None
    coefficients: FrozenCoefficients | None = field(default=None, repr=False)

    @property
    def decaying(self):
        """The roots with negative real part (principal roots negated)."""
        return self.roots_Lambda[3:]


def sextic_split(c: FrozenCoefficients, lam):
    """Lambda = +/- sqrt(z) for the cubic roots, classified by sign of real part.

    ``roots_Lambda`` lists the three principal square roots first (real part
    >= 0) and their negatives after.
    """
    lam = complex(lam)
    if lam == 0:
        raise DomainError("sextic_split needs lambda != 0")
    if lam.real < 0:
        raise DomainError("sextic_split needs Re(lambda) >= 0 (sector of angle <= pi/2)")
    z = cubic_roots(c, lam)
    root = np.sqrt(z)
    Lam = np.concatenate([root, -root])
    scale = np.max(np.abs(Lam))
    n_pos = int(np.sum(Lam.real > MARGIN * scale))
    n_neg = int(np.sum(Lam.real < -MARGIN * scale))
    marginal = bool(np.any(np.abs(Lam.real) <= MARGINAL * scale))
    return CharPolyAnalysis(lam, z, Lam, n_pos, n_neg, marginal, coefficients=c)


def boundary_matrix(decaying):
    Lam = np.asarray(decaying, dtype=complex)
    return np.column_stack([Lam, Lam ** 3, Lam ** 5])


def boundary_solvability(analysis: CharPolyAnalysis, rtol=1e-12):
    """Determinant of rows (Lambda_k, Lambda_k^3, Lambda_k^5) over the decaying roots."""
    if analysis.n_neg != 3:
        raise DomainError(f"need exactly three decaying roots, got {analysis.n_neg}")
    Lam = analysis.decaying
    scale = np.max(np.abs(Lam))
    for i in range(3):
        for j in range(i + 1, 3):
            if abs(Lam[i] - Lam[j]) <= rtol * scale:
                raise ConfluentRootsError(
                    f"decaying roots {Lam[i]:.6g} and {Lam[j]:.6g} coincide; "
                    "the exponential ansatz is incomplete")
    det = complex(np.linalg.det(boundary_matrix(Lam)))
    analysis.boundary_det = det
    return det


def normalized_boundary_det(decaying):
    """|det| divided by the product of row norms (Hadamard bound), in [0, 1]."""
    B = boundary_matrix(decaying)
    return float(abs(np.linalg.det(B)) / np.prod(np.linalg.norm(B, axis=-1)))


# --- independent oracles -----------------------------------------------------

def oracle_sextic_roots(c: FrozenCoefficients, lam):
    """Roots of the sextic from its own 6x6 companion matrix."""
    return companion_roots(sextic_coefficients(c, complex(lam)))


def match_multisets(a, b):
    """Largest relative distance after greedy nearest matching of two root lists."""
    a = list(np.asarray(a, dtype=complex))
    b = list(np.asarray(b, dtype=complex))
    if len(a) != len(b):
        raise ValueError("root lists differ in length")
    worst = 0.0
    for x in a:
        k = int(np.argmin([abs(x - y) for y in b]))
        y = b.pop(k)
        worst = max(worst, abs(x - y) / max(abs(y), 1e-300))
    return worst


def real_root_candidates(c: FrozenCoefficients, lam):
    """Real roots of p allowed by the split into real and imaginary parts.

    For lam = a + ib with b != 0 a real root must solve
    -a11 z^2 + a22 z - 2a = 0; returns those candidates with p(z) ~ 0.
    For real lam returns the real roots of the real cubic.
    """
    lam = complex(lam)
    a, b = lam.real, lam.imag
    if b == 0:
        z = np.roots([c.d, -a * c.a11, a * c.a22, -a * a])
        return np.sort(z[np.abs(z.imag) <= 1e-12 * max(1.0, np.max(np.abs(z)))].real)
    cand = np.roots([-c.a11, c.a22, -2.0 * a])
    cand = cand[np.abs(cand.imag) <= 1e-12 * max(1.0, np.max(np.abs(cand)))].real
    p = np.polyval(cubic_coefficients(c, lam), cand)
    scale = np.polyval(np.abs(cubic_coefficients(c, lam)), np.abs(cand))
    return np.sort(cand[np.abs(p) <= 1e-9 * scale])


# --- scans -------------------------------------------------------------------

def sector_lambdas(alpha, n_lambda, r_min=1e-3, r_max=1e3):
    """lam on the rays arg in {0, +-alpha/2, +-alpha} at log-spaced moduli."""
    per_ray = max(1, n_lambda // 5)
    radii = np.geomspace(r_min, r_max, per_ray)
    angles = np.array([0.0, alpha / 2, -alpha / 2, alpha, -alpha])
    lam = (radii[None, :] * np.exp(1j * angles[:, None])).ravel()
    # the rays at +-pi/2 must be exactly imaginary
    on_axis = np.isclose(np.abs(np.angle(lam)), np.pi / 2, rtol=0, atol=1e-15)
    lam[on_axis] = 1j * lam[on_axis].imag
    return lam


def batch_certify(a11, a12, a21, a22, lam, xi):
    """Vectorized checks over coefficient draws x lambda samples x xi samples.

    Coefficient arrays have shape (m,); lam and xi are 1-D.  Returns a dict
    of boolean violation masks and the extreme observed margins.
    """
    a11, a12, a21, a22 = (np.asarray(a, dtype=float)[:, None] for a in (a11, a12, a21, a22))
    d = a11 * a22 - a12 * a21
    xi = np.asarray(xi, dtype=float)[None, :]
    lp, lm = _c1_roots(a11, a12, a21, a22, xi)
    c1_bad = ~((lp < 0) & (lm < 0) & np.isfinite(lp) & np.isfinite(lm))

    lam = np.asarray(lam, dtype=complex)[None, :]
    coeffs = np.stack(np.broadcast_arrays(d + 0j, -lam * a11, lam * a22, -lam * lam), axis=-1)
    z = companion_roots(coeffs)  # (m, nl, 3)
    cubic_bad = has_nonpositive_real_root(z)
    root = np.sqrt(z)
    Lam = np.concatenate([root, -root], axis=-1)
    scale = np.max(np.abs(Lam), axis=-1, keepdims=True)
    n_pos = np.sum(Lam.real > MARGIN * scale, axis=-1)
    n_neg = np.sum(Lam.real < -MARGIN * scale, axis=-1)
    split_bad = (n_pos != 3) | (n_neg != 3)
    dec = -root
    B = np.stack([dec, dec ** 3, dec ** 5], axis=-1)
    det = np.abs(np.linalg.det(B)) / np.prod(np.linalg.norm(B, axis=-1), axis=-1)
    det_bad = ~(det > DET_TOL)
    return {
        "c1": c1_bad, "cubic": cubic_bad, "split": split_bad, "boundary": det_bad,
        "roots_z": z, "min_norm_det": float(np.min(det)),
        "max_c1_root": float(np.max(np.maximum(lp, lm))),
    }


def sector_scan(c: FrozenCoefficients, alpha=np.pi / 2, n_lambda=64, n_xi=32,
                xi_range=(1e-2, 1e2), lam_range=(1e-3, 1e3)):
    """Run every check on the sector and wavenumber samples; violations are report content."""
    if not 0 <= alpha <= np.pi / 2:
        raise DomainError("alpha must lie in [0, pi/2]")
    lam = sector_lambdas(alpha, n_lambda, *lam_range) if alpha > 0 else \
        np.geomspace(*lam_range, max(1, n_lambda // 5)).astype(complex)
    lam = np.unique(lam)
    xi = np.geomspace(*xi_range, n_xi)
    violations = []
    for x in xi:
        lp, lm = _c1_roots(c.a11, c.a12, c.a21, c.a22, x)
        if not (lp < 0 and lm < 0):
            roots = oracle_c1_roots(c, x)
            violations.append({"check": "c1", "xi": float(x), "roots": [_cplx(r) for r in roots]})
    for l in lam:
        try:
            an = sextic_split(c, l)
        except DomainError as exc:
            violations.append({"check": "sextic", "lambda": _cplx(l), "error": str(exc)})
            continue
        if has_nonpositive_real_root(an.roots_z):
            violations.append({"check": "cubic", "lambda": _cplx(l),
                               "roots_z": [_cplx(v) for v in an.roots_z]})
        if an.n_pos != 3 or an.n_neg != 3:
            violations.append({"check": "split", "lambda": _cplx(l), "n_pos": an.n_pos,
                               "n_neg": an.n_neg, "marginal": an.marginal})
            continue
        try:
            boundary_solvability(an)
        except ConfluentRootsError as exc:
            violations.append({"check": "boundary", "lambda": _cplx(l), "error": str(exc)})
            continue
        nd = normalized_boundary_det(an.decaying)
        if not nd > DET_TOL:
            violations.append({"check": "boundary", "lambda": _cplx(l), "normalized_det": nd})
    return {
        "coefficients": c.as_dict(),
        "admissible": c.is_admissible(),
        "alpha": float(alpha),
        "n_lambda": int(lam.size),
        "n_xi": int(xi.size),
        "n_violations": len(violations),
        "violations": violations,
        "certified": len(violations) == 0,
    }


def _cplx(v):
    v = complex(v)
    return [v.real, v.imag]


def random_admissible(rng, m):
    """Random (h, Gamma, D, sigma') draws over the admissible box."""
    h = rng.uniform(0.1, 10.0, m)
    g = rng.uniform(0.1, 10.0, m)
    D = rng.uniform(0.01, 10.0, m)
    sp = rng.uniform(-10.0, 0.0, m)
    return h ** 3 / 3.0, -0.5 * h * h * sp, 0.5 * h * h * g, D - h * g * sp
