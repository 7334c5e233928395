import numpy as np
import pytest

from thinfilm.core import Grid, PhysicalParams, State, rhs
from thinfilm.ellipticity import c1_roots, freeze, symbol_matrix
from thinfilm.errors import DegeneracyStop, NumericalError, PositivityError
from thinfilm.integrator import (KL, KU, BandedLU, IntegratorConfig, advance, banded_to_dense,
                                 jacobian, newton_solve, residual)
from thinfilm.surfactant import SurfactantModel

from conftest import cosine_state, random_state


def test_config_validation():
    with pytest.raises(ValueError):
        IntegratorConfig(dt_init=1e-2, dt_max=1e-3)
    with pytest.raises(ValueError):
        IntegratorConfig(safety=1.5)
    with pytest.raises(ValueError):
        IntegratorConfig(newton_tol=0)


def test_residual_fixed_point_and_definition(params16, rng):
    flat = State(np.full(16, 0.8), np.full(16, 1.2))
    assert np.all(residual(flat, flat, 0.1, params16) == 0)
    s = random_state(rng, 16)
    r = residual(s, s, 0.1, params16)
    dh, dg = rhs(s, params16)
    np.testing.assert_array_equal(r[0::2], -dh)
    np.testing.assert_array_equal(r[1::2], -dg)


def test_residual_grid_mismatch(params16):
    with pytest.raises(ValueError):
        residual(State(np.ones(16), np.ones(16)), State(np.ones(17), np.ones(17)), 0.1, params16)


def test_residual_of_exact_solution_is_first_order():
    # the discrete solution of the linear Gamma diffusion (beta = 0, h flat) is known exactly
    g = Grid(1.0, 32)
    p = PhysicalParams(1.0, SurfactantModel.linear(1.0, 0.0), g)
    lam = -(2 / g.dx ** 2) * (1 - np.cos(np.pi / g.n))
    c = np.cos(np.pi * g.x)
    s0 = State(np.ones(32), 1 + 0.1 * c)
    norms = []
    for dt in (1e-3, 5e-4, 2.5e-4):
        s1 = State(np.ones(32), 1 + 0.1 * np.exp(lam * dt) * c, dt)
        norms.append(np.max(np.abs(residual(s1, s0, dt, p))))
    ratios = np.array(norms[:-1]) / norms[1:]
    np.testing.assert_allclose(ratios, 2.0, rtol=0.02)


@pytest.mark.parametrize("averaging", ["arithmetic", "harmonic"])
@pytest.mark.parametrize("model", [SurfactantModel.linear(1.0, 1.3),
                                   SurfactantModel.tabulated(np.linspace(0, 3, 61),
                                                             np.exp(-np.linspace(0, 3, 61)))])
def test_jacobian_matches_finite_differences(rng, averaging, model):
    p = PhysicalParams(0.8, model, Grid(1.0, 16), averaging)
    s_old = random_state(rng, 16)
    s = random_state(rng, 16)
    dt = 1e-3
    J = banded_to_dense(jacobian(s, dt, p))
    u = s.pack()
    for j in range(u.size):
        e = 1e-6 * (1 + abs(u[j]))
        up, um = u.copy(), u.copy()
        up[j] += e
        um[j] -= e
        col = (residual(State.unpack(up), s_old, dt, p) - residual(State.unpack(um), s_old, dt, p)) / (2 * e)
        assert np.max(np.abs(col - J[:, j])) <= 1e-5 * np.max(np.abs(col))


def test_jacobian_bandwidth(rng, params16):
    J = banded_to_dense(jacobian(random_state(rng, 16), 1e-3, params16))
    i, j = np.nonzero(J)
    assert np.max(i - j) <= KL and np.max(j - i) <= KU


def test_jacobian_gamma_block_is_diffusion():
    n, D, dt = 16, 0.6, 1e-3
    g = Grid(1.0, n)
    p = PhysicalParams(D, SurfactantModel.linear(1.0, 0.0), g)
    s = State(np.ones(n), 1 + 0.2 * np.cos(np.pi * g.x))
    J = banded_to_dense(jacobian(s, dt, p))
    block = J[1::2, 1::2]
    T = 2 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)
    T[0, 0] = T[-1, -1] = 1
    np.testing.assert_allclose(block, np.eye(n) / dt + D * T / g.dx ** 2, rtol=1e-12, atol=1e-8)


def test_jacobian_large_dt_limit(rng, params16):
    s = random_state(rng, 16)
    a = banded_to_dense(jacobian(s, 1e300, params16))
    b = banded_to_dense(jacobian(s, 1.0, params16)) - np.eye(32)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12 * np.max(np.abs(b)))


def test_banded_lu_solves(rng, params16):
    ab = jacobian(random_state(rng, 16), 1e-4, params16)
    b = rng.normal(size=32)
    x = BandedLU(ab).solve(b)
    np.testing.assert_allclose(banded_to_dense(ab) @ x, b, rtol=1e-9, atol=1e-9)


def test_banded_lu_singular():
    with pytest.raises(NumericalError) as exc:
        BandedLU(np.zeros((KL + KU + 1, 10)))
    assert exc.value.diagnostics["lapack_info"] > 0


def test_newton_flat_one_iteration(params16):
    flat = State(np.full(16, 1.0), np.full(16, 1.0))
    new, rep = newton_solve(flat, 0.5, params16, IntegratorConfig(dt_max=1.0))
    assert rep.accepted and rep.newton_iters == 1
    np.testing.assert_array_equal(new.h, flat.h)


def test_newton_small_perturbation():
    g = Grid(1.0, 64)
    p = PhysicalParams(1.0, SurfactantModel.linear(), g)
    s = cosine_state(g, 1e-3, 1e-3)
    new, rep = newton_solve(s, g.dx ** 4 / 10, p, IntegratorConfig())
    assert rep.accepted and rep.newton_iters <= 4
    assert rep.residual_norm <= 1e-10 and rep.positivity_ok


def test_newton_rejects_near_degenerate():
    g = Grid(1.0, 32)
    p = PhysicalParams(1.0, SurfactantModel.linear(), g)
    h = 1e-8 + np.exp(-(g.x / 0.1) ** 2)
    s = State(h, np.ones(32))
    _, rep = newton_solve(s, 1.0, p, IntegratorConfig(dt_max=1.0, newton_max_iters=6))
    assert not rep.accepted and rep.reason


def test_advance_flat():
    g = Grid(1.0, 32)
    p = PhysicalParams(1.0, SurfactantModel.linear(), g)
    s = State(np.full(32, 1.0), np.full(32, 0.5))
    out, series, _ = advance(s, p, IntegratorConfig(dt_init=1e-3, dt_max=0.1, t_end=1.0))
    assert np.max(np.abs(out.h - s.h)) <= 1e-12 and np.max(np.abs(out.gamma - s.gamma)) <= 1e-12
    assert series.n_rejected == 0


def test_advance_rejects_zero_gamma():
    g = Grid(1.0, 16)
    p = PhysicalParams(1.0, SurfactantModel.linear(), g)
    with pytest.raises(PositivityError):
        advance(State(np.ones(16), np.zeros(16)), p, IntegratorConfig())


def test_advance_needs_future_t_end(params16):
    with pytest.raises(ValueError):
        advance(State(np.ones(16), np.ones(16), 2.0), params16, IntegratorConfig())


def test_advance_energy_monotone_and_callbacks():
    g = Grid(1.0, 64)
    p = PhysicalParams(1.0, SurfactantModel.linear(), g)
    seen = []
    out, series, _ = advance(cosine_state(g), p, IntegratorConfig(dt_init=1e-5, t_end=0.05),
                             callbacks=[lambda s, r, dt: seen.append((s.t, r.accepted, dt))])
    assert len(seen) == len(series) and all(a for _, a, _ in seen)
    e = np.r_[series.initial["energy"], series.column("energy")]
    assert np.all(np.diff(e) <= 1e-10 * (1 + np.abs(e[1:])))
    assert np.all(np.diff(series.column("t")) > 0)


def test_degeneracy_stop_carries_state():
    g = Grid(1.0, 64)
    p = PhysicalParams(1.0, SurfactantModel.linear(), g)
    s = State(1e-6 + np.exp(-(g.x / 0.1) ** 2), np.ones(64))
    cfg = IntegratorConfig(dt_init=1e-5, dt_min=1e-9, dt_max=0.1, t_end=1.0)
    with pytest.raises(DegeneracyStop) as exc:
        advance(s, p, cfg)
    st = exc.value.state
    assert st.is_positive() and 0 < st.t < 1.0
    assert len(exc.value.series) > 0


def test_mode_decay_matches_symbol():
    # smallest |lambda| mode at xi = pi, initial data along its eigenvector
    g = Grid(1.0, 128)
    p = PhysicalParams(1.0, SurfactantModel.linear(), g)
    c = freeze(1.0, 1.0, -1.0, 1.0)
    lam_p, _ = c1_roots(c, np.pi)
    w, v = np.linalg.eig(symbol_matrix(c, np.pi))
    vec = np.real(v[:, np.argmax(w.real)])
    vec = vec / np.max(np.abs(vec)) * 1e-6
    cosk = np.cos(np.pi * g.x)
    s = State(1 + vec[0] * cosk, 1 + vec[1] * cosk)
    dt = 1e-3
    new, rep = newton_solve(s, dt, p, IntegratorConfig())
    assert rep.accepted
    amp = np.sum((new.h - 1) * cosk) / np.sum((s.h - 1) * cosk)
    assert amp == pytest.approx(np.exp(lam_p * dt), rel=0.1)


def test_advance_deterministic():
    g = Grid(1.0, 32)
    p = PhysicalParams(1.0, SurfactantModel.linear(), g)
    cfg = IntegratorConfig(dt_init=1e-5, t_end=0.01)
    a = advance(cosine_state(g), p, cfg)[1]
    b = advance(cosine_state(g), p, cfg)[1]
    assert a.to_csv() == b.to_csv()
