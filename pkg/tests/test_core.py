import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from thinfilm.core import (FluxPair, Grid, PhysicalParams, State, compute_fluxes, divergence,
                           ghost_extend, rhs, third_derivative_at_faces)
from thinfilm.errors import PositivityError
from thinfilm.surfactant import SurfactantModel

from conftest import cosine_state


def test_grid_basics():
    g = Grid(2.0, 40)
    assert g.dx * g.n == pytest.approx(2.0, rel=1e-15)
    assert g.x[0] == pytest.approx(0.025)
    with pytest.raises(ValueError):
        Grid(1.0, 7)
    with pytest.raises(ValueError):
        Grid(0.0, 16)


def test_ghost_constant():
    he, ge = ghost_extend(State(np.ones(10), np.full(10, 2.0)))
    assert he.size == 16 and np.all(he == 1) and np.all(ge == 2)


def test_ghost_indices(rng):
    h = rng.uniform(1, 2, 12)
    he, _ = ghost_extend(State(h, h))
    assert he[2] == h[0] and he[1] == h[1] and he[0] == h[2]
    assert he[-3] == h[-1] and he[-2] == h[-2] and he[-1] == h[-3]
    np.testing.assert_array_equal(he[3:-3], h)


def test_ghost_cosine_mirror():
    g = Grid(1.0, 32)
    c = np.cos(np.pi * g.x)
    he, _ = ghost_extend(State(1 + 0.1 * c, np.ones(32)))
    xe = (np.arange(-3, 35) + 0.5) * g.dx
    np.testing.assert_allclose(he, 1 + 0.1 * np.cos(np.pi * xe), atol=1e-15)


def test_third_derivative_constant_and_walls(rng):
    he, _ = ghost_extend(State(np.full(16, 3.0), np.ones(16)))
    assert np.all(third_derivative_at_faces(he, 0.1) == 0)
    he, _ = ghost_extend(State(rng.uniform(0.5, 2, 16), np.ones(16)))
    d3 = third_derivative_at_faces(he, 1 / 16)
    assert d3[0] == 0.0 and d3[-1] == 0.0


@pytest.mark.parametrize("n", [32, 64, 128])
def test_third_derivative_cubic(n):
    dx = 1.0 / n
    xe = (np.arange(-3, n + 3) + 0.5) * dx
    d3 = third_derivative_at_faces(xe ** 3, dx)
    # exact for cubics on interior faces
    np.testing.assert_allclose(d3[2:-2], 6.0, rtol=1e-6)


def test_third_derivative_second_order():
    errs = []
    for n in (64, 128, 256):
        dx = 1.0 / n
        xe = (np.arange(-3, n + 3) + 0.5) * dx
        d3 = third_derivative_at_faces(np.sin(2 * xe), dx)
        xf = np.arange(n + 1) * dx
        errs.append(np.max(np.abs(d3[2:-2] + 8 * np.cos(2 * xf[2:-2]))))
    orders = np.log2(np.array(errs[:-1]) / errs[1:])
    assert np.all(orders > 1.9)


def test_flat_state_zero_flux():
    p = PhysicalParams(1.0, SurfactantModel.linear(), Grid(1.0, 16))
    f = compute_fluxes(State(np.full(16, 0.7), np.full(16, 1.3)), p)
    assert np.all(f.jh == 0) and np.all(f.jgamma == 0)


def test_marangoni_free_gamma_flux():
    g = Grid(1.0, 32)
    D = 0.7
    p = PhysicalParams(D, SurfactantModel.linear(1.0, 0.0), g)
    gam = 2 + np.cos(np.pi * g.x)
    f = compute_fluxes(State(np.ones(32), gam), p)
    expected = -D * np.diff(gam) / g.dx
    np.testing.assert_allclose(f.jgamma[1:-1], expected, rtol=1e-13, atol=1e-13)
    assert np.all(f.jh == 0)
    assert f.jgamma[0] == 0 and f.jgamma[-1] == 0


def test_jh_matches_symbolic():
    errs = []
    for n in (64, 128, 256):
        g = Grid(1.0, n)
        p = PhysicalParams(1.0, SurfactantModel.linear(1.0, 0.0), g)
        h = 1 + 0.01 * np.cos(np.pi * g.x)
        f = compute_fluxes(State(h, np.ones(n)), p)
        xf = g.faces
        hf = 1 + 0.01 * np.cos(np.pi * xf)
        ref = hf ** 3 / 3 * 0.01 * np.pi ** 3 * np.sin(np.pi * xf)
        errs.append(np.max(np.abs(f.jh - ref)))
    assert errs[0] / errs[1] > 3.5 and errs[1] / errs[2] > 3.5


def test_divergence_telescopes(rng):
    g = Grid(1.0, 20)
    jh = np.r_[0.0, rng.normal(size=19), 0.0]
    jg = np.r_[0.0, rng.normal(size=19), 0.0]
    dh, dg = divergence(FluxPair(jh, jg), g)
    assert abs(np.sum(dh) * g.dx) < 1e-14 and abs(np.sum(dg) * g.dx) < 1e-14
    z = divergence(FluxPair(np.zeros(21), np.zeros(21)), g)
    assert np.all(z[0] == 0) and np.all(z[1] == 0)


def test_divergence_linear_flux():
    g = Grid(2.0, 10)
    f = 3.0 * np.arange(11)
    dh, _ = divergence(FluxPair(f, f), g)
    np.testing.assert_allclose(dh, -3.0 / g.dx)


def test_positivity_error():
    p = PhysicalParams(1.0, SurfactantModel.linear(), Grid(1.0, 16))
    h = np.ones(16)
    h[3] = -1e-3
    with pytest.raises(PositivityError):
        compute_fluxes(State(h, np.ones(16)), p)


@given(arrays(float, 24, elements=st.floats(0.2, 3.0)), arrays(float, 24, elements=st.floats(0.2, 3.0)),
       st.sampled_from(["arithmetic", "harmonic"]), st.floats(0.0, 5.0))
def test_discrete_mass_invariance(h, g, avg, beta):
    p = PhysicalParams(0.5, SurfactantModel.linear(1.0, beta), Grid(1.0, 24), avg)
    dh, dg = rhs(State(h, g), p)
    scale = max(1.0, np.max(np.abs(dh)), np.max(np.abs(dg)))
    assert abs(np.sum(dh) * p.grid.dx) <= 1e-13 * scale
    assert abs(np.sum(dg) * p.grid.dx) <= 1e-13 * scale


@given(arrays(float, 12, elements=st.floats(0.2, 3.0)), arrays(float, 12, elements=st.floats(0.2, 3.0)))
def test_symmetry_preserved(h, g):
    h = np.r_[h, h[::-1]]
    g = np.r_[g, g[::-1]]
    p = PhysicalParams(1.0, SurfactantModel.linear(), Grid(1.0, 24))
    dh, dg = rhs(State(h, g), p)
    scale = max(1.0, np.max(np.abs(dh)), np.max(np.abs(dg)))
    assert np.max(np.abs(dh - dh[::-1])) <= 1e-11 * scale
    assert np.max(np.abs(dg - dg[::-1])) <= 1e-11 * scale


def _manufactured_rhs(x, D=1.0, beta=1.0, a=0.1, b=0.1, k=np.pi):
    """Exact rhs for h = 1 + a cos kx, G = 1 + b cos kx with sigma = 1 - beta G."""
    c, s = np.cos(k * x), np.sin(k * x)
    h, g = 1 + a * c, 1 + b * c
    hx, gx = -a * k * s, -b * k * s
    h3 = a * k ** 3 * s
    sp = -beta
    # fluxes jh = h^3/3 h3 + h^2/2 sp gx, jg = h^2 g/2 h3 + h g sp gx - D gx,
    # differentiated by the product rule
    gxx = -b * k * k * c
    h4 = a * k ** 4 * c
    djh = h ** 2 * hx * h3 + h ** 3 / 3 * h4 + h * hx * sp * gx + h ** 2 / 2 * sp * gxx
    djg = ((h * hx * g + h ** 2 * gx / 2) * h3 + h ** 2 * g / 2 * h4
           + (hx * g + h * gx) * sp * gx + h * g * sp * gxx - D * gxx)
    return -djh, -djg


def test_rhs_second_order_consistency():
    errs = []
    for n in (64, 128, 256):
        g = Grid(1.0, n)
        p = PhysicalParams(1.0, SurfactantModel.linear(1.0, 1.0), g)
        s = cosine_state(g, 0.1, 0.1)
        dh, dg = rhs(s, p)
        eh, eg = _manufactured_rhs(g.x)
        errs.append(max(np.max(np.abs(dh - eh)), np.max(np.abs(dg - eg))))
    orders = np.log2(np.array(errs[:-1]) / errs[1:])
    assert np.all(orders >= 1.9), orders
