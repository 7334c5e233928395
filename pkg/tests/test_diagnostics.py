import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from thinfilm.core import Grid, PhysicalParams, State
from thinfilm.diagnostics import (CSV_COLUMNS, TimeSeries, dissipation_terms, energy, energy_rate,
                                  fit_decay, fit_log_linear, mean)
from thinfilm.errors import DomainError, FitError
from thinfilm.integrator import IntegratorConfig, advance
from thinfilm.surfactant import SurfactantModel

from conftest import cosine_state, random_state


def test_mean_examples():
    g = Grid(2.0, 50)
    assert mean(np.full(50, 3.5), g) == pytest.approx(3.5, rel=1e-15)
    assert abs(mean(np.cos(2 * np.pi * g.x / g.L), g)) < 1e-14
    assert mean(0.3 + 1.7 * g.x, g) == pytest.approx(0.3 + 1.7 * g.L / 2, rel=1e-14)


def test_energy_flat_zero():
    g = Grid(1.0, 32)
    m = SurfactantModel.linear(1.0, 0.0, 0.0)
    assert energy(State(np.full(32, 2.0), np.full(32, 0.4)), m, g) == 0.0


def test_energy_cosine_height():
    a, L = 0.1, 1.5
    errs = []
    for n in (64, 128):
        g = Grid(L, n)
        s = State(1 + a * np.cos(np.pi * g.x / L), np.ones(n))
        e = energy(s, SurfactantModel.linear(1.0, 0.0, 0.0), g)
        errs.append(abs(e - 0.5 * a ** 2 * np.pi ** 2 / L ** 2 * L / 2))
    assert errs[1] < errs[0] / 3.5


def test_energy_phi_part():
    g = Grid(1.3, 40)
    e = energy(State(np.ones(40), np.full(40, np.e)), SurfactantModel.linear(1.0, 1.0, 0.0), g)
    assert e == pytest.approx(1.3, rel=1e-14)


def test_energy_needs_positive_gamma():
    g = Grid(1.0, 16)
    with pytest.raises(DomainError):
        energy(State(np.ones(16), np.zeros(16)), SurfactantModel.linear(), g)


def test_dissipation_flat_zero():
    p = PhysicalParams(1.0, SurfactantModel.linear(), Grid(1.0, 16))
    assert np.all(dissipation_terms(State(np.ones(16), np.ones(16)), p) == 0)


def test_dissipation_only_diffusion_term():
    g = Grid(1.0, 32)
    D = 0.4
    p = PhysicalParams(D, SurfactantModel.linear(1.0, 0.0), g)
    gam = 1 + 0.3 * np.cos(np.pi * g.x)
    d = dissipation_terms(State(np.ones(32), gam), p)
    assert np.all(d == 0)
    # sigma' = 0 also kills Phi'', so take a vanishing slope: terms 1-4 are O(beta^2)
    model = SurfactantModel.linear(1.0, 1e-300)
    p = PhysicalParams(D, model, g)
    d = dissipation_terms(State(np.ones(32), gam), p)
    gf = 0.5 * (gam[1:] + gam[:-1])
    gx = np.diff(gam) / g.dx
    ref = -D * np.sum(model.phi_second(gf) * gx ** 2) * g.dx
    assert d[4] == pytest.approx(ref, rel=1e-12)
    assert np.all(np.abs(d[:4]) <= 1e-250)


@given(st.integers(0, 2 ** 32 - 1), st.floats(0.0, 5.0), st.floats(0.05, 3.0))
def test_dissipation_terms_nonpositive(seed, beta, D):
    rng = np.random.default_rng(seed)
    p = PhysicalParams(D, SurfactantModel.linear(1.0, beta), Grid(1.0, 24))
    assert np.all(dissipation_terms(random_state(rng, 24, 0.1, 2.0), p) <= 1e-12)


def test_h_part_of_identity_exact():
    # with beta = 0 the semi-discrete energy rate equals the dissipation sum to round-off
    g = Grid(1.0, 64)
    p = PhysicalParams(1.0, SurfactantModel.linear(1.0, 0.0), g)
    rng = np.random.default_rng(3)
    s = State(1 + 0.1 * rng.uniform(size=64), np.ones(64))
    assert energy_rate(s, p) == pytest.approx(np.sum(dissipation_terms(s, p)), rel=1e-9)


def test_energy_rate_matches_dissipation_second_order():
    errs = []
    for n in (64, 128, 256):
        g = Grid(1.0, n)
        p = PhysicalParams(1.0, SurfactantModel.linear(), g)
        s = cosine_state(g)
        errs.append(abs(energy_rate(s, p) - np.sum(dissipation_terms(s, p))))
    orders = np.log2(np.array(errs[:-1]) / errs[1:])
    assert np.all(orders > 1.9)


def test_fit_exact_exponential():
    t = np.linspace(0, 3, 40)
    est = fit_log_linear(t, np.exp(-2 * t), window=(0, 3), initial_norm=1.0)
    assert est.omega_fit == pytest.approx(2.0, abs=1e-10)
    assert est.r2 == pytest.approx(1.0, abs=1e-10)


def test_fit_prefactor():
    t = np.linspace(0, 4, 50)
    est = fit_log_linear(t, 3 * np.exp(-0.5 * t), window=(0, 4), initial_norm=1.0)
    assert est.omega_fit == pytest.approx(0.5, rel=1e-10)
    assert est.M_fit == pytest.approx(3.0, rel=1e-10)


def test_fit_floor_and_errors():
    t = np.linspace(0, 1, 20)
    assert fit_log_linear(t, 0.1 * np.exp(-t), (0, 1), initial_norm=1.0).M_fit == 1.0
    with pytest.raises(FitError):
        fit_log_linear(t[:5], np.exp(-t[:5]))
    y = np.exp(-t)
    y[-1] = 0.0
    with pytest.raises(FitError):
        fit_log_linear(t, y, (0, 1))


def test_fit_default_window_is_last_half():
    t = np.linspace(0, 2, 41)
    est = fit_log_linear(t, np.exp(-t))
    assert est.window == (1.0, 2.0)
    assert est.n_samples == 21


def test_series_csv_roundtrip(tmp_path):
    g = Grid(1.0, 32)
    p = PhysicalParams(1.0, SurfactantModel.linear(), g)
    _, series, _ = advance(cosine_state(g), p, IntegratorConfig(dt_init=1e-5, t_end=2e-3))
    path = tmp_path / "s.csv"
    series.to_csv(path)
    head = path.read_text().splitlines()[0]
    assert tuple(head.split(",")) == CSV_COLUMNS
    rows = TimeSeries.read_csv(path)
    assert len(rows) == len(series)
    for a, b in zip(rows, series.rows):
        assert a == b  # 17 significant digits: exact


def test_series_invariants_and_fit_selectors():
    g = Grid(1.0, 64)
    p = PhysicalParams(1.0, SurfactantModel.linear(), g)
    _, series, _ = advance(cosine_state(g, 0.01, 0.01), p,
                           IntegratorConfig(dt_init=1e-5, dt_max=1e-2, t_end=0.5))
    dh, dg = series.conservation_drift()
    assert dh <= 1e-12 and dg <= 1e-12
    diss = np.column_stack([series.column(f"diss{k}") for k in range(1, 6)])
    assert np.all(diss <= 1e-12)
    for norm in ("l2", "linf", "h1"):
        est = fit_decay(series, norm)
        assert est.omega_fit > 0 and 0 <= est.r2 <= 1 and est.M_fit >= 1
