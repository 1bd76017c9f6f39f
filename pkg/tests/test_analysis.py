import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as hst
from numpy.polynomial import hermite
from scipy import integrate

from dkglab import evolver as ev
from dkglab import field_grid as fg
from dkglab import propagators as pr
from dkglab import spinor_core as sc
from dkglab.analysis import energy as en
from dkglab.analysis import fits, ghost
from dkglab.analysis import scattering as scat
from dkglab.analysis import structure as st
from dkglab.analysis import transforms as tr


@pytest.fixture(scope="module")
def grid():
    return fg.SpectralGrid(256, 24.0)


def data(grid, **kw):
    base = dict(eps=0.05, sigma=1.0, kg_sigma=1.0, polarization=(1.0, 0.3j), kg_velocity=0.5)
    base.update(kw)
    return ev.make_initial_data(ev.InitialDataSpec(**base), grid)


def zero_state(grid):
    z = np.zeros((grid.n, grid.n))
    return ev.SimState(grid, 0.0, np.zeros((2, grid.n, grid.n), complex), z, z.copy(),
                       np.zeros((2, grid.n, grid.n), complex), np.zeros((2, grid.n, grid.n), complex))


# ------------------------------------------------------------------- energies


def test_constant_spinor_mass():
    g = fg.SpectralGrid(32, 5.0)
    c = np.array([0.3 + 0.4j, -0.2])
    psi = np.broadcast_to(c[:, None, None], (2, 32, 32)).copy()
    z = np.zeros((32, 32))
    led = en.energy_snapshot(ev.SimState(g, 0.0, psi, z, z.copy()))
    assert led.ED_inst == pytest.approx(np.sum(np.abs(c) ** 2) * (2 * g.L) ** 2, rel=1e-13)


def test_conformal_energy_gaussian():
    # At t = 0 with u_t = 0 only Su + u = (1 - 2 r^2) e^{-r^2} survives,
    # and the integral of its square over the plane is pi / 2.
    g = fg.SpectralGrid(128, 10.0)
    u = np.exp(-g.r**2)
    F = en.conformal_energy(u, np.zeros_like(u), 0.0, g)
    assert F == pytest.approx(np.pi / 2, abs=1e-4)


def test_zero_state_ledger_is_zero(grid):
    rec = en.energy_snapshot(zero_state(grid)).as_record()
    for k, v in rec.items():
        if k not in ("t", "delta", "delta1"):
            assert v == 0.0, k


def test_ledger_rejects_time_regression(grid):
    s = data(grid)
    led = en.energy_snapshot(ev.advance(s, 0.1, 0.05))
    with pytest.raises(ValueError, match="backwards"):
        en.energy_snapshot(s, led)


def test_ledger_accumulators_nondecreasing_on_coupled_run(grid):
    s = data(grid)
    led = en.energy_snapshot(s)
    acc = []
    for _ in range(5):
        s = ev.advance(s, 0.2, 0.02)
        led = en.energy_snapshot(s, led)
        acc.append((led.ED_ghost_acc, led.G1_ghost_acc, led.mod_ghost_psi_acc, led.mod_ghost_v_acc))
    acc = np.array(acc)
    assert np.all(np.diff(acc, axis=0) >= 0)
    assert np.all(acc > 0)


def test_modified_ghost_is_damped(grid):
    led = en.energy_snapshot(data(grid))
    s = data(grid)
    for _ in range(3):
        s = ev.advance(s, 0.5, 0.05)
        led = en.energy_snapshot(s, led)
    assert led.mod_ghost_psi_acc < led.ED_ghost_acc
    assert led.mod_ghost_v_acc < led.G1_ghost_acc


def test_free_dirac_ghost_energy_bound():
    g = fg.SpectralGrid(256, 48.0)
    psi0 = data(g, eps=1.0, center=(4.0, 0.0), aux=False).psi
    bound = en.dirac_energy_bound(psi0, g)
    z = np.zeros((g.n, g.n))
    led = None
    for t in np.linspace(0.0, 8.0, 33):
        led = en.energy_snapshot(ev.SimState(g, t, pr.dirac_free_flow(psi0, t, g), z, z.copy()), led)
        assert led.ED <= bound
    assert led.ED > led.ED_inst


# ---------------------------------------------------------------------- ghost


def test_ghost_primitive_matches_quadrature():
    def integrand(x):
        return (1.0 + x * x) ** -0.6

    for s in (-50.0, -3.0, 0.0, 0.7, 12.0):
        ref, _ = integrate.quad(integrand, -np.inf, s, epsabs=1e-13, epsrel=1e-13)
        assert ghost.ghost_primitive(s) == pytest.approx(ref, abs=1e-8)
    total, _ = integrate.quad(integrand, -np.inf, np.inf, epsabs=1e-13, epsrel=1e-13)
    assert ghost.P_INF == pytest.approx(total, abs=1e-8)
    assert ghost.ghost_primitive(0.0) == pytest.approx(total / 2, abs=1e-8)


@given(hst.floats(-1e4, 1e4), hst.floats(0.0, 50.0))
def test_ghost_primitive_monotone(s, ds):
    assert ghost.ghost_primitive(s + ds) >= ghost.ghost_primitive(s) - 1e-15


def test_ghost_residual_zero_field():
    g = fg.SpectralGrid(32, 5.0)
    z = np.zeros((2, 32, 32), complex)
    assert ghost.ghost_identity_residual([0.0, 0.1, 0.2], [z, z, z], g) == 0.0


def test_ghost_residual_needs_samples():
    g = fg.SpectralGrid(32, 5.0)
    z = np.zeros((2, 32, 32), complex)
    with pytest.raises(ValueError, match="at least 3"):
        ghost.ghost_identity_residual([0.0, 0.1], [z, z], g)
    with pytest.raises(ValueError, match="uniformly"):
        ghost.ghost_identity_residual([0.0, 0.1, 0.3], [z, z, z], g)


def test_ghost_residual_second_order():
    g = fg.SpectralGrid(256, 48.0)
    x1, x2 = g.coords
    bump = np.exp(-((x1 - 6) ** 2 + x2**2) / 2)
    psi0 = np.stack([bump, 0.5j * bump])
    res = []
    for m in (10, 20, 40):
        ts = np.linspace(0.0, 4.0, m + 1)
        res.append(ghost.ghost_identity_residual(ts, [pr.dirac_free_flow(psi0, t, g) for t in ts], g))
    for a, b in zip(res, res[1:]):
        assert 3.0 <= a / b <= 5.0


def test_ghost_residual_with_source():
    # phi = e^{-mt} f with f a free solution solves d_t phi = -sigma.grad phi + i gamma^0 G
    # for G = i m gamma^0 phi, so the forcing term is active and the identity must close.
    g = fg.SpectralGrid(256, 48.0)
    m = 0.3
    psi0 = data(g, eps=1.0, center=(3.0, 0.0), aux=False).psi
    res = []
    for k in (10, 20, 40):
        ts = np.linspace(0.0, 2.0, k + 1)
        phis = [np.exp(-m * t) * pr.dirac_free_flow(psi0, t, g) for t in ts]
        res.append(ghost.ghost_identity_residual(ts, phis, g, [1j * m * sc.apply(sc.GAMMA[0], p) for p in phis]))
    for a, b in zip(res, res[1:]):
        assert 3.0 <= a / b <= 5.0


# ----------------------------------------------------------------- transforms


def test_zero_state_transforms(grid):
    s = zero_state(grid)
    b = tr.transform_fields(s)
    assert not np.any(b.psi_tilde) and not np.any(b.Psi_tilde) and not np.any(b.v_tilde.u)
    for which in tr.SELECTORS:
        assert tr.transform_residual(s, which) == 0.0


def test_transforms_with_v_zero(grid):
    s0 = data(grid, kg_amplitude=0.0, kg_velocity=0.0)
    s = ev.SimState(grid, 0.0, s0.psi, np.zeros_like(s0.v), np.zeros_like(s0.v), s0.psi * 0.3, s0.Psit)
    b = tr.transform_fields(s)
    np.testing.assert_array_equal(b.psi_tilde, s.psi)
    np.testing.assert_array_equal(b.Psi_tilde, s.Psi)
    np.testing.assert_array_equal(b.v_tilde.u, -sc.mass_density(s.psi))


@settings(max_examples=25, deadline=None)
@given(hst.integers(0, 2**32 - 1), hst.floats(1e-4, 0.3))
def test_v_tilde_pointwise_bound(seed, amp):
    g = fg.SpectralGrid(16, 4.0)
    rng = np.random.default_rng(seed)
    psi = amp * (rng.normal(size=(2, 16, 16)) + 1j * rng.normal(size=(2, 16, 16)))
    v = amp * rng.normal(size=(16, 16))
    s = ev.SimState(g, 0.0, psi, v, np.zeros_like(v))
    diff = np.abs(tr.transform_fields(s).v_tilde.u - v).max()
    assert diff <= fg.reduce_norm(psi, g, kind="Linf") ** 2 * (1 + 1e-12)


def test_unknown_selector(grid):
    with pytest.raises(ValueError, match="unknown residual selector"):
        tr.transform_residual(data(grid), "phi_tilde")


def test_aux_selectors_need_aux(grid):
    with pytest.raises(ValueError, match="auxiliary"):
        tr.transform_residual(data(grid, aux=False), "Psi_tilde")


def test_v_tilde_second_order_without_spinor(grid):
    # With psi = 0 the step is the exact Klein-Gordon flow, so the only error
    # left is the central difference in time.
    z = np.zeros((grid.n, grid.n))
    s0 = ev.SimState(grid, 0.0, np.zeros((2, grid.n, grid.n), complex), 0.1 * np.exp(-grid.r**2), z)
    s = ev.advance(s0, 1.0, 0.05)
    res = [tr.transform_residual(s, "v_tilde", dt) for dt in (0.04, 0.02, 0.01)]
    for a, b in zip(res, res[1:]):
        assert 3.0 <= a / b <= 5.0


def test_minus_structure_on_free_dirac_data():
    g = fg.SpectralGrid(256, 40.0)
    psi0 = data(g, eps=1.0, sigma=1.5, kg_sigma=1.5, center=(1.0, 0.5)).psi
    Psi0, Psit0 = ev.initial_aux(psi0)
    z = np.zeros((g.n, g.n))
    for t in (0.0, 3.0):
        psi = pr.dirac_free_flow(psi0, t, g)
        aux = pr.wave_free_flow(fg.ScalarState(Psi0, Psit0), t, g)
        s = ev.SimState(g, t, psi, z, z.copy(), aux.u, aux.ut)
        assert tr.transform_residual(s, "minus_structure") <= 1e-8 * fg.reduce_norm(psi, g)
        assert tr.aux_identity_residual(s) <= 1e-10


def test_transform_residuals_second_order(grid):
    s0 = data(grid)
    res = {}
    for dt in (0.04, 0.02, 0.01):
        res[dt] = tr.transform_residuals(ev.advance(s0, 0.4, dt), dt)
    for which in tr.SELECTORS:
        for a, b in ((0.04, 0.02), (0.02, 0.01)):
            assert 3.0 <= res[a][which] / res[b][which] <= 5.0, which


def test_shared_residuals_match_single(grid):
    s = ev.advance(data(grid), 0.2, 0.02)
    both = tr.transform_residuals(s, 0.02)
    for which in tr.SELECTORS:
        assert both[which] == tr.transform_residual(s, which, 0.02)


# ----------------------------------------------------------------------- fits


def test_fit_exact_power():
    t = np.linspace(1, 40, 60)
    f = fits.decay_fit(t, t**-0.5, (2, 40))
    assert f.slope == pytest.approx(-0.5, abs=1e-12)
    assert f.residual_rms < 1e-12


def test_fit_wiggly_inverse():
    t = np.linspace(1, 100, 400)
    f = fits.decay_fit(t, 3.0 / t * (1 + 0.01 * np.sin(t)), (10, 100))
    assert f.slope == pytest.approx(-1.0, abs=0.01)


def test_fit_constant():
    t = np.arange(1.0, 20.0)
    assert fits.decay_fit(t, np.full_like(t, 2.5), (1, 19)).slope == pytest.approx(0.0, abs=1e-12)


def test_fit_errors():
    t = np.arange(1.0, 30.0)
    with pytest.raises(ValueError, match="positive"):
        fits.decay_fit(t, -t, (1, 29))
    with pytest.raises(ValueError, match="samples"):
        fits.decay_fit(t, t, (1, 4))
    with pytest.raises(ValueError, match="t_wrap"):
        fits.decay_fit(t, t, (1, 29), t_wrap=20.0)
    with pytest.raises(ValueError, match="t0 < t1"):
        fits.decay_fit(t, t, (5, 2))


def test_default_window():
    assert fits.default_window(80.0) == (20.0, 72.0)


# ----------------------------------------------------------------- scattering


def test_free_profiles_are_constant(grid):
    s0 = data(grid, aux=False)
    profiles = []
    for t in (0.0, 1.5, 3.0, 4.5):
        psi = pr.dirac_free_flow(s0.psi, t, grid)
        kg = pr.kg_free_flow(s0.kg, t, grid)
        profiles.append(scat.free_profile(t, psi, kg.u, kg.ut, grid))
    trace = scat.scattering_trace(profiles, grid)
    assert np.all(trace.dirac_l2 <= 1e-11)
    assert np.all(trace.dirac_h1 <= 1e-11)
    assert np.all(trace.kg_energy <= 1e-11)


def test_identical_snapshots_zero_difference(grid):
    s = data(grid)
    p = scat.free_profile(1.0, s.psi, s.v, s.vt, grid)
    trace = scat.scattering_trace([p, p, p], grid)
    assert not np.any(trace.dirac_l2) and not np.any(trace.kg_energy)
    assert len(trace.as_records()) == 2


def test_scattering_needs_three(grid):
    s = data(grid)
    p = scat.free_profile(0.0, s.psi, s.v, s.vt, grid)
    with pytest.raises(ValueError, match="at least 3"):
        scat.scattering_trace([p, p], grid)


# ------------------------------------------------------------------ structure


def _hermite_derivative(x, a, sigma):
    # d^a/dx^a exp(-x^2/sigma^2) = (-1/sigma)^a H_a(x/sigma) exp(-x^2/sigma^2)
    c = np.zeros(a + 1)
    c[a] = 1.0
    return (-1.0 / sigma) ** a * hermite.hermval(x / sigma, c) * np.exp(-(x**2) / sigma**2)


def _tensor_norm_oracle(k, sigma, grid):
    from math import comb

    x1, x2 = grid.coords
    return np.sqrt(sum(comb(k, a) * (_hermite_derivative(x1, a, sigma) * _hermite_derivative(x2, k - a, sigma)) ** 2
                       for a in range(k + 1)))


def test_gradient_tensor_modulus_against_hermite():
    g = fg.SpectralGrid(256, 24.0)
    f = np.exp(-g.r**2 / 2.0**2)
    for k in range(4):
        np.testing.assert_allclose(st.gradient_tensor_modulus(f, k, g), _tensor_norm_oracle(k, 2.0, g), atol=1e-11)


def test_smallness_norm_against_analytic_oracle():
    # Gaussian preset profile (sigma = kg_sigma = 2, v_1 = 0): every term is a
    # weighted L2 norm of an analytic Hermite product.
    g = fg.SpectralGrid(256, 48.0)
    eps, sig = 0.01, 2.0
    s = ev.make_initial_data(ev.InitialDataSpec(eps=eps, sigma=sig, kg_sigma=sig), g)
    jr, lg = fg.japanese(g.r), np.log(2.0 + g.r)
    dA = g.dx**2

    def l2(f):
        return np.sqrt(np.sum(f**2) * dA)

    expected = eps * np.pi * sig**2
    expected += sum(l2(jr ** (k + 1) * eps * _tensor_norm_oracle(k, sig, g)) for k in range(3))
    expected += sum(l2(jr ** (k + 1) * lg * eps * _tensor_norm_oracle(k, sig, g)) for k in range(4))
    assert st.smallness_norm(s, 2) == pytest.approx(expected, rel=1e-9)


def test_smallness_norm_zero_and_scaling(grid):
    assert st.smallness_norm(data(grid, eps=0.0)) == 0.0
    a = st.smallness_norm(data(grid, eps=0.01))
    b = st.smallness_norm(data(grid, eps=0.02))
    assert b == pytest.approx(2 * a, rel=1e-12)
    with pytest.raises(ValueError, match="0..2"):
        st.smallness_norm(data(grid), 3)


def _bump_stack(grid, center):
    # Free wave data (f, 0): the time derivatives follow from the equation.
    x1, x2 = grid.coords
    f = np.exp(-((x1 - center[0]) ** 2 + (x2 - center[1]) ** 2))
    lap = fg.laplacian(f, grid)
    return [f, np.zeros_like(f), lap, np.zeros_like(f)]


def test_sobolev_quotient():
    g = fg.SpectralGrid(128, 32.0)
    centred = st.sobolev_quotient(_bump_stack(g, (0.0, 0.0)), 0.0, g, ceiling=1.0)
    shifted = st.sobolev_quotient(_bump_stack(g, (20.0 / np.sqrt(2), 20.0 / np.sqrt(2))), 0.0, g)
    assert 0 < centred.quotient <= 1 and not centred.flagged
    # Weighted sup-norm control must not degrade away from the origin.
    assert shifted.quotient <= 3 * centred.quotient
    assert st.sobolev_quotient(_bump_stack(g, (0.0, 0.0)), 0.0, g, ceiling=1e-6).flagged


def test_sobolev_quotient_rejects_zero():
    g = fg.SpectralGrid(32, 8.0)
    z = np.zeros((32, 32))
    with pytest.raises(ValueError, match="zero field"):
        st.sobolev_quotient([z, z, z, z], 0.0, g)
    with pytest.raises(ValueError, match="three time derivatives"):
        st.sobolev_quotient([z, z], 0.0, g)


def test_structural_ratios_on_small_run(grid):
    s = ev.advance(data(grid, eps=0.01), 2.0, 0.02)
    assert 0 < st.dirac_gradient_ratio(s) <= 10
    assert 0 < st.kg_interior_ratio(s) <= 10
