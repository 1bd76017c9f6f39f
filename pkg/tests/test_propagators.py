import numpy as np
import pytest

from dkglab import field_grid as fg
from dkglab import propagators as pr
from dkglab import spinor_core as sc


@pytest.fixture(scope="module")
def grid():
    return fg.SpectralGrid(64, 10.0)


def gaussian_spinor(grid, c=(0.5, -1.0), w=2.0):
    x1, x2 = grid.coords
    g = np.exp(-((x1 - c[0]) ** 2 + (x2 - c[1]) ** 2) / w)
    return np.stack([g * (1 + 0.5j * x2), g * (0.3 - 0.2j * x1)])


def test_dirac_single_mode_eigen(grid):
    x1, _ = grid.coords
    k = np.pi / grid.L
    psi = np.stack([np.exp(1j * k * x1)] * 2) / np.sqrt(2)
    out = pr.dirac_free_flow(psi, 0.37, grid)
    np.testing.assert_allclose(out, np.exp(-1j * 0.37 * k) * psi, atol=1e-13)


def test_dirac_identity_and_zero_mode(grid):
    psi = gaussian_spinor(grid)
    np.testing.assert_array_equal(pr.dirac_free_flow(psi, 0.0, grid), psi)
    const = np.stack([np.full((64, 64), 1 + 1j), np.full((64, 64), -2.0 + 0j)])
    np.testing.assert_allclose(pr.dirac_free_flow(const, 13.0, grid), const, atol=1e-13)


def test_nonfinite_dt_rejected(grid):
    with pytest.raises(ValueError):
        pr.dirac_free_flow(gaussian_spinor(grid), np.inf, grid)
    z = fg.ScalarState(np.zeros((64, 64)), np.zeros((64, 64)))
    with pytest.raises(ValueError):
        pr.kg_free_flow(z, np.nan, grid)


def test_dirac_symbol_properties(grid):
    sym = pr.dirac_symbol(grid, 0.9)
    # Unitary: |c|^2 + |s k|^2 = 1 and the off-diagonal terms are negated adjoints.
    k1, k2 = grid.wavevector
    np.testing.assert_allclose(np.abs(sym.c) ** 2 + np.abs(sym.s_minus) ** 2, 1.0, atol=1e-13)
    np.testing.assert_allclose(sym.s_plus, -np.conj(sym.s_minus), atol=1e-15)
    dhat = np.array([[0 * k1, k1 - 1j * k2], [k1 + 1j * k2, 0 * k1]])
    sq = np.einsum("ij...,jk...->ik...", dhat, dhat)
    np.testing.assert_allclose(sq[0, 0], grid.kabs**2, atol=1e-11)
    np.testing.assert_allclose(sq[0, 1], 0, atol=1e-11)


def test_kg_constant_mode(grid):
    s = fg.ScalarState(np.ones((64, 64)), np.zeros((64, 64)))
    out = pr.kg_free_flow(s, np.pi / 2, grid)
    np.testing.assert_allclose(out.u, 0, atol=1e-14)
    np.testing.assert_allclose(out.ut, -1, atol=1e-14)


def test_kg_identity(grid):
    rng = np.random.default_rng(0)
    s = fg.ScalarState(rng.normal(size=(64, 64)), rng.normal(size=(64, 64)))
    out = pr.kg_free_flow(s, 0.0, grid)
    np.testing.assert_array_equal(out.u, s.u)


def test_group_laws_and_inverse(grid):
    rng = np.random.default_rng(1)
    s = fg.ScalarState(rng.normal(size=(64, 64)), rng.normal(size=(64, 64)))
    a = pr.kg_free_flow(pr.kg_free_flow(s, 1.3, grid), 2.1, grid)
    b = pr.kg_free_flow(s, 3.4, grid)
    np.testing.assert_allclose(a.u, b.u, atol=1e-11)
    np.testing.assert_allclose(a.ut, b.ut, atol=1e-11)
    back = pr.kg_free_flow(b, -3.4, grid)
    np.testing.assert_allclose(back.u, s.u, atol=1e-11)
    psi = gaussian_spinor(grid)
    a = pr.dirac_free_flow(pr.dirac_free_flow(psi, 1.3, grid), 2.1, grid)
    np.testing.assert_allclose(a, pr.dirac_free_flow(psi, 3.4, grid), atol=1e-11)
    np.testing.assert_allclose(pr.dirac_free_flow(a, -3.4, grid), psi, atol=1e-11)


def test_wave_zero_mode_drift(grid):
    s = fg.ScalarState(np.zeros((64, 64)), np.full((64, 64), 2.0))
    out = pr.wave_free_flow(s, 1.5, grid)
    np.testing.assert_allclose(out.u, 3.0, atol=1e-13)
    np.testing.assert_allclose(out.ut, 2.0, atol=1e-13)


def test_wave_standing_wave(grid):
    x1, _ = grid.coords
    k = 3 * np.pi / grid.L
    s = fg.ScalarState(np.cos(k * x1), np.zeros((64, 64)))
    for t in (0.0, 0.4, 5.0):
        np.testing.assert_allclose(pr.wave_free_flow(s, t, grid).u, np.cos(k * x1) * np.cos(k * t), atol=1e-12)


def test_wave_complex_components_and_energy(grid):
    psi = gaussian_spinor(grid)
    s = fg.ScalarState(psi, 1j * psi)
    out = pr.wave_free_flow(s, 2.7, grid)
    re = pr.wave_free_flow(fg.ScalarState(psi.real, -psi.imag), 2.7, grid)
    np.testing.assert_allclose(out.u.real, re.u, atol=1e-13)
    assert pr.wave_energy(out, grid) == pytest.approx(pr.wave_energy(s, grid), rel=1e-12)


def test_kg_energy_matches_physical_space(grid):
    x1, x2 = grid.coords
    u = np.exp(-(x1**2 + x2**2) / 3)
    ut = x1 * u
    d1, d2 = fg.spectral_gradient(u, grid)
    direct = fg.integrate(ut**2 + d1**2 + d2**2 + u**2, grid)
    assert pr.kg_energy(fg.ScalarState(u, ut), grid) == pytest.approx(direct, rel=1e-12)


def test_dirac_flow_solves_equation(grid):
    psi0 = gaussian_spinor(grid)
    t, h = 1.1, 1e-4
    psi = pr.dirac_free_flow(psi0, t, grid)
    fd = (pr.dirac_free_flow(psi0, t + h, grid) - pr.dirac_free_flow(psi0, t - h, grid)) / (2 * h)
    # -i gamma^mu d_mu psi = 0 is d_t psi = -sigma_a d_a psi.
    np.testing.assert_allclose(fd, -fg.sigma_gradient(psi, grid), atol=1e-6)


def test_masked_flow_projects(grid):
    rng = np.random.default_rng(9)
    psi = rng.normal(size=(2, 64, 64)) + 0j
    out = pr.dirac_free_flow(psi, 0.0, grid, masked=True)
    assert np.abs(fg.fft2(out)[:, ~grid.dealias_mask]).max() < 1e-12


def test_symbols_cached_and_readonly(grid):
    a = pr.kg_symbol(grid, 0.01)
    assert pr.kg_symbol(grid, 0.01) is a
    with pytest.raises(ValueError):
        a.a[0, 0] = 1.0


def test_duhamel_zero_source(grid):
    z = fg.ScalarState(np.zeros((64, 64)), np.zeros((64, 64)))
    out = pr.duhamel_accumulate(lambda s, dt: pr.kg_free_flow(s, dt, grid), [z] * 5, 0.1)
    assert np.all(out.u == 0)


def _kg_unit_forcing_error(count, ds, rule, grid):
    one = fg.ScalarState(np.zeros((64, 64)), np.ones((64, 64)))
    out = pr.duhamel_accumulate(lambda s, dt: pr.kg_free_flow(s, dt, grid), [one] * count, ds, rule)
    T = count * ds if rule == "midpoint" else (count - 1) * ds
    return abs(out.u[0, 0] - (1 - np.cos(T)))


@pytest.mark.parametrize("rule, order", [("midpoint", 2), ("trapezoid", 2), ("simpson", 4)])
def test_duhamel_kg_unit_forcing_order(grid, rule, order):
    T = 2.0
    errs = []
    for m in (8, 16, 32):
        ds = T / m
        count = m if rule == "midpoint" else m + 1
        errs.append(_kg_unit_forcing_error(count, ds, rule, grid))
    ratios = [errs[i] / errs[i + 1] for i in range(2)]
    for r in ratios:
        assert r == pytest.approx(2**order, rel=0.15)


def test_duhamel_bad_counts(grid):
    f = lambda s, dt: s  # noqa: E731
    with pytest.raises(ValueError):
        pr.duhamel_accumulate(f, [np.zeros(1)] * 2, 0.1, "simpson")
    with pytest.raises(ValueError):
        pr.duhamel_accumulate(f, [np.zeros(1)] * 4, 0.1, "simpson")
    with pytest.raises(ValueError):
        pr.duhamel_accumulate(f, [np.zeros(1)] * 3, 0.1, "gauss")


def test_duhamel_dirac_matches_sourced_solution(grid):
    # phi_t = -sigma.grad phi + i gamma^0 G with G = exp(-i t) g is solved by
    # phi(T) = int_0^T e^{-i(T-s)D} (i gamma^0 G(s)) ds for zero data.
    g = gaussian_spinor(grid)
    T = 1.0

    def sourced(m):
        ds = T / m
        src = [1j * sc.apply(sc.GAMMA[0], np.exp(-1j * j * ds) * g) for j in range(m + 1)]
        return pr.duhamel_accumulate(lambda p, dt: pr.dirac_free_flow(p, dt, grid), src, ds, "simpson")

    ref = sourced(256)
    e1 = fg.reduce_norm(sourced(8) - ref, grid)
    e2 = fg.reduce_norm(sourced(16) - ref, grid)
    assert e1 / e2 == pytest.approx(16, rel=0.2)
