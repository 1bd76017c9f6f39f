"""Exact Fourier-space free flows for the Dirac, Klein-Gordon, and wave equations.

Symbol tables are cached per (grid, dt, masked).  scipy.fft is safe to call
from several threads at once, and the cached tables are read-only, so the
flows may be applied concurrently.
"""
from __future__ import annotations

from functools import lru_cache
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .field_grid import ScalarState, SpectralGrid, fft2, ifft2, irfft2, rfft2


def _check_dt(dt) -> float:
    dt = float(dt)
    if not np.isfinite(dt):
        raise ValueError(f"time step must be finite, got {dt}")
    return dt


def _frozen(*arrays):
    for a in arrays:
        a.flags.writeable = False
    return arrays


class DiracSymbol(NamedTuple):
    """e^{-i dt D} = c I - i s D-hat, with D-hat = [[0, k1 - i k2], [k1 + i k2, 0]]."""

    c: np.ndarray
    s_minus: np.ndarray  # -i s (k1 - i k2), upper-right entry
    s_plus: np.ndarray   # -i s (k1 + i k2), lower-left entry


class RealSymbol(NamedTuple):
    """2x2 real propagator [[a, b], [c, d]] acting on (u-hat, ut-hat)."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray


@lru_cache(maxsize=32)
def dirac_symbol(grid: SpectralGrid, dt: float, masked: bool = False) -> DiracSymbol:
    k1, k2 = grid.wavevector
    kabs = grid.kabs
    c = np.cos(dt * kabs)
    # sin(dt |k|)/|k| written through sinc to handle k = 0.
    s = dt * np.sinc(dt * kabs / np.pi)
    sm = -1j * s * (k1 - 1j * k2)
    sp = -1j * s * (k1 + 1j * k2)
    if masked:
        m = grid.dealias_mask
        c, sm, sp = c * m, sm * m, sp * m
    return DiracSymbol(*_frozen(c.astype(complex), sm, sp))


@lru_cache(maxsize=32)
def kg_symbol(grid: SpectralGrid, dt: float, masked: bool = False) -> RealSymbol:
    w = np.sqrt(1.0 + grid.kabs_r**2)
    c, s = np.cos(dt * w), np.sin(dt * w)
    sym = [c, s / w, -w * s, c.copy()]
    if masked:
        sym = [e * grid.dealias_mask_r for e in sym]
    return RealSymbol(*_frozen(*sym))


@lru_cache(maxsize=32)
def wave_symbol(grid: SpectralGrid, dt: float, masked: bool = False, half: bool = True) -> RealSymbol:
    kabs = grid.kabs_r if half else grid.kabs
    c = np.cos(dt * kabs)
    sinc_t = dt * np.sinc(dt * kabs / np.pi)
    sym = [c, sinc_t, -kabs * np.sin(dt * kabs), c.copy()]
    if masked:
        m = grid.dealias_mask_r if half else grid.dealias_mask
        sym = [e * m for e in sym]
    return RealSymbol(*_frozen(*sym))


def apply_dirac_symbol(psi_hat: np.ndarray, sym: DiracSymbol) -> np.ndarray:
    return np.stack([sym.c * psi_hat[0] + sym.s_minus * psi_hat[1], sym.c * psi_hat[1] + sym.s_plus * psi_hat[0]])


def apply_real_symbol(uh: np.ndarray, uth: np.ndarray, sym: RealSymbol) -> tuple[np.ndarray, np.ndarray]:
    return sym.a * uh + sym.b * uth, sym.c * uh + sym.d * uth


def dirac_free_flow(psi: np.ndarray, dt: float, grid: SpectralGrid, masked: bool = False) -> np.ndarray:
    """Apply e^{-i dt D}; exactly unitary on the torus."""
    dt = _check_dt(dt)
    grid.check(psi)
    if dt == 0.0 and not masked:
        return np.array(psi, dtype=complex)
    return ifft2(apply_dirac_symbol(fft2(psi), dirac_symbol(grid, dt, masked)))


def kg_free_flow(s: ScalarState, dt: float, grid: SpectralGrid, masked: bool = False) -> ScalarState:
    """Apply S(dt) mode by mode to a real Klein-Gordon state."""
    dt = _check_dt(dt)
    grid.check(s.u, s.ut)
    if dt == 0.0 and not masked:
        return ScalarState(np.array(s.u, dtype=float), np.array(s.ut, dtype=float))
    uh, uth = apply_real_symbol(rfft2(s.u), rfft2(s.ut), kg_symbol(grid, dt, masked))
    return ScalarState(irfft2(uh, grid.n), irfft2(uth, grid.n))


def wave_free_flow(s: ScalarState, dt: float, grid: SpectralGrid, masked: bool = False) -> ScalarState:
    """d'Alembert evolution; real or complex (componentwise) fields."""
    dt = _check_dt(dt)
    grid.check(s.u, s.ut)
    real = np.isrealobj(s.u) and np.isrealobj(s.ut)
    if dt == 0.0 and not masked:
        return ScalarState(np.array(s.u), np.array(s.ut))
    if real:
        uh, uth = apply_real_symbol(rfft2(s.u), rfft2(s.ut), wave_symbol(grid, dt, masked, True))
        return ScalarState(irfft2(uh, grid.n), irfft2(uth, grid.n))
    uh, uth = apply_real_symbol(fft2(s.u), fft2(s.ut), wave_symbol(grid, dt, masked, False))
    return ScalarState(ifft2(uh), ifft2(uth))


# ------------------------------------------------------------------ energies


def kg_energy(s: ScalarState, grid: SpectralGrid) -> float:
    """E_1 = integral of u_t^2 + |grad u|^2 + u^2, evaluated in Fourier space (Parseval)."""
    return _spectral_energy(s, grid, mass=1.0)


def wave_energy(s: ScalarState, grid: SpectralGrid) -> float:
    """E_0 = integral of u_t^2 + |grad u|^2."""
    return _spectral_energy(s, grid, mass=0.0)


def _spectral_energy(s: ScalarState, grid: SpectralGrid, mass: float) -> float:
    w2 = mass + grid.kabs**2
    uh, uth = fft2(s.u), fft2(s.ut)
    dens = np.abs(uth) ** 2 + w2 * np.abs(uh) ** 2
    if dens.ndim > 2:
        dens = dens.sum(axis=tuple(range(dens.ndim - 2)))
    return float(np.sum(dens) * grid.area_element / grid.n**2)


# ------------------------------------------------------------------- Duhamel


def _combine(acc, weight: float, item):
    if isinstance(item, tuple):
        if acc is None:
            return type(item)(*(weight * np.asarray(x) for x in item))
        return type(item)(*(a + weight * np.asarray(x) for a, x in zip(acc, item)))
    if acc is None:
        return weight * np.asarray(item)
    return acc + weight * np.asarray(item)


QUADRATURES = ("midpoint", "trapezoid", "simpson")


def quadrature_nodes(count: int, ds: float, rule: str) -> tuple[np.ndarray, np.ndarray]:
    """Sample times and weights on [0, T] for ``count`` uniformly spaced samples.

    ``midpoint`` expects samples at cell centres (j + 1/2) ds, so T = count * ds.
    The other rules expect samples at j ds, so T = (count - 1) * ds.
    """
    if rule == "midpoint":
        if count < 1:
            raise ValueError("midpoint quadrature needs at least 1 sample")
        return (np.arange(count) + 0.5) * ds, np.full(count, ds)
    times = np.arange(count) * ds
    if rule == "trapezoid":
        if count < 2:
            raise ValueError("trapezoid quadrature needs at least 2 samples")
        w = np.full(count, ds)
        w[0] = w[-1] = ds / 2
        return times, w
    if rule == "simpson":
        if count < 3 or count % 2 == 0:
            raise ValueError("simpson quadrature needs an odd number (>= 3) of samples")
        w = np.ones(count)
        w[1:-1:2] = 4
        w[2:-1:2] = 2
        return times, w * ds / 3
    raise ValueError(f"unknown quadrature rule {rule!r}; expected one of {QUADRATURES}")


def duhamel_accumulate(flow: Callable, sources: Sequence, ds: float, quadrature: str = "simpson"):
    """Approximate the integral over [0, T] of flow(T - s) applied to source(s).

    ``flow(item, dt)`` must be linear in ``item``.  ``sources`` are already
    in the form the flow acts on: for Klein-Gordon forcing F that is the
    state (0, F); for the Dirac equation with right side G it is i gamma^0 G.
    """
    sources = list(sources)
    times, w = quadrature_nodes(len(sources), ds, quadrature)
    t_end = len(sources) * ds if quadrature == "midpoint" else (len(sources) - 1) * ds
    acc = None
    for s, wj, src in zip(times, w, sources):
        acc = _combine(acc, wj, flow(src, t_end - s))
    return acc
