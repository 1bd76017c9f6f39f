"""Periodic spectral grid, Fourier derivatives, weights, and vector fields.

The torus [-L, L)^2 stands in for the plane.  Arrays are indexed
``f[i, j]`` with ``i`` along x1 and ``j`` along x2; spinor fields carry an
extra leading axis of length 2.

Vector fields act on *time stacks*: a list ``[f, d_t f, d_t^2 f, ...]`` of
on-shell time derivatives at a fixed time.  Applying a field that involves
``d_t`` consumes one level, so a stack of length ``m`` supports ``m - 1``
applications.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from functools import cached_property
from math import comb
from typing import NamedTuple, Sequence

import numpy as np
import scipy.fft as sfft

from . import spinor_core as sc

WORKERS_ENV = "DKG_WORKERS"


def fft_workers() -> int:
    """Worker count for scipy.fft, read from ``DKG_WORKERS`` (default 1).

    pocketfft splits a 2D transform into independent 1D transforms, so the
    result does not depend on the worker count.
    """
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def fft2(f: np.ndarray) -> np.ndarray:
    return sfft.fft2(f, axes=(-2, -1), workers=fft_workers())


def ifft2(f: np.ndarray) -> np.ndarray:
    return sfft.ifft2(f, axes=(-2, -1), workers=fft_workers())


def rfft2(f: np.ndarray) -> np.ndarray:
    return sfft.rfft2(f, axes=(-2, -1), workers=fft_workers())


def irfft2(f: np.ndarray, n: int) -> np.ndarray:
    return sfft.irfft2(f, s=(n, n), axes=(-2, -1), workers=fft_workers())


@dataclass(frozen=True)
class SpectralGrid:
    """An n x n periodic grid on [-L, L)^2."""

    n: int
    L: float

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 16 or self.n & (self.n - 1):
            raise ValueError(f"grid.n must be a power of two >= 16, got {self.n!r}")
        if not np.isfinite(self.L) or self.L <= 0:
            raise ValueError(f"grid.L must be positive and finite, got {self.L!r}")

    @property
    def dx(self) -> float:
        return 2.0 * self.L / self.n

    @property
    def area_element(self) -> float:
        return self.dx**2

    @cached_property
    def x(self) -> np.ndarray:
        return -self.L + self.dx * np.arange(self.n)

    @cached_property
    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        x1, x2 = np.meshgrid(self.x, self.x, indexing="ij")
        return x1, x2

    @cached_property
    def r(self) -> np.ndarray:
        return np.hypot(*self.coords)

    @cached_property
    def omega(self) -> np.ndarray:
        return sc.unit_direction(*self.coords)

    @cached_property
    def k(self) -> np.ndarray:
        """Wavenumbers pi*j/L in FFT order, j in [-n/2, n/2)."""
        return 2.0 * np.pi * sfft.fftfreq(self.n, d=self.dx)

    @cached_property
    def k_deriv(self) -> np.ndarray:
        # Odd derivatives drop the Nyquist mode so real fields stay real.
        k = self.k.copy()
        k[self.n // 2] = 0.0
        return k

    @cached_property
    def wavevector(self) -> tuple[np.ndarray, np.ndarray]:
        """Full-spectrum (k1, k2) tables of shape (n, n)."""
        k1, k2 = np.meshgrid(self.k, self.k, indexing="ij")
        return k1, k2

    @cached_property
    def kabs(self) -> np.ndarray:
        return np.hypot(*self.wavevector)

    @cached_property
    def kabs_r(self) -> np.ndarray:
        """|k| on the half spectrum used by rfft2."""
        return self.kabs[:, : self.n // 2 + 1]

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        keep = np.abs(np.fft.fftfreq(self.n) * self.n) < self.n / 3.0
        return np.outer(keep, keep)

    @cached_property
    def dealias_mask_r(self) -> np.ndarray:
        return self.dealias_mask[:, : self.n // 2 + 1]

    def check(self, *fields: np.ndarray) -> None:
        """Raise if any field does not live on this grid."""
        for f in fields:
            if np.shape(f)[-2:] != (self.n, self.n):
                raise ValueError(f"field of shape {np.shape(f)} does not match a {self.n}x{self.n} grid")


class ScalarState(NamedTuple):
    u: np.ndarray
    ut: np.ndarray


def _require_finite(f: np.ndarray) -> None:
    if not np.all(np.isfinite(f)):
        raise ValueError("field contains non-finite values")


def spectral_gradient(f: np.ndarray, grid: SpectralGrid) -> tuple[np.ndarray, np.ndarray]:
    """(d1 f, d2 f) of the trigonometric interpolant of ``f``."""
    grid.check(f)
    _require_finite(f)
    k = grid.k_deriv
    if np.isrealobj(f):
        fh = rfft2(f)
        kr = k[: grid.n // 2 + 1].copy()
        kr[-1] = 0.0
        d1 = irfft2(1j * k[:, None] * fh, grid.n)
        d2 = irfft2(1j * kr[None, :] * fh, grid.n)
        return d1, d2
    fh = fft2(f)
    return ifft2(1j * k[:, None] * fh), ifft2(1j * k[None, :] * fh)


def laplacian(f: np.ndarray, grid: SpectralGrid) -> np.ndarray:
    grid.check(f)
    if np.isrealobj(f):
        return irfft2(-(grid.kabs_r**2) * rfft2(f), grid.n)
    return ifft2(-(grid.kabs**2) * fft2(f))


def dealias(f: np.ndarray, grid: SpectralGrid) -> np.ndarray:
    """2/3-rule truncation."""
    if np.isrealobj(f):
        return irfft2(grid.dealias_mask_r * rfft2(f), grid.n)
    return ifft2(grid.dealias_mask * fft2(f))


def sigma_gradient(psi: np.ndarray, grid: SpectralGrid) -> np.ndarray:
    """gamma^0 gamma^a d_a psi."""
    d1, d2 = spectral_gradient(psi, grid)
    return sc.apply(sc.SIGMA[0], d1) + sc.apply(sc.SIGMA[1], d2)


def time_derivative_psi(psi: np.ndarray, v: np.ndarray, grid: SpectralGrid) -> np.ndarray:
    """On-shell d_t psi = -gamma^0 gamma^a d_a psi + i gamma^0 (v psi)."""
    grid.check(psi, v)
    return -sigma_gradient(psi, grid) + 1j * sc.apply(sc.GAMMA[0], v * psi)


def second_time_derivative_v(s: ScalarState, psi: np.ndarray, grid: SpectralGrid) -> np.ndarray:
    """On-shell d_tt v = Laplacian v - v + psi^* gamma^0 psi."""
    grid.check(s.u, psi)
    return laplacian(s.u, grid) - s.u + sc.mass_density(psi)


# --------------------------------------------------------------- time stacks


def onshell_stacks(
    psi: np.ndarray, v: np.ndarray, vt: np.ndarray, grid: SpectralGrid, order: int
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Time stacks of psi and v up to ``order`` derivatives, from the equations.

    Leibniz on the products v psi and psi^* gamma^0 psi gives the recursion
    for higher levels.
    """
    grid.check(psi, v, vt)
    ps = [np.asarray(psi, dtype=complex)]
    vs = [np.asarray(v, dtype=float), np.asarray(vt, dtype=float)]
    for j in range(order):
        prod = sum(comb(j, m) * vs[m] * ps[j - m] for m in range(j + 1))
        ps.append(-sigma_gradient(ps[j], grid) + 1j * sc.apply(sc.GAMMA[0], prod))
        if len(vs) < order + 1:
            rho = sum(comb(j, m) * sc.dirac_bilinear(ps[m], ps[j - m]).real for m in range(j + 1))
            vs.append(laplacian(vs[j], grid) - vs[j] + rho)
    return ps[: order + 1], vs[: order + 1]


def aux_stack(
    Psi: np.ndarray, Psit: np.ndarray, psi_stack: Sequence[np.ndarray], v_stack: Sequence[np.ndarray],
    grid: SpectralGrid, order: int,
) -> list[np.ndarray]:
    """Time stack of the auxiliary wave field, which solves Psi_tt - Laplacian Psi = -v psi."""
    out = [np.asarray(Psi), np.asarray(Psit)]
    for j in range(order - 1):
        prod = sum(comb(j, m) * v_stack[m] * psi_stack[j - m] for m in range(j + 1))
        out.append(laplacian(out[j], grid) - prod)
    return out[: order + 1]


def _need(stack: Sequence[np.ndarray], levels: int, what: str) -> None:
    if len(stack) < levels:
        raise ValueError(f"{what} needs {levels} time levels, got {len(stack)}; supply more on-shell data")


def apply_vector_field(k: int, stack: Sequence[np.ndarray], t: float, grid: SpectralGrid) -> list[np.ndarray]:
    """Apply Gamma_k, k = 1..6 for (d_t, d_1, d_2, Omega, L_1, L_2), to a time stack."""
    if k not in range(1, 7):
        raise ValueError(f"vector field index must be in 1..6, got {k!r}")
    x1, x2 = grid.coords
    if k == 1:
        _need(stack, 2, "d_t")
        return list(stack[1:])
    if k in (2, 3):
        return [spectral_gradient(f, grid)[k - 2] for f in stack]
    if k == 4:
        out = []
        for f in stack:
            d1, d2 = spectral_gradient(f, grid)
            out.append(x1 * d2 - x2 * d1)
        return out
    a = k - 5
    xa = (x1, x2)[a]
    _need(stack, 2, f"L_{a + 1}")
    grads = [spectral_gradient(f, grid)[a] for f in stack]
    out = []
    for j in range(len(stack) - 1):
        level = t * grads[j] + xa * stack[j + 1]
        if j:
            level = level + j * grads[j - 1]
        out.append(level)
    return out


def apply_scaling(stack: Sequence[np.ndarray], t: float, grid: SpectralGrid) -> list[np.ndarray]:
    """S = t d_t + x^a d_a on a time stack."""
    _need(stack, 2, "S")
    x1, x2 = grid.coords
    out = []
    for j in range(len(stack) - 1):
        d1, d2 = spectral_gradient(stack[j], grid)
        out.append(t * stack[j + 1] + j * stack[j] + x1 * d1 + x2 * d2)
    return out


def apply_modified_vector_field(k: int, stack: Sequence[np.ndarray], t: float, grid: SpectralGrid) -> list[np.ndarray]:
    """Omega-hat = Omega - gamma^1 gamma^2 / 2 and L-hat_a = L_a - gamma^0 gamma^a / 2 on a spinor stack."""
    if k not in (4, 5, 6):
        raise ValueError(f"modified vector field index must be 4, 5 or 6, got {k!r}")
    base = apply_vector_field(k, stack, t, grid)
    m = sc.GAMMA12 if k == 4 else sc.SIGMA[k - 5]
    return [b - 0.5 * sc.apply(m, f) for b, f in zip(base, stack)]


def good_derivative(a: int, stack: Sequence[np.ndarray], grid: SpectralGrid) -> list[np.ndarray]:
    """G_a = d_a + omega_a d_t, a in {1, 2}; reduces to d_a at the origin."""
    if a not in (1, 2):
        raise ValueError(f"good derivative index must be 1 or 2, got {a!r}")
    _need(stack, 2, f"G_{a}")
    w = grid.omega[a - 1]
    return [spectral_gradient(stack[j], grid)[a - 1] + w * stack[j + 1] for j in range(len(stack) - 1)]


# ------------------------------------------------------------ weights, norms

WEIGHT_KINDS = ("jr", "jtmr", "jtpr", "chi_ext", "ghost_m65")


class WeightField(NamedTuple):
    kind: str
    t: float
    data: np.ndarray


def japanese(x) -> np.ndarray:
    return np.sqrt(1.0 + np.square(x))


def chi(x) -> np.ndarray:
    """C^1 smoothstep: 0 for x <= 1, 1 for x >= 2."""
    s = np.clip(np.asarray(x, dtype=float) - 1.0, 0.0, 1.0)
    return s * s * (3.0 - 2.0 * s)


def weight_field(kind: str, t: float, grid: SpectralGrid) -> WeightField:
    if t < 0:
        raise ValueError(f"weights are defined for t >= 0, got {t}")
    r = grid.r
    if kind == "jr":
        data = japanese(r)
    elif kind == "jtmr":
        data = japanese(t - r)
    elif kind == "jtpr":
        data = japanese(t + r)
    elif kind == "chi_ext":
        data = chi(r - 2.0 * t)
    elif kind == "ghost_m65":
        data = japanese(r - t) ** -1.2
    else:
        raise ValueError(f"unknown weight kind {kind!r}; expected one of {WEIGHT_KINDS}")
    return WeightField(kind, t, data)


def pointwise_modulus(field: np.ndarray, grid: SpectralGrid) -> np.ndarray:
    """|f| at each grid point; spinor components are combined in l^2."""
    f = np.asarray(field)
    if f.ndim == 2:
        return np.abs(f)
    return np.sqrt(np.sum(f.real**2 + f.imag**2, axis=tuple(range(f.ndim - 2))))


def reduce_norm(field: np.ndarray, grid: SpectralGrid, weight=None, kind: str = "L2") -> float:
    """Discrete L2, L1 or Linf norm with area element dx^2.

    numpy's pairwise summation has a fixed reduction order for a given
    shape, so the result is reproducible run to run.
    """
    grid.check(field)
    m = pointwise_modulus(field, grid)
    if weight is not None:
        w = weight.data if isinstance(weight, WeightField) else np.asarray(weight)
        if w.shape != m.shape:
            raise ValueError(f"weight shape {w.shape} does not match field shape {m.shape}")
        m = m * w
    if kind == "L2":
        return float(np.sqrt(np.sum(m * m) * grid.area_element))
    if kind == "L1":
        return float(np.sum(m) * grid.area_element)
    if kind == "Linf":
        return float(np.max(m))
    raise ValueError(f"unknown norm kind {kind!r}")


def integrate(density: np.ndarray, grid: SpectralGrid) -> float:
    grid.check(density)
    return float(np.sum(density) * grid.area_element)
