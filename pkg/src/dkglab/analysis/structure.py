"""Weighted data norms and pointwise structural inequalities."""
from __future__ import annotations

from math import comb
from typing import NamedTuple, Sequence

import numpy as np

from .. import field_grid as fg
from .. import spinor_core as sc
from ..evolver import SimState


def gradient_tensor_modulus(f: np.ndarray, k: int, grid: fg.SpectralGrid) -> np.ndarray:
    """Pointwise |nabla^k f|: l2 over all ordered k-tuples of directions."""
    if k == 0:
        return fg.pointwise_modulus(f, grid)
    fh = fg.fft2(f)
    kd = grid.k_deriv
    k1, k2 = np.meshgrid(kd, kd, indexing="ij")
    total = np.zeros((grid.n, grid.n))
    for j in range(k + 1):
        # comb(k, j) ordered tuples share the mixed partial d1^j d2^(k-j).
        d = fg.ifft2((1j * k1) ** j * (1j * k2) ** (k - j) * fh)
        total += comb(k, j) * fg.pointwise_modulus(d, grid) ** 2
    return np.sqrt(total)


def smallness_norm(state: SimState, K: int = 2) -> float:
    """Truncated weighted norm of the initial data (psi_0, v_0, v_1)."""
    if not 0 <= K <= 2:
        raise ValueError(f"derivative order K must be in 0..2, got {K}")
    g = state.grid
    jr = fg.japanese(g.r)
    lg = np.log(2.0 + g.r)
    total = fg.reduce_norm(state.psi, g, kind="L1")
    for k in range(K + 1):
        total += fg.reduce_norm(gradient_tensor_modulus(state.psi, k, g), g, weight=jr ** (k + 1))
        total += fg.reduce_norm(gradient_tensor_modulus(state.vt, k, g), g, weight=jr ** (k + 2) * lg)
    for k in range(K + 2):
        total += fg.reduce_norm(gradient_tensor_modulus(state.v, k, g), g, weight=jr ** (k + 1) * lg)
    return float(total)


class SobolevQuotient(NamedTuple):
    quotient: float
    flagged: bool


def _gamma_family(stack: Sequence[np.ndarray], t: float, grid: fg.SpectralGrid, depth: int) -> list[np.ndarray]:
    """All Gamma^I f with |I| <= depth, returned at level 0."""
    out = [stack[0]]
    frontier = [list(stack)]
    for _ in range(depth):
        nxt = []
        for s in frontier:
            for k in range(1, 7):
                gs = fg.apply_vector_field(k, s, t, grid)
                out.append(gs[0])
                nxt.append(gs)
        frontier = nxt
    return out


def sobolev_quotient(stack: Sequence[np.ndarray], t: float, grid: fg.SpectralGrid,
                     ceiling: float | None = None) -> SobolevQuotient:
    """sup <t+r>^{1/2} |f| divided by the sum of ||Gamma^I f||_2 over |I| <= 3.

    ``stack`` holds f and its first three time derivatives.
    """
    if len(stack) < 4:
        raise ValueError("sobolev quotient needs f and three time derivatives")
    denom = sum(fg.reduce_norm(f, grid) for f in _gamma_family(stack, t, grid, 3))
    if denom == 0:
        raise ValueError("sobolev quotient undefined for the zero field")
    numer = fg.reduce_norm(stack[0], grid, weight=np.sqrt(fg.weight_field("jtpr", t, grid).data), kind="Linf")
    q = numer / denom
    return SobolevQuotient(q, bool(ceiling is not None and q > ceiling))


def _ratio(numer: np.ndarray, denom: np.ndarray, mask: np.ndarray) -> float:
    # Skip points where both sides sit at rounding level.
    keep = mask & (denom > 1e-12 * denom.max())
    if not np.any(keep):
        return 0.0
    return float(np.max(numer[keep] / denom[keep]))


def dirac_gradient_ratio(state: SimState) -> float:
    """Smallest c with |d psi| <= c (<t-r>^{-1}(|Gamma-hat psi| + |psi|) + t <t-r>^{-1}|v psi|) on r <= 3t+3."""
    g, t = state.grid, state.t
    ps, _ = fg.onshell_stacks(state.psi, state.v, state.vt, g, 1)
    d = [ps[1], *fg.spectral_gradient(state.psi, g)]
    lhs = np.sqrt(sum(fg.pointwise_modulus(f, g) ** 2 for f in d))
    gam = sum(fg.pointwise_modulus(f, g) for f in d)
    for k in (4, 5, 6):
        gam = gam + fg.pointwise_modulus(fg.apply_modified_vector_field(k, ps, t, g)[0], g)
    inv = 1.0 / fg.weight_field("jtmr", t, g).data
    rhs = inv * (gam + fg.pointwise_modulus(state.psi, g)) + t * inv * fg.pointwise_modulus(state.v * state.psi, g)
    return _ratio(lhs, rhs, g.r <= 3 * t + 3)


def kg_interior_ratio(state: SimState) -> float:
    """Smallest c with |v| <= c (<t-r>/<t+r> (|d Gamma v| + |d v|) + |psi^* gamma^0 psi|) on r <= 3t+3."""
    g, t = state.grid, state.t
    _, vs = fg.onshell_stacks(state.psi, state.v, state.vt, g, 2)

    def d_all(stack):
        return [stack[1], *fg.spectral_gradient(stack[0], g)]

    dv = sum(np.abs(f) for f in d_all(vs))
    dgv = 0.0
    for k in range(1, 7):
        dgv = dgv + sum(np.abs(f) for f in d_all(fg.apply_vector_field(k, vs, t, g)))
    w = fg.weight_field("jtmr", t, g).data / fg.weight_field("jtpr", t, g).data
    rhs = w * (dgv + dv) + np.abs(sc.mass_density(state.psi))
    return _ratio(np.abs(state.v), rhs, g.r <= 3 * t + 3)
