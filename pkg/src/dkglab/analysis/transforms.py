"""Normal-form field redefinitions and the residuals of their equations.

Residuals mix two kinds of time derivative.  Quantities *inside* a
transformed field (d_t psi, d_t v, d_t of products) are on-shell, taken from
the equations.  The *outer* d_t of the transformed field itself is a central
difference along the numerical trajectory through the state, one step
forward and one step back.  Each residual is therefore O(dt^2).
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .. import evolver as ev
from .. import field_grid as fg
from .. import spinor_core as sc
from ..evolver import SimState

SELECTORS = ("psi_tilde", "Psi_tilde", "v_tilde", "minus_structure")


class TransformBundle(NamedTuple):
    psi_tilde: np.ndarray
    Psi_tilde: np.ndarray | None
    v_tilde: fg.ScalarState


class _Jets(NamedTuple):
    psi_t: np.ndarray
    vpsi: np.ndarray
    vpsi_jet: np.ndarray  # (d_t, d_1, d_2) of v psi
    psi_jet: np.ndarray   # (d_t, d_1, d_2) of psi
    v_jet: np.ndarray     # (d_t, d_1, d_2) of v
    rho: np.ndarray
    rho_t: np.ndarray


def _jets(state: SimState) -> _Jets:
    g = state.grid
    psi, v, vt = state.psi, state.v, state.vt
    psi_t = fg.time_derivative_psi(psi, v, g)
    vpsi = v * psi
    vpsi_t = vt * psi + v * psi_t
    d = fg.spectral_gradient(vpsi, g)
    p = fg.spectral_gradient(psi, g)
    dv = fg.spectral_gradient(v, g)
    rho = sc.mass_density(psi)
    rho_t = 2.0 * sc.dirac_bilinear(psi, psi_t).real
    return _Jets(
        psi_t, vpsi, np.stack([vpsi_t, *d]), np.stack([psi_t, *p]), np.stack([vt, *dv]), rho, rho_t
    )


def _gamma_derivative(jet: np.ndarray) -> np.ndarray:
    """i gamma^mu d_mu applied through a precomputed jet."""
    return 1j * sc.gamma_contract(jet)


def transform_fields(state: SimState) -> TransformBundle:
    """psi~ = psi + i gamma^mu d_mu(v psi), Psi~ = Psi - v psi, v~ = v - psi^* gamma^0 psi."""
    j = _jets(state)
    psi_tilde = state.psi + _gamma_derivative(j.vpsi_jet)
    Psi_tilde = None if not state.has_aux else state.Psi - j.vpsi
    v_tilde = fg.ScalarState(state.v - j.rho, state.vt - j.rho_t)
    return TransformBundle(psi_tilde, Psi_tilde, v_tilde)


def _Psi_tilde_t(state: SimState, j: _Jets) -> np.ndarray:
    return state.Psit - j.vpsi_jet[0]


def cubic_rhs(state: SimState, j: _Jets | None = None) -> tuple[np.ndarray, np.ndarray]:
    """(N1 + N2 + 2 Q0(psi, v), N3 + N4) evaluated on-shell."""
    if j is None:
        j = _jets(state)
    n = sc.cubic_terms(state.psi, state.v, j.psi_jet, j.vpsi_jet)
    q0 = sc.null_form_q0(j.psi_jet, j.v_jet[:, None])
    return n.n1 + n.n2 + 2.0 * q0, (n.n3 + n.n4).real


def _minus_structure(state: SimState) -> np.ndarray:
    g = state.grid
    w = g.omega
    d1, d2 = fg.spectral_gradient(state.Psi, g)
    good = (d1 + w[0] * state.Psit, d2 + w[1] * state.Psit)
    gG = sc.apply(sc.GAMMA[1], good[0]) + sc.apply(sc.GAMMA[2], good[1])
    rhs = -1j * sc.radial_projection(gG, w, "-")
    out = sc.radial_projection(state.psi, w, "-") - rhs
    # The identity relies on |omega| = 1, which fails at the origin.
    return np.where(g.r > 0, out, 0.0)


def residual_fields(
    state: SimState, dt: float = 0.01, dealias: bool = True, selectors: tuple[str, ...] = SELECTORS
) -> dict[str, np.ndarray]:
    """Pointwise LHS - RHS of each selected identity.

    The forward and backward neighbour states are built once and shared.
    """
    for which in selectors:
        if which not in SELECTORS:
            raise ValueError(f"unknown residual selector {which!r}; expected one of {SELECTORS}")
        if which in ("Psi_tilde", "minus_structure") and not state.has_aux:
            raise ValueError(f"residual {which!r} needs the auxiliary field")
    g = state.grid
    out = {}
    if "minus_structure" in selectors:
        out["minus_structure"] = _minus_structure(state)
    rest = [w for w in selectors if w != "minus_structure"]
    if not rest:
        return out

    j = _jets(state)
    plus, minus = ev.strang_step(state, dt, dealias), ev.strang_step(state, -dt, dealias)
    jp, jm = _jets(plus), _jets(minus)
    cubic_dirac, cubic_kg = cubic_rhs(state, j)

    if "psi_tilde" in rest:
        tp = plus.psi + _gamma_derivative(jp.vpsi_jet)
        tm = minus.psi + _gamma_derivative(jm.vpsi_jet)
        t0 = state.psi + _gamma_derivative(j.vpsi_jet)
        d1, d2 = fg.spectral_gradient(t0, g)
        lhs = -1j * sc.gamma_contract(np.stack([(tp - tm) / (2.0 * dt), d1, d2]))
        out["psi_tilde"] = lhs - cubic_dirac
    if "Psi_tilde" in rest:
        tt = (_Psi_tilde_t(plus, jp) - _Psi_tilde_t(minus, jm)) / (2.0 * dt)
        out["Psi_tilde"] = tt - fg.laplacian(state.Psi - j.vpsi, g) + cubic_dirac
    if "v_tilde" in rest:
        tt = ((plus.vt - jp.rho_t) - (minus.vt - jm.rho_t)) / (2.0 * dt)
        vtil = state.v - j.rho
        out["v_tilde"] = tt - fg.laplacian(vtil, g) + vtil - cubic_kg
    return {w: out[w] for w in selectors}


def transform_residuals(
    state: SimState, dt: float = 0.01, dealias: bool = True, selectors: tuple[str, ...] = SELECTORS
) -> dict[str, float]:
    """L2 norms of the selected residuals at state.t."""
    return {k: fg.reduce_norm(f, state.grid) for k, f in residual_fields(state, dt, dealias, selectors).items()}


def transform_residual(state: SimState, which: str, dt: float = 0.01, dealias: bool = True) -> float:
    """L2 norm of the residual of one transformed equation at state.t."""
    return transform_residuals(state, dt, dealias, (which,))[which]


def aux_identity_residual(state: SimState) -> float:
    """|| -i gamma^mu d_mu Psi - psi ||_2 / ||psi||_2."""
    if not state.has_aux:
        raise ValueError("aux identity needs the auxiliary field")
    g = state.grid
    d1, d2 = fg.spectral_gradient(state.Psi, g)
    lhs = -1j * sc.gamma_contract(np.stack([state.Psit, d1, d2]))
    norm = fg.reduce_norm(state.psi, g)
    err = fg.reduce_norm(lhs - state.psi, g)
    return err / norm if norm > 0 else err
