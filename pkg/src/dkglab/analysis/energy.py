"""Energy functionals and the running ledger of ghost-weight spacetime integrals."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .. import field_grid as fg
from .. import propagators as pr
from .. import spinor_core as sc
from ..evolver import SimState
from .ghost import P_INF

DELTA = 0.05
DELTA1 = 3 * DELTA


def conformal_energy(u: np.ndarray, ut: np.ndarray, t: float, grid: fg.SpectralGrid) -> float:
    """F = integral of (Su + u)^2 + (L_1 u)^2 + (L_2 u)^2 + (Omega u)^2, with S = t d_t + x.grad.

    Complex or spinor-valued fields contribute |.|^2 of every component.
    """
    x1, x2 = grid.coords
    d1, d2 = fg.spectral_gradient(u, grid)
    terms = (
        t * ut + x1 * d1 + x2 * d2 + u,
        t * d1 + x1 * ut,
        t * d2 + x2 * ut,
        x1 * d2 - x2 * d1,
    )
    return sum(fg.reduce_norm(f, grid) ** 2 for f in terms)


@dataclass(frozen=True)
class EnergyLedger:
    """Instantaneous energies plus trapezoid-accumulated spacetime integrals."""

    t: float
    ED_inst: float
    ED_ghost_acc: float
    E1: float
    G1_ghost_acc: float
    E0: float | None
    F_conformal: float | None
    exterior_psi: float
    exterior_v: float
    mod_ghost_psi_acc: float
    mod_ghost_v_acc: float
    delta: float = DELTA
    delta1: float = DELTA1
    # Integrands at time t, kept so the next update can apply the trapezoid rule.
    rate_psi: float = 0.0
    rate_v: float = 0.0

    @property
    def ED(self) -> float:
        return self.ED_inst + self.ED_ghost_acc

    @property
    def G1(self) -> float:
        return self.E1 + self.G1_ghost_acc

    def as_record(self) -> dict:
        out = {k: getattr(self, k) for k in self.__dataclass_fields__ if not k.startswith("rate_")}
        out["ED"] = self.ED
        out["G1"] = self.G1
        return out


def ghost_rates(state: SimState) -> tuple[float, float]:
    """Integrands of the Dirac and Klein-Gordon ghost integrals at state.t."""
    g, t = state.grid, state.t
    w = fg.weight_field("ghost_m65", t, g).data
    minus = sc.radial_projection(state.psi, g.omega, "-")
    rate_psi = fg.integrate(w * fg.pointwise_modulus(minus, g) ** 2, g)
    good = [fg.good_derivative(a, [state.v, state.vt], g)[0] for a in (1, 2)]
    rate_v = fg.integrate(w * (good[0] ** 2 + good[1] ** 2 + state.v**2), g)
    return rate_psi, rate_v


def exterior_norms(state: SimState) -> tuple[float, float]:
    g, t = state.grid, state.t
    w = fg.weight_field("jtmr", t, g).data * fg.weight_field("chi_ext", t, g).data
    ext_psi = fg.reduce_norm(state.psi, g, weight=w)
    d1, d2 = fg.spectral_gradient(state.v, g)
    ext_v = fg.reduce_norm(state.v, g, weight=w) + fg.reduce_norm(np.stack([state.vt, d1, d2]), g, weight=w)
    return ext_psi, ext_v


def energy_snapshot(state: SimState, ledger: EnergyLedger | None = None, delta: float = DELTA,
                    delta1: float = DELTA1) -> EnergyLedger:
    """Advance the ledger to state.t (or start one when ``ledger`` is None)."""
    g, t = state.grid, state.t
    if ledger is not None:
        if t < ledger.t:
            raise ValueError(f"ledger is at t = {ledger.t} but the state is at t = {t}; time cannot run backwards")
        delta, delta1 = ledger.delta, ledger.delta1
    rate_psi, rate_v = ghost_rates(state)
    ext_psi, ext_v = exterior_norms(state)
    E0 = F = None
    if state.has_aux:
        aux = fg.ScalarState(state.Psi, state.Psit)
        E0 = pr.wave_energy(aux, g)
        F = conformal_energy(state.Psi, state.Psit, t, g)
    fields = dict(
        t=t,
        ED_inst=fg.reduce_norm(state.psi, g) ** 2,
        E1=pr.kg_energy(state.kg, g),
        E0=E0,
        F_conformal=F,
        exterior_psi=ext_psi,
        exterior_v=ext_v,
        delta=delta,
        delta1=delta1,
        rate_psi=rate_psi,
        rate_v=rate_v,
    )
    if ledger is None:
        return EnergyLedger(ED_ghost_acc=0.0, G1_ghost_acc=0.0, mod_ghost_psi_acc=0.0, mod_ghost_v_acc=0.0, **fields)
    h = t - ledger.t
    damp0 = fg.japanese(ledger.t) ** -delta1
    damp1 = fg.japanese(t) ** -delta1
    return replace(
        ledger,
        ED_ghost_acc=ledger.ED_ghost_acc + 0.5 * h * (ledger.rate_psi + rate_psi),
        G1_ghost_acc=ledger.G1_ghost_acc + 0.5 * h * (ledger.rate_v + rate_v),
        mod_ghost_psi_acc=ledger.mod_ghost_psi_acc + 0.5 * h * (damp0 * ledger.rate_psi + damp1 * rate_psi),
        mod_ghost_v_acc=ledger.mod_ghost_v_acc + 0.5 * h * (damp0 * ledger.rate_v + damp1 * rate_v),
        **fields,
    )


def dirac_energy_bound(psi0: np.ndarray, grid: fg.SpectralGrid) -> float:
    """e^{P(inf)} times the initial mass: the ceiling for E^D along a free Dirac flow."""
    return float(np.exp(P_INF) * fg.reduce_norm(psi0, grid) ** 2)
