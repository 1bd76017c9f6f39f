"""Ghost weight primitive and the discrete ghost-weight energy identity.

P(s) is the integral of <tau>^{-6/5} from -infinity to s.  Substituting
u = 1 / (1 + tau^2) turns each half line into an incomplete beta integral,
which gives a closed form accurate to rounding:

    P(s) = B/2 * I(1/(1+s^2); 1/10, 1/2)          for s <= 0
    P(s) = B - B/2 * I(1/(1+s^2); 1/10, 1/2)      for s > 0

with B = Beta(1/10, 1/2) = P(+infinity).
"""
from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy import special

from .. import field_grid as fg
from .. import spinor_core as sc

P_INF = float(special.beta(0.1, 0.5))


def ghost_primitive(s) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    half = 0.5 * P_INF * special.betainc(0.1, 0.5, 1.0 / (1.0 + s * s))
    return np.where(s <= 0, half, P_INF - half)


def ghost_exponent(t: float, grid: fg.SpectralGrid) -> np.ndarray:
    """p(t, x) = P(r - t)."""
    return ghost_primitive(grid.r - t)


def ghost_terms(psi: np.ndarray, t: float, grid: fg.SpectralGrid, source: np.ndarray | None = None):
    """Return (mass, flux, forcing) at one time.

    mass    = integral of e^p |psi|^2
    flux    = 1/2 integral of e^p <r-t>^{-6/5} |[psi]_-|^2
    forcing = 2 integral of e^p Im(psi^* gamma^0 G)
    """
    ep = np.exp(ghost_exponent(t, grid))
    w = fg.weight_field("ghost_m65", t, grid).data
    mass = fg.integrate(ep * fg.pointwise_modulus(psi, grid) ** 2, grid)
    minus = sc.radial_projection(psi, grid.omega, "-")
    flux = 0.5 * fg.integrate(ep * w * fg.pointwise_modulus(minus, grid) ** 2, grid)
    forcing = 0.0
    if source is not None:
        forcing = 2.0 * fg.integrate(ep * sc.dirac_bilinear(psi, source).imag, grid)
    return mass, flux, forcing


def ghost_identity_residual(
    times: Sequence[float], psis: Sequence[np.ndarray], grid: fg.SpectralGrid, sources: Sequence[np.ndarray] | None = None
) -> float:
    """Integrated form of the ghost identity over a uniformly sampled segment.

    Returns |M(T) - M(0) + trapz(flux + forcing)| / M(0), where M is the
    e^p-weighted mass.  The trapezoid rule makes the residual O(dt^2).
    """
    times = np.asarray(times, dtype=float)
    if len(times) < 3 or len(psis) != len(times):
        raise ValueError("ghost identity residual needs at least 3 matching samples")
    steps = np.diff(times)
    if np.any(steps <= 0) or np.ptp(steps) > 1e-9 * steps.mean():
        raise ValueError("ghost identity residual needs uniformly increasing sample times")
    rates, masses = [], []
    for k, (t, psi) in enumerate(zip(times, psis)):
        src = None if sources is None else sources[k]
        m, f, g = ghost_terms(psi, t, grid, src)
        masses.append(m)
        rates.append(f + g)
    if masses[0] == 0.0:
        return 0.0
    dt = steps.mean()
    integral = dt * (sum(rates) - 0.5 * (rates[0] + rates[-1]))
    return abs(masses[-1] - masses[0] + integral) / masses[0]
