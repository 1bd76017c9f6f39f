"""Back-propagated free profiles and their Cauchy differences."""
from __future__ import annotations

from typing import NamedTuple, Sequence

import numpy as np

from .. import field_grid as fg
from .. import propagators as pr


class Profile(NamedTuple):
    t: float
    dirac: np.ndarray
    kg: fg.ScalarState


class ScatterTrace(NamedTuple):
    times: np.ndarray
    dirac_l2: np.ndarray
    dirac_h1: np.ndarray
    kg_energy: np.ndarray

    def as_records(self) -> list[dict]:
        return [
            {"t0": float(a), "t1": float(b), "dirac_l2": float(x), "dirac_h1": float(y), "kg_energy_norm": float(z)}
            for a, b, x, y, z in zip(self.times[:-1], self.times[1:], self.dirac_l2, self.dirac_h1, self.kg_energy)
        ]


def free_profile(t: float, psi: np.ndarray, v: np.ndarray, vt: np.ndarray, grid: fg.SpectralGrid) -> Profile:
    """e^{itD} psi(t) and S(-t)(v, v_t)."""
    return Profile(t, pr.dirac_free_flow(psi, -t, grid), pr.kg_free_flow(fg.ScalarState(v, vt), -t, grid))


def h1_norm(f: np.ndarray, grid: fg.SpectralGrid) -> float:
    fh = fg.fft2(f)
    dens = (1.0 + grid.kabs**2) * np.abs(fh) ** 2
    if dens.ndim > 2:
        dens = dens.sum(axis=0)
    return float(np.sqrt(np.sum(dens) * grid.area_element) / grid.n)


def scattering_trace(profiles: Sequence[Profile], grid: fg.SpectralGrid) -> ScatterTrace:
    """Consecutive differences of the profiles in L2, H1 (Dirac) and the KG energy norm."""
    if len(profiles) < 3:
        raise ValueError("scattering trace needs at least 3 snapshots")
    times = np.array([p.t for p in profiles])
    if np.any(np.diff(times) < 0):
        raise ValueError("snapshots must be ordered by time")
    l2, h1, kg = [], [], []
    for a, b in zip(profiles[:-1], profiles[1:]):
        d = b.dirac - a.dirac
        l2.append(fg.reduce_norm(d, grid))
        h1.append(h1_norm(d, grid))
        kg.append(np.sqrt(pr.kg_energy(fg.ScalarState(b.kg.u - a.kg.u, b.kg.ut - a.kg.ut), grid)))
    return ScatterTrace(times, np.array(l2), np.array(h1), np.array(kg))


def tail_is_decreasing(trace: ScatterTrace, t_from: float) -> dict:
    """Check monotone decrease of each difference series over pairs starting at t >= t_from."""
    start = trace.times[:-1]
    out = {}
    for name in ("dirac_l2", "kg_energy"):
        seq = getattr(trace, name)
        tail = seq[start >= t_from]
        out[name] = {
            "monotone": bool(np.all(np.diff(tail) < 0)),
            "last_over_first": float(seq[-1] / seq[0]) if seq[0] > 0 else 0.0,
            "tail_last_over_first": float(tail[-1] / tail[0]) if len(tail) and tail[0] > 0 else 0.0,
        }
    return out
