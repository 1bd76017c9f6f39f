"""Power-law decay fits on log-log axes."""
from __future__ import annotations

from typing import NamedTuple, Sequence

import numpy as np

MIN_SAMPLES = 8
WRAP_FRACTION = 0.9


class DecayFit(NamedTuple):
    window: tuple[float, float]
    times: np.ndarray
    values: np.ndarray
    slope: float
    intercept: float
    residual_rms: float

    def as_record(self) -> dict:
        return {
            "window": list(self.window),
            "samples": int(len(self.times)),
            "slope": self.slope,
            "intercept": self.intercept,
            "residual_rms": self.residual_rms,
        }


def wrap_time(L: float, support_radius: float) -> float:
    """Time at which signal leaving the data support meets its periodic image."""
    return L - support_radius


def default_window(t_wrap: float) -> tuple[float, float]:
    return t_wrap / 4.0, WRAP_FRACTION * t_wrap


def decay_fit(
    times: Sequence[float], values: Sequence[float], window: tuple[float, float], t_wrap: float | None = None
) -> DecayFit:
    """Least-squares slope of log(value) against log(t) over the window."""
    t0, t1 = map(float, window)
    if not 0 < t0 < t1:
        raise ValueError(f"fit window must satisfy 0 < t0 < t1, got {window}")
    if t_wrap is not None and t1 > WRAP_FRACTION * t_wrap * (1 + 1e-12):
        raise ValueError(f"fit window end {t1} exceeds {WRAP_FRACTION} * t_wrap = {WRAP_FRACTION * t_wrap:.6g}")
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    keep = (t >= t0 * (1 - 1e-12)) & (t <= t1 * (1 + 1e-12))
    t, y = t[keep], y[keep]
    if len(t) < MIN_SAMPLES:
        raise ValueError(f"fit window holds {len(t)} samples; at least {MIN_SAMPLES} are needed")
    if np.any(y <= 0) or not np.all(np.isfinite(y)):
        raise ValueError("decay fit needs positive finite values")
    lx, ly = np.log(t), np.log(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    return DecayFit((t0, t1), t, y, float(slope), float(intercept), float(np.sqrt(np.mean(resid**2))))
