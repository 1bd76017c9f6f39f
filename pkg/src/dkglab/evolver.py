"""Coupled Dirac-Klein-Gordon time stepping by Strang splitting.

One step is N(dt/2) L(dt) N(dt/2):

* N solves the pointwise nonlinear part exactly.  v is frozen, so
  psi picks up the phase diag(e^{iv h}, e^{-iv h}) and v_t gains
  h * psi^* gamma^0 psi (which the phase leaves unchanged).
* L applies the exact free Dirac and Klein-Gordon flows; the 2/3
  dealiasing mask is folded into their Fourier symbols.

The auxiliary wave field Psi (Psi_tt - Laplacian Psi = -v psi) rides along
with a kick-drift-kick: half kicks of Psi_t with the source at the two ends
of the step around an exact wave drift.  The step map is self-adjoint, so
the scheme is second order and can be run backwards with dt < 0.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple, Sequence

import numpy as np

from . import field_grid as fg
from . import propagators as pr
from . import spinor_core as sc

DT_MAX = 0.1
SUPPORT_TAIL = 1e-14


class NumericalError(RuntimeError):
    """Raised when the state stops being finite; carries the last good state."""

    def __init__(self, message: str, last_good: "SimState"):
        super().__init__(message)
        self.last_good = last_good


@dataclass(frozen=True)
class SimState:
    grid: fg.SpectralGrid
    t: float
    psi: np.ndarray
    v: np.ndarray
    vt: np.ndarray
    Psi: np.ndarray | None = None
    Psit: np.ndarray | None = None

    def __post_init__(self):
        arrays = [self.psi, self.v, self.vt]
        if (self.Psi is None) != (self.Psit is None):
            raise ValueError("auxiliary field needs both Psi and Psi_t")
        if self.Psi is not None:
            arrays += [self.Psi, self.Psit]
        self.grid.check(*arrays)
        if np.shape(self.psi)[0] != 2:
            raise ValueError("psi must have a leading spinor axis of length 2")
        for a in arrays:
            a.flags.writeable = False

    @property
    def has_aux(self) -> bool:
        return self.Psi is not None

    @property
    def kg(self) -> fg.ScalarState:
        return fg.ScalarState(self.v, self.vt)

    def is_finite(self) -> bool:
        arrays = [self.psi, self.v, self.vt] + ([self.Psi, self.Psit] if self.has_aux else [])
        return all(np.all(np.isfinite(a)) for a in arrays)

    def without_aux(self) -> "SimState":
        return replace(self, Psi=None, Psit=None)


def initial_aux(psi0: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Data (0, i gamma^0 psi_0) for the auxiliary wave field."""
    return np.zeros_like(psi0, dtype=complex), 1j * sc.apply(sc.GAMMA[0], psi0)


# ------------------------------------------------------------ initial data

FAMILIES = ("gaussian", "ring", "plane-modulated")


@dataclass(frozen=True)
class InitialDataSpec:
    family: str = "gaussian"
    eps: float = 0.01
    sigma: float = 2.0
    center: tuple[float, float] = (0.0, 0.0)
    polarization: tuple[complex, complex] = (1.0, 0.0)
    kg_amplitude: float = 1.0
    kg_velocity: float = 0.0
    kg_sigma: float = 2.0
    ring_radius: float = 3.0
    wavevector: tuple[float, float] = (1.0, 0.0)
    seed: int = 0
    aux: bool = True

    def support_radius(self) -> float:
        """Radius outside which every profile is below SUPPORT_TAIL (relative)."""
        reach = np.sqrt(np.log(1.0 / SUPPORT_TAIL))
        base = float(np.hypot(*self.center))
        psi_r = base + (self.ring_radius if self.family == "ring" else 0.0) + reach * self.sigma
        kg_r = base + reach * self.kg_sigma
        return max(psi_r, kg_r)


def make_initial_data(spec: InitialDataSpec, grid: fg.SpectralGrid) -> SimState:
    if spec.family not in FAMILIES:
        raise ValueError(f"data.family must be one of {FAMILIES}, got {spec.family!r}")
    if spec.eps < 0 or spec.sigma <= 0 or spec.kg_sigma <= 0:
        raise ValueError("data.eps must be >= 0 and widths must be positive")
    if spec.support_radius() > grid.L / 4:
        raise ValueError(
            f"data support radius {spec.support_radius():.3g} exceeds L/4 = {grid.L / 4:.3g}; "
            "enlarge grid.L or shrink the data"
        )
    pol = np.asarray(spec.polarization, dtype=complex)
    norm = np.linalg.norm(pol)
    if norm == 0:
        raise ValueError("data.polarization must be nonzero")
    pol = pol / norm

    x1, x2 = grid.coords
    y1, y2 = x1 - spec.center[0], x2 - spec.center[1]
    rho = np.hypot(y1, y2)
    gauss_kg = np.exp(-(rho**2) / spec.kg_sigma**2)
    if spec.family == "ring":
        profile = np.exp(-((rho - spec.ring_radius) ** 2) / spec.sigma**2)
    else:
        profile = np.exp(-(rho**2) / spec.sigma**2)
    psi = spec.eps * profile * pol[:, None, None]
    if spec.family == "plane-modulated":
        phases = np.random.default_rng(spec.seed).uniform(0.0, 2.0 * np.pi, size=2)
        carrier = np.exp(1j * (spec.wavevector[0] * y1 + spec.wavevector[1] * y2))
        psi = psi * carrier * np.exp(1j * phases)[:, None, None]
    v = spec.eps * spec.kg_amplitude * gauss_kg
    vt = spec.eps * spec.kg_velocity * gauss_kg
    Psi = Psit = None
    if spec.aux:
        Psi, Psit = initial_aux(psi)
    return SimState(grid, 0.0, psi, v, vt, Psi, Psit)


# --------------------------------------------------------------- stepping


def _check_step(dt: float) -> float:
    dt = float(dt)
    if not np.isfinite(dt) or dt == 0.0:
        raise ValueError(f"integrator.dt must be finite and nonzero, got {dt}")
    if abs(dt) > DT_MAX:
        raise ValueError(f"integrator.dt must satisfy |dt| <= {DT_MAX}, got {dt}")
    return dt


def _is_zero(psi: np.ndarray) -> bool:
    return not np.any(psi)


class _Stepper:
    """Cached symbol tables and the half-step phase carried between steps."""

    def __init__(self, grid: fg.SpectralGrid, dt: float, dealias: bool):
        self.grid = grid
        self.dt = dt
        self.half = 0.5 * dt
        self.dealias = dealias
        self.dirac = pr.dirac_symbol(grid, dt, dealias)
        self.kg = pr.kg_symbol(grid, dt, dealias)
        self.wave = pr.wave_symbol(grid, dt, dealias, False)

    def phase(self, v: np.ndarray) -> np.ndarray:
        return np.exp(1j * self.half * v)

    def step(self, s: SimState, phase: np.ndarray | None = None) -> tuple[SimState, np.ndarray | None]:
        grid, h = self.grid, self.half
        if _is_zero(s.psi) and not s.has_aux:
            # Zero spinor: the nonlinear substeps are the identity.
            kg = pr.kg_free_flow(s.kg, self.dt, grid, self.dealias)
            return SimState(grid, s.t + self.dt, s.psi, kg.u, kg.ut), None

        if phase is None:
            phase = self.phase(s.v)
        psi = np.stack([phase * s.psi[0], np.conj(phase) * s.psi[1]])
        rho = sc.mass_density(psi)
        vt = s.vt + h * rho

        if s.has_aux:
            Psit = s.Psit - h * (s.v * s.psi)

        psi = fg.ifft2(pr.apply_dirac_symbol(fg.fft2(psi), self.dirac))
        uh, uth = pr.apply_real_symbol(fg.rfft2(s.v), fg.rfft2(vt), self.kg)
        v, vt = fg.irfft2(uh, grid.n), fg.irfft2(uth, grid.n)

        phase = self.phase(v)
        psi = np.stack([phase * psi[0], np.conj(phase) * psi[1]])
        vt = vt + h * sc.mass_density(psi)

        Psi = None
        if s.has_aux:
            ah, ath = pr.apply_real_symbol(fg.fft2(s.Psi), fg.fft2(Psit), self.wave)
            Psi, Psit = fg.ifft2(ah), fg.ifft2(ath)
            Psit = Psit - h * (v * psi)
        else:
            Psit = None
        return SimState(grid, s.t + self.dt, psi, v, vt, Psi, Psit), phase


def strang_step(state: SimState, dt: float, dealias: bool = True) -> SimState:
    """One second-order step; negative dt runs the scheme backwards."""
    dt = _check_step(dt)
    new, _ = _Stepper(state.grid, dt, dealias).step(state)
    return new


def co_evolve_aux(state: SimState, dt: float, dealias: bool = True) -> SimState:
    """Advance (psi, v) and the auxiliary field together by one step."""
    if not state.has_aux:
        raise ValueError("state has no auxiliary field; build it with initial_aux or data.aux = true")
    return strang_step(state, dt, dealias)


def advance(state: SimState, span: float, dt: float, dealias: bool = True) -> SimState:
    """Take round(span / dt) steps of size dt (span and dt of the same sign)."""
    dt = _check_step(dt)
    steps = _step_count(span, dt)
    stepper = _Stepper(state.grid, dt, dealias)
    s, phase = state, None
    t0 = state.t
    for k in range(steps):
        s, phase = stepper.step(s, phase)
        s = replace(s, t=t0 + (k + 1) * dt)
    return s


def _step_count(span: float, dt: float) -> int:
    steps = span / dt
    n = int(round(steps))
    if n < 0 or abs(steps - n) > 1e-9 * max(1.0, abs(steps)):
        raise ValueError(f"time span {span} is not a nonnegative multiple of dt = {dt}")
    return n


# -------------------------------------------------------------- evolution


class StepReport(NamedTuple):
    t: float
    dt: float
    psi_l2: float
    psi_linf: float
    v_linf: float
    kg_energy: float
    wall_clock: float


def step_report(state: SimState, dt: float, started: float) -> StepReport:
    g = state.grid
    return StepReport(
        t=state.t,
        dt=dt,
        psi_l2=fg.reduce_norm(state.psi, g),
        psi_linf=fg.reduce_norm(state.psi, g, kind="Linf"),
        v_linf=fg.reduce_norm(state.v, g, kind="Linf"),
        kg_energy=pr.kg_energy(state.kg, g),
        wall_clock=time.perf_counter() - started,
    )


Sink = Callable[[SimState], None]


@dataclass
class EvolveResult:
    state: SimState
    reports: list[StepReport] = field(default_factory=list)


def evolve(
    state: SimState,
    T: float,
    dt: float,
    sample_every: int = 1,
    sinks: Sequence[Sink] = (),
    dealias: bool = True,
) -> EvolveResult:
    """Integrate to time T, calling every sink at the start and every ``sample_every`` steps.

    The sample times are state.t + k * sample_every * dt, so T - state.t
    must be a multiple of dt.  Sinks see immutable states.  A non-finite
    state raises NumericalError holding the last good sample.
    """
    dt = _check_step(dt)
    if dt < 0:
        raise ValueError("evolve runs forward in time; use advance for negative steps")
    if sample_every < 1:
        raise ValueError("sample_every must be a positive integer")
    steps = _step_count(T - state.t, dt)
    started = time.perf_counter()
    result = EvolveResult(state)
    for sink in sinks:
        sink(state)
    result.reports.append(step_report(state, dt, started))
    if steps == 0:
        return result

    stepper = _Stepper(state.grid, dt, dealias)
    t0 = state.t
    s, phase, last_good = state, None, state
    for k in range(1, steps + 1):
        s, phase = stepper.step(s, phase)
        s = replace(s, t=t0 + k * dt)
        if k % sample_every == 0 or k == steps:
            if not s.is_finite():
                raise NumericalError(f"non-finite state at t = {s.t:.6g}", last_good)
            last_good = s
            if k % sample_every == 0:
                for sink in sinks:
                    sink(s)
                result.reports.append(step_report(s, dt, started))
    result.state = s
    return result
