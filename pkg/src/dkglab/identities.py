"""Randomized checks of the pointwise algebra and the grid operators.

Every check is vectorized over its trials, so a full suite of 1000 trials
per identity runs in well under a second.  Tolerances are relative to the
natural size of each expression with a 1e-14 absolute floor.
"""
from __future__ import annotations

from typing import Callable, NamedTuple

import numpy as np

from . import field_grid as fg
from . import spinor_core as sc

REL_TOL = 1e-12
ABS_FLOOR = 1e-14


class CheckResult(NamedTuple):
    name: str
    trials: int
    failures: int
    max_error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.failures == 0

    def as_record(self) -> dict:
        return {**self._asdict(), "passed": self.passed}


def _result(name: str, err: np.ndarray, scale: np.ndarray | float, rel: float = REL_TOL) -> CheckResult:
    err = np.atleast_1d(np.asarray(err, dtype=float))
    bound = np.maximum(rel * np.broadcast_to(scale, err.shape), ABS_FLOOR)
    return CheckResult(name, int(err.size), int(np.sum(~(err <= bound))), float(err.max(initial=0.0)), rel)


def _spinors(rng: np.random.Generator, trials: int) -> np.ndarray:
    return rng.normal(size=(2, trials)) + 1j * rng.normal(size=(2, trials))


def _directions(rng: np.random.Generator, trials: int) -> np.ndarray:
    th = rng.uniform(0, 2 * np.pi, trials)
    return np.stack([np.cos(th), np.sin(th)])


def check_anticommutators(rng, trials) -> CheckResult:
    errs = [np.abs(sc.anticommutator(m, n) + 2 * sc.ETA[m, n] * np.eye(2)).max() for m in range(3) for n in range(3)]
    return CheckResult("anticommutator", 9, int(np.count_nonzero(errs)), float(max(errs)), 0.0)


def check_adjoint(rng, trials) -> CheckResult:
    errs = [
        np.abs(sc.GAMMA[m].conj().T + sum(sc.ETA[m, n] * sc.GAMMA[n] for n in range(3))).max() for m in range(3)
    ]
    return CheckResult("gamma_adjoint", 3, int(np.count_nonzero(errs)), float(max(errs)), 0.0)


def check_minus_norm(rng, trials) -> CheckResult:
    phi, w = _spinors(rng, trials), _directions(rng, trials)
    lhs = np.sum(np.abs(sc.radial_projection(phi, w, "-")) ** 2, axis=0)
    mass = np.sum(np.abs(phi) ** 2, axis=0)
    rhs = 2 * (mass - np.sum(np.conj(phi) * sc.radial_operator(phi, w), axis=0).real)
    return _result("minus_projection_norm", np.abs(lhs - rhs), mass)


def check_plus_null(rng, trials) -> CheckResult:
    phi, w = _spinors(rng, trials), _directions(rng, trials)
    p = sc.radial_projection(phi, w, "+")
    return _result("plus_projection_null", np.abs(sc.dirac_bilinear(p, p)), np.sum(np.abs(phi) ** 2, axis=0))


def check_bilinear_split(rng, trials) -> CheckResult:
    a, b, w = _spinors(rng, trials), _spinors(rng, trials), _directions(rng, trials)
    direct = sc.dirac_bilinear(a, b)
    split = sc.bilinear_split(a, b, w)
    scale = np.sqrt(np.sum(np.abs(a) ** 2, axis=0) * np.sum(np.abs(b) ** 2, axis=0))
    return _result("bilinear_split", np.abs(split - direct), scale)


def check_dirac_square(rng, trials) -> CheckResult:
    xi = rng.normal(size=(3, trials))
    phi = _spinors(rng, trials)
    sym = -np.einsum("mij,mt->ijt", sc.GAMMA, xi)
    twice = np.einsum("ijt,jkt,kt->it", sym, sym, phi)
    wave = -(-xi[0] ** 2 + xi[1] ** 2 + xi[2] ** 2)
    err = np.abs(twice - wave * phi).max(axis=0)
    return _result("dirac_square_is_wave", err, np.sum(xi**2, axis=0) * np.abs(phi).max(axis=0))


def check_q0_interior(rng, trials) -> CheckResult:
    t = rng.uniform(0.5, 50, trials)
    x = _directions(rng, trials) * rng.uniform(0, 0.99, trials) * t
    jf, jg = rng.normal(size=(3, trials)), rng.normal(size=(3, trials))
    lf = t * jf[1:] + x * jf[0]
    lg = t * jg[1:] + x * jg[0]
    r2 = np.sum(x * x, axis=0)
    rhs = (
        (1 - r2 / t**2) * jf[0] * jg[0]
        - np.sum(lf * lg, axis=0) / t**2
        + np.sum(x * (jf[0] * lg + lf * jg[0]), axis=0) / t**2
    )
    err = np.abs(sc.null_form_q0(jf, jg) - rhs)
    scale = np.abs(jf).max(axis=0) * np.abs(jg).max(axis=0)
    return _result("q0_interior_rewrite", err, scale)


_GRID = fg.SpectralGrid(64, 10.0)


def check_gradient(rng, trials) -> CheckResult:
    g = _GRID
    x1, x2 = g.coords
    m = rng.integers(1, 8, size=2)
    f = np.sin(np.pi * m[0] * x1 / g.L) * np.cos(np.pi * m[1] * x2 / g.L)
    d1, d2 = fg.spectral_gradient(f, g)
    e1 = d1 - np.pi * m[0] / g.L * np.cos(np.pi * m[0] * x1 / g.L) * np.cos(np.pi * m[1] * x2 / g.L)
    e2 = d2 + np.pi * m[1] / g.L * np.sin(np.pi * m[0] * x1 / g.L) * np.sin(np.pi * m[1] * x2 / g.L)
    return _result("spectral_gradient_trig", max(np.abs(e1).max(), np.abs(e2).max()), np.pi * m.max() / g.L)


def check_mixed_partials(rng, trials) -> CheckResult:
    g = _GRID
    f = fg.dealias(rng.normal(size=(g.n, g.n)), g)
    d1, d2 = fg.spectral_gradient(f, g)
    err = np.abs(fg.spectral_gradient(d1, g)[1] - fg.spectral_gradient(d2, g)[0]).max()
    return _result("mixed_partials_commute", err, np.abs(d1).max() * np.abs(g.k).max())


def check_modified_fields(rng, trials) -> CheckResult:
    g = _GRID
    psi = rng.normal(size=(2, g.n, g.n)) + 1j * rng.normal(size=(2, g.n, g.n))
    psit = rng.normal(size=(2, g.n, g.n)) + 0j
    t = float(rng.uniform(0, 5))
    err = 0.0
    for k, m in ((4, sc.GAMMA12), (5, sc.SIGMA[0]), (6, sc.SIGMA[1])):
        diff = fg.apply_modified_vector_field(k, [psi, psit], t, g)[0] - fg.apply_vector_field(k, [psi, psit], t, g)[0]
        err = max(err, np.abs(diff + 0.5 * sc.apply(m, psi)).max())
    return _result("modified_minus_plain_is_constant", err, np.abs(psi).max(), rel=1e-13)


def check_rotation_radial(rng, trials) -> CheckResult:
    g = _GRID
    a = float(rng.uniform(0.5, 2.0))
    f = np.exp(-a * g.r**2)
    out = fg.apply_vector_field(4, [f], 0.0, g)[0]
    return CheckResult("rotation_of_radial", 1, int(np.abs(out).max() > 1e-10), float(np.abs(out).max()), 1e-10)


SPINOR_CHECKS: tuple[Callable, ...] = (
    check_anticommutators, check_adjoint, check_minus_norm, check_plus_null,
    check_bilinear_split, check_dirac_square, check_q0_interior,
)
GRID_CHECKS: tuple[Callable, ...] = (check_gradient, check_mixed_partials, check_modified_fields, check_rotation_radial)


def run_identity_suite(seed: int = 0, trials: int = 1000, include_grid: bool = True) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    checks = SPINOR_CHECKS + (GRID_CHECKS if include_grid else ())
    return [check(rng, trials) for check in checks]
