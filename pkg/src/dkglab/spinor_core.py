"""Pointwise Clifford algebra for the 2D Dirac operator.

Spinors are arrays whose *first* axis has length 2; any trailing axes are
treated as grid axes, so every function here works both on a single
``Complex2Vector`` (shape ``(2,)``) and on a whole ``SpinorField``
(shape ``(2, n, n)``).  First jets carry the derivative index first:
``(dt, d1, d2)`` stacked along axis 0.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

# Minkowski metric, signature (-, +, +).
ETA = np.diag([-1.0, 1.0, 1.0])

GAMMA = np.array(
    [
        [[1, 0], [0, -1]],
        [[0, 1], [-1, 0]],
        [[0, -1j], [-1j, 0]],
    ],
    dtype=complex,
)
GAMMA.flags.writeable = False

IDENTITY = np.eye(2, dtype=complex)

# gamma^0 gamma^a, a = 1, 2; these are the Pauli matrices sigma_x, sigma_y.
SIGMA = np.array([GAMMA[0] @ GAMMA[1], GAMMA[0] @ GAMMA[2]])
SIGMA.flags.writeable = False

# gamma^1 gamma^2 = diag(-i, i), the spin part of the modified rotation.
GAMMA12 = GAMMA[1] @ GAMMA[2]


def gamma_matrix(mu: int) -> np.ndarray:
    """Return a copy of the Dirac matrix gamma^mu, mu in {0, 1, 2}."""
    _check_index(mu)
    return GAMMA[mu].copy()


def anticommutator(mu: int, nu: int) -> np.ndarray:
    _check_index(mu)
    _check_index(nu)
    return GAMMA[mu] @ GAMMA[nu] + GAMMA[nu] @ GAMMA[mu]


def _check_index(mu) -> None:
    if not isinstance(mu, (int, np.integer)) or not 0 <= mu <= 2:
        raise IndexError(f"spacetime index must be 0, 1 or 2, got {mu!r}")


def apply(matrix: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Apply a 2x2 matrix to a spinor (or spinor field) pointwise."""
    phi = np.asarray(phi)
    return np.stack(
        [
            matrix[0, 0] * phi[0] + matrix[0, 1] * phi[1],
            matrix[1, 0] * phi[0] + matrix[1, 1] * phi[1],
        ]
    )


def unit_direction(x1, x2) -> np.ndarray:
    """omega = x / r, with omega = (0, 0) at the origin."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    r = np.hypot(x1, x2)
    safe = np.where(r > 0, r, 1.0)
    return np.stack([np.where(r > 0, x1 / safe, 0.0), np.where(r > 0, x2 / safe, 0.0)])


def radial_operator(phi: np.ndarray, omega: np.ndarray) -> np.ndarray:
    """omega_a gamma^0 gamma^a phi."""
    phi = np.asarray(phi, dtype=complex)
    w1, w2 = omega[0], omega[1]
    # w1 * sigma_x + w2 * sigma_y = [[0, w1 - i w2], [w1 + i w2, 0]]
    return np.stack([(w1 - 1j * w2) * phi[1], (w1 + 1j * w2) * phi[0]])


def radial_projection(phi: np.ndarray, omega: np.ndarray, sign: str | int = "-") -> np.ndarray:
    """[phi]_+ or [phi]_- = phi +/- omega_a gamma^0 gamma^a phi."""
    s = _sign(sign)
    return np.asarray(phi, dtype=complex) + s * radial_operator(phi, omega)


def _sign(sign) -> int:
    if sign in ("+", 1, +1):
        return 1
    if sign in ("-", -1):
        return -1
    raise ValueError(f"sign must be '+' or '-', got {sign!r}")


def dirac_bilinear(phi1: np.ndarray, phi2: np.ndarray) -> np.ndarray:
    """phi1^* gamma^0 phi2 (complex; real when phi1 is phi2)."""
    phi1 = np.asarray(phi1)
    phi2 = np.asarray(phi2)
    return np.conj(phi1[0]) * phi2[0] - np.conj(phi1[1]) * phi2[1]


def mass_density(phi: np.ndarray) -> np.ndarray:
    """The real source term psi^* gamma^0 psi = |psi_1|^2 - |psi_2|^2."""
    phi = np.asarray(phi)
    return (phi[0].real**2 + phi[0].imag**2) - (phi[1].real**2 + phi[1].imag**2)


def bilinear_split(phi1: np.ndarray, phi2: np.ndarray, omega: np.ndarray) -> np.ndarray:
    """Rewrite phi1^* gamma^0 phi2 through the radial projections.

    The [.]_+ x [.]_+ term is identically zero, so only three of the four
    products of the decomposition 2 phi = [phi]_+ + [phi]_- survive.
    """
    p1, m1 = radial_projection(phi1, omega, "+"), radial_projection(phi1, omega, "-")
    p2, m2 = radial_projection(phi2, omega, "+"), radial_projection(phi2, omega, "-")
    return 0.25 * (dirac_bilinear(m1, m2) + dirac_bilinear(m1, p2) + dirac_bilinear(p1, m2))


def null_form_q0(jf: np.ndarray, jg: np.ndarray) -> np.ndarray:
    """Q0(f, g) = d_t f d_t g - d_1 f d_1 g - d_2 f d_2 g.

    ``jf`` and ``jg`` are jets (dt, d1, d2) stacked on axis 0.  Either may
    be spinor valued; the spinor axis then sits at axis 1 and broadcasts
    against the trailing grid axes of a scalar jet.
    """
    jf = np.asarray(jf)
    jg = np.asarray(jg)
    return jf[0] * jg[0] - jf[1] * jg[1] - jf[2] * jg[2]


def gamma_contract(jet: np.ndarray) -> np.ndarray:
    """gamma^mu d_mu phi for a spinor jet of shape (3, 2, ...)."""
    return sum(apply(GAMMA[mu], jet[mu]) for mu in range(3))


class CubicTerms(NamedTuple):
    n1: np.ndarray
    n2: np.ndarray
    n3: np.ndarray
    n4: np.ndarray


def cubic_terms(psi: np.ndarray, v, dpsi: np.ndarray, dvpsi: np.ndarray) -> CubicTerms:
    """The four nonlinear terms that appear after the normal-form transforms.

    ``dpsi`` and ``dvpsi`` are the first jets of psi and of the product
    v psi.  Jets of psi^* and v psi^* are their conjugates because v is
    real.  Index raising uses the metric, so d^0 = -d_t.
    """
    psi = np.asarray(psi, dtype=complex)
    v = np.asarray(v, dtype=float)
    dpsi = np.asarray(dpsi, dtype=complex)
    dvpsi = np.asarray(dvpsi, dtype=complex)

    n1 = 1j * v * gamma_contract(dvpsi)
    n2 = mass_density(psi) * psi

    # psi^* gamma^0 gamma^mu d_mu(v psi); gamma^0 gamma^0 = I.
    inner = np.sum(np.conj(psi) * dvpsi[0], axis=0) + sum(
        np.sum(np.conj(psi) * apply(SIGMA[a], dvpsi[a + 1]), axis=0) for a in range(2)
    )
    # gamma^0 gamma^mu is Hermitian, so the first term of N3 is conj(inner).
    n3 = 1j * np.conj(inner) - 1j * inner

    n4 = 2.0 * (
        -dirac_bilinear(dpsi[0], dpsi[0]) + dirac_bilinear(dpsi[1], dpsi[1]) + dirac_bilinear(dpsi[2], dpsi[2])
    )
    return CubicTerms(n1, n2, n3, n4)
