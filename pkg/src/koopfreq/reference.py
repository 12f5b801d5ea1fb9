"""Closed-form reference results for a 2-state cascade with quadratic coupling.

The system

    dx1/dt = a1 x1 + x2^2
    dx2/dt = a2 x2 + u,     u(t) = u0 exp(1j*omega*t),  a1, a2 < 0, a1 != 2 a2

closes exactly in the span of {x1, x2, u, x2^2, x2 u, u^2}, so its responses,
principal eigenfunctions, and mode expansion all have closed forms. They are
independent of the simulation/averaging pipeline and serve as the test
oracle for it:

* H2 for y = x1 is 1 / ((2j*omega - a1) * (1j*omega - a2)^2)
* H1 for y = x2 is 1 / (1j*omega - a2)
* every other harmonic and all subharmonics vanish.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from . import expr as ex
from .response import OrderTag
from .system import PlantSpec

__all__ = ["QuadraticCascade", "DegenerateParameters", "LiftedSystem",
           "eigenfunctions", "closed_form_response", "lifted_system",
           "kmd_reconstruct", "to_plant_spec"]


class DegenerateParameters(Exception):
    """Parameter choice collapses the closed forms (a1 = 2*a2 resonance)."""


@dataclass(frozen=True)
class QuadraticCascade:
    """Parameter set for the cascade; validates away the degenerate cases."""

    a1: float
    a2: float
    omega: float

    def __post_init__(self):
        if abs(self.a1 - 2 * self.a2) <= 1e-12:
            raise DegenerateParameters(
                f"a1 = 2*a2 (a1={self.a1}, a2={self.a2}): the x2^2 -> x1 "
                "coupling is resonant and the closed forms blow up")
        if not (self.a1 < 0 and self.a2 < 0):
            raise ValueError("a1 and a2 must be negative (stable cascade)")
        if self.a1 == self.a2:
            raise ValueError("a1 and a2 must be distinct")
        if not self.omega > 0:
            raise ValueError("omega must be positive")

    # recurring denominators
    @property
    def _K(self) -> complex:
        return complex(self.a1 - 2 * self.a2)

    @property
    def _B(self) -> complex:
        return self.a1 - self.a2 - 1j * self.omega

    @property
    def _C(self) -> complex:
        return self.a2 - 1j * self.omega


def eigenfunctions(sysp: QuadraticCascade) -> tuple[ex.Expr, ex.Expr, ex.Expr]:
    """Principal eigenfunctions at eigenvalues (a1, a2, 1j*omega), as trees.

    Coefficients are complex literals, so these trees evaluate but do not
    re-parse. Applying the skew-product generator to each must reproduce
    eigenvalue * eigenfunction pointwise; tests assert exactly that.
    """
    a1, K, B, C = sysp.a1, sysp._K, sysp._B, sysp._C
    x1, x2, u = ex.Var(1), ex.Var(2), ex.UVar()
    two = Fraction(2)

    phi_a1 = ex.Add(
        ex.Add(
            ex.Add(x1, ex.Mul(ex.Num(1 / K), ex.Pow(x2, two))),
            ex.Mul(ex.Num(2 / (K * B)), ex.Mul(x2, u))),
        ex.Mul(ex.Num(2 / (K * B * (a1 - 2j * sysp.omega))), ex.Pow(u, two)))
    phi_a2 = ex.Add(x2, ex.Mul(ex.Num(1 / C), u))
    phi_rot = u
    return phi_a1, phi_a2, phi_rot


def closed_form_response(sysp: QuadraticCascade, observable: str,
                         order: OrderTag) -> complex:
    """Exact response of y = x1 or y = x2 at the given order."""
    if observable not in ("x1", "x2"):
        raise ValueError("observable must be 'x1' or 'x2'")
    w = sysp.omega
    if observable == "x1" and order == OrderTag.harmonic(2):
        return 1 / ((2j * w - sysp.a1) * (1j * w - sysp.a2) ** 2)
    if observable == "x2" and order == OrderTag.harmonic(1):
        return 1 / (1j * w - sysp.a2)
    return 0j


@dataclass(frozen=True, eq=False)
class LiftedSystem:
    """Exact finite linear closure on (x1, x2, u, x2^2, x2*u, u^2)."""

    matrix: np.ndarray
    transfer_from_u2: Callable[[complex], complex]
    transfer_from_u: Callable[[complex], complex]


def lifted_system(sysp: QuadraticCascade) -> LiftedSystem:
    """Closure matrix and the x1 transfer functions of the lifted system.

    The u^2 -> x1 transfer evaluated at s = 2j*omega equals the closed-form
    H2 for y = x1: the lifted route and the response route must agree to
    machine precision.
    """
    a1, a2, w = sysp.a1, sysp.a2, sysp.omega
    jw = 1j * w
    M = np.array([
        [a1, 0,  0,  1,       0,        0],
        [0,  a2, 1,  0,       0,        0],
        [0,  0,  jw, 0,       0,        0],
        [0,  0,  0,  2 * a2,  2,        0],
        [0,  0,  0,  0,       a2 + jw,  1],
        [0,  0,  0,  0,       0,        2 * jw],
    ], dtype=complex)

    def transfer_from_u2(s: complex) -> complex:
        return 2 / ((s - a1) * (s - 2 * a2) * (s - (a2 + jw)))

    def transfer_from_u(s: complex) -> complex:
        return 0j

    return LiftedSystem(M, transfer_from_u2, transfer_from_u)


def kmd_reconstruct(sysp: QuadraticCascade, x0, u0: complex, t):
    """Exact trajectory from the mode expansion, evaluated at times t.

    x1(t) and x2(t) are finite sums of exp(lambda * t) terms whose
    coefficients are products of the eigenfunctions evaluated at the initial
    condition. Accepts scalar or array t; shapes broadcast.
    """
    a1, a2, w = sysp.a1, sysp.a2, sysp.omega
    K, B, C = sysp._K, sysp._B, sysp._C
    jw = 1j * w
    t = np.asarray(t, dtype=float)
    u0 = complex(u0)
    x10, x20 = complex(x0[0]), complex(x0[1])

    phi_a1 = (x10 + x20 ** 2 / K + 2 * x20 * u0 / (K * B)
              + 2 * u0 ** 2 / (K * B * (a1 - 2j * w)))
    phi_a2 = x20 + u0 / C
    phi_rot = u0

    h2_x1 = closed_form_response(sysp, "x1", OrderTag.harmonic(2))
    h1_x2 = closed_form_response(sysp, "x2", OrderTag.harmonic(1))

    x1 = (np.exp(a1 * t) * phi_a1
          + np.exp(2 * a2 * t) * phi_a2 ** 2 * (-1 / K)
          + np.exp((a2 + jw) * t) * phi_a2 * phi_rot * (2 / ((jw - a1 + a2) * (jw - a2)))
          + np.exp(2j * w * t) * phi_rot ** 2 * h2_x1)
    x2 = np.exp(a2 * t) * phi_a2 + np.exp(jw * t) * phi_rot * h1_x2
    if t.ndim == 0:
        return complex(x1), complex(x2)
    return x1, x2


def to_plant_spec(sysp: QuadraticCascade, observable: str = "x1",
                  name: str = "cascade") -> PlantSpec:
    """The cascade as a PlantSpec, for running the numeric pipeline."""
    return PlantSpec.from_strings(
        name, 2, ("a1*x1 + x2^2", "a2*x2 + u"), observable,
        {"a1": sysp.a1, "a2": sysp.a2})
