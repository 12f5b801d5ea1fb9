"""Plant definitions and the skew-product extension with a rotating input.

A plant is a vector field dx/dt = F(x, u) with a default observable
y = g(x, u). Closing the loop with the oscillator du/dt = 1j*omega*u turns
periodic forcing into an autonomous skew-product system on (x, u); the
associated generator acting on a scalar observable f is

    L f = F(x, u) . grad_x f + 1j*omega*u * df/du
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

from . import expr as ex

__all__ = ["PlantSpec", "SkewSystem", "augmented_field", "apply_generator"]


@dataclass(frozen=True, eq=False)
class PlantSpec:
    """A plant dx/dt = F(x, u) with named real parameters and an observable."""

    name: str
    dim: int
    rhs: tuple[ex.Expr, ...]
    observable: ex.Expr
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "rhs", tuple(self.rhs))
        object.__setattr__(self, "params", dict(self.params))
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if len(self.rhs) != self.dim:
            raise ValueError(f"expected {self.dim} equations, got {len(self.rhs)}")
        for i, e in enumerate(self.rhs):
            self._check(e, f"equation for x{i + 1}")
        self._check(self.observable, "observable")

    def _check(self, e: ex.Expr, what: str) -> None:
        if e.max_var_index() > self.dim:
            raise ValueError(f"{what} references x{e.max_var_index()} but dim={self.dim}")
        missing = e.param_names() - set(self.params)
        if missing:
            raise ex.UnboundParameter(sorted(missing)[0])

    @classmethod
    def from_strings(cls, name: str, dim: int, equations: Sequence[str],
                     observable: str, params: Mapping[str, float] | None = None) -> "PlantSpec":
        params = dict(params or {})
        rhs = tuple(ex.parse(s, dim, params) for s in equations)
        g = ex.parse(observable, dim, params)
        return cls(name, dim, rhs, g, params)

    def rhs_fn(self) -> Callable:
        """Compiled vector field: f(x, u, theta=None) -> tuple of complex."""
        fn = getattr(self, "_rhs_fn", None)
        if fn is None:
            parts = [ex.compile_expr(e, self.params) for e in self.rhs]
            if len(parts) == 1:
                f0 = parts[0]
                fn = lambda x, u, theta=None: (f0(x, u, theta),)
            else:
                fn = lambda x, u, theta=None: tuple(p(x, u, theta) for p in parts)
            object.__setattr__(self, "_rhs_fn", fn)
        return fn

    def observable_fn(self, g: ex.Expr | None = None) -> Callable:
        """Compiled observable (default g) with parameters bound."""
        if g is not None:
            self._check(g, "observable")
        return ex.compile_expr(g if g is not None else self.observable, self.params)


@dataclass(frozen=True, eq=False)
class SkewSystem:
    """Plant driven by u(t) = u0 * exp(1j*omega*t)."""

    plant: PlantSpec
    omega: float
    u0: complex

    def __post_init__(self):
        object.__setattr__(self, "omega", float(self.omega))
        object.__setattr__(self, "u0", complex(self.u0))
        if not self.omega > 0:
            raise ValueError("omega must be positive")
        if abs(self.u0) == 0:
            raise ValueError("u0 must be nonzero")

    @property
    def period(self) -> float:
        return 2 * math.pi / self.omega

    def input_at(self, t: float) -> complex:
        return self.u0 * cmath.exp(1j * self.omega * t)

    def input_phase_at(self, t: float) -> float:
        """Continuous (unwound) phase of u at time t; branch fixed at t = 0
        by the principal argument of u0."""
        return cmath.phase(self.u0) + self.omega * t


def augmented_field(sys: SkewSystem, x: Sequence[complex], u: complex,
                    u_phase: float | None = None) -> tuple[complex, ...]:
    """Right-hand side of the skew-product system: (F(x, u), 1j*omega*u)."""
    fx = sys.plant.rhs_fn()(tuple(map(complex, x)), complex(u), u_phase)
    return fx + (1j * sys.omega * complex(u),)


def apply_generator(sys: SkewSystem, f: ex.Expr, x: Sequence[complex], u: complex,
                    u_phase: float | None = None) -> complex:
    """Apply the skew-product generator to the observable f at (x, u)."""
    xs = tuple(map(complex, x))
    uu = complex(u)
    fx = sys.plant.rhs_fn()(xs, uu, u_phase)
    gx, gu = ex.eval_grad(f, xs, uu, sys.plant.params, u_phase)
    acc = 0j
    for fi, gi in zip(fx, gx):
        acc += fi * gi
    return acc + 1j * sys.omega * uu * gu
