"""Closed-form frequency response and spectral checks for LTI plants.

For dx/dt = A x + b u with output y = c . x, the fundamental response is
c . (1j*omega*I - A)^-1 b, and the skew-product system matrix

    M = [[A, b], [0, 1j*omega]]

has left eigenvector (0, ..., 0, 1) and right eigenvector (r, 1) at
eigenvalue 1j*omega, where r solves (1j*omega*I - A) r = b. These exact
values anchor the numeric estimators in tests and in `koopfreq validate`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import expr as ex
from .system import PlantSpec

__all__ = ["LtiPlant", "SingularAtOmega", "EigencheckReport",
           "lti_response", "skew_eigencheck", "to_plant_spec",
           "random_stable_plant"]

_MAX_DIM = 16
_EIG_GAP = 1e-9


class SingularAtOmega(Exception):
    """1j*omega is (numerically) an eigenvalue of A."""


@dataclass(frozen=True, eq=False)
class LtiPlant:
    """State-space triple (A, b, c), real matrices, y = c . x."""

    A: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        b = np.asarray(self.b, dtype=float).reshape(-1)
        c = np.asarray(self.c, dtype=float).reshape(-1)
        d = A.shape[0]
        if A.shape != (d, d):
            raise ValueError("A must be square")
        if d > _MAX_DIM:
            raise ValueError(f"dim {d} exceeds supported maximum {_MAX_DIM}")
        if b.shape != (d,) or c.shape != (d,):
            raise ValueError("b and c must have length matching A")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)
        eigs = np.linalg.eigvals(A)
        object.__setattr__(self, "eigenvalues", eigs)

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    @property
    def stable(self) -> bool:
        return bool(self.eigenvalues.real.max() < 0)

    @property
    def distinct(self) -> bool:
        e = self.eigenvalues
        gaps = np.abs(e[:, None] - e[None, :])[~np.eye(len(e), dtype=bool)]
        return bool(gaps.min() > _EIG_GAP) if len(e) > 1 else True

    @property
    def advisory(self) -> bool:
        """True when the closed form is not trustworthy as an exact oracle
        (repeated or unstable eigenvalues); callers downgrade, not error."""
        return not (self.stable and self.distinct)


@dataclass(frozen=True)
class EigencheckReport:
    omega: float
    left_residual: float
    right_residual: float
    resolvent_vector: np.ndarray


def _resolvent_apply(p: LtiPlant, omega: float) -> np.ndarray:
    if np.abs(1j * omega - p.eigenvalues).min() < _EIG_GAP:
        raise SingularAtOmega(f"1j*{omega:g} is an eigenvalue of A")
    M = 1j * omega * np.eye(p.dim) - p.A
    return np.linalg.solve(M, p.b.astype(complex))


def lti_response(p: LtiPlant, omega: float) -> complex:
    """Fundamental response c . (1j*omega*I - A)^-1 b."""
    return complex(p.c @ _resolvent_apply(p, omega))


def skew_eigencheck(p: LtiPlant, omega: float) -> EigencheckReport:
    """Residuals of the analytic eigenvectors of [[A, b], [0, 1j*omega]]."""
    d = p.dim
    M = np.zeros((d + 1, d + 1), dtype=complex)
    M[:d, :d] = p.A
    M[:d, d] = p.b
    M[d, d] = 1j * omega

    left = np.zeros(d + 1, dtype=complex)
    left[d] = 1.0
    left_res = float(np.linalg.norm(left @ M - 1j * omega * left))

    r = _resolvent_apply(p, omega)
    right = np.concatenate([r, [1.0 + 0j]])
    right_res = float(np.linalg.norm(M @ right - 1j * omega * right))
    return EigencheckReport(omega, left_res, right_res, r)


def _linear_comb(coeffs, with_u: float | None = None) -> ex.Expr:
    """Sum of coeff * x_i terms (plus coeff * u), skipping exact zeros."""
    acc: ex.Expr | None = None
    for i, a in enumerate(coeffs):
        if a == 0.0:
            continue
        term = ex.Mul(ex.Num(float(a)), ex.Var(i + 1))
        acc = term if acc is None else ex.Add(acc, term)
    if with_u is not None and with_u != 0.0:
        term = ex.Mul(ex.Num(float(with_u)), ex.UVar())
        acc = term if acc is None else ex.Add(acc, term)
    return acc if acc is not None else ex.Num(0.0)


def to_plant_spec(p: LtiPlant, name: str = "lti") -> PlantSpec:
    """Express (A, b, c) as a PlantSpec so the full expression/integration
    pipeline can be run against the closed form."""
    rhs = tuple(_linear_comb(p.A[i], with_u=float(p.b[i])) for i in range(p.dim))
    observable = _linear_comb(p.c)
    return PlantSpec(name, p.dim, rhs, observable, {})


def random_stable_plant(rng: np.random.Generator, dim: int = 3,
                        eig_range: tuple[float, float] = (-2.5, -0.5)) -> LtiPlant:
    """Random stable plant with real, well-separated eigenvalues.

    Built as Q diag(eigs) Q^T with orthogonal Q, so the spectrum is exact by
    construction; b and c are unit-scale random vectors.
    """
    lo, hi = eig_range
    while True:
        eigs = rng.uniform(lo, hi, size=dim)
        if dim == 1 or np.diff(np.sort(eigs)).min() > 0.05 * (hi - lo):
            break
    Q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    A = Q @ np.diag(eigs) @ Q.T
    b = rng.standard_normal(dim)
    c = rng.standard_normal(dim)
    return LtiPlant(A, b, c)
