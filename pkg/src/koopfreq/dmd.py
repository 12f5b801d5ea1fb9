"""Delay-embedded dynamic mode decomposition of a scalar output.

A third, data-driven route to the response: embed the sampled output in
delay coordinates, fit the one-step linear map on a rank-truncated SVD
basis, and read continuous-time eigenvalues as log(mu)/dt on the principal
branch. Mode amplitudes come from a Vandermonde least-squares fit to the
raw sequence, so the amplitude at the forced frequency, phase-referenced to
t = 0 and normalized by the input power, is directly comparable with the
harmonic-averaging and residue estimators.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass

import numpy as np

from .response import FreqResponse, OrderTag

__all__ = ["DmdResult", "RankDeficient", "EigenvalueNotFound",
           "hankel_dmd", "mode_to_response"]

_COND_LIMIT = 1e12


class RankDeficient(Exception):
    """No singular value above the truncation threshold (e.g. zero signal)."""


class EigenvalueNotFound(Exception):
    """No fitted eigenvalue within tolerance of the queried frequency."""

    def __init__(self, target: complex, nearest: complex | None):
        msg = f"no eigenvalue near {target:.6g}"
        if nearest is not None:
            msg += f"; nearest fitted is {nearest:.6g}"
        super().__init__(msg)
        self.target = target
        self.nearest = nearest


@dataclass(frozen=True, eq=False)
class DmdResult:
    """Eigenvalues and amplitudes fitted to one scalar sequence.

    amplitudes are referenced to the first sample, taken at absolute time
    t0: y(t) ~ sum_i amplitudes[i] * exp(cont_eigs[i] * (t - t0)).
    ill_conditioned is a warning, not an error: the fit is still returned.
    """

    discrete_eigs: np.ndarray
    cont_eigs: np.ndarray
    amplitudes: np.ndarray
    rank: int
    residual: float
    vandermonde_cond: float
    dt: float
    t0: float

    @property
    def ill_conditioned(self) -> bool:
        return self.vandermonde_cond > _COND_LIMIT


def hankel_dmd(y, dt: float, delay: int = 8, rank_tol: float = 1e-10,
               t0: float = 0.0) -> DmdResult:
    """Fit a delay-embedded linear model to the scalar sequence y.

    Parameters
    ----------
    y : complex sequence, length >= 2*delay + 2
    dt : sample spacing; the principal branch of log(mu)/dt must cover the
        frequencies of interest, i.e. dt < pi / |Im lambda|.
    delay : embedding depth (rows of the Hankel matrix).
    rank_tol : relative singular value cutoff for the truncation.
    t0 : absolute time of y[0], kept for phase referencing.
    """
    y = np.asarray(y, dtype=complex).reshape(-1)
    n = len(y)
    if delay < 1:
        raise ValueError("delay must be >= 1")
    if n < 2 * delay + 2:
        raise ValueError(f"need at least {2 * delay + 2} samples, got {n}")

    emb = np.lib.stride_tricks.sliding_window_view(y, delay)  # (n-delay+1, delay)
    X = emb[:-1].T
    Y = emb[1:].T

    U, s, Vh = np.linalg.svd(X, full_matrices=False)
    keep = s > rank_tol * s[0] if s[0] > 0 else np.zeros_like(s, dtype=bool)
    r = int(keep.sum())
    if r == 0:
        raise RankDeficient("all singular values below the truncation threshold")
    U, s, Vh = U[:, keep], s[keep], Vh[keep]

    atilde = U.conj().T @ Y @ Vh.conj().T / s
    mu = np.linalg.eigvals(atilde)
    mu = mu[np.abs(mu) > 1e-12]  # a zero map has no continuous counterpart
    if len(mu) == 0:
        raise RankDeficient("all fitted eigenvalues are numerically zero")
    lam = np.log(mu) / dt  # principal branch

    vand = np.power.outer(mu, np.arange(n)).T  # (n, r)
    amps, _, _, sv = np.linalg.lstsq(vand, y, rcond=None)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else np.inf
    norm_y = float(np.linalg.norm(y))
    residual = float(np.linalg.norm(y - vand @ amps)) / max(norm_y, 1e-300)

    return DmdResult(mu, lam, amps, len(mu), residual, cond, dt, t0)


def mode_to_response(fit: DmdResult, omega: float, order: OrderTag,
                     u0: complex, tol: float | None = None) -> FreqResponse:
    """Read the response at the queried order off a fitted decomposition.

    Picks the fitted eigenvalue nearest 1j*Omega (within tol, default
    1e-3 * omega), rotates its amplitude back to the t = 0 phase reference,
    and normalizes by the input power. err_estimate is the fit residual
    scaled to the response magnitude.
    """
    if tol is None:
        tol = 1e-3 * omega
    target = 1j * order.frequency(omega)
    dist = np.abs(fit.cont_eigs - target)
    i = int(np.argmin(dist))
    if dist[i] > tol:
        raise EigenvalueNotFound(target, complex(fit.cont_eigs[i]))

    amp = complex(fit.amplitudes[i])
    value = amp * cmath.exp(-target * fit.t0) / order.input_power(u0)
    err = fit.residual * (1 + abs(value))
    return FreqResponse(omega, order, value, "dmd", err, u0)
