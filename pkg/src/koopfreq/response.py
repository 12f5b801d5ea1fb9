"""Frequency-response estimators for harmonic and subharmonic orders.

Two independent routes to the same number:

* harmonic averaging: a Fourier coefficient of the settled output on a
  window commensurate with the forcing, normalized by the input power;
* Abel-regularized residue: eps * L[y](1j*Omega + eps) extrapolated to
  eps -> 0, where L is a finite-horizon Laplace transform. The residue of
  the output transform at the forced frequency is the same response the
  averaging route measures, so agreement of the two is a strong self-check.

Order (harmonic, n) targets Omega = n*omega and normalizes by u0**n;
(subharmonic, n) targets Omega = omega/n and normalizes by the n-th root
of u0 on the branch fixed by arg(u0) in (-pi, pi].
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .sim import Trajectory, PeriodicityReport, detect_steady_state

__all__ = [
    "OrderTag", "FreqResponse", "CrossCheckReport",
    "NotSteady", "WindowTooShort", "ScheduleTooCoarse", "TruncationDominated",
    "PoleOrderSuspect", "MismatchedQuery",
    "harmonic_average", "abel_residue", "cross_check", "estimate",
]

_trapezoid = getattr(np, "trapezoid", None) or np.trapz


class NotSteady(Exception):
    """Output never settled onto a periodic orbit at the working tolerance."""


class WindowTooShort(Exception):
    """Not enough settled data after the transient for the averaging window."""


class ScheduleTooCoarse(Exception):
    """Extrapolation over the regularization schedule diverged."""


class TruncationDominated(Exception):
    """Horizon too short for the smallest regularization eps (T*eps < 5)."""


class PoleOrderSuspect(Exception):
    """Regularized values grow like 1/eps: pole order likely > 1."""


class MismatchedQuery(Exception):
    """Cross-check between responses of different (omega, order, u0)."""


@dataclass(frozen=True)
class OrderTag:
    """Which response the query targets: (harmonic, n) or (subharmonic, n)."""

    kind: str
    n: int

    def __post_init__(self):
        if self.kind not in ("harmonic", "subharmonic"):
            raise ValueError(f"bad kind {self.kind!r}")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.kind == "subharmonic" and self.n < 2:
            raise ValueError("subharmonic order needs n >= 2")

    @classmethod
    def harmonic(cls, n: int) -> "OrderTag":
        return cls("harmonic", n)

    @classmethod
    def subharmonic(cls, n: int) -> "OrderTag":
        return cls("subharmonic", n)

    @classmethod
    def parse(cls, text: str) -> "OrderTag":
        """'2' -> (harmonic, 2); '1/3' -> (subharmonic, 3)."""
        text = text.strip()
        if "/" in text:
            num, den = text.split("/", 1)
            if num.strip() != "1":
                raise ValueError(f"bad order {text!r}: use n or 1/n")
            return cls.subharmonic(int(den))
        return cls.harmonic(int(text))

    @property
    def label(self) -> str:
        return f"H{self.n}" if self.kind == "harmonic" else f"H1/{self.n}"

    def frequency(self, omega: float) -> float:
        """The frequency Omega where the response line lives."""
        return self.n * omega if self.kind == "harmonic" else omega / self.n

    def slow_multiple(self) -> int:
        """Forcing periods per period of the targeted component."""
        return 1 if self.kind == "harmonic" else self.n

    def input_power(self, u0: complex) -> complex:
        """Normalization u0**n or u0**(1/n) on the branch fixed at t = 0."""
        if self.kind == "harmonic":
            return u0 ** self.n
        mag = abs(u0) ** (1.0 / self.n)
        return mag * cmath.exp(1j * cmath.phase(u0) / self.n)


@dataclass(frozen=True)
class FreqResponse:
    """One response estimate with its provenance and error estimate."""

    omega: float
    order: OrderTag
    value: complex
    method: str
    err_estimate: float
    u0: complex

    def __post_init__(self):
        if not (np.isfinite(self.value.real) and np.isfinite(self.value.imag)):
            raise ValueError("response value must be finite")
        if not np.isfinite(self.err_estimate):
            raise ValueError("err_estimate must be finite")


@dataclass(frozen=True)
class CrossCheckReport:
    ok: bool
    gap: float
    rel_tol: float
    method_a: str
    method_b: str
    value_a: complex
    value_b: complex


def _steady_window_start(traj: Trajectory, report: PeriodicityReport) -> int:
    idx = math.ceil((report.transient_end - traj.t0) / traj.dt - 1e-9)
    return max(0, idx)


def harmonic_average(traj: Trajectory, order: OrderTag, window: int = 8,
                     tol: float = 1e-7,
                     steady: tuple[PeriodicityReport, int] | None = None) -> FreqResponse:
    """Fourier-coefficient estimate of the response at the given order.

    Averages y(t) * exp(-1j*Omega*t) by the trapezoid rule over ``window``
    periods of the slow frequency, starting at the first grid point after
    the detected transient. The grid is commensurate with the forcing, so
    full-period averages carry no spectral leakage. err_estimate is the
    change when the window is halved, which bounds the leftover transient
    contamination (the dominant error at this step size).
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    if steady is None:
        steady = detect_steady_state(traj, tol)
    report, k_detected = steady
    if not report.periodic:
        raise NotSteady(f"residual {report.residual:.3g} above tolerance {tol:g}")

    n_slow = math.lcm(k_detected, order.slow_multiple())
    p_slow = n_slow * traj.steps_per_period  # samples per slow period
    start = _steady_window_start(traj, report)
    total = window * p_slow
    if start + total > len(traj.outputs) - 1:
        have = (len(traj.outputs) - 1 - start) * traj.dt
        raise WindowTooShort(
            f"need {total * traj.dt:.6g} settled time, have {have:.6g}")

    omega = traj.sys.omega
    big_omega = order.frequency(omega)
    t = traj.t
    y = traj.outputs

    def coeff(n_samples: int) -> complex:
        sl = slice(start, start + n_samples + 1)
        integrand = y[sl] * np.exp(-1j * big_omega * t[sl])
        return complex(_trapezoid(integrand, dx=traj.dt) / (n_samples * traj.dt))

    c_full = coeff(total)
    half = (window // 2) * p_slow if window >= 2 else p_slow // 2
    c_half = coeff(half)

    scale = order.input_power(traj.sys.u0)
    return FreqResponse(omega, order, c_full / scale, "harmonic_average",
                        abs(c_full - c_half) / abs(scale), traj.sys.u0)


def default_eps_schedule(T: float, points: int = 4, ratio: float = 0.5,
                         min_eps_T: float = 20.0) -> list[float]:
    """Geometric eps schedule with the smallest eps at min_eps_T / T.

    The finite horizon truncates the Laplace transform, biasing the
    regularized value by exp(-eps*T); keeping T*eps >= 20 for every point
    pushes that bias below 1e-8 so the extrapolation only has to remove the
    smooth O(eps) part.
    """
    smallest = min_eps_T / T
    return [smallest * (1 / ratio) ** k for k in range(points - 1, -1, -1)]


def abel_residue(traj: Trajectory, order: OrderTag,
                 eps_schedule: Sequence[float] | None = None,
                 extrap_order: int | None = None) -> FreqResponse:
    """Abel-regularized residue of the output transform at Omega.

    Computes f(eps) = eps * integral_0^T y(t) exp(-(1j*Omega + eps) t) dt
    for each eps in the schedule and extrapolates eps -> 0 by polynomial
    (Richardson/Neville) extrapolation. The diagonal of the Neville tableau
    gives a sequence of extrapolants of increasing order; the result is the
    last one and err_estimate the spread of the last two.
    """
    T = traj.duration
    if eps_schedule is None:
        eps_schedule = default_eps_schedule(T)
    eps = sorted(float(e) for e in eps_schedule)
    if len(eps) < 2:
        raise ValueError("eps schedule needs at least 2 points")
    if eps[0] <= 0:
        raise ValueError("eps must be positive")
    if T * eps[0] < 5.0:
        raise TruncationDominated(
            f"T*eps_min = {T * eps[0]:.3g} < 5; lengthen the horizon or raise eps")

    omega = traj.sys.omega
    big_omega = order.frequency(omega)
    tau = traj.t - traj.t0
    # overflow here is handled below: non-finite extrapolants are reported
    # as ScheduleTooCoarse, so the intermediate warnings are suppressed
    with np.errstate(over="ignore", invalid="ignore"):
        base = traj.outputs * np.exp(-1j * big_omega * tau)

        fvals = []
        for e in eps:
            transform = _trapezoid(base * np.exp(-e * tau), dx=traj.dt)
            fvals.append(e * complex(transform))

    mags = [abs(f) for f in fvals]  # ascending eps
    growing = all(mags[i] > 1.5 * mags[i + 1] for i in range(len(mags) - 1))
    if growing and mags[0] > 5 * (mags[-1] + 1e-300):
        raise PoleOrderSuspect(
            "regularized values grow like 1/eps toward eps -> 0; "
            "the pole at the queried frequency looks higher than first order")

    # Neville tableau evaluated at eps = 0, points ordered largest eps first
    pts = list(zip(eps[::-1], fvals[::-1]))
    if extrap_order is not None:
        pts = pts[-(extrap_order + 1):]
    diag = [pts[0][1]]
    table = [pts[0][1]]
    for k in range(1, len(pts)):
        new = [pts[k][1]]
        for j in range(1, k + 1):
            xk, xkj = pts[k][0], pts[k - j][0]
            val = (xkj * new[j - 1] - xk * table[j - 1]) / (xkj - xk)
            new.append(val)
        table = new
        diag.append(table[-1])

    result = diag[-1]
    err = abs(diag[-1] - diag[-2])
    maxmag = max(mags)
    if not (np.isfinite(result.real) and np.isfinite(result.imag)) \
            or err > 10 * (1 + maxmag):
        raise ScheduleTooCoarse(
            f"extrapolants spread {err:.3g} against data scale {maxmag:.3g}")

    # undo the start-time phase reference and the input normalization
    phase_fix = cmath.exp(-1j * big_omega * traj.t0)
    scale = order.input_power(traj.sys.u0)
    return FreqResponse(omega, order, result * phase_fix / scale,
                        "abel_residue", err / abs(scale), traj.sys.u0)


def cross_check(a: FreqResponse, b: FreqResponse,
                rel_tol: float = 1e-2) -> tuple[bool, CrossCheckReport]:
    """Compare two estimates of the same query: |a - b| <= rel_tol * (1 + max |.|)."""
    if a.omega != b.omega or a.order != b.order or a.u0 != b.u0:
        raise MismatchedQuery(
            f"({a.omega}, {a.order.label}, {a.u0}) vs ({b.omega}, {b.order.label}, {b.u0})")
    gap = abs(a.value - b.value)
    ok = gap <= rel_tol * (1 + max(abs(a.value), abs(b.value)))
    return ok, CrossCheckReport(ok, gap, rel_tol, a.method, b.method,
                                a.value, b.value)


def estimate(traj: Trajectory, order: OrderTag, methods: Sequence[str] = ("harm", "abel"),
             window: int = 8, tol: float = 1e-7,
             eps_schedule: Sequence[float] | None = None,
             dmd_delay: int = 8,
             steady: tuple[PeriodicityReport, int] | None = None) -> dict[str, FreqResponse]:
    """Run the requested estimators on one trajectory; keys follow methods.

    'dmd' fits the settled window with a delay-embedded decomposition and
    reads the amplitude at the queried frequency; a missing eigenvalue there
    reports the response as zero (the cross-check against the other routes
    will flag it if that is wrong).
    """
    from . import dmd as _dmd  # local import to keep the module graph acyclic

    results: dict[str, FreqResponse] = {}
    if steady is None:
        steady = detect_steady_state(traj, tol)
    for method in methods:
        if method == "harm":
            results[method] = harmonic_average(traj, order, window, tol, steady)
        elif method == "abel":
            results[method] = abel_residue(traj, order, eps_schedule)
        elif method == "dmd":
            report, _ = steady
            if not report.periodic:
                raise NotSteady("dmd estimator needs a settled window")
            start = _steady_window_start(traj, report)
            fit = _dmd.hankel_dmd(traj.outputs[start:], traj.dt,
                                  delay=dmd_delay, t0=float(traj.t[start]))
            try:
                results[method] = _dmd.mode_to_response(
                    fit, traj.sys.omega, order, traj.sys.u0)
            except _dmd.EigenvalueNotFound:
                results[method] = FreqResponse(
                    traj.sys.omega, order, 0j, "dmd",
                    max(fit.residual, 1e-12), traj.sys.u0)
        else:
            raise ValueError(f"unknown method {method!r}")
    return results
