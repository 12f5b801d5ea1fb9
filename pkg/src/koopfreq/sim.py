"""Fixed-step complex RK4 integration and steady-state detection.

The input channel is never integrated: u(t) = u0 * exp(1j*omega*t) is
substituted exactly at every stage time, including half-steps, and the
stored u samples are direct rotations (|u_k| stays at |u0| to machine
precision, with no integration drift). The
step is snapped so the forcing period 2*pi/omega is an exact integer
multiple of dt, which makes later harmonic averages leakage-free.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import expr as ex
from .system import PlantSpec, SkewSystem

__all__ = ["Trajectory", "PeriodicityReport", "NonFiniteState", "TooShort",
           "integrate", "detect_periodicity", "detect_steady_state"]

_MIN_STEPS_PER_PERIOD = 64


class NonFiniteState(Exception):
    """State left the finite range during integration; carries the time."""

    def __init__(self, t: float):
        super().__init__(f"state became non-finite near t = {t:.6g}")
        self.t = t


class TooShort(Exception):
    """Trajectory does not span enough periods for the requested check."""


@dataclass(frozen=True)
class PeriodicityReport:
    periodic: bool
    detected_period: float | None
    residual: float
    transient_end: float | None


@dataclass(eq=False)
class Trajectory:
    """Sampled solution of a SkewSystem on a uniform grid.

    states has shape (n_samples, dim); inputs and outputs are aligned 1-d
    arrays. outputs holds the observable evaluated sample by sample with the
    tracked input phase, so fractional powers of u are single-valued.
    """

    sys: SkewSystem
    t0: float
    dt: float
    states: np.ndarray
    inputs: np.ndarray
    outputs: np.ndarray
    observable: ex.Expr
    steps_per_period: int

    @property
    def t(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self.inputs))

    @property
    def duration(self) -> float:
        return self.dt * (len(self.inputs) - 1)

    def input_phases(self) -> np.ndarray:
        return self.sys.input_phase_at(self.t0) + self.sys.omega * self.dt * np.arange(len(self.inputs))

    def with_observable(self, g: ex.Expr) -> "Trajectory":
        """Same states, outputs recomputed for a different observable."""
        outputs = _eval_outputs(self.sys.plant.observable_fn(g), self.states,
                                self.inputs, self.input_phases())
        return Trajectory(self.sys, self.t0, self.dt, self.states, self.inputs,
                          outputs, g, self.steps_per_period)

    def to_csv(self, path) -> None:
        cols = ["t"]
        for i in range(1, self.sys.plant.dim + 1):
            cols += [f"re_x{i}", f"im_x{i}"]
        cols += ["re_u", "im_u", "re_y", "im_y"]
        with open(path, "w", newline="") as fh:
            fh.write(",".join(cols) + "\n")
            t = self.t
            for k in range(len(t)):
                row = [f"{t[k]:.15g}"]
                for i in range(self.sys.plant.dim):
                    z = self.states[k, i]
                    row += [f"{z.real:.15g}", f"{z.imag:.15g}"]
                for z in (self.inputs[k], self.outputs[k]):
                    row += [f"{z.real:.15g}", f"{z.imag:.15g}"]
                fh.write(",".join(row) + "\n")


def _eval_outputs(fn: Callable, states: np.ndarray, inputs: np.ndarray,
                  phases: np.ndarray) -> np.ndarray:
    out = np.empty(len(inputs), dtype=complex)
    for k in range(len(inputs)):
        out[k] = fn(states[k], inputs[k], phases[k])
    return out


def integrate(sys: SkewSystem, x0: Sequence[complex], T: float, dt: float,
              observable: ex.Expr | None = None, t0: float = 0.0) -> Trajectory:
    """Integrate the plant under rotational forcing for duration T.

    dt is a request: it is snapped down so 2*pi/omega is an exact integer
    multiple of the actual step. Requires dt <= period/64. Raises
    NonFiniteState at the first sample where the state stops being finite.
    """
    plant = sys.plant
    if len(x0) != plant.dim:
        raise ValueError(f"x0 has length {len(x0)}, plant dim is {plant.dim}")
    period = sys.period
    if dt <= 0 or T <= 0:
        raise ValueError("dt and T must be positive")
    if dt > period / _MIN_STEPS_PER_PERIOD * (1 + 1e-12):
        raise ValueError(f"dt must be <= period/{_MIN_STEPS_PER_PERIOD}")

    n_per = max(_MIN_STEPS_PER_PERIOD, math.ceil(period / dt - 1e-9))
    h = period / n_per
    n_steps = max(1, math.ceil(T / h - 1e-9))

    rhs = plant.rhs_fn()
    w = sys.omega
    u0 = sys.u0
    d = plant.dim

    states = np.empty((n_steps + 1, d), dtype=complex)
    inputs = np.empty(n_steps + 1, dtype=complex)
    x = tuple(complex(v) for v in x0)
    states[0] = x
    inputs[0] = sys.input_at(t0)
    phase0 = sys.input_phase_at(t0)

    half = 0.5 * h
    sixth = h / 6.0
    for k in range(n_steps):
        t = t0 + k * h
        th = phase0 + w * (k * h)
        ua = u0 * cmath.exp(1j * w * t)
        ub = u0 * cmath.exp(1j * w * (t + half))
        uc = u0 * cmath.exp(1j * w * (t + h))
        try:
            k1 = rhs(x, ua, th)
            x1 = tuple(xi + half * ki for xi, ki in zip(x, k1))
            k2 = rhs(x1, ub, th + w * half)
            x2 = tuple(xi + half * ki for xi, ki in zip(x, k2))
            k3 = rhs(x2, ub, th + w * half)
            x3 = tuple(xi + h * ki for xi, ki in zip(x, k3))
            k4 = rhs(x3, uc, th + w * h)
            x = tuple(xi + sixth * (a + 2 * b + 2 * c + e)
                      for xi, a, b, c, e in zip(x, k1, k2, k3, k4))
        except OverflowError:
            raise NonFiniteState(t + h) from None
        states[k + 1] = x
        inputs[k + 1] = uc

    finite = np.isfinite(states).all(axis=1)
    if not finite.all():
        bad = int(np.argmin(finite))
        raise NonFiniteState(t0 + bad * h)

    g = observable if observable is not None else plant.observable
    phases = phase0 + w * h * np.arange(n_steps + 1)
    outputs = _eval_outputs(plant.observable_fn(g), states, inputs, phases)
    return Trajectory(sys, t0, h, states, inputs, outputs, g, n_per)


def detect_periodicity(traj: Trajectory, candidate_period: float,
                       tol: float = 1e-7) -> PeriodicityReport:
    """Test the output for steady periodicity with the candidate period.

    Reports periodic=True when |y(t + T) - y(t)| stays below
    tol * (1 + max |y|) from some time t_a through the end of the data, with
    at least one full period of residual samples after t_a. transient_end is
    the earliest such t_a. Requiring the quiet region to reach the end keeps
    slowly diverging signals, which look repetitive early on, from passing.
    y(t + T) is linearly interpolated when T is not a grid multiple.
    Requires at least 4 candidate periods of data.
    """
    if candidate_period <= 0:
        raise ValueError("candidate_period must be positive")
    y = traj.outputs
    dt = traj.dt
    n = len(y)
    if traj.duration < 4 * candidate_period * (1 - 1e-9):
        raise TooShort(
            f"need >= 4 periods ({4 * candidate_period:.6g}), have {traj.duration:.6g}")

    c = candidate_period / dt
    ci = int(math.floor(c + 1e-9))
    frac = c - ci
    if abs(frac) < 1e-9:
        shifted = y[ci:]
    else:
        shifted = y[ci:-1] * (1 - frac) + y[ci + 1:] * frac
    m = len(shifted)
    r = np.abs(shifted - y[:m])

    threshold = tol * (1 + float(np.abs(y).max()))
    win = int(math.ceil(c - 1e-9))  # residual samples spanning one period
    last_start = len(r) - 1 - win
    if last_start < 0:
        raise TooShort("trajectory too short for a one-period residual window")

    bad = np.flatnonzero(r >= threshold)
    k0 = int(bad[-1]) + 1 if len(bad) else 0
    if k0 <= last_start:
        residual = float(r[k0:].max())
        return PeriodicityReport(True, candidate_period, residual,
                                 traj.t0 + k0 * dt)
    residual = float(r[last_start:].max())
    return PeriodicityReport(False, None, residual, None)


def detect_steady_state(traj: Trajectory, tol: float = 1e-7,
                        max_subharmonic: int = 3) -> tuple[PeriodicityReport, int]:
    """Try candidate periods k * 2*pi/omega for k = 1..max_subharmonic.

    Returns (report, k) for the smallest k that settles; if none does,
    returns the fundamental-period report with periodic=False.
    """
    first = None
    for k in range(1, max_subharmonic + 1):
        try:
            rep = detect_periodicity(traj, k * traj.sys.period, tol)
        except TooShort:
            break
        if first is None:
            first = rep
        if rep.periodic:
            return rep, k
    if first is None:
        raise TooShort("trajectory spans fewer than 4 forcing periods")
    return first, 1
