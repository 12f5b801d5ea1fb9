"""Delay-embedded decomposition of scalar signals: eigenvalue recovery,
amplitude referencing, and failure modes."""

import numpy as np
import pytest

import koopfreq as kf
from koopfreq import dmd
from koopfreq import expr as ex

H2_X1 = -0.04 - 0.08j


def test_pure_mode_recovery():
    dt = 0.01
    t = dt * np.arange(400)
    lam = -0.3 + 2.0j
    fit = dmd.hankel_dmd(2.0 * np.exp(lam * t), dt, delay=8)
    assert fit.rank >= 1
    k = np.abs(fit.cont_eigs - lam).argmin()
    assert abs(fit.cont_eigs[k] - lam) <= 1e-10
    assert fit.amplitudes[k] == pytest.approx(2.0, abs=1e-9)
    assert fit.residual <= 1e-10


def test_two_mode_recovery():
    dt = 0.02
    t = dt * np.arange(600)
    y = 1.5 * np.exp((-0.2 + 1.0j) * t) - 0.5j * np.exp(3.0j * t)
    fit = dmd.hankel_dmd(y, dt, delay=10)
    for lam, amp in [(-0.2 + 1.0j, 1.5), (3.0j, -0.5j)]:
        k = np.abs(fit.cont_eigs - lam).argmin()
        assert abs(fit.cont_eigs[k] - lam) <= 1e-9
        assert fit.amplitudes[k] == pytest.approx(amp, abs=1e-8)


def test_t0_referencing():
    """Amplitudes are reported at the window start; the response conversion
    rewinds them to t = 0, so a shifted window gives the same answer."""
    dt = 0.01
    lam = 2.0j
    o = kf.OrderTag.harmonic(2)
    vals = []
    for t0 in (0.0, 5.0):
        t = t0 + dt * np.arange(500)
        fit = dmd.hankel_dmd(0.3j * np.exp(lam * t), dt, delay=8, t0=t0)
        vals.append(dmd.mode_to_response(fit, 1.0, o, 1.0).value)
    assert abs(vals[0] - vals[1]) <= 1e-9
    assert vals[0] == pytest.approx(0.3j, abs=1e-9)


def test_rank_deficient_on_zero_signal():
    with pytest.raises(dmd.RankDeficient):
        dmd.hankel_dmd(np.zeros(100, dtype=complex), 0.01, delay=8)


def test_signal_too_short():
    with pytest.raises(ValueError):
        dmd.hankel_dmd(np.ones(17, dtype=complex), 0.01, delay=8)


def test_eigenvalue_not_found():
    dt = 0.01
    t = dt * np.arange(400)
    fit = dmd.hankel_dmd(np.exp(2.0j * t), dt, delay=8)
    with pytest.raises(dmd.EigenvalueNotFound) as ei:
        dmd.mode_to_response(fit, 1.0, kf.OrderTag.harmonic(5), 1.0)
    assert ei.value.target == pytest.approx(5.0j)
    assert abs(ei.value.nearest - 2.0j) <= 1e-6


def test_ill_conditioned_flag():
    ok = dmd.DmdResult(np.ones(1, complex), np.ones(1, complex),
                       np.ones(1, complex), 1, 0.0, 1e3, 0.01, 0.0)
    bad = dmd.DmdResult(np.ones(1, complex), np.ones(1, complex),
                        np.ones(1, complex), 1, 0.0, 1e13, 0.01, 0.0)
    assert not ok.ill_conditioned
    assert bad.ill_conditioned


def test_steady_cascade_second_harmonic(cascade_traj):
    """On settled data the 2i*w eigenvalue and its amplitude give the response."""
    res = kf.estimate(cascade_traj, kf.OrderTag.harmonic(2), methods=("dmd",))
    assert abs(res["dmd"].value - H2_X1) <= 1e-3


def test_steady_cascade_eigenvalue_location(cascade_traj):
    rep, _ = kf.detect_steady_state(cascade_traj)
    start = int(np.searchsorted(cascade_traj.t, rep.transient_end))
    fit = dmd.hankel_dmd(cascade_traj.outputs[start:], cascade_traj.dt,
                         delay=8, t0=float(cascade_traj.t[start]))
    assert np.abs(fit.cont_eigs - 2j).min() <= 1e-4


def test_transient_window_sees_lifted_spectrum(cascade, cascade_plant):
    """A window that still contains the transient exposes the decay rates of
    the lifted linear system alongside the forced rotations."""
    s = kf.SkewSystem(cascade_plant, cascade.omega, 1.0)
    tr = kf.integrate(s, [0.5, -0.3], 6.0,  s.period / 256,
                      observable=ex.parse("x1 + x2", 2))
    fit = dmd.hankel_dmd(tr.outputs, tr.dt, delay=12)
    lifted = [cascade.a1, cascade.a2, 1j, 2 * cascade.a2, cascade.a2 + 1j, 2j]
    for lam in lifted:
        assert np.abs(fit.cont_eigs - lam).min() <= 1e-3
    assert fit.residual <= 1e-6
    assert not fit.ill_conditioned


def test_mode_to_response_matches_resolvent(lin1d_traj):
    res = kf.estimate(lin1d_traj, kf.OrderTag.harmonic(1), methods=("dmd",))
    assert abs(res["dmd"].value - (0.5 - 0.5j)) <= 1e-4
