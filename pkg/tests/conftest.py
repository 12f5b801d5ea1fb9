"""Shared fixtures. Session scope keeps the expensive trajectories to one run."""

import numpy as np
import pytest

import koopfreq as kf
from koopfreq import reference

A1, A2 = -1.0, -2.0
OMEGA = 1.0


@pytest.fixture(scope="session")
def cascade():
    return kf.QuadraticCascade(A1, A2, OMEGA)


@pytest.fixture(scope="session")
def cascade_plant(cascade):
    return reference.to_plant_spec(cascade)


@pytest.fixture(scope="session")
def cascade_sys(cascade_plant):
    return kf.SkewSystem(cascade_plant, OMEGA, 1.0)


@pytest.fixture(scope="session")
def cascade_traj(cascade_sys):
    return kf.integrate(cascade_sys, [0.1, -0.2], 60 * cascade_sys.period,
                        cascade_sys.period / 256)


@pytest.fixture(scope="session")
def lin1d_plant():
    return kf.PlantSpec.from_strings(
        "lin1d", 1, ("a*x1 + b*u",), "x1", {"a": -1.0, "b": 1.0})


@pytest.fixture(scope="session")
def lin1d_sys(lin1d_plant):
    return kf.SkewSystem(lin1d_plant, OMEGA, 1.0)


@pytest.fixture(scope="session")
def lin1d_traj(lin1d_sys):
    return kf.integrate(lin1d_sys, [0.0], 60 * lin1d_sys.period,
                        lin1d_sys.period / 256)


@pytest.fixture
def rng():
    return np.random.default_rng(20260814)
