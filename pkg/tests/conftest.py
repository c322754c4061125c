"""Shared fixtures.  The tunneling W table (about 10 s to build) is made once per session."""

import numpy as np
import pytest

from lgdecay import Exponential, PiecewisePowerTail, ThreeRegime, Toy, Tunneling
from lgdecay.tunneling import build_p_interpolant

# polyfluorene parameters, times in ns
PF_TAU = 0.35
PF_ALPHA = -2.26
PF_TURNOVER = 11.1 * PF_TAU


@pytest.fixture(scope="session")
def tunneling_model():
    """Tunneling law in internal units a = V0 = 1 (the quoted lab values taken as units)."""
    model = Tunneling(a=1.0, V0=1.0)
    model.wtable  # build once
    return model


@pytest.fixture(scope="session")
def tunneling_interp(tunneling_model):
    return build_p_interpolant(tunneling_model.tunneling_params, tunneling_model.t_max, 1024,
                               wtable=tunneling_model.wtable)


@pytest.fixture(scope="session")
def polyfluorene():
    return PiecewisePowerTail(tau=PF_TAU, alpha=PF_ALPHA, turnover=PF_TURNOVER)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def standard_models():
    """Closed-form monotone models used across modules."""
    return {
        "exponential": Exponential(gamma=1.3),
        "toy": Toy(gamma=1.0, alpha=2.0),
        "power_tail": PiecewisePowerTail(tau=PF_TAU, alpha=PF_ALPHA, turnover=PF_TURNOVER),
        "three_regime": ThreeRegime(tau_z=2.0, Z=1.2, gamma=1.0, k=1e-3, alpha=2.0),
    }


def ordered_triples(rng, n, t_max, t_min=0.0):
    t = np.sort(rng.uniform(t_min, t_max, size=(n, 3)), axis=1)
    # keep strict ordering after sorting
    t[:, 1] = np.maximum(t[:, 1], np.nextafter(t[:, 0], np.inf))
    t[:, 2] = np.maximum(t[:, 2], np.nextafter(t[:, 1], np.inf))
    return t
