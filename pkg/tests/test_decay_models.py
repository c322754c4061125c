import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from mpmath import mp
from scipy.integrate import quad

from lgdecay import (
    ConfigurationError,
    Custom,
    DomainError,
    Exponential,
    FitError,
    PiecewisePowerTail,
    Tabulated,
    ThreeRegime,
    Toy,
    decay_density,
    fit_effective_lifetime,
    fit_exponential_regime,
    make_model,
    survival,
)

from conftest import PF_ALPHA, PF_TAU, PF_TURNOVER, standard_models


# survival examples ----------------------------------------------------------

def test_toy_at_zero_is_one():
    assert Toy().survival(0.0) == 1.0


def test_toy_at_one_against_high_precision():
    mp.dps = 40
    ref = 0.5 * (mp.e ** mp.mpf(-0.5) + mp.mpf(1) / 2)
    assert abs(Toy(gamma=1, alpha=2).survival(1.0) - float(ref)) < 1e-15
    assert abs(float(ref) - 0.553265) < 5e-7


def test_power_tail_turnover_value_and_continuity(polyfluorene):
    m = polyfluorene
    head = math.exp(-m.turnover / m.tau)
    tail = m.k * m.turnover**m.alpha
    assert abs(head - math.exp(-11.1)) < 1e-15
    assert m.survival(m.turnover) == pytest.approx(math.exp(-11.1), rel=1e-12)
    assert m.survival(m.turnover) == pytest.approx(1.50e-5, rel=0.01)
    assert abs(tail - head) <= 1e-12 * head
    # approach from the tail side
    right = m.survival(np.nextafter(m.turnover, np.inf))
    assert abs(right - head) <= 1e-12 * head


def test_power_tail_k_closed_form(polyfluorene):
    expected = math.exp(-11.1) * (11.1 * PF_TAU) ** 2.26
    assert polyfluorene.k == pytest.approx(expected, rel=1e-12)


def test_exponential_half_life():
    assert Exponential(gamma=1.0).survival(math.log(2)) == pytest.approx(0.5, abs=1e-15)


def test_module_level_survival_matches_method():
    m = Toy()
    assert survival(m, 0.7) == m.survival(0.7)


def test_negative_time_is_domain_error():
    with pytest.raises(DomainError):
        Toy().survival(-1e-3)
    with pytest.raises(DomainError):
        Exponential().survival(np.array([0.1, -0.2]))


@pytest.mark.parametrize("kind, params, key", [
    ("toy", {"alpha": -1.0}, "alpha"),
    ("toy", {"gamma": 0.0}, "gamma"),
    ("exponential", {"gamma": -2.0}, "gamma"),
    ("piecewise_power_tail", {"alpha": 1.0}, "alpha"),
    ("piecewise_power_tail", {"tau": 0.0}, "tau"),
    ("three_regime", {"t_a": 2.0, "t_b": 1.0}, "t_b"),
    ("toy", {"beta": 1.0}, "beta"),
])
def test_invalid_parameters_name_the_key(kind, params, key):
    with pytest.raises(ConfigurationError) as err:
        make_model(kind, **params)
    assert err.value.key == key


def test_unknown_kind():
    with pytest.raises(ConfigurationError):
        make_model("gaussian")


# invariants over every kind -------------------------------------------------

@pytest.mark.parametrize("name", list(standard_models()))
def test_bounds_and_p0_on_dense_grid(name):
    m = standard_models()[name]
    tau = fit_effective_lifetime(m, window=(0.5 * m_scale(m), 3.0 * m_scale(m)))
    t = np.linspace(0.0, 20.0 * tau, 20001)
    p = m.survival(t)
    assert m.survival(0.0) == 1.0
    assert ((p >= 0) & (p <= 1)).all()
    assert (np.diff(p) <= 0).all()


def m_scale(m):
    return PF_TAU if isinstance(m, PiecewisePowerTail) else 1.0


def test_tunneling_bounds(tunneling_model):
    t = np.linspace(0.0, tunneling_model.t_max, 5001)
    p = tunneling_model.survival(t)
    assert tunneling_model.survival(0.0) == 1.0
    assert ((p > 0) & (p <= 1)).all()


@settings(max_examples=200, deadline=None)
@given(st.sampled_from(sorted(standard_models())), st.floats(0, 30), st.floats(0, 30))
def test_monotone_kinds_property(name, a, b):
    m = standard_models()[name]
    lo, hi = min(a, b), max(a, b)
    assert m.survival(hi) <= m.survival(lo)


# decay density ----------------------------------------------------------------

def test_exponential_density():
    assert decay_density(Exponential(gamma=1.0), 1.0) == pytest.approx(math.exp(-1), rel=1e-15)


@pytest.mark.parametrize("name", list(standard_models()))
def test_density_matches_central_difference(name):
    m = standard_models()[name]
    juncs = np.asarray(m.junctions, dtype=float)
    for t in np.linspace(0.05, 15.0, 41) * m_scale(m):
        if juncs.size and np.min(np.abs(juncs - t)) < 1e-3:
            continue
        h = max(1e-6, 1e-6 * t)
        fd = (m.survival(t - h) - m.survival(t + h)) / (2 * h)
        dens = m.density(t)
        assert abs(dens - fd) <= 1e-6 * abs(fd) + 1e-12, (t, dens, fd)


def test_toy_density_against_finite_difference():
    m = Toy()
    h = 1e-6
    fd = (m.survival(1 - h) - m.survival(1 + h)) / (2 * h)
    assert m.density(1.0) == pytest.approx(fd, rel=1e-6)


@pytest.mark.parametrize("name", list(standard_models()))
def test_density_integrates_to_survival_drop(name):
    m = standard_models()[name]
    T = 6.0 * m_scale(m)
    points = [j for j in m.junctions if j < T]
    val, _ = quad(lambda t: m.density(t), 0.0, T, points=points or None, epsabs=1e-13, epsrel=1e-13, limit=500)
    assert abs(val - (1.0 - m.survival(T))) < 1e-8


def test_density_flag_at_junction(polyfluorene):
    h, flag = polyfluorene.density(polyfluorene.turnover, return_flag=True)
    assert flag
    # left derivative: exponential branch
    assert h == pytest.approx(math.exp(-11.1) / PF_TAU, rel=1e-12)
    _, flag = polyfluorene.density(1.0, return_flag=True)
    assert not flag


def test_density_rejects_zero():
    with pytest.raises(DomainError):
        Toy().density(0.0)


def test_custom_density_uses_relative_step():
    m = Custom(fn=lambda t: np.exp(-0.5 * t), is_monotone=True)
    assert m.density(40.0) == pytest.approx(0.5 * math.exp(-20.0), rel=1e-6)


# fitting ------------------------------------------------------------------------

def test_exponential_lifetime():
    assert fit_effective_lifetime(Exponential(gamma=2.0), window=(0.1, 5.0)) == pytest.approx(0.5, abs=1e-10)


def test_toy_lifetime_deterministic():
    m = Toy()
    a = fit_effective_lifetime(m, window=(0.5, 3.0), samples=64)
    b = fit_effective_lifetime(m, window=(0.5, 3.0), samples=64)
    assert a > 0 and a == b
    assert m.time_unit == 1.0


def test_fit_commit_stores_time_unit():
    m = Toy()
    tau = fit_effective_lifetime(m, commit=True)
    assert m.time_unit == tau


def test_power_tail_lifetime_on_exponential_branch(polyfluorene):
    tau = fit_effective_lifetime(polyfluorene, window=(0.1, 3.0))
    assert tau == pytest.approx(0.35, abs=1e-10)
    fit = fit_exponential_regime(polyfluorene, window=(0.1, 3.0))
    assert fit.Z == pytest.approx(1.0, abs=1e-10)
    assert fit.gamma == pytest.approx(1 / 0.35, rel=1e-10)


def test_exponential_regime_fit_exact():
    fit = fit_exponential_regime(Exponential(gamma=1.0), window=(0.5, 3.0))
    assert fit.Z == pytest.approx(1.0, abs=1e-10)
    assert fit.gamma == pytest.approx(1.0, abs=1e-10)
    assert fit.residual < 1e-12


def test_synthetic_qze_fit():
    m = Custom(fn=lambda t: np.minimum(1.0, 1.2 * np.exp(-t)), is_monotone=True)
    fit = fit_exponential_regime(m, window=(1.0, 4.0))
    assert abs(fit.Z - 1.2) < 1e-8
    assert abs(fit.gamma - 1.0) < 1e-8
    assert fit.classification == "QZE"
    ize = fit_exponential_regime(Custom(fn=lambda t: 0.8 * np.exp(-t) + (t == 0) * 0.2), window=(1.0, 4.0))
    assert ize.classification == "IZE"


@settings(max_examples=50, deadline=None)
@given(st.floats(0.1, 5.0), st.floats(0.2, 3.0), st.floats(0.0, 2.0))
def test_regime_fit_recovers_exponential_property(Z, gamma, start):
    m = Custom(fn=lambda t: Z * np.exp(-gamma * t))
    fit = fit_exponential_regime(m, window=(start, start + 2.0))
    assert fit.Z == pytest.approx(Z, rel=1e-10)
    assert fit.gamma == pytest.approx(gamma, rel=1e-10)


def test_fit_errors():
    with pytest.raises(FitError):
        fit_effective_lifetime(Custom(fn=lambda t: np.where(t > 2, 0.0, np.exp(-t))), window=(1.0, 3.0))
    with pytest.raises(DomainError):
        fit_effective_lifetime(Toy(), samples=4)
    with pytest.raises(DomainError):
        fit_effective_lifetime(Toy(), window=(3.0, 1.0))


# three-regime stitching ------------------------------------------------------------

def test_three_regime_continuity():
    m = standard_models()["three_regime"]
    assert m._onset(m.t_a) == pytest.approx(m._body(m.t_a), rel=1e-12)
    assert m._body(m.t_b) == pytest.approx(m._tail(m.t_b), rel=1e-12)
    assert m.survival(0.01) == pytest.approx(1 - (0.01 / 2.0) ** 2, rel=1e-15)


def test_three_regime_explicit_boundaries_rejected_when_increasing():
    with pytest.raises(ConfigurationError):
        ThreeRegime(tau_z=2.0, Z=1.2, gamma=1.0, k=1e-3, alpha=2.0, t_a=0.05)


# tabulated -------------------------------------------------------------------

def test_tabulated_exact_at_nodes_and_monotone():
    grid = np.linspace(0.0, 5.0, 51)
    vals = np.exp(-grid)
    m = Tabulated(grid=grid, values=vals)
    assert np.array_equal(m.survival(grid), vals)
    t = np.linspace(0.0, 5.0, 5001)
    assert (np.diff(m.survival(t)) <= 0).all()
    assert m.monotone
    with pytest.raises(DomainError):
        m.survival(5.1)


def test_tabulated_interpolation_error_with_exact_slopes():
    grid = np.linspace(0.0, 10.0, 1025)
    m = Tabulated(grid=grid, values=np.exp(-grid), slopes=-np.exp(-grid))
    t = np.random.default_rng(3).uniform(0, 10, 1000)
    assert np.max(np.abs(m.survival(t) - np.exp(-t))) < 1e-8


def test_tabulated_validation():
    with pytest.raises(ConfigurationError):
        Tabulated(grid=np.array([0.0, 1.0, 0.5]), values=np.array([1.0, 0.5, 0.2]))
    with pytest.raises(ConfigurationError):
        Tabulated(grid=np.array([0.0, 1.0]), values=np.array([0.9, 0.5]))
