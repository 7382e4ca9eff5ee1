import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from casimir_lossy.fresnel import Mirror, PerfectMirror
from casimir_lossy.lifshitz import (LAMBDA, MIN_GAP, ZETA3, CavityConfig, NonPassiveError,
                                    QuadratureSpec, energy_finite_T, energy_zero_T, ideal_energy,
                                    ideal_pressure, pressure, pressure_finite_T, pressure_zero_T,
                                    roundtrip_factor)
from casimir_lossy.modes import plasmon_force_short_distance
from casimir_lossy.quadrature import QuadratureError
from casimir_lossy.response import (Constant, DrudeEpsilon, DrudeParams, MetamaterialMuKK,
                                    MetamaterialMuParams)

E, M = PerfectMirror("electric"), PerfectMirror("magnetic")


def drude(wp=1.0, g=0.0):
    return Mirror(DrudeEpsilon(DrudeParams(wp, g)))


def test_roundtrip_examples():
    vac = CavityConfig(1.0, Mirror(), Mirror())
    assert roundtrip_factor(vac, 0.5, 0.3, "TM") == 0.0
    L = 1.0
    cfg = CavityConfig(L, E, E)
    # q L = ln 2 with q = hypot(xi, k)
    q = math.log(2.0) / L
    for pol in ("TE", "TM"):
        assert roundtrip_factor(cfg, 0.6 * q, 0.8 * q, pol) == pytest.approx(0.25)
    far = CavityConfig(1e4, drude(), drude())
    assert abs(roundtrip_factor(far, 0.2, 0.1, "TM")) < 1e-300


def test_roundtrip_rejects_gain():
    # an active "mirror" with |r| > 1 at this point
    gain = Mirror(Constant(-0.5))
    cfg = CavityConfig(1e-3, gain, gain)
    with pytest.raises(NonPassiveError):
        roundtrip_factor(cfg, 1.0, 0.1, "TM")


def test_config_validation():
    with pytest.raises(ValueError):
        CavityConfig(0.0, E, E)
    with pytest.raises(ValueError):
        CavityConfig(0.5 * MIN_GAP, E, E)
    with pytest.raises(ValueError):
        CavityConfig(1.0, E, E, T=-1.0)
    with pytest.raises(ValueError):
        QuadratureSpec(relative_tolerance=0.1)
    assert MIN_GAP == pytest.approx(1e-6 * LAMBDA)


@pytest.mark.parametrize("L", [0.1, 1.0, 30.0])
def test_ideal_mirrors(L):
    p = pressure_zero_T(CavityConfig(L, E, E))
    assert p.pressure == pytest.approx(ideal_pressure(L), rel=1e-6)
    assert p.estimated_error >= 0
    assert energy_zero_T(CavityConfig(L, E, E)).pressure == pytest.approx(ideal_energy(L), rel=1e-6)


def test_mixed_ideal_pair_is_repulsive():
    L = 0.7
    p = pressure_zero_T(CavityConfig(L, E, M)).pressure
    assert p == pytest.approx(-7 / 8 * ideal_pressure(L), rel=1e-6)


def test_lossless_drude_short_distance():
    p = DrudeParams(1.0, 0.0)
    L = 1e-2
    got = pressure_zero_T(CavityConfig(L, drude(), drude())).pressure
    assert got == pytest.approx(plasmon_force_short_distance(p, L), rel=0.05)


def test_energy_vanishes_at_large_gap():
    e = energy_zero_T(CavityConfig(1e3, drude(), drude())).pressure
    assert e < 0 and abs(e) < 1e-10


@pytest.mark.parametrize("L", [0.05, 1.0, 8.0])
def test_energy_derivative_is_pressure(L):
    cfg = CavityConfig(L, drude(1.0, 0.05), drude(1.0, 0.05))
    h = 0.005 * L
    dE = (energy_zero_T(cfg.with_gap(L + h)).pressure
          - energy_zero_T(cfg.with_gap(L - h)).pressure) / (2 * h)
    assert dE == pytest.approx(pressure_zero_T(cfg).pressure, rel=5e-3)


def test_low_temperature_matches_zero_temperature():
    cfg = CavityConfig(LAMBDA, drude(1.0, 0.01), drude(1.0, 0.01), T=1e-3)
    hot = pressure_finite_T(cfg)
    cold = pressure_zero_T(cfg.with_temperature(0.0))
    assert hot.pressure == pytest.approx(cold.pressure, rel=5e-3)
    assert hot.n_matsubara_terms > 0


def test_high_temperature_perfect_mirrors():
    L, T = 1.0, 20.0
    p = pressure_finite_T(CavityConfig(L, E, E, T)).pressure
    assert p == pytest.approx(T * ZETA3 / (4 * math.pi * L**3), rel=1e-2)


def test_zeroth_matsubara_term_of_drude_is_tm_only():
    cfg = CavityConfig(1.0, drude(1.0, 0.1), drude(1.0, 0.1))
    assert roundtrip_factor(cfg, 0.0, 0.5, "TE") == 0.0
    assert roundtrip_factor(cfg, 0.0, 0.5, "TM") == pytest.approx(math.exp(-1.0))


def test_finite_temperature_requires_positive_T():
    cfg = CavityConfig(1.0, E, E)
    with pytest.raises(ValueError):
        pressure_finite_T(cfg)
    with pytest.raises(ValueError):
        energy_finite_T(cfg)
    assert pressure(cfg).pressure == pressure_zero_T(cfg).pressure


def test_matsubara_truncation_failure_is_reported():
    cfg = CavityConfig(0.05, drude(), drude(), T=1e-6)
    with pytest.raises(QuadratureError):
        pressure_finite_T(cfg, QuadratureSpec(max_matsubara_terms=1024))


def test_free_energy_derivative_is_pressure_at_finite_T():
    cfg = CavityConfig(2.0, drude(1.0, 0.05), drude(1.0, 0.05), T=0.1)
    h = 0.01
    dF = (energy_finite_T(cfg.with_gap(2.0 + h)).pressure
          - energy_finite_T(cfg.with_gap(2.0 - h)).pressure) / (2 * h)
    assert dF == pytest.approx(pressure_finite_T(cfg).pressure, rel=5e-3)


def test_tolerance_halving_within_reported_error():
    cfg = CavityConfig(0.5, drude(1.0, 0.05), drude(1.0, 0.05))
    a = pressure_zero_T(cfg, QuadratureSpec(relative_tolerance=1e-6))
    b = pressure_zero_T(cfg, QuadratureSpec(relative_tolerance=5e-7))
    assert abs(a.pressure - b.pressure) <= a.estimated_error + b.estimated_error


def test_vanishing_damping_matches_lossless():
    a = pressure_zero_T(CavityConfig(1.0, drude(1.0, 1e-300), drude(1.0, 1e-300))).pressure
    assert a == pytest.approx(pressure_zero_T(CavityConfig(1.0, drude(), drude())).pressure, rel=1e-6)


def test_decay_is_monotone_on_a_grid():
    m = drude(1.0, 0.02)
    L = np.geomspace(0.01, 30, 12)
    p = [pressure_zero_T(CavityConfig(x, m, m)).pressure for x in L]
    assert np.all(np.diff(p) < 0)


@settings(max_examples=10, deadline=None)
@given(st.floats(0.1, 5.0), st.floats(0.0, 0.5), st.floats(0.02, 5.0),
       st.one_of(st.just(0.0), st.floats(0.01, 0.5)))
def test_identical_passive_mirrors_attract(wp, g, L, T):
    # the Matsubara sum needs O(1 / (T L)) terms, so T -> 0+ is left to the zero-T path
    m = drude(wp, g)
    assert pressure(CavityConfig(L, m, m, T), QuadratureSpec(relative_tolerance=1e-5)).pressure > 0


@settings(max_examples=10, deadline=None)
@given(st.floats(0.2, 3.0), st.floats(0.0, 0.3), st.floats(0.1, 0.9), st.floats(0.05, 3.0))
def test_duality_leaves_pressure_unchanged(wp, g, f, L):
    m1 = Mirror(DrudeEpsilon(DrudeParams(wp, g)), MetamaterialMuKK(MetamaterialMuParams(f, 1.0, 1e-3)))
    m2 = drude(1.0, 0.01)
    cfg = CavityConfig(L, m1, m2)
    assert pressure_zero_T(cfg.swapped()).pressure == pressure_zero_T(cfg).pressure
