import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from casimir_lossy.response import (Constant, DrudeEpsilon, DrudeParams, MetamaterialMuDirect,
                                    MetamaterialMuKK, MetamaterialMuParams, ResponseError,
                                    TabulatedAbsorption, TabulatedKK, Vacuum,
                                    drude_epsilon_absorption, drude_epsilon_complex,
                                    drude_epsilon_imag, fit_tail, kk_rotate,
                                    metamaterial_mu_absorption, metamaterial_mu_direct,
                                    metamaterial_mu_imag, sample_absorption)


def test_drude_imag_examples():
    assert drude_epsilon_imag(DrudeParams(1.0, 0.0), 1.0) == pytest.approx(2.0)
    assert drude_epsilon_imag(DrudeParams(1.0, 0.0), 1e12) == pytest.approx(1.0)
    assert drude_epsilon_imag(DrudeParams(1.0, 0.1), 1.0) == pytest.approx(1 + 1 / 1.1)


def test_drude_imag_rejects_nonpositive_xi():
    with pytest.raises(ResponseError):
        drude_epsilon_imag(DrudeParams(1.0), 0.0)
    with pytest.raises(ResponseError):
        drude_epsilon_imag(DrudeParams(1.0), -1.0)


def test_drude_complex_examples():
    p = DrudeParams(1.0, 0.0)
    assert drude_epsilon_complex(p, 1 / math.sqrt(2)) == pytest.approx(-1.0)
    assert abs(drude_epsilon_complex(p, 1.0)) < 1e-15
    q = DrudeParams(1.0, 0.2)
    assert drude_epsilon_complex(q, 0.5) == pytest.approx(1 - 1 / (0.25 + 0.1j))


def test_drude_complex_rejects_poles():
    q = DrudeParams(1.0, 0.2)
    for w in (0.0, -0.2j):
        with pytest.raises(ResponseError):
            drude_epsilon_complex(q, w)


@pytest.mark.parametrize("kwargs", [
    dict(plasma_frequency=0.0), dict(plasma_frequency=1.0, damping=-0.1)])
def test_drude_params_validation(kwargs):
    with pytest.raises(ResponseError):
        DrudeParams(**kwargs)


@pytest.mark.parametrize("args", [(0.0, 1.0), (1.0, 1.0), (0.5, 0.0), (0.5, 1.0, -1e-3)])
def test_metamaterial_params_validation(args):
    with pytest.raises(ResponseError):
        MetamaterialMuParams(*args)


def test_metamaterial_mu_examples():
    p = MetamaterialMuParams(0.5, 1.0, 1e-3)
    assert metamaterial_mu_imag(p, 0.0) == pytest.approx(1.5)
    assert metamaterial_mu_imag(p, 1.0) == pytest.approx(1.25)
    assert p.magnetic_plasma_frequency == pytest.approx(math.sqrt(0.5))


def test_direct_continuation_differs_from_kk_route():
    # the effective-medium form tends to 1 - f, below one, on the imaginary axis
    p = MetamaterialMuParams(0.5, 1.0, 1e-3)
    direct = MetamaterialMuDirect(p)
    assert direct.imag(100.0) == pytest.approx(0.5, rel=1e-3)
    assert direct.imag(100.0) < 1 < MetamaterialMuKK(p).imag(100.0)


def test_kk_of_narrow_lorentzian_matches_weak_absorption_form():
    p = MetamaterialMuParams(0.5, 1.0, 1e-3)
    table = sample_absorption(lambda w: metamaterial_mu_absorption(p, w), 1e-4, 1e4,
                              resonances=[(1.0, 1e-3)])
    xi = np.concatenate([[0.0], np.linspace(0.05, 10.0, 40)])
    got = np.array([kk_rotate(table, x) for x in xi])
    want = metamaterial_mu_imag(p, xi)
    assert np.max(np.abs(got / want - 1)) < 1e-3
    assert kk_rotate(table, 0.0) == pytest.approx(1.5, abs=1e-3)


def test_kk_of_zero_absorption_is_vacuum():
    table = TabulatedAbsorption(np.geomspace(0.01, 100, 50), np.zeros(50))
    for xi in (0.0, 0.3, 7.0):
        assert kk_rotate(table, xi) == 1.0


def test_kk_of_drude_absorption():
    p = DrudeParams(1.0, 0.1)
    table = sample_absorption(lambda w: drude_epsilon_absorption(p, w), 1e-5, 1e5, n_log=6000)
    for xi in (0.05, 0.3, 1.0, 5.0):
        assert kk_rotate(table, xi) == pytest.approx(drude_epsilon_imag(p, xi), rel=1e-3)
    assert kk_rotate(table, 0.0) == math.inf


def test_kk_rotate_rejects_negative_xi():
    table = TabulatedAbsorption([1.0, 2.0], [0.1, 0.1])
    with pytest.raises(ResponseError):
        kk_rotate(table, -1.0)


@pytest.mark.parametrize("w, y", [
    ([], []), ([1.0, 1.0], [0.1, 0.2]), ([2.0, 1.0], [0.1, 0.2]),
    ([0.0, 1.0], [0.1, 0.1]), ([1.0, 2.0], [0.1, -0.1])])
def test_tabulated_absorption_validation(w, y):
    with pytest.raises(ResponseError):
        TabulatedAbsorption(w, y)


def test_tabulated_text_roundtrip(tmp_path):
    p = MetamaterialMuParams(0.5, 1.0, 0.05)
    table = sample_absorption(lambda w: metamaterial_mu_absorption(p, w), 1e-3, 1e3,
                              resonances=[(1.0, 0.05)], n_log=300, n_res=300)
    path = tmp_path / "mu.txt"
    table.to_text(path)
    back = TabulatedAbsorption.from_text(path)
    np.testing.assert_array_equal(back.omega, table.omega)
    np.testing.assert_array_equal(back.im_chi, table.im_chi)
    model = TabulatedKK(back)
    assert model.imag(1.0) == pytest.approx(kk_rotate(table, 1.0))


def test_tail_fit_recovers_power_law():
    w = np.geomspace(1.0, 100.0, 200)
    tail = fit_tail(TabulatedAbsorption(w, 2.0 / w**3))
    assert tail.exponent == 3.0
    assert tail.amplitude == pytest.approx(2.0)


def test_model_static_limits():
    assert DrudeEpsilon(DrudeParams(2.0, 0.0)).static() == (math.inf, 4.0)
    assert DrudeEpsilon(DrudeParams(2.0, 0.1)).static() == (math.inf, 0.0)
    assert MetamaterialMuKK(MetamaterialMuParams(0.3, 1.0)).static() == (1.3, 0.0)
    assert Vacuum().static() == (1.0, 0.0)
    assert Constant(4.0).static() == (4.0, 0.0)


@pytest.mark.parametrize("model", [
    DrudeEpsilon(DrudeParams(1.3, 0.2)), DrudeEpsilon(DrudeParams(0.7, 0.0)),
    MetamaterialMuKK(MetamaterialMuParams(0.4, 2.0, 0.01)), MetamaterialMuDirect(
        MetamaterialMuParams(0.4, 2.0, 0.01))])
def test_rational_form_matches_complex_evaluation(model):
    num, den = model.rational()
    w = np.array([0.3 - 0.1j, 1.7 + 0.2j, 2.5 - 1.0j])
    np.testing.assert_allclose(np.polyval(num, w) / np.polyval(den, w), model.complex(w),
                               rtol=1e-13)


passive_models = st.one_of(
    st.builds(lambda wp, g: DrudeEpsilon(DrudeParams(wp, g)),
              st.floats(0.05, 20), st.floats(0, 5)),
    st.builds(lambda f, w0, k: MetamaterialMuKK(MetamaterialMuParams(f, w0, k)),
              st.floats(0.01, 0.99), st.floats(0.05, 20), st.floats(0, 1)),
)


@given(passive_models)
def test_passive_models_exceed_one_and_decrease(model):
    xi = np.geomspace(1e-3, 1e3, 60)
    v = model.imag(xi)
    assert np.all(v > 1)
    assert np.all(np.diff(v) < 0)


@given(st.floats(0.05, 10), st.floats(0, 3), st.floats(-5, 5), st.floats(-5, 5))
def test_drude_reality_condition(wp, g, re, im):
    w = complex(re, im)
    if abs(w) < 1e-3 or abs(w + 1j * g) < 1e-3:
        return
    p = DrudeParams(wp, g)
    lhs = drude_epsilon_complex(p, -w.conjugate())
    rhs = drude_epsilon_complex(p, w).conjugate()
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(rhs))


@settings(max_examples=15, deadline=None)
@given(st.floats(0.1, 0.9), st.floats(0.5, 2.0))
def test_kk_consistency_of_builtin_oscillator(f, w0):
    p = MetamaterialMuParams(f, w0, 1e-3 * w0)
    table = sample_absorption(lambda w: metamaterial_mu_absorption(p, w), 1e-4 * w0, 1e4 * w0,
                              resonances=[(w0, 1e-3 * w0)])
    for xi in (0.0, 0.5 * w0, 3 * w0):
        assert kk_rotate(table, xi) == pytest.approx(metamaterial_mu_imag(p, xi), rel=1e-3)


def test_direct_form_is_causal_oscillator():
    p = MetamaterialMuParams(0.5, 1.0, 0.1)
    w = np.array([0.5, 1.0, 2.0])
    assert np.all(np.imag(metamaterial_mu_direct(p, w)) > 0)
