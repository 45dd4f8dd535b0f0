import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from toppmpc.model import (NOMINAL_STATE, PARAM_FIELDS, DomainError, ExerciseProgram,
                           ModelParams, State, apoptosis, beta_growth_roots, derivative,
                           proliferation, psi1, psi2, vl_steady_state)

P = ModelParams()


def test_defaults_match_table():
    expected = dict(R0=864.0, Eg0=1.44, sigma=43.2, alpha=20000.0, k=432.0, d0=0.06, c=0.05,
                    r1r=0.42e-3, r2r=0.12e-5, r1a=0.42e-3, r2a=0.12e-5, zeta_p=1e-4,
                    k_p=1e6, zeta_a=1e-3, k_a=1e6, S_I_target=0.028, zeta_si=1.4,
                    k_n_si=5e6, SR=0.045, K_IL6=0.004, k_s=-math.log(0.8) / 80640)
    assert P.as_dict() == expected
    assert tuple(expected) == PARAM_FIELDS


@pytest.mark.parametrize("Vl, want", [(0.0, 1.0), (1e6, 1.00005)])
def test_psi1_examples(Vl, want):
    assert psi1(Vl, P) == pytest.approx(want, rel=1e-15)


def test_psi1_limit():
    assert abs(psi1(1e12, P) - (1 + 1e-4)) < 1e-9


@pytest.mark.parametrize("Vl, want", [(0.0, 1.0), (1e6, 0.9995)])
def test_psi2_examples(Vl, want):
    assert psi2(Vl, P) == pytest.approx(want, rel=1e-15)


def test_psi2_limit():
    assert abs(psi2(1e12, P) - 0.999) < 1e-9


@pytest.mark.parametrize("fn", [psi1, psi2])
def test_psi_negative_vl_is_domain_error(fn):
    with pytest.raises(DomainError):
        fn(-1.0, P)


def test_psi_monotone_on_grid():
    v = np.linspace(0.0, 1e8, 1000)
    p1 = np.array([psi1(x, P) for x in v])
    p2 = np.array([psi2(x, P) for x in v])
    assert np.all(np.diff(p1) >= 0) and np.all(np.diff(p2) <= 0)
    assert np.all((p1 >= 1) & (p1 < 1 + P.zeta_p))
    assert np.all((p2 <= 1) & (p2 > 1 - P.zeta_a))


@pytest.mark.parametrize("G, want", [(0.0, 0.0), (100.0, 0.030), (350.0, 0.0)])
def test_proliferation(G, want):
    assert proliferation(G, P) == pytest.approx(want, abs=1e-15)


@pytest.mark.parametrize("G, want", [(0.0, 0.06), (100.0, 0.030), (250.0, 0.030)])
def test_apoptosis(G, want):
    assert apoptosis(G, P) == pytest.approx(want, abs=1e-15)


def test_derivative_at_nominal_start():
    d = derivative(NOMINAL_STATE, 0.0, P)
    want = np.array([0.0, 0.0, 0.0, -0.05 * (0.72 - 0.028), 0.0])
    assert want[3] == pytest.approx(-0.0346, rel=1e-12)
    np.testing.assert_allclose(d, want, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("s", [0.0, 0.028, 0.72, 5.0])
def test_hyperglycemic_equilibrium(s):
    d = derivative(State(600.0, 0.0, 0.0, s, 0.0), 0.0, P)
    assert d[:3].tolist() == [0.0, 0.0, 0.0]


def test_vl_rate_per_day():
    assert derivative(NOMINAL_STATE, 1.0, P)[4] == pytest.approx(16200.0, rel=1e-14)


def test_beta_growth_roots():
    lo, hi = beta_growth_roots(P)
    assert lo == pytest.approx(100.0, rel=1e-12) and hi == pytest.approx(250.0, rel=1e-12)


def test_beta_growth_roots_degenerate():
    assert beta_growth_roots(P.replace(d0=0.0)) == pytest.approx((350.0,), rel=1e-12)


def test_beta_growth_roots_no_real_roots():
    with pytest.raises(DomainError, match="no physiological roots"):
        beta_growth_roots(P.replace(d0=1.0))


@pytest.mark.parametrize("u, want", [(0.0, 0.0), (1.0, 11.25 / (-math.log(0.8) / 80640)),
                                     (3.0, 3 * 11.25 / (-math.log(0.8) / 80640))])
def test_vl_steady_state(u, want):
    assert vl_steady_state(u, P) == pytest.approx(want, rel=1e-14)
    if u:
        assert vl_steady_state(u, P) == pytest.approx(4.066e6 * u, rel=1e-3)


@given(st.floats(0.0, 3.0))
def test_vl_steady_state_zeroes_vl_rate(u):
    vl = vl_steady_state(u, P)
    d = derivative(NOMINAL_STATE.replace(Vl=vl), u, P)
    scale = 1440 * P.SR / P.K_IL6 * max(u, 1e-300)
    assert abs(d[4]) <= 1e-12 * scale


nonneg = st.floats(0.0, 1e3)


@given(nonneg, nonneg, nonneg, nonneg, st.floats(0.0, 1e8), st.floats(0.0, 3.0))
def test_boundary_flows_point_inward(G, I, b, S, V, u):
    assert derivative(State(0.0, I, b, S, V), u, P)[0] == P.R0
    assert derivative(State(G, 0.0, b, S, V), u, P)[1] >= 0
    assert derivative(State(G, I, 0.0, S, V), u, P)[2] == 0
    assert derivative(State(G, I, b, S, 0.0), u, P)[4] >= 0
    if S < P.S_I_target:
        assert derivative(State(G, I, b, S, 0.0), u, P)[3] > 0


@given(st.floats(1.0, 600.0), st.floats(0.0, 1e8), st.floats(1.0, 1e4), st.floats(0.0, 100.0))
def test_beta_rate_homogeneous(G, V, b, a):
    d1 = derivative(State(G, 10.0, b, 0.5, V), 0.0, P)[2]
    d2 = derivative(State(G, 10.0, a * b, 0.5, V), 0.0, P)[2]
    assert d2 == pytest.approx(a * d1, rel=1e-12, abs=1e-300)


@pytest.mark.parametrize("G, sign", [(50.0, -1), (150.0, 1), (300.0, -1)])
def test_net_growth_sign(G, sign):
    assert np.sign(proliferation(G, P) - apoptosis(G, P)) == sign


def test_derivative_rejects_non_finite():
    with pytest.raises((DomainError, ValueError)):
        derivative([math.nan, 10, 300, 0.72, 0], 0.0, P)


def test_state_and_params_validation():
    with pytest.raises(DomainError):
        State(-1.0, 0, 0, 0, 0)
    with pytest.raises(DomainError):
        P.replace(zeta_a=1.0)
    with pytest.raises(DomainError):
        P.replace(k_s=0.0)
    with pytest.raises(DomainError):
        ExerciseProgram(60, 3000, 2880)
    assert ModelParams.from_array(P.as_array()) == P
