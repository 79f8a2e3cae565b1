import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ifd import tether
from ifd.aero import AeroPolar
from ifd.geom import frame_rate_fd
from ifd.inverse import required_force
from ifd.tether import (
    InvertedRegimeError, Regime, TetherScenario, bank_angle, bank_angle_dimensionless, cardano_alpha,
    cardano_trim, classify_regime, demand, implicit_trim, induced_drag_of_lift, parallel_state,
    sensitivities_at_locus, specific_force, zero_bank_eta, zero_bank_tension,
)


def bisect_cubic(ratio, a, cd0, ka):
    lo, hi = 0.0, 2.0
    f = lambda x: ka * x**3 + (cd0 + a) * x - ratio
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if f(mid) < 0 else (lo, mid)
    return 0.5 * (lo + hi)


def test_scenario_validation():
    with pytest.raises(ValueError):
        TetherScenario(L=20, theta=math.radians(95), v0=11.7)
    with pytest.raises(ValueError):
        TetherScenario(L=20, theta=0.0, v0=11.7)
    with pytest.raises(ValueError):
        TetherScenario(L=-1, theta=1.0, v0=11.7)


def test_reference_scenario_geometry(scenario):
    assert scenario.r == pytest.approx(18.544, abs=1e-12)
    assert scenario.omega_cir == pytest.approx(0.6309, abs=1e-4)
    assert scenario.period == pytest.approx(9.96, abs=5e-3)


def test_parallel_state_at_start(scenario):
    p = parallel_state(scenario, 0.0)
    assert np.allclose(p.p, [scenario.r, 0, scenario.z0])
    assert np.allclose(p.v, [0, scenario.v0, 0])
    assert np.allclose(p.a, [-scenario.v0**2 / scenario.r, 0, 0])


@given(st.floats(0, 100))
def test_on_sphere(t):
    s = tether.reference_scenario(16.0)
    assert np.linalg.norm(parallel_state(s, t).p) == pytest.approx(s.L, rel=1e-12)


@given(st.floats(0, 2 * math.pi))
def test_no_longitudinal_demand(psi):
    s = tether.reference_scenario(12.0)
    d = demand(s, psi)
    F = required_force(parallel_state(s, (psi - s.psi0) / s.omega_cir), s.m)
    assert abs(F @ d.e_a_world) <= 1e-12 * d.f_perp
    assert np.allclose(F, d.f_perp * d.n_curve_world, atol=1e-12)


def test_demand_examples(scenario):
    free = demand(scenario.with_tension(0.0))
    assert free.A_h == pytest.approx(-scenario.m * scenario.v0**2 / scenario.r)
    assert free.A_z == pytest.approx(scenario.m * 9.81)
    assert demand(scenario.with_tension(zero_bank_tension(scenario))).A_h == pytest.approx(0, abs=1e-13)
    # explicit z0 = 10 m version of the 16 N case
    A_h = -2 * 11.7**2 / 18.544 + 16 * 18.544 / 20
    A_z = 2 * 9.81 + 16 * 10 / 20
    assert A_h == pytest.approx(0.074, abs=5e-3) and A_z == pytest.approx(27.62, abs=1e-3)


def test_implicit_trim(p5air, scenario):
    params, polar = p5air
    zero = implicit_trim(scenario, polar, params)
    free = implicit_trim(scenario.with_tension(0.0), polar, params)
    assert 14.5 < math.degrees(zero.alpha) < 17.5
    # the tether pulls downward here, so removing it lowers the lift demand
    assert demand(scenario.with_tension(0.0)).f_perp < demand(scenario).f_perp
    assert free.alpha < zero.alpha


def test_trim_large_q_limit(p5air):
    from ifd.inverse import solve_trim
    _, polar = p5air
    for Q in (1e4, 1e6):
        tr = solve_trim(0.0, 25.0, Q, 1.0, polar)
        assert abs(tr.alpha) < 30.0 / Q
        assert tr.T == pytest.approx(Q * polar.C_D0, rel=1e-3)


def test_cardano_examples(p5air):
    _, polar = p5air
    a = cardano_alpha(1.316, polar.a, polar.C_D0, polar.k_alpha)
    assert a == pytest.approx(0.2956, abs=2e-4)
    assert cardano_alpha(0.0, polar.a, polar.C_D0, polar.k_alpha) == 0.0
    Q = 20.96
    T = Q * (polar.C_D0 + polar.k_alpha * a**2) / math.cos(a)
    assert T == pytest.approx(3.28, abs=0.01)
    assert cardano_alpha(0.5 * 1.316, polar.a, polar.C_D0, polar.k_alpha) < a


@given(st.floats(0.5, 2), st.floats(0.02, 0.05), st.floats(4, 5.5), st.floats(0.01, 3))
def test_cardano_matches_bisection(ka, cd0, a, ratio):
    x = cardano_alpha(ratio, a, cd0, ka)
    assert abs(ka * x**3 + (cd0 + a) * x - ratio) <= 1e-12
    assert x == pytest.approx(bisect_cubic(ratio, a, cd0, ka), abs=1e-12)


def test_cardano_trim_close_to_implicit(p5air, scenario):
    params, polar = p5air
    c = cardano_trim(scenario, polar, params)
    i = implicit_trim(scenario, polar, params)
    assert abs(c.alpha - i.alpha) < 2e-3


def test_cardano_vs_implicit_small_alpha(p5air):
    from dataclasses import replace
    params, polar = p5air
    params = replace(params, S=1.0)
    for v0 in (15.0, 20.0, 25.0):
        s = TetherScenario.from_radius(20.0, 18.544, v0, F_ext=5.0)
        i = implicit_trim(s, polar, params)
        assert i.alpha < 0.1
        assert abs(cardano_trim(s, polar, params).alpha - i.alpha) <= 5e-3


def test_cardano_requires_positive_curvature(p5air, scenario):
    params, _ = p5air
    with pytest.raises(ValueError):
        cardano_trim(scenario, AeroPolar(a=4.0, C_D0=0.03, k_alpha=0.0), params)


def test_bank_classical_limit(scenario):
    s0 = scenario.with_tension(0.0)
    mu = bank_angle(s0).mu
    assert math.tan(mu) == pytest.approx(s0.v0**2 / (s0.g * s0.r), rel=1e-12)
    k, th = 11.7**2 / (9.81 * 20), math.radians(60)
    assert math.degrees(bank_angle_dimensionless(k, 0.0, th)) == pytest.approx(38.856, abs=1e-3)


def test_bank_locus_and_asymptote(kappa60):
    k, th = kappa60
    assert bank_angle_dimensionless(k, zero_bank_eta(k, th), th) == pytest.approx(0, abs=1e-15)
    assert bank_angle_dimensionless(k, 1e6, th) == pytest.approx(-th, abs=1e-4)


def test_bank_physical_matches_dimensionless():
    for F in (0.0, 5.0, 16.0, 40.0):
        s = tether.reference_scenario(F)
        assert bank_angle(s).mu == pytest.approx(bank_angle_dimensionless(s.kappa, s.eta, s.theta), abs=1e-14)


def test_inverted_regime_rejected():
    with pytest.raises(InvertedRegimeError):
        bank_angle_dimensionless(0.5, -10.0, 1.0)


def test_zero_bank_tension(scenario):
    assert zero_bank_tension(scenario) == pytest.approx(15.92, abs=5e-3)
    assert zero_bank_eta(0.7, math.pi / 2) == 0.7
    tiny = TetherScenario(L=20, theta=1.0, v0=1e-4)
    assert zero_bank_tension(tiny) < 1e-7


def test_sensitivity_values(kappa60):
    rep = sensitivities_at_locus(*kappa60, L=20.0)
    assert rep.d_mu_d_eta == pytest.approx(-0.5911, abs=1e-4)
    assert rep.d_mu_d_kappa == pytest.approx(0.7882, abs=1e-4)
    assert rep.signs() == (-1, 1, -1, -1)
    assert sensitivities_at_locus(0.7, math.pi / 2).d_mu_d_theta == pytest.approx(0, abs=1e-16)


def test_sensitivity_length_fd():
    # physical variables: kappa and eta both scale with L at fixed v0, F
    s = tether.reference_scenario(1.0)
    k, th = s.kappa, s.theta
    F_star = zero_bank_eta(k, th) * s.m * s.g
    mu = lambda L: bank_angle_dimensionless(s.v0**2 / (s.g * L), F_star / (s.m * s.g), th)
    h = 1e-6
    fd = (mu(s.L + h) - mu(s.L - h)) / (2 * h)
    assert sensitivities_at_locus(k, th, L=s.L).d_mu_d_L == pytest.approx(fd, rel=1e-5)


def test_regime_classification(kappa60):
    k, th = kappa60
    es = zero_bank_eta(k, th)
    assert classify_regime(k, 0.0, th) is Regime.INWARD
    assert classify_regime(k, es, th) is Regime.ZERO_BANK
    assert classify_regime(k, 10 * es, th) is Regime.OUTWARD


@given(st.floats(0.05, 3), st.floats(0.2, 1.5), st.floats(0, 5))
def test_regime_matches_bank_sign(k, th, eta):
    reg = classify_regime(k, eta, th)
    mu = bank_angle_dimensionless(k, eta, th)
    if reg is Regime.INWARD:
        assert mu > 0
    elif reg is Regime.OUTWARD:
        assert mu < 0


def test_induced_drag(p5air):
    _, polar = p5air
    assert induced_drag_of_lift(0.0, 80, 0.25, polar) == pytest.approx(20 * 0.035)
    d1 = induced_drag_of_lift(5.0, 80, 0.25, polar) - 20 * 0.035
    d2 = induced_drag_of_lift(10.0, 80, 0.25, polar) - 20 * 0.035
    assert d2 == pytest.approx(4 * d1)
    A_z = 27.6
    A_h = np.linspace(-5, 5, 101)
    D = [induced_drag_of_lift(math.hypot(h, A_z), 80, 0.25, polar) for h in A_h]
    assert A_h[int(np.argmin(D))] == 0.0


def test_specific_force():
    assert np.allclose(specific_force(np.eye(3), np.zeros(3)), [0, 0, 9.81])
    assert np.allclose(specific_force(np.eye(3), [0, 0, -9.81]), 0)


def test_specific_force_lateral_at_zero_bank(p5air, scenario):
    params, polar = p5air
    s = scenario.with_tension(zero_bank_tension(scenario))
    sol = tether.analytic_solution(s, params, polar)
    f = specific_force(sol.R, parallel_state(s, 0).a)
    assert abs(f[1]) > 0.5


def test_constant_rates(p5air, scenario):
    params, polar = p5air
    alpha = implicit_trim(scenario, polar, params).alpha
    R = tether.attitude(scenario, alpha)
    st_ = tether.constant_rates(scenario, R)
    assert np.linalg.norm(st_.omega_body) == pytest.approx(0.6309, abs=1e-4)
    assert np.array_equal(st_.omega_dot_body, np.zeros(3))
    _, fd = frame_rate_fd(lambda t: tether.attitude(scenario, alpha, t), 0.0)
    assert np.allclose(fd.omega_body, st_.omega_body, atol=1e-6)
    assert np.allclose(fd.omega_dot_body, 0, atol=1e-6)
