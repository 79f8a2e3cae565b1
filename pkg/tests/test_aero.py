import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ifd import aero
from ifd.aero import (
    AeroPolar, AircraftParams, DegenerateLiftError, LiftingSurface, aero_angles, aero_directions,
    aero_force_body, aero_moment_body, air_state, distributed_aero_loads, distributed_aero_moment,
    finite_wing_lift_slope, flow_from_angles, induced_factor, k_alpha_of,
)
from ifd.geom import E1, E2, E3

angles = st.floats(-1.2, 1.2)


def test_air_state_basic():
    air = air_state([10, 0, 0], [0, 0, 0], np.eye(3), 1.225)
    assert np.allclose(air.e_a_world, E1)
    assert air.q == pytest.approx(61.25)
    assert not air.regularized


def test_air_state_regularized():
    air = air_state([3, 1, 0], [3, 1, 0], np.eye(3), 1.225, eps=0.5)
    assert air.regularized
    assert air.q == pytest.approx(0.5 * 1.225 * 0.25)


def test_eps_from_environment(monkeypatch):
    monkeypatch.setenv("IFD_EPS_AIRSPEED", "2.0")
    assert air_state([1, 0, 0], [0, 0, 0], np.eye(3), 1.225).regularized


def test_reference_dynamic_pressure():
    assert air_state([11.7, 0, 0], [0, 0, 0], np.eye(3), 1.225).q == pytest.approx(83.85, abs=5e-3)


def test_directions_orthogonal_case():
    d = aero_directions(E1)
    assert np.allclose(d.e_D, -E1) and np.allclose(d.e_L, E3) and np.allclose(d.e_Y, E2)


def test_directions_sagittal_flow():
    a = math.radians(10)
    e_a = np.array([math.cos(a), 0, -math.sin(a)])
    d = aero_directions(e_a)
    assert abs(d.e_L @ e_a) < 1e-15 and abs(d.e_L[1]) < 1e-15


def test_directions_degenerate():
    with pytest.raises(DegenerateLiftError):
        aero_directions(E3)


@given(angles, st.floats(-1.5, 1.5))
def test_direction_triad_right_handed(alpha, beta):
    e_a = flow_from_angles(alpha, beta)
    d = aero_directions(e_a)
    M = np.column_stack([-d.e_D, d.e_Y, d.e_L])
    assert np.linalg.norm(M.T @ M - np.eye(3)) < 1e-10
    assert abs(np.linalg.det(M) - 1) < 1e-10
    assert np.allclose(-d.e_D, e_a, atol=1e-12)


@given(angles, st.floats(-1.5, 1.5))
def test_angle_round_trip(alpha, beta):
    ang = aero_angles(flow_from_angles(alpha, beta))
    assert ang.alpha == pytest.approx(alpha, abs=1e-12)
    assert ang.beta == pytest.approx(beta, abs=1e-12)


@pytest.mark.parametrize("e_a, alpha, beta", [
    (E1, 0.0, 0.0),
    ([math.cos(math.radians(10)), 0, -math.sin(math.radians(10))], 10.0, 0.0),
    ([math.cos(math.radians(5)), -math.sin(math.radians(5)), 0], 0.0, 5.0),
])
def test_angle_examples(e_a, alpha, beta):
    ang = aero_angles(np.asarray(e_a, float))
    assert math.degrees(ang.alpha) == pytest.approx(alpha, abs=1e-12)
    assert math.degrees(ang.beta) == pytest.approx(beta, abs=1e-12)


def test_polar_values():
    pol = AeroPolar(a=4.35, C_D0=0.035, k_alpha=1.34)
    assert pol.coefficients(0.0) == (0.0, 0.035)
    C_L, C_D = pol.coefficients(0.1)
    assert (C_L, C_D) == pytest.approx((0.435, 0.0484))
    assert pol.coefficients(-0.1) == pytest.approx((-0.435, 0.0484))


def test_custom_polar_slopes():
    pol = AeroPolar(a=1.0, C_D0=0.0, k_alpha=0.0, cl_fn=math.sin, cd_fn=lambda a: a**4)
    dL, dD = pol.slopes(0.3)
    assert dL == pytest.approx(math.cos(0.3), rel=1e-8)
    assert dD == pytest.approx(4 * 0.3**3, rel=1e-6)


def test_force_examples():
    d = aero_directions(E1)
    assert np.array_equal(aero_force_body(0.0, 1.0, 0.3, 1.0, 0.0, d), np.zeros(3))
    assert np.allclose(aero_force_body(83.84, 0.25, 0, 1, 0, d), [0, 0, 20.96])
    F = aero_force_body(100.0, 1.0, 1.0, 0.0, 0.0, d)
    assert np.allclose(np.cross(F, E1), 0) and F @ E1 < 0


@given(st.floats(0, 500), st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2))
def test_force_linear_in_coefficients(q, cd, cl, cy):
    d = aero_directions(flow_from_angles(0.2, 0.1))
    F = aero_force_body(q, 0.5, cd, cl, cy, d)
    parts = sum(aero_force_body(q, 0.5, *c, d) for c in ((cd, 0, 0), (0, cl, 0), (0, 0, cy)))
    assert np.allclose(F, parts, atol=1e-9)
    assert np.allclose(aero_force_body(2 * q, 0.5, cd, cl, cy, d), 2 * F, atol=1e-9)


def test_moment_examples():
    z = np.zeros((3, 3))
    assert np.array_equal(aero_moment_body(50, 1, 2, 0.5, 0, 0, 0, z, np.zeros(3)), np.zeros(3))
    assert np.allclose(aero_moment_body(50, 1, 2, 0.5, 0, 1, 0, z, np.zeros(3)), [0, 25, 0])
    D = -0.3 * np.eye(3)
    assert np.allclose(aero_moment_body(50, 1, 2, 0.5, 0, 0, 0, D, E3), [0, 0, -0.3])


def _surface(r):
    return LiftingSurface(r_body=r, S=0.1, polar=AeroPolar(a=5.0, C_D0=0.02, k_alpha=1.0))


def test_distributed_zero_lever_arm():
    v = flow_from_angles(0.1, 0.05) * 15
    assert np.allclose(distributed_aero_moment([_surface(np.zeros(3))], v, np.zeros(3), 1.225), 0)


def test_distributed_mirrored_roll_cancels():
    v = flow_from_angles(0.1, 0.0) * 15
    tau = distributed_aero_moment([_surface(E2), _surface(-E2)], v, np.zeros(3), 1.225)
    assert abs(tau[0]) < 1e-12


def test_distributed_rate_changes_local_flow():
    v = np.array([15.0, 0.0, 0.0])
    s = [_surface(E2)]
    w = np.array([1.0, 0.0, 0.0])
    assert np.allclose(np.cross(w, E2), E3)
    F0, t0 = distributed_aero_loads(s, v, np.zeros(3), 1.225)
    F1, t1 = distributed_aero_loads(s, v, w, 1.225)
    # hand expansion: local flow (15, 0, 1), so alpha = atan2(-1, 15)
    alpha = math.atan2(-1.0, 15.0)
    q = 0.5 * 1.225 * (15**2 + 1)
    d = aero_directions(np.array([15.0, 0, 1]) / math.hypot(15, 1))
    F_hand = aero_force_body(q, 0.1, 0.02 + alpha**2, 5 * alpha, 0, d)
    assert np.allclose(F1, F_hand) and np.allclose(t1, np.cross(E2, F_hand))
    assert not np.allclose(t0, t1)


def test_finite_wing_relations():
    assert finite_wing_lift_slope(2 * math.pi, 5.62, 0.80) == pytest.approx(4.35, abs=5e-3)
    assert induced_factor(9.56, 0.90) == pytest.approx(0.0370, abs=5e-5)
    assert k_alpha_of(0.0370, 5.10) == pytest.approx(0.962, abs=5e-4)


@given(st.floats(2, 20), st.floats(0.5, 1.0), st.floats(1.01, 1.5))
def test_finite_wing_monotone(AR, e, f):
    a0 = 2 * math.pi
    assert finite_wing_lift_slope(a0, AR * f, e) > finite_wing_lift_slope(a0, AR, e)
    assert finite_wing_lift_slope(a0, AR, min(1.0, e * f)) >= finite_wing_lift_slope(a0, AR, e)
    assert induced_factor(AR * f, e) < induced_factor(AR, e)
    assert induced_factor(AR, min(1.0, e * f)) <= induced_factor(AR, e)


def test_presets():
    pa, pola, qa = aero.preset("ClassA")
    assert (pa.b, pa.S, pa.m) == (2.12, 0.80, 3.0) and qa == 198.0
    assert aero.preset("ClassB")[2] == 447.0
    assert aero.preset("Paper5")[1].k_alpha == pytest.approx(4.3**2 / (math.pi * 0.8 * 5.6))
    with pytest.raises(KeyError):
        aero.preset("ClassZ")


@pytest.mark.parametrize("cid", aero.PRESET_IDS)
def test_preset_dict_round_trip(cid):
    params, polar, q = aero.params_from_dict(aero.preset_dict(cid))
    p2, pol2, q2 = aero.preset(cid)
    assert polar == pol2 and q == q2
    assert np.array_equal(params.I_B, p2.I_B) and params.b == p2.b


def test_params_validation():
    good = dict(m=1.0, I_B=np.eye(3), S=1.0, b=1.0, c_bar=1.0)
    AircraftParams(**good)
    with pytest.raises(ValueError):
        AircraftParams(**{**good, "m": 0.0})
    with pytest.raises(ValueError):
        AircraftParams(**{**good, "I_B": np.diag([1.0, -1.0, 1.0])})
    with pytest.raises(ValueError):
        AircraftParams(**good, D_omega=np.eye(3))
    with pytest.raises(ValueError):
        AeroPolar(a=-1.0, C_D0=0.0, k_alpha=0.0)
