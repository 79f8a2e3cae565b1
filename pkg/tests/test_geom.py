
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ifd.geom import (
    E1, E2, E3, FrameError, expm_so3, frame_rate_fd, geodesic_angle, gram_residual, hat,
    is_rotation, omega_from_frame_rates, reorthonormalize, rotation_from_axes, vee,
)

finite = st.floats(-10, 10, allow_nan=False)
vectors = arrays(float, 3, elements=finite)


def random_rotation(rng):
    Q, Rr = np.linalg.qr(rng.standard_normal((3, 3)))
    Q = Q * np.sign(np.diag(Rr))
    return Q if np.linalg.det(Q) > 0 else -Q


@given(vectors, vectors)
def test_hat_is_cross(v, y):
    assert np.allclose(hat(v) @ y, np.cross(v, y), atol=1e-12)


@given(vectors)
def test_vee_inverts_hat(v):
    assert np.allclose(vee(hat(v)), v, atol=0)


def test_vee_rejects_symmetric_part():
    with pytest.raises(FrameError) as err:
        vee(np.eye(3))
    assert err.value.residual > 0


def test_identity_axes():
    assert np.array_equal(rotation_from_axes(E1, E2, E3), np.eye(3))


def test_left_handed_triad_rejected():
    with pytest.raises(FrameError):
        rotation_from_axes(E1, -E2, E3)


def test_non_orthonormal_rejected():
    with pytest.raises(FrameError):
        rotation_from_axes(E1, E2 + 1e-6 * E1, E3)


@given(vectors)
def test_expm_is_rotation(w):
    R = expm_so3(w)
    assert gram_residual(R) < 1e-12
    assert abs(np.linalg.det(R) - 1.0) < 1e-12


def test_expm_small_angle_branch_continuous():
    w = np.array([1e-7, -2e-7, 3e-7])
    R = expm_so3(w)
    assert np.allclose(R, np.eye(3) + hat(w) + 0.5 * hat(w) @ hat(w), atol=1e-20)


@given(st.floats(0.0, 3.1))
def test_geodesic_angle_recovers_rotation_angle(th):
    axis = np.array([1.0, 2.0, -0.5])
    axis /= np.linalg.norm(axis)
    assert geodesic_angle(np.eye(3), expm_so3(th * axis)) == pytest.approx(th, abs=1e-12)


def test_reorthonormalize_fixes_drift():
    rng = np.random.default_rng(3)
    R = random_rotation(rng) + 1e-7 * rng.standard_normal((3, 3))
    Rn = reorthonormalize(R)
    assert is_rotation(Rn, 1e-13)
    assert np.linalg.norm(Rn - R) < 1e-6


def test_rigid_rotation_rates():
    w_body = np.array([0.3, -0.2, 0.7])
    R0 = random_rotation(np.random.default_rng(0))
    sampler = lambda t: R0 @ expm_so3(w_body * t)
    R, st_ = frame_rate_fd(sampler, 0.4)
    assert np.allclose(st_.omega_body, w_body, atol=1e-9)
    assert np.all(np.abs(st_.omega_dot_body) <= 1e-6)

    # world rate from triad derivatives agrees with R @ w_body
    h = 1e-6
    Rd = (sampler(0.4 + h) - sampler(0.4 - h)) / (2 * h)
    w_world = omega_from_frame_rates(*R.T, *Rd.T)
    assert np.allclose(w_world, R @ w_body, atol=1e-8)


def test_parallel_frame_rate(scenario):
    from ifd.tether import attitude
    sampler = lambda t: attitude(scenario, 0.2, t)
    R, st_ = frame_rate_fd(sampler, 0.0)
    assert np.allclose(R @ st_.omega_body, [0, 0, scenario.omega_cir], atol=1e-8)
    assert scenario.omega_cir == pytest.approx(0.6309, abs=1e-4)


def test_frame_rate_rejects_unrepresentable_step():
    with pytest.raises(ValueError):
        frame_rate_fd(lambda t: np.eye(3), 1e20, h=1e-5)
