"""Rotation and frame utilities on SO(3).

Conventions: ``R`` maps body coordinates to world coordinates
(``x_world = R @ x_body``); its columns are the body axes chord ``c``,
span ``s`` (left) and normal ``n`` (up) expressed in the world frame.

Vectors are plain ``(3,)`` float arrays. The ``WorldVec``/``BodyVec`` aliases
tag the frame at the type level so a static checker can flag a body-frame
vector passed where a world-frame one is expected.
"""

from dataclasses import dataclass
from typing import Callable, NewType

import numpy as np

WorldVec = NewType("WorldVec", np.ndarray)
BodyVec = NewType("BodyVec", np.ndarray)

ORTHO_TOL = 1e-8
E1 = np.array([1.0, 0.0, 0.0])
E2 = np.array([0.0, 1.0, 0.0])
E3 = np.array([0.0, 0.0, 1.0])


class FrameError(ValueError):
    """Raised when a triad or matrix violates an SO(3) precondition."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class AngularState:
    """Body angular velocity and acceleration."""

    omega_body: np.ndarray
    omega_dot_body: np.ndarray


def vec3(x, name="vector"):
    v = np.asarray(x, dtype=float).reshape(3)
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} has non-finite components: {v}")
    return v


def unit(x, name="vector"):
    v = vec3(x, name)
    nrm = np.linalg.norm(v)
    if nrm == 0.0:
        raise ValueError(f"{name} has zero norm")
    return v / nrm


def hat(v):
    """Skew matrix with ``hat(v) @ y == cross(v, y)``."""
    x, y, z = np.asarray(v, dtype=float).reshape(3)
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def antisym(M):
    M = np.asarray(M, dtype=float)
    return 0.5 * (M - M.T)


def vee(M, tol=ORTHO_TOL):
    """Inverse of :func:`hat`.

    The symmetric part of ``M`` must be below ``tol`` (Frobenius, scaled by
    ``max(1, |M|)``); the antisymmetric part is then inverted.
    """
    M = np.asarray(M, dtype=float).reshape(3, 3)
    sym = 0.5 * (M + M.T)
    resid = np.linalg.norm(sym)
    if resid > tol * max(1.0, np.linalg.norm(M)):
        raise FrameError(f"matrix is not skew-symmetric (symmetric part {resid:.3e})", resid)
    A = antisym(M)
    return np.array([A[2, 1], A[0, 2], A[1, 0]])


def gram_residual(R):
    R = np.asarray(R, dtype=float)
    return float(np.linalg.norm(R.T @ R - np.eye(3)))


def is_rotation(R, tol=1e-10):
    R = np.asarray(R, dtype=float)
    return gram_residual(R) <= tol and abs(np.linalg.det(R) - 1.0) <= tol


def rotation_from_axes(c, s, n, tol=ORTHO_TOL):
    """Assemble ``R = [c s n]`` from a right-handed orthonormal world triad."""
    R = np.column_stack([vec3(c, "c"), vec3(s, "s"), vec3(n, "n")])
    resid = gram_residual(R)
    if resid > tol:
        raise FrameError(f"axes are not orthonormal (Gram residual {resid:.3e})", resid)
    if np.linalg.det(R) < 0.0:
        raise FrameError("axes form a left-handed triad", resid)
    return R


def reorthonormalize(R):
    """Project a drifted attitude back onto SO(3).

    Gram-Schmidt on the normal then span axes; chord completes the triad.
    """
    R = np.asarray(R, dtype=float)
    n = R[:, 2] / np.linalg.norm(R[:, 2])
    s = R[:, 1] - (R[:, 1] @ n) * n
    s /= np.linalg.norm(s)
    c = np.cross(s, n)
    return np.column_stack([c, s, n])


def expm_so3(w):
    """Rodrigues formula for ``expm(hat(w))``."""
    w = np.asarray(w, dtype=float).reshape(3)
    th2 = w @ w
    K = hat(w)
    if th2 < 1e-12:
        # Taylor coefficients to O(th^4)
        a = 1.0 - th2 / 6.0 + th2 * th2 / 120.0
        b = 0.5 - th2 / 24.0 + th2 * th2 / 720.0
    else:
        th = np.sqrt(th2)
        a = np.sin(th) / th
        b = (1.0 - np.cos(th)) / th2
    return np.eye(3) + a * K + b * (K @ K)


def geodesic_angle(R_a, R_b):
    """Rotation angle of ``R_a.T @ R_b`` in [0, pi]."""
    M = np.asarray(R_a, dtype=float).T @ np.asarray(R_b, dtype=float)
    # atan2 form stays accurate for tiny angles, unlike arccos of the trace
    sin_part = np.linalg.norm(vee(antisym(M), tol=np.inf))
    cos_part = 0.5 * (np.trace(M) - 1.0)
    return float(np.arctan2(sin_part, cos_part))


def omega_from_frame_rates(c, s, n, c_dot, s_dot, n_dot):
    """World angular velocity of a moving triad, ``0.5 * sum(x cross x_dot)``.

    This is the least-squares ``w`` for ``x_dot = w cross x`` over the three
    axes, so it stays meaningful when the derivatives are slightly
    inconsistent.
    """
    return 0.5 * (np.cross(c, c_dot) + np.cross(s, s_dot) + np.cross(n, n_dot))


def _body_rate(sampler, t, h):
    if not (h > 0.0) or t + h == t or t - h == t:
        raise ValueError(f"step h={h!r} is not representable around t={t!r}")
    R = np.asarray(sampler(t), dtype=float)
    R_dot = (np.asarray(sampler(t + h)) - np.asarray(sampler(t - h))) / (2.0 * h)
    return R, vee(antisym(R.T @ R_dot), tol=np.inf)


def frame_rate_fd(sampler: Callable[[float], np.ndarray], t, h=1e-5, h_dot=None):
    """Body rate and acceleration of an attitude history by central differences.

    ``omega_body = vee(R.T @ R_dot)`` with ``R_dot`` a central difference of
    step ``h``. ``omega_dot_body`` is a central difference of ``omega_body``
    with step ``h_dot`` (default ``100 * h``); differencing an already
    differenced signal at step ``h`` would amplify rounding by ``1/h**2``.
    """
    if h_dot is None:
        h_dot = 100.0 * h
    R, w = _body_rate(sampler, t, h)
    if not (h_dot > 0.0) or t + h_dot == t:
        raise ValueError(f"step h_dot={h_dot!r} is not representable around t={t!r}")
    _, w_plus = _body_rate(sampler, t + h_dot, h)
    _, w_minus = _body_rate(sampler, t - h_dot, h)
    w_dot = (w_plus - w_minus) / (2.0 * h_dot)
    return R, AngularState(w, w_dot)
