"""Forward rigid-body simulation used to check inverse solutions.

The integrator is a Runge-Kutta-Munthe-Kaas scheme of order four: positions,
velocities and body rates take classical RK4 stages, while the attitude is
advanced as ``R <- R @ expm(hat(theta))`` with ``theta`` built from stage
body rates, so ``R`` stays on SO(3) up to rounding.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from . import kernels
from ._accel import use_numba
from .aero import (
    AeroPolar,
    AircraftParams,
    aero_directions,
    aero_force_body,
    aero_moment_body,
    air_state,
    angle_of_attack,
    default_eps,
)
from .geom import E3, expm_so3, gram_residual, reorthonormalize
from .inverse import G0
from .tether import TetherScenario, analytic_solution, implicit_trim, parallel_state

REORTHO_TOL = 1e-9

Input = Union[float, np.ndarray, Callable[[float], object]]


class NonFiniteStateError(FloatingPointError):
    def __init__(self, t_last_valid, message=None):
        super().__init__(message or f"state became non-finite after t={t_last_valid!r}")
        self.t_last_valid = t_last_valid


@dataclass
class RigidBodyState:
    p: np.ndarray
    v: np.ndarray
    R: np.ndarray
    omega_body: np.ndarray

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float).reshape(3)
        self.v = np.asarray(self.v, dtype=float).reshape(3)
        self.R = np.asarray(self.R, dtype=float).reshape(3, 3)
        self.omega_body = np.asarray(self.omega_body, dtype=float).reshape(3)


@dataclass(frozen=True)
class Inputs:
    """Input values frozen at one instant."""

    T: float = 0.0
    C_lmn: np.ndarray = field(default_factory=lambda: np.zeros(3))
    tether_tension: float = 0.0
    f_ext_world: np.ndarray = field(default_factory=lambda: np.zeros(3))
    tau_ext_body: np.ndarray = field(default_factory=lambda: np.zeros(3))
    tau_prop_body: np.ndarray = field(default_factory=lambda: np.zeros(3))
    w_world: np.ndarray = field(default_factory=lambda: np.zeros(3))


@dataclass(frozen=True)
class InputSchedule:
    """Direct inputs as constants or functions of time.

    ``tether_tension`` is a pull of that magnitude toward the world origin,
    re-derived from the instantaneous position.
    """

    T: Input = 0.0
    C_lmn: Input = (0.0, 0.0, 0.0)
    tether_tension: Input = 0.0
    f_ext_world: Input = (0.0, 0.0, 0.0)
    tau_ext_body: Input = (0.0, 0.0, 0.0)
    tau_prop_body: Input = (0.0, 0.0, 0.0)
    w_world: Input = (0.0, 0.0, 0.0)

    _VECTORS = ("C_lmn", "f_ext_world", "tau_ext_body", "tau_prop_body", "w_world")

    def at(self, t) -> Inputs:
        vals = {}
        for name in ("T", "tether_tension", *self._VECTORS):
            x = getattr(self, name)
            x = x(t) if callable(x) else x
            vals[name] = np.asarray(x, dtype=float).reshape(3) if name in self._VECTORS else float(x)
        return Inputs(**vals)

    @property
    def is_constant(self):
        return not any(callable(getattr(self, n)) for n in ("T", "tether_tension", *self._VECTORS))


@dataclass
class Trajectory:
    t: np.ndarray
    p: np.ndarray
    v: np.ndarray
    R: np.ndarray
    omega_body: np.ndarray

    def __len__(self):
        return len(self.t)

    def state(self, i):
        return RigidBodyState(self.p[i], self.v[i], self.R[i], self.omega_body[i])


@dataclass(frozen=True)
class ErrorReport:
    max_pos_err: float
    max_att_err: float
    max_speed_err: float

    def as_dict(self):
        return {"max_pos_err": self.max_pos_err, "max_att_err": self.max_att_err,
                "max_speed_err": self.max_speed_err}


@dataclass
class RoundTrip:
    report: ErrorReport
    trajectory: Trajectory
    pos_err: np.ndarray
    att_err: np.ndarray


def _loads(p, v, R, w, u: Inputs, params: AircraftParams, polar: AeroPolar, g, eps):
    F_b = u.T * params.u_t_body
    tau_b = u.tau_prop_body + u.tau_ext_body + params.D_omega @ w
    air = air_state(v, u.w_world, R, params.rho, eps)
    if np.any(air.e_a_body):
        dirs = aero_directions(air.e_a_body)
        C_L, C_D = polar.coefficients(angle_of_attack(air.e_a_body))
        F_b = F_b + aero_force_body(air.q, params.S, C_D, C_L, 0.0, dirs)
        tau_b = tau_b + aero_moment_body(air.q, params.S, params.b, params.c_bar, *u.C_lmn,
                                         np.zeros((3, 3)), w)
    f_w = R @ F_b + u.f_ext_world
    pn = np.linalg.norm(p)
    if u.tether_tension and pn > 0.0:
        f_w = f_w - (u.tether_tension / pn) * p
    v_dot = f_w / params.m - g * E3
    w_dot = np.linalg.solve(params.I_B, tau_b - _cross(w, params.I_B @ w))
    return v_dot, w_dot


def dynamics_rhs(state: RigidBodyState, inputs: Inputs, params: AircraftParams, polar: AeroPolar,
                 g=G0, eps=None):
    """``(p_dot, v_dot, R_dot, omega_dot)`` for the rigid body under ``inputs``.

    Angle of attack and lift direction come from the state's own air-relative
    velocity (no sideforce coefficient).
    """
    if eps is None:
        eps = default_eps()
    v_dot, w_dot = _loads(state.p, state.v, state.R, state.omega_body, inputs, params, polar, g, eps)
    w = state.omega_body
    R_dot = state.R @ np.array([[0.0, -w[2], w[1]], [w[2], 0.0, -w[0]], [-w[1], w[0], 0.0]])
    return state.v.copy(), v_dot, R_dot, w_dot


def _cross(u, v):
    # np.cross carries heavy dispatch overhead for single 3-vectors
    return np.array([u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]])


def _dexpinv(theta, w):
    tw = _cross(theta, w)
    return w + 0.5 * tw + _cross(theta, tw) / 12.0


def _step(t, p, v, R, w, h, schedule, params, polar, g, eps):
    def f(tt, pp, vv, RR, ww):
        return _loads(pp, vv, RR, ww, schedule.at(tt), params, polar, g, eps)

    a1, wd1 = f(t, p, v, R, w)
    K1 = w
    th = 0.5 * h * K1
    p2, v2, w2 = p + 0.5 * h * v, v + 0.5 * h * a1, w + 0.5 * h * wd1
    a2, wd2 = f(t + 0.5 * h, p2, v2, R @ expm_so3(th), w2)
    K2 = _dexpinv(th, w2)
    th = 0.5 * h * K2
    p3, v3, w3 = p + 0.5 * h * v2, v + 0.5 * h * a2, w + 0.5 * h * wd2
    a3, wd3 = f(t + 0.5 * h, p3, v3, R @ expm_so3(th), w3)
    K3 = _dexpinv(th, w3)
    th = h * K3
    p4, v4, w4 = p + h * v3, v + h * a3, w + h * wd3
    a4, wd4 = f(t + h, p4, v4, R @ expm_so3(th), w4)
    K4 = _dexpinv(th, w4)
    p = p + h / 6.0 * (v + 2.0 * v2 + 2.0 * v3 + v4)
    v = v + h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
    w = w + h / 6.0 * (wd1 + 2.0 * wd2 + 2.0 * wd3 + wd4)
    R = R @ expm_so3(h / 6.0 * (K1 + 2.0 * K2 + 2.0 * K3 + K4))
    if gram_residual(R) > REORTHO_TOL:
        R = reorthonormalize(R)
    return p, v, R, w


def geodesic_angles(R_a, R_b):
    """Row-wise :func:`ifd.geom.geodesic_angle` for stacks of rotations."""
    M = np.swapaxes(R_a, -1, -2) @ R_b
    sin_part = 0.5 * np.linalg.norm(
        np.stack([M[:, 2, 1] - M[:, 1, 2], M[:, 0, 2] - M[:, 2, 0], M[:, 1, 0] - M[:, 0, 1]], axis=1), axis=1)
    cos_part = 0.5 * (np.trace(M, axis1=1, axis2=2) - 1.0)
    return np.arctan2(sin_part, cos_part)


def _time_grid(dt, t_end):
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    if not t_end >= 0.0:
        raise ValueError("t_end must be non-negative")
    n = int(math.ceil(t_end / dt - 1e-9))
    t = np.arange(n + 1) * dt
    if n:
        t[-1] = t_end
    return t


def _kernel_eligible(schedule: InputSchedule, polar: AeroPolar, fast):
    if not (use_numba(fast) and schedule.is_constant and polar.is_small_angle):
        return False
    u = schedule.at(0.0)
    return not (np.any(u.f_ext_world) or np.any(u.tau_ext_body) or np.any(u.tau_prop_body)
                or np.any(u.w_world))


def integrate(state0: RigidBodyState, schedule: InputSchedule, params: AircraftParams,
              polar: AeroPolar, dt, t_end, g=G0, eps=None, fast: Optional[bool] = None):
    """Integrate from ``t=0`` to ``t_end`` with step ``dt``; every step is kept.

    The last step is shortened if ``t_end`` is not a multiple of ``dt``.
    Constant, wind-free inputs take the compiled kernel when available.
    """
    if eps is None:
        eps = default_eps()
    t = _time_grid(dt, t_end)
    n = len(t) - 1
    if _kernel_eligible(schedule, polar, fast):
        u = schedule.at(0.0)
        P, V, Rs, W = kernels.orbit_constant_inputs(
            state0.p, state0.v, state0.R, state0.omega_body, params, polar,
            u.T, u.C_lmn, u.tether_tension, t, g=g)
        finite = np.isfinite(P).all(axis=1) & np.isfinite(V).all(axis=1) & np.isfinite(W).all(axis=1)
        # the kernel skips airspeed regularisation; fall back if it would have mattered
        if finite.all() and np.linalg.norm(V, axis=1).min() >= eps:
            return Trajectory(t, P, V, Rs, W)

    P = np.empty((n + 1, 3))
    V = np.empty((n + 1, 3))
    Rs = np.empty((n + 1, 3, 3))
    W = np.empty((n + 1, 3))
    p, v, R, w = state0.p.copy(), state0.v.copy(), state0.R.copy(), state0.omega_body.copy()
    P[0], V[0], Rs[0], W[0] = p, v, R, w
    for i in range(n):
        with np.errstate(all="ignore"):
            p, v, R, w = _step(t[i], p, v, R, w, t[i + 1] - t[i], schedule, params, polar, g, eps)
        if not (np.isfinite(p).all() and np.isfinite(v).all() and np.isfinite(R).all()
                and np.isfinite(w).all()):
            raise NonFiniteStateError(float(t[i]))
        P[i + 1], V[i + 1], Rs[i + 1], W[i + 1] = p, v, R, w
    return Trajectory(t, P, V, Rs, W)


def roundtrip(scenario: TetherScenario, params: AircraftParams, polar: AeroPolar, dt=1e-3,
              n_orbits=1, fast=None):
    """Invert the parallel analytically, fly the inputs forward, and compare."""
    trim = implicit_trim(scenario, polar, params)
    sol = analytic_solution(scenario, params, polar, 0.0, trim)
    pt = parallel_state(scenario, 0.0)
    state0 = RigidBodyState(pt.p, pt.v, sol.R, sol.omega_body)
    schedule = InputSchedule(T=sol.T, C_lmn=(sol.C_l, sol.C_m, sol.C_n),
                             tether_tension=scenario.F_ext)
    traj = integrate(state0, schedule, params, polar, dt, n_orbits * scenario.period,
                     g=scenario.g, fast=fast)
    # the reference is R0 rotated about the vertical by the swept azimuth
    psi = scenario.omega_cir * traj.t
    cz, sz = np.cos(psi), np.sin(psi)
    p_ref = np.column_stack([scenario.r * np.cos(scenario.psi0 + psi),
                             scenario.r * np.sin(scenario.psi0 + psi),
                             np.full_like(psi, scenario.z0)])
    Rz = np.zeros((len(psi), 3, 3))
    Rz[:, 0, 0], Rz[:, 0, 1], Rz[:, 1, 0], Rz[:, 1, 1], Rz[:, 2, 2] = cz, -sz, sz, cz, 1.0
    R_ref = Rz @ sol.R
    pos_err = np.linalg.norm(traj.p - p_ref, axis=1)
    att_err = geodesic_angles(R_ref, traj.R)
    speed_err = np.abs(np.linalg.norm(traj.v, axis=1) - scenario.v0)
    report = ErrorReport(float(pos_err.max()), float(att_err.max()), float(speed_err.max()))
    return RoundTrip(report, traj, pos_err, att_err)


def roundtrip_verify(scenario: TetherScenario, params: AircraftParams, polar: AeroPolar, dt=1e-3,
                     n_orbits=1, fast=None):
    return roundtrip(scenario, params, polar, dt, n_orbits, fast).report
