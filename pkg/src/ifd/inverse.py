"""Closed-form inverse flight dynamics under coordinated flight.

Given a centre-of-mass trajectory, external loads and wind, each sample is
mapped to an attitude ``R``, body rates, a thrust/angle-of-attack pair, the
moment coefficients that realise the rotational motion, and optionally
control-surface deflections. The pipeline per sample is:

0. air-relative flow and dynamic pressure
1. required net force ``F_req = m a - m g - f_ext``
2. split ``F_req`` along/orthogonal to the flow
3. trajectory frame (flow, binormal, curve normal); zero sideslip puts the
   span axis on the binormal
4. body axes = trajectory frame pitched by ``alpha`` about the span axis
5. aerodynamic force from ``alpha`` only
6. solve the 2-D balance for ``(T, alpha)``
7. body rates from the attitude history
8. required torque and moment coefficients
9. control allocation
"""

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .aero import AeroPolar, AircraftParams, air_state, sideslip
from .geom import E1, E3, AngularState, FrameError, frame_rate_fd, omega_from_frame_rates

G0 = 9.81
DEGENERATE_PERP_REL = 1e-6


class InfeasibleError(ValueError):
    """A sample cannot be realised within the model or the aircraft limits."""

    def __init__(self, reason, message=None, trim=None):
        super().__init__(message or reason)
        self.reason = reason
        self.trim = trim


@dataclass(frozen=True)
class TrajectoryPoint:
    t: float
    p: np.ndarray
    v: np.ndarray
    a: np.ndarray
    f_ext_world: np.ndarray = field(default_factory=lambda: np.zeros(3))
    tau_ext_body: np.ndarray = field(default_factory=lambda: np.zeros(3))
    w_world: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        for name in ("p", "v", "a", "f_ext_world", "tau_ext_body", "w_world"):
            val = np.asarray(getattr(self, name), dtype=float).reshape(3)
            if not np.all(np.isfinite(val)):
                raise ValueError(f"{name} is not finite at t={self.t}")
            object.__setattr__(self, name, val)
        object.__setattr__(self, "t", float(self.t))


@dataclass(frozen=True)
class ForceDecomposition:
    F_req_world: np.ndarray
    f_par: float
    F_perp_world: np.ndarray
    f_perp: float
    n_curve_world: Optional[np.ndarray]
    s_traj_world: Optional[np.ndarray]

    @property
    def degenerate(self):
        return self.n_curve_world is None


@dataclass(frozen=True)
class TrimPair:
    T: float
    alpha: float
    iterations: int
    residual: float


@dataclass(frozen=True)
class InverseSolution:
    t: float
    R: np.ndarray
    omega_body: np.ndarray
    omega_dot_body: np.ndarray
    T: float
    alpha: float
    beta: float
    C_l: float
    C_m: float
    C_n: float
    u: np.ndarray
    q: float
    F_req_world: np.ndarray
    tau_req_body: np.ndarray
    regularized_airspeed: bool = False
    degenerate_perp: bool = False
    infeasible: tuple = ()

    @property
    def feasible(self):
        return not self.infeasible

    @property
    def flags(self):
        out = []
        if self.regularized_airspeed:
            out.append("regularized_airspeed")
        if self.degenerate_perp:
            out.append("degenerate_perp")
        out.extend(f"infeasible:{r}" for r in self.infeasible)
        return out


@dataclass
class ControlAllocation:
    """Affine moment-coefficient model ``C = C_passive(alpha, beta, w) + B_eff(alpha) @ u``.

    ``lift_drag_increment(alpha, u) -> (dC_L, dC_D)`` is only used when the
    force/moment coupling iteration is switched on.
    """

    B_eff: object
    C_passive: Optional[Callable] = None
    u_min: Optional[np.ndarray] = None
    u_max: Optional[np.ndarray] = None
    lift_drag_increment: Optional[Callable] = None

    def matrix(self, alpha):
        B = self.B_eff(alpha) if callable(self.B_eff) else self.B_eff
        B = np.atleast_2d(np.asarray(B, dtype=float))
        if B.shape[0] != 3 or not np.all(np.isfinite(B)):
            raise ValueError("B_eff must be a finite 3 x n_u matrix")
        return B

    def passive(self, alpha, beta, omega_body):
        if self.C_passive is None:
            return np.zeros(3)
        return np.asarray(self.C_passive(alpha, beta, omega_body), dtype=float).reshape(3)


@dataclass(frozen=True)
class AllocationResult:
    u: np.ndarray
    saturated: np.ndarray

    @property
    def any_saturated(self):
        return bool(np.any(self.saturated))


@dataclass
class InverseOptions:
    g: float = G0
    eps: Optional[float] = None
    alpha0: float = 0.0
    tol: float = 1e-12
    max_iter: int = 100
    # Continuous-time trajectory t -> TrajectoryPoint; rates are then taken by
    # differencing the constructed attitude at step fd_step.
    trajectory_fn: Optional[Callable[[float], TrajectoryPoint]] = None
    # Direct hook t -> AngularState, bypassing differentiation entirely.
    rates_fn: Optional[Callable[[float], AngularState]] = None
    fd_step: float = 1e-5
    tau_prop: Optional[Callable[[float], np.ndarray]] = None
    q_min: float = 1e-6
    iterate_coupling: bool = False
    coupling_passes: int = 5
    coupling_tol: float = 1e-8


def required_force(pt: TrajectoryPoint, m, g=G0):
    """World-frame force propulsion and aerodynamics must supply. Wind-independent."""
    g_world = np.array([0.0, 0.0, -g])
    return m * pt.a - m * g_world - pt.f_ext_world


def decompose(F_req, e_a_world, rel_tol=DEGENERATE_PERP_REL):
    F_req = np.asarray(F_req, dtype=float)
    e_a = np.asarray(e_a_world, dtype=float)
    f_par = float(F_req @ e_a)
    F_perp = F_req - f_par * e_a
    f_perp = float(np.linalg.norm(F_perp))
    if f_perp < rel_tol * max(1.0, float(np.linalg.norm(F_req))):
        return ForceDecomposition(F_req, f_par, F_perp, f_perp, None, None)
    n_curve = F_perp / f_perp
    return ForceDecomposition(F_req, f_par, F_perp, f_perp, n_curve, np.cross(n_curve, e_a))


def degenerate_perp_frame(e_a_world, prev_R=None, tol=1e-6):
    """Wings-level ``(n_curve, s_traj)`` when the required force is purely axial.

    The lift axis is world-up projected off the flow. For near-vertical flow
    the previous attitude's normal (then span) axis is projected instead.
    """
    e_a = np.asarray(e_a_world, dtype=float)
    candidates = [E3]
    if prev_R is not None:
        candidates += [prev_R[:, 2], -np.cross(prev_R[:, 1], e_a)]
    for cand in candidates:
        proj = cand - (cand @ e_a) * e_a
        nrm = np.linalg.norm(proj)
        if nrm > tol:
            n_curve = proj / nrm
            return n_curve, np.cross(n_curve, e_a)
    raise FrameError("flow is vertical and no previous attitude is available to fix the roll")


def body_axes(alpha, e_a_world, s_world, n_curve_world):
    """Pitch the trajectory frame by ``alpha`` about the span axis.

    Returns ``(c, s, n, R)`` with ``R = [c s n]``.
    """
    ca, sa = math.cos(alpha), math.sin(alpha)
    e_a = np.asarray(e_a_world, dtype=float)
    n_curve = np.asarray(n_curve_world, dtype=float)
    s = np.asarray(s_world, dtype=float)
    c = ca * e_a + sa * n_curve
    n = -sa * e_a + ca * n_curve
    return c, s, n, np.column_stack([c, s, n])


def _safeguarded_newton(fn, lo, hi, x0, tol, max_iter):
    """Newton on a bracketed scalar root, bisecting whenever a step leaves the bracket.

    ``fn(x) -> (f, df)``. Returns ``(x, iterations)``; raises
    ``InfeasibleError('no-trim')`` when no root can be located in ``[lo, hi]``.
    """
    f_lo, _ = fn(lo)
    f_hi, _ = fn(hi)
    if f_lo == 0.0:
        return lo, 0
    if f_hi == 0.0:
        return hi, 0
    bracketed = (f_lo > 0.0) != (f_hi > 0.0)
    if bracketed and f_lo > 0.0:
        # orient so that fn(lo) < 0 < fn(hi)
        lo, hi = hi, lo
    x = min(max(x0, min(lo, hi)), max(lo, hi))
    dx_old = abs(hi - lo)
    for it in range(1, max_iter + 1):
        f, df = fn(x)
        if f == 0.0:
            return x, it
        if bracketed:
            if f < 0.0:
                lo = x
            else:
                hi = x
        step_ok = df != 0.0 and math.isfinite(df)
        if step_ok:
            x_new = x - f / df
            inside = min(lo, hi) <= x_new <= max(lo, hi)
            step_ok = inside and (not bracketed or abs(x_new - x) < 0.5 * dx_old)
        if not step_ok:
            if not bracketed:
                break
            x_new = 0.5 * (lo + hi)
        dx_old = abs(x_new - x)
        x = x_new
        if dx_old <= tol * max(1.0, abs(x)):
            f, _ = fn(x)
            if bracketed or abs(f) <= 1e-10:
                return x, it
            break
    raise InfeasibleError("no-trim", "no angle of attack within the stall bracket balances the required force")


def _balance(f_par, f_perp, Q, polar):
    def fn(alpha):
        C_L, C_D = polar.coefficients(alpha)
        dC_L, dC_D = polar.slopes(alpha)
        T_par = f_par + Q * C_D
        T_perp = f_perp - Q * C_L
        ca, sa = math.cos(alpha), math.sin(alpha)
        h = T_perp * ca - T_par * sa
        dh = -Q * dC_L * ca - T_perp * sa - Q * dC_D * sa - T_par * ca
        return h, dh

    return fn


def thrust_components(f_par, f_perp, q, S, polar, alpha):
    """``(T_par, T_perp)``: thrust the chord axis must supply along flow and curve normal."""
    C_L, C_D = polar.coefficients(alpha)
    return f_par + q * S * C_D, f_perp - q * S * C_L


def solve_trim(f_par, f_perp, q, S, polar: AeroPolar, alpha0=0.0, tol=1e-12, max_iter=100,
               alpha_max=math.radians(15.0)):
    """Thrust and angle of attack balancing the required force in the flow plane.

    Solves ``T = |(T_par, T_perp)|``, ``alpha = atan2(T_perp, T_par)`` by
    root-finding the smooth residual ``T_perp*cos(alpha) - T_par*sin(alpha)``
    on ``[-alpha_max, alpha_max]`` with a bracket-safeguarded Newton
    iteration. Thrust is recovered with its sign, so a trajectory that needs
    reverse thrust is reported as ``InfeasibleError('negative-thrust')``.
    """
    if not q > 0.0:
        raise ValueError("dynamic pressure must be positive")
    Q = q * S
    alpha, iters = _safeguarded_newton(_balance(f_par, f_perp, Q, polar),
                                       -alpha_max, alpha_max, alpha0, tol, max_iter)
    T_par, T_perp = thrust_components(f_par, f_perp, q, S, polar, alpha)
    T = T_par * math.cos(alpha) + T_perp * math.sin(alpha)
    scale = abs(f_par) + abs(f_perp) + Q
    if T > 1e-9 * scale:
        d = alpha - math.atan2(T_perp, T_par)
        residual = abs(math.remainder(d, 2 * math.pi))
    else:
        # zero thrust: any alpha satisfies the atan2 form, check the balance instead
        residual = abs(T_perp * math.cos(alpha) - T_par * math.sin(alpha)) / scale
    trim = TrimPair(T=T, alpha=alpha, iterations=iters, residual=residual)
    if T < -1e-9 * scale:
        raise InfeasibleError("negative-thrust", f"required thrust {T:.6g} N is negative", trim)
    return trim


def solve_trim_smallangle(f_par, f_perp, q, S, polar: AeroPolar, alpha0=0.0, tol=1e-12,
                          max_iter=100, alpha_max=math.radians(15.0)):
    """Angle of attack from the scalar small-angle-polar relation

    ``tan(alpha) * (f_par + qS (C_D0 + k_alpha alpha^2)) = f_perp - qS a alpha``.
    """
    if not q > 0.0:
        raise ValueError("dynamic pressure must be positive")
    Q = q * S
    a, cd0, ka = polar.a, polar.C_D0, polar.k_alpha

    def fn(x):
        tx = math.tan(x)
        den = f_par + Q * (cd0 + ka * x * x)
        r = tx * den - (f_perp - Q * a * x)
        dr = (1.0 + tx * tx) * den + tx * 2.0 * Q * ka * x + Q * a
        return r, dr

    alpha, _ = _safeguarded_newton(fn, -alpha_max, alpha_max, alpha0, tol, max_iter)
    return alpha


def required_torque(I_B, omega_body, omega_dot_body, tau_ext_body=None, tau_prop_body=None):
    I_B = np.asarray(I_B, dtype=float)
    w = np.asarray(omega_body, dtype=float)
    tau = I_B @ np.asarray(omega_dot_body, dtype=float) + np.cross(w, I_B @ w)
    if tau_ext_body is not None:
        tau = tau - tau_ext_body
    if tau_prop_body is not None:
        tau = tau - tau_prop_body
    return tau


def moment_coefficients(tau_req_body, D_omega, omega_body, q, S, b, c_bar, q_min=1e-6):
    """``(C_l, C_m, C_n)`` after removing rate damping from the required torque.

    FLU axes: positive ``C_m`` is nose-down and positive ``C_n`` is nose-left.
    """
    if not q > q_min:
        raise InfeasibleError("no-dynamic-pressure", f"q={q!r} Pa is below q_min={q_min!r}")
    zeta = np.asarray(tau_req_body, dtype=float) - np.asarray(D_omega) @ np.asarray(omega_body)
    qS = q * S
    return float(zeta[0] / (qS * b)), float(zeta[1] / (qS * c_bar)), float(zeta[2] / (qS * b))


def allocate_controls(alloc: ControlAllocation, C_req, alpha, beta, omega_body):
    """Deflections ``u`` realising ``C_req``, clamped to the actuator limits.

    Square, well-conditioned ``B_eff`` is inverted exactly; otherwise a
    Tikhonov-regularised pseudoinverse (``lambda = 1e-8 |B|^2``) gives the
    minimum-norm solution.
    """
    B = alloc.matrix(alpha)
    rhs = np.asarray(C_req, dtype=float).reshape(3) - alloc.passive(alpha, beta, omega_body)
    sv = np.linalg.svd(B, compute_uv=False)
    if sv.size < 3 or sv[0] == 0.0 or sv[min(2, sv.size - 1)] <= 1e-12 * sv[0]:
        raise InfeasibleError("unallocatable", "control effectiveness has rank < 3")
    if B.shape == (3, 3) and sv[0] / sv[-1] < 1e8:
        u = np.linalg.solve(B, rhs)
    else:
        lam = 1e-8 * sv[0] ** 2
        u = B.T @ np.linalg.solve(B @ B.T + lam * np.eye(3), rhs)
    lo = -np.inf if alloc.u_min is None else np.asarray(alloc.u_min, dtype=float)
    hi = np.inf if alloc.u_max is None else np.asarray(alloc.u_max, dtype=float)
    u_c = np.clip(u, lo, hi)
    return AllocationResult(u=u_c, saturated=u_c != u)


@dataclass
class _Pointwise:
    """Steps 0-6 for one sample."""

    R: np.ndarray
    T: float
    alpha: float
    beta: float
    q: float
    F_req: np.ndarray
    regularized: bool = False
    degenerate: bool = False
    infeasible: list = field(default_factory=list)


def _offset_polar(polar, dCL, dCD):
    if dCL == 0.0 and dCD == 0.0:
        return polar
    return replace(
        polar,
        cl_fn=lambda a, p=polar: p.coefficients(a)[0] + dCL,
        cd_fn=lambda a, p=polar: p.coefficients(a)[1] + dCD,
    )


def _pointwise(pt, params: AircraftParams, polar, prev_R, alpha0, opts: InverseOptions):
    air = air_state(pt.v, pt.w_world, np.eye(3), params.rho, opts.eps)
    F_req = required_force(pt, params.m, opts.g)

    if air.regularized:
        # no usable flow: thrust carries the whole required force
        F_norm = float(np.linalg.norm(F_req))
        if F_norm > 0.0:
            c = F_req / F_norm
        else:
            c = prev_R[:, 0] if prev_R is not None else E1
        cands = ([prev_R[:, 2]] if prev_R is not None else []) + [E3, E1]
        for cand in cands:
            proj = cand - (cand @ c) * c
            if np.linalg.norm(proj) > 1e-6:
                n = proj / np.linalg.norm(proj)
                break
        R = np.column_stack([c, np.cross(n, c), n])
        return _Pointwise(R, F_norm, math.nan, math.nan, air.q, F_req, regularized=True)

    e_a = air.e_a_world
    dec = decompose(F_req, e_a)
    out = _Pointwise(np.eye(3), math.nan, math.nan, math.nan, air.q, F_req,
                     degenerate=dec.degenerate)
    if dec.degenerate:
        try:
            n_curve, s = degenerate_perp_frame(e_a, prev_R)
        except FrameError:
            out.infeasible.append("undetermined-roll")
            out.R = prev_R.copy() if prev_R is not None else np.eye(3)
            return out
    else:
        n_curve, s = dec.n_curve_world, dec.s_traj_world
    f_perp = float(F_req @ n_curve)

    alpha_used = alpha0
    try:
        trim = solve_trim(dec.f_par, f_perp, air.q, params.S, polar, alpha0=alpha0,
                          tol=opts.tol, max_iter=opts.max_iter, alpha_max=params.alpha_max)
        out.T, out.alpha = trim.T, trim.alpha
        alpha_used = trim.alpha
    except InfeasibleError as exc:
        out.infeasible.append(exc.reason)
        if exc.trim is not None:
            out.T, out.alpha = exc.trim.T, exc.trim.alpha
            alpha_used = exc.trim.alpha
    if math.isfinite(out.T) and out.T > params.T_max:
        out.infeasible.append("thrust-limit")
    *_, R = body_axes(alpha_used, e_a, s, n_curve)
    out.R = R
    out.beta = sideslip(R.T @ e_a)
    return out


def _pointwise_sweep(samples, params, polar, opts, offsets=None):
    rows = []
    prev_R, alpha0 = None, opts.alpha0
    for i, pt in enumerate(samples):
        pol = polar if offsets is None else _offset_polar(polar, *offsets[i])
        row = _pointwise(pt, params, pol, prev_R, alpha0, opts)
        rows.append(row)
        prev_R = row.R
        if math.isfinite(row.alpha):
            alpha0 = row.alpha
    return rows


def _sample_rates(times, rotations):
    """Body rates and accelerations from an attitude sequence (second-order differences)."""
    t = np.asarray(times, dtype=float)
    Rs = np.asarray(rotations)
    R_dot = np.gradient(Rs, t, axis=0, edge_order=2)
    omega_b = np.empty((len(t), 3))
    for k, (R, Rd) in enumerate(zip(Rs, R_dot)):
        w_world = omega_from_frame_rates(R[:, 0], R[:, 1], R[:, 2], Rd[:, 0], Rd[:, 1], Rd[:, 2])
        omega_b[k] = R.T @ w_world
    omega_dot_b = np.gradient(omega_b, t, axis=0, edge_order=2)
    return omega_b, omega_dot_b


def invert_trajectory(samples: Sequence[TrajectoryPoint], params: AircraftParams, polar: AeroPolar,
                      alloc: Optional[ControlAllocation] = None,
                      options: Optional[InverseOptions] = None):
    """Run the full inversion over a sampled trajectory.

    Per-sample problems (stall bracket, negative or excessive thrust,
    saturation, undetermined roll) are reported in ``infeasible`` and never
    abort the sweep.
    """
    opts = options or InverseOptions()
    samples = list(samples)
    if not samples:
        return []
    times = np.array([pt.t for pt in samples])
    if np.any(np.diff(times) <= 0.0):
        raise ValueError("sample times must be strictly increasing")
    if opts.rates_fn is None and opts.trajectory_fn is None and len(samples) < 3:
        raise ValueError("at least 3 samples are needed to difference the attitude")

    n_u = 0 if alloc is None else alloc.matrix(0.0).shape[1]
    offsets = None
    couple = opts.iterate_coupling and alloc is not None and alloc.lift_drag_increment is not None
    passes = max(1, opts.coupling_passes) if couple else 1
    prev_u = None
    for _ in range(passes):
        rows = _pointwise_sweep(samples, params, polar, opts, offsets)
        rates = _rates(samples, rows, times, params, polar, opts)
        sols = [_finish(pt, row, w, wd, params, alloc, n_u, opts)
                for pt, row, (w, wd) in zip(samples, rows, rates)]
        if not couple:
            break
        u_now = np.array([s.u for s in sols])
        if prev_u is not None and np.nanmax(np.abs(u_now - prev_u)) < opts.coupling_tol:
            break
        prev_u = u_now
        offsets = []
        for s in sols:
            if math.isfinite(s.alpha) and np.all(np.isfinite(s.u)):
                offsets.append(tuple(float(x) for x in alloc.lift_drag_increment(s.alpha, s.u)))
            else:
                offsets.append((0.0, 0.0))
    return sols


def _rates(samples, rows, times, params, polar, opts):
    if opts.rates_fn is not None:
        out = []
        for t in times:
            st = opts.rates_fn(t)
            out.append((np.asarray(st.omega_body, float), np.asarray(st.omega_dot_body, float)))
        return out
    if opts.trajectory_fn is not None:
        out = []
        for pt, row in zip(samples, rows):
            a0 = row.alpha if math.isfinite(row.alpha) else opts.alpha0

            def sampler(t, a0=a0, R0=row.R):
                return _pointwise(opts.trajectory_fn(t), params, polar, R0, a0, opts).R

            _, st = frame_rate_fd(sampler, pt.t, h=opts.fd_step)
            out.append((st.omega_body, st.omega_dot_body))
        return out
    w, wd = _sample_rates(times, [row.R for row in rows])
    return list(zip(w, wd))


def _finish(pt, row, omega, omega_dot, params, alloc, n_u, opts):
    tau_prop = None if opts.tau_prop is None else np.asarray(opts.tau_prop(pt.t), dtype=float)
    tau_req = required_torque(params.I_B, omega, omega_dot, pt.tau_ext_body, tau_prop)
    infeasible = list(row.infeasible)
    C = (math.nan, math.nan, math.nan)
    try:
        C = moment_coefficients(tau_req, params.D_omega, omega, row.q, params.S, params.b,
                                params.c_bar, opts.q_min)
    except InfeasibleError as exc:
        infeasible.append(exc.reason)
    u = np.full(n_u, math.nan)
    if alloc is not None and all(math.isfinite(x) for x in C):
        beta = 0.0 if not math.isfinite(row.beta) else row.beta
        alpha = 0.0 if not math.isfinite(row.alpha) else row.alpha
        try:
            res = allocate_controls(alloc, np.array(C), alpha, beta, omega)
            u = res.u
            if res.any_saturated:
                infeasible.append("saturation")
        except InfeasibleError as exc:
            infeasible.append(exc.reason)
    return InverseSolution(
        t=pt.t, R=row.R, omega_body=np.asarray(omega, float), omega_dot_body=np.asarray(omega_dot, float),
        T=row.T, alpha=row.alpha, beta=row.beta, C_l=C[0], C_m=C[1], C_n=C[2], u=u,
        q=row.q, F_req_world=row.F_req, tau_req_body=tau_req,
        regularized_airspeed=row.regularized, degenerate_perp=row.degenerate,
        infeasible=tuple(dict.fromkeys(infeasible)),
    )
