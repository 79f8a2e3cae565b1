"""Hot loops with a compiled path and a pure-numpy path.

Each public function takes ``fast=None``; ``None`` picks numba when it is
importable and not disabled through ``IFD_DISABLE_NUMBA``. Both paths must
agree to rounding, which the test suite checks.

Kernels are restricted to the small-angle polar
``C_L = a alpha``, ``C_D = C_D0 + k_alpha alpha**2``.
"""

import math

import numpy as np

from ._accel import njit, use_numba


# -- batched trim ------------------------------------------------------------

@njit(cache=True)
def _trim_residual(x, f_par, f_perp, Q, a, cd0, ka):
    ca = math.cos(x)
    sa = math.sin(x)
    T_par = f_par + Q * (cd0 + ka * x * x)
    T_perp = f_perp - Q * a * x
    h = T_perp * ca - T_par * sa
    dh = -Q * a * ca - T_perp * sa - 2.0 * Q * ka * x * sa - T_par * ca
    return h, dh


@njit(cache=True)
def _trim_one(f_par, f_perp, Q, a, cd0, ka, amax, tol, max_iter):
    lo = -amax
    hi = amax
    f_lo, _ = _trim_residual(lo, f_par, f_perp, Q, a, cd0, ka)
    f_hi, _ = _trim_residual(hi, f_par, f_perp, Q, a, cd0, ka)
    if (f_lo > 0.0) == (f_hi > 0.0):
        return math.nan, 0
    if f_lo > 0.0:
        lo, hi = hi, lo
    x = 0.0
    dx_old = 2.0 * amax
    for it in range(1, max_iter + 1):
        f, df = _trim_residual(x, f_par, f_perp, Q, a, cd0, ka)
        if f == 0.0:
            return x, it
        if f < 0.0:
            lo = x
        else:
            hi = x
        x_new = math.nan
        if df != 0.0:
            x_new = x - f / df
        if not (min(lo, hi) <= x_new <= max(lo, hi)) or abs(x_new - x) >= 0.5 * dx_old:
            x_new = 0.5 * (lo + hi)
        dx_old = abs(x_new - x)
        x = x_new
        if dx_old <= tol * max(1.0, abs(x)):
            return x, it
    return math.nan, max_iter


@njit(cache=True)
def _trim_batch_nb(f_par, f_perp, Q, a, cd0, ka, amax, tol, max_iter):
    n = f_par.shape[0]
    alpha = np.empty(n)
    T = np.empty(n)
    for i in range(n):
        x, _ = _trim_one(f_par[i], f_perp[i], Q[i], a, cd0, ka, amax, tol, max_iter)
        alpha[i] = x
        T[i] = (f_par[i] + Q[i] * (cd0 + ka * x * x)) * math.cos(x) + (f_perp[i] - Q[i] * a * x) * math.sin(x)
    return alpha, T


def _trim_batch_np(f_par, f_perp, Q, a, cd0, ka, amax, tol, max_iter):
    def h(x):
        ca, sa = np.cos(x), np.sin(x)
        T_par = f_par + Q * (cd0 + ka * x * x)
        T_perp = f_perp - Q * a * x
        return (T_perp * ca - T_par * sa,
                -Q * a * ca - T_perp * sa - 2.0 * Q * ka * x * sa - T_par * ca)

    lo = np.full_like(f_par, -amax)
    hi = np.full_like(f_par, amax)
    f_lo, _ = h(lo)
    f_hi, _ = h(hi)
    ok = (f_lo > 0.0) != (f_hi > 0.0)
    swap = f_lo > 0.0
    lo, hi = np.where(swap, hi, lo), np.where(swap, lo, hi)
    x = np.zeros_like(f_par)
    dx_old = np.full_like(f_par, 2.0 * amax)
    done = ~ok
    for _ in range(max_iter):
        if done.all():
            break
        f, df = h(x)
        neg = f < 0.0
        lo = np.where(neg & ~done, x, lo)
        hi = np.where(~neg & ~done, x, hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            x_new = x - f / df
        bad = ~((np.minimum(lo, hi) <= x_new) & (x_new <= np.maximum(lo, hi))) | (np.abs(x_new - x) >= 0.5 * dx_old)
        x_new = np.where(bad, 0.5 * (lo + hi), x_new)
        x_new = np.where(done | (f == 0.0), x, x_new)
        step = np.abs(x_new - x)
        dx_old = np.where(done, dx_old, step)
        x = x_new
        done = done | (step <= tol * np.maximum(1.0, np.abs(x))) | (f == 0.0)
    alpha = np.where(ok & done, x, np.nan)
    T = (f_par + Q * (cd0 + ka * alpha**2)) * np.cos(alpha) + (f_perp - Q * a * alpha) * np.sin(alpha)
    return alpha, T


def trim_batch(f_par, f_perp, Q, a, C_D0, k_alpha, alpha_max, tol=1e-12, max_iter=100, fast=None):
    """Solve many ``(T, alpha)`` trims at once.

    ``Q`` is ``q*S`` (scalar or per-instance). Instances without a root in
    ``[-alpha_max, alpha_max]`` come back as NaN.
    """
    f_par, f_perp, Q = (np.ascontiguousarray(x, dtype=float)
                        for x in np.broadcast_arrays(f_par, f_perp, Q))
    shape = f_par.shape
    args = (f_par.ravel(), f_perp.ravel(), Q.ravel(), float(a), float(C_D0), float(k_alpha),
            float(alpha_max), float(tol), int(max_iter))
    alpha, T = (_trim_batch_nb if use_numba(fast) else _trim_batch_np)(*args)
    return alpha.reshape(shape), T.reshape(shape)


# -- batched cubic -----------------------------------------------------------

@njit(cache=True)
def _cardano_nb(ratio, a, cd0, ka):
    p = (cd0 + a) / ka
    out = np.empty_like(ratio)
    for i in range(ratio.shape[0]):
        d = ratio[i] / ka
        root = math.sqrt((0.5 * d) ** 2 + (p / 3.0) ** 3)
        out[i] = np.cbrt(0.5 * d + root) + np.cbrt(0.5 * d - root)
    return out


def cardano_batch(f_perp_over_Q, a, C_D0, k_alpha, fast=None):
    ratio = np.ascontiguousarray(f_perp_over_Q, dtype=float)
    if use_numba(fast):
        return _cardano_nb(ratio.ravel(), float(a), float(C_D0), float(k_alpha)).reshape(ratio.shape)
    from .tether import cardano_alpha
    return np.asarray(cardano_alpha(ratio, a, C_D0, k_alpha), dtype=float)


# -- constant-input orbit integrator -----------------------------------------

@njit(cache=True)
def _cross(u, v):
    return np.array([u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]])


@njit(cache=True)
def _expm(w):
    th2 = w[0] * w[0] + w[1] * w[1] + w[2] * w[2]
    K = np.array([[0.0, -w[2], w[1]], [w[2], 0.0, -w[0]], [-w[1], w[0], 0.0]])
    if th2 < 1e-12:
        A = 1.0 - th2 / 6.0 + th2 * th2 / 120.0
        B = 0.5 - th2 / 24.0 + th2 * th2 / 720.0
    else:
        th = math.sqrt(th2)
        A = math.sin(th) / th
        B = (1.0 - math.cos(th)) / th2
    return np.eye(3) + A * K + B * (K @ K)


@njit(cache=True)
def _reortho(R):
    n = np.ascontiguousarray(R[:, 2])
    n = n / math.sqrt(n @ n)
    s = np.ascontiguousarray(R[:, 1])
    s = s - (s @ n) * n
    s = s / math.sqrt(s @ s)
    out = np.empty((3, 3))
    out[:, 0] = _cross(s, n)
    out[:, 1] = s
    out[:, 2] = n
    return out


@njit(cache=True)
def _dexpinv(theta, w):
    tw = _cross(theta, w)
    return w + 0.5 * tw + _cross(theta, tw) / 12.0


@njit(cache=True)
def _rhs(p, v, R, w, cfg, I, I_inv, D, u_t):
    # cfg: m, g, rho, S, b, c_bar, a, C_D0, k_alpha, T, C_l, C_m, C_n, F_ext
    m, g, rho, S, b, cb = cfg[0], cfg[1], cfg[2], cfg[3], cfg[4], cfg[5]
    a, cd0, ka, T = cfg[6], cfg[7], cfg[8], cfg[9]
    F = T * u_t
    speed = math.sqrt(v @ v)
    tau = np.zeros(3)
    if speed > 0.0:
        q = 0.5 * rho * speed * speed
        e = (R.T @ v) / speed
        alpha = math.atan2(-e[2], e[0])
        nl = np.array([-e[2] * e[0], -e[2] * e[1], 1.0 - e[2] * e[2]])
        e_L = nl / math.sqrt(nl @ nl)
        F = F + q * S * (-(cd0 + ka * alpha * alpha) * e + a * alpha * e_L)
        tau = q * S * np.array([cfg[10] * b, cfg[11] * cb, cfg[12] * b])
    tau = tau + D @ w
    acc = (R @ F) / m
    acc[2] -= g
    pn = math.sqrt(p @ p)
    if pn > 0.0:
        acc = acc - (cfg[13] / (m * pn)) * p
    w_dot = I_inv @ (tau - _cross(w, I @ w))
    return acc, w_dot


@njit(cache=True)
def _orbit_nb(p0, v0, R0, w0, cfg, I, I_inv, D, u_t, t):
    n_steps = t.shape[0] - 1
    P = np.empty((n_steps + 1, 3))
    V = np.empty((n_steps + 1, 3))
    Rs = np.empty((n_steps + 1, 3, 3))
    W = np.empty((n_steps + 1, 3))
    p, v, R, w = p0.copy(), v0.copy(), R0.copy(), w0.copy()
    P[0], V[0], Rs[0], W[0] = p, v, R, w
    for i in range(n_steps):
        dt = t[i + 1] - t[i]
        a1, wd1 = _rhs(p, v, R, w, cfg, I, I_inv, D, u_t)
        K1 = w
        th = 0.5 * dt * K1
        p2, v2, w2 = p + 0.5 * dt * v, v + 0.5 * dt * a1, w + 0.5 * dt * wd1
        a2, wd2 = _rhs(p2, v2, R @ _expm(th), w2, cfg, I, I_inv, D, u_t)
        K2 = _dexpinv(th, w2)
        th = 0.5 * dt * K2
        p3, v3, w3 = p + 0.5 * dt * v2, v + 0.5 * dt * a2, w + 0.5 * dt * wd2
        a3, wd3 = _rhs(p3, v3, R @ _expm(th), w3, cfg, I, I_inv, D, u_t)
        K3 = _dexpinv(th, w3)
        th = dt * K3
        p4, v4, w4 = p + dt * v3, v + dt * a3, w + dt * wd3
        a4, wd4 = _rhs(p4, v4, R @ _expm(th), w4, cfg, I, I_inv, D, u_t)
        K4 = _dexpinv(th, w4)
        p = p + dt / 6.0 * (v + 2.0 * v2 + 2.0 * v3 + v4)
        v = v + dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        w = w + dt / 6.0 * (wd1 + 2.0 * wd2 + 2.0 * wd3 + wd4)
        R = R @ _expm(dt / 6.0 * (K1 + 2.0 * K2 + 2.0 * K3 + K4))
        E = R.T @ R - np.eye(3)
        if math.sqrt(np.sum(E * E)) > 1e-9:
            R = _reortho(R)
        P[i + 1], V[i + 1], Rs[i + 1], W[i + 1] = p, v, R, w
    return P, V, Rs, W


def orbit_constant_inputs(p0, v0, R0, w0, params, polar, T, C_lmn, F_ext, t, g=9.81):
    """Compiled RKMK4 for constant thrust, moment coefficients and radial tether pull.

    Zero wind, no external torque, no propeller torque. ``t`` is the output
    time grid; returns arrays ``(p, v, R, omega_body)`` with one row per time. Raises RuntimeError
    when numba is unavailable; :func:`ifd.forward.integrate` is the general
    (interpreted) path.
    """
    if not use_numba():
        raise RuntimeError("numba is unavailable or disabled")
    cfg = np.array([params.m, g, params.rho, params.S, params.b,
                    params.c_bar, polar.a, polar.C_D0, polar.k_alpha, T, *C_lmn, F_ext], dtype=float)
    f = lambda x: np.ascontiguousarray(x, dtype=float)
    return _orbit_nb(f(p0), f(v0), f(R0), f(w0), cfg, f(params.I_B), f(np.linalg.inv(params.I_B)), f(params.D_omega),
                     f(params.u_t_body), f(t))
