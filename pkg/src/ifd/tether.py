"""Tethered flight on a spherical parallel.

The aircraft flies a circle of colatitude ``theta`` on a sphere of radius
``L`` (the taut tether length) at constant speed ``v0`` with no wind, while
the tether pulls it toward the sphere centre with constant tension
``F_ext``. The required force then has constant horizontal and vertical
components, so bank angle, angle of attack and thrust are all constant.

Dimensionless groups: ``kappa = v0**2/(g L)`` and ``eta = F_ext/(m g)``.
"""

import enum
import math
from dataclasses import dataclass

import numpy as np

from .aero import RHO_SEA_LEVEL, AeroPolar, AircraftParams
from .geom import E3, AngularState
from .inverse import (
    G0,
    InverseSolution,
    TrajectoryPoint,
    TrimPair,
    body_axes,
    moment_coefficients,
    required_torque,
    solve_trim,
)

ZERO_BANK_RTOL = 1e-9


class InvertedRegimeError(ValueError):
    """The tether pushes hard enough that ``1 + eta cos(theta) <= 0``."""


class Regime(str, enum.Enum):
    INWARD = "Inward"
    ZERO_BANK = "ZeroBank"
    OUTWARD = "Outward"


@dataclass(frozen=True)
class TetherScenario:
    L: float
    theta: float
    v0: float
    F_ext: float = 0.0
    m: float = 2.0
    g: float = G0
    rho: float = RHO_SEA_LEVEL
    psi0: float = 0.0

    def __post_init__(self):
        if not self.L > 0.0:
            raise ValueError("tether length L must be positive")
        if not 0.0 < self.theta <= math.pi / 2:
            raise ValueError(
                f"colatitude must lie in (0, 90] deg, got {math.degrees(self.theta):.6g} deg"
            )
        if not self.v0 > 0.0:
            raise ValueError("speed v0 must be positive")
        if not (self.m > 0.0 and self.g > 0.0 and self.rho > 0.0):
            raise ValueError("m, g and rho must be positive")
        if not math.isfinite(self.F_ext):
            raise ValueError("F_ext must be finite")

    @classmethod
    def from_radius(cls, L, r, v0, **kwargs):
        """Scenario whose parallel has horizontal radius ``r`` (``theta = asin(r/L)``)."""
        if not 0.0 < r <= L:
            raise ValueError("circle radius must lie in (0, L]")
        return cls(L=L, theta=math.asin(r / L), v0=v0, **kwargs)

    def with_tension(self, F_ext):
        return TetherScenario(self.L, self.theta, self.v0, F_ext, self.m, self.g, self.rho, self.psi0)

    @property
    def r(self):
        return self.L * math.sin(self.theta)

    @property
    def z0(self):
        return self.L * math.cos(self.theta)

    @property
    def omega_cir(self):
        return self.v0 / self.r

    @property
    def kappa(self):
        return self.v0**2 / (self.g * self.L)

    @property
    def eta(self):
        return self.F_ext / (self.m * self.g)

    @property
    def q(self):
        return 0.5 * self.rho * self.v0**2

    @property
    def period(self):
        return 2.0 * math.pi / self.omega_cir

    def psi(self, t):
        return self.psi0 + self.omega_cir * t


def reference_scenario(F_ext=16.0):
    """2 kg aircraft on a 20 m tether, 18.544 m circle, 11.7 m/s."""
    return TetherScenario.from_radius(20.0, 18.544, 11.7, F_ext=F_ext, m=2.0)


@dataclass(frozen=True)
class DemandComponents:
    A_h: float
    A_z: float
    A_h_in: float
    f_perp: float
    e_a_world: np.ndarray
    n_curve_world: np.ndarray
    s_world: np.ndarray


@dataclass(frozen=True)
class BankResult:
    mu: float
    regime: Regime


@dataclass(frozen=True)
class SensitivityReport:
    d_mu_d_eta: float
    d_mu_d_kappa: float
    d_mu_d_theta: float
    d_mu_d_L: float

    def signs(self):
        return tuple(int(np.sign(x)) for x in
                     (self.d_mu_d_eta, self.d_mu_d_kappa, self.d_mu_d_theta, self.d_mu_d_L))


def _radial_basis(psi):
    u_rxy = np.array([math.cos(psi), math.sin(psi), 0.0])
    e_t = np.array([-math.sin(psi), math.cos(psi), 0.0])
    return u_rxy, e_t


def parallel_state(s: TetherScenario, t):
    """Position, velocity, acceleration and tether force at time ``t``."""
    psi = s.psi(t)
    u_rxy, e_t = _radial_basis(psi)
    p = s.r * u_rxy + s.z0 * E3
    e_r = p / s.L
    return TrajectoryPoint(
        t=t,
        p=p,
        v=s.v0 * e_t,
        a=-(s.v0**2 / s.r) * u_rxy,
        f_ext_world=-s.F_ext * e_r,
    )


def demand(s: TetherScenario, psi=None):
    """Required-force components and the coordinated trajectory frame at ``psi``."""
    if psi is None:
        psi = s.psi0
    A_h = -s.m * s.v0**2 / s.r + s.F_ext * s.r / s.L
    A_z = s.m * s.g + s.F_ext * s.z0 / s.L
    f_perp = math.hypot(A_h, A_z)
    if f_perp == 0.0:
        raise ValueError("required force vanishes; the trajectory frame is undefined")
    u_rxy, e_t = _radial_basis(psi)
    n_curve = (A_h * u_rxy + A_z * E3) / f_perp
    s_world = (A_h * E3 - A_z * u_rxy) / f_perp
    return DemandComponents(A_h, A_z, -A_h, f_perp, e_t, n_curve, s_world)


def implicit_trim(s: TetherScenario, polar: AeroPolar, params: AircraftParams, alpha0=0.0, tol=1e-13):
    """Full (non-small-angle) ``(T, alpha)`` for the parallel."""
    d = demand(s)
    return solve_trim(0.0, d.f_perp, s.q, params.S, polar, alpha0=alpha0, tol=tol,
                      alpha_max=params.alpha_max)


def cardano_alpha(f_perp_over_Q, a, C_D0, k_alpha):
    """Real root of ``k_alpha x**3 + (C_D0 + a) x = f_perp/Q``.

    Works elementwise on arrays. Requires ``k_alpha > 0`` and ``C_D0 + a > 0``,
    which make the cubic strictly increasing.
    """
    ratio = np.asarray(f_perp_over_Q, dtype=float)
    p = (C_D0 + a) / k_alpha
    d = ratio / k_alpha
    disc = (0.5 * d) ** 2 + (p / 3.0) ** 3
    root = np.sqrt(disc)
    alpha = np.cbrt(0.5 * d + root) + np.cbrt(0.5 * d - root)
    return alpha if alpha.ndim else float(alpha)


def cardano_trim(s: TetherScenario, polar: AeroPolar, params: AircraftParams):
    """Closed-form small-angle trim; thrust from the drag balance ``T cos(alpha) = D``."""
    if not (polar.k_alpha > 0.0 and polar.C_D0 + polar.a > 0.0):
        raise ValueError("cubic trim needs k_alpha > 0 and C_D0 + a > 0")
    Q = s.q * params.S
    f_perp = demand(s).f_perp
    alpha = cardano_alpha(f_perp / Q, polar.a, polar.C_D0, polar.k_alpha)
    T = Q * (polar.C_D0 + polar.k_alpha * alpha**2) / math.cos(alpha)
    resid = polar.k_alpha * alpha**3 + (polar.C_D0 + polar.a) * alpha - f_perp / Q
    return TrimPair(T=T, alpha=alpha, iterations=0, residual=abs(resid))


def bank_angle_dimensionless(kappa, eta, theta):
    """Signed bank angle (positive toward the circle centre).

    ``tan(mu) = (kappa/sin(theta) - eta sin(theta)) / (1 + eta cos(theta))``.
    """
    st, ct = math.sin(theta), math.cos(theta)
    den = 1.0 + eta * ct
    if not den > 0.0:
        raise InvertedRegimeError(f"1 + eta cos(theta) = {den:.6g} <= 0: inverted regime")
    return math.atan((kappa / st - eta * st) / den)


def bank_angle_grid(kappa, eta, theta):
    """Vectorised bank law; NaN where the denominator is non-positive."""
    kappa, eta, theta = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (kappa, eta, theta)))
    st, ct = np.sin(theta), np.cos(theta)
    den = 1.0 + eta * ct
    with np.errstate(divide="ignore", invalid="ignore"):
        mu = np.arctan((kappa / st - eta * st) / den)
    return np.where(den > 0.0, mu, np.nan)


def zero_bank_eta(kappa, theta):
    return kappa / math.sin(theta) ** 2


def zero_bank_tension(s: TetherScenario):
    """Tension giving level wings, ``m v0**2 L / r**2`` (ignores ``s.F_ext``)."""
    return s.m * s.v0**2 * s.L / s.r**2


def classify_regime(kappa, eta, theta, tol=ZERO_BANK_RTOL):
    eta_star = zero_bank_eta(kappa, theta)
    band = tol * abs(eta_star)
    if eta < eta_star - band:
        return Regime.INWARD
    if eta > eta_star + band:
        return Regime.OUTWARD
    return Regime.ZERO_BANK


def bank_angle(s: TetherScenario):
    d = demand(s)
    if not d.A_z > 0.0:
        raise InvertedRegimeError("vertical demand is non-positive: inverted regime")
    mu = math.atan2(d.A_h_in, d.A_z)
    return BankResult(mu=mu, regime=classify_regime(s.kappa, s.eta, s.theta))


def sensitivities_at_locus(kappa, theta, L=None):
    """Bank-angle partials on the zero-bank locus ``eta = kappa/sin(theta)**2``.

    ``d_mu_d_L`` (fixed ``v0`` and ``F_ext``) needs the tether length; it is
    NaN when ``L`` is not given.
    """
    st, ct = math.sin(theta), math.cos(theta)
    eta = zero_bank_eta(kappa, theta)
    den = 1.0 + eta * ct
    d_kappa = 1.0 / (st * den)
    return SensitivityReport(
        d_mu_d_eta=-st / den,
        d_mu_d_kappa=d_kappa,
        d_mu_d_theta=-2.0 * kappa * ct / (st * st * den),
        d_mu_d_L=-kappa / (L * st * den) if L is not None else math.nan,
    )


def induced_drag_of_lift(F_L, q, S, polar: AeroPolar):
    """Drag needed to produce lift ``F_L``: ``qS C_D0 + F_L**2 k_alpha/(qS a**2)``."""
    if not q > 0.0:
        raise ValueError("dynamic pressure must be positive")
    Q = q * S
    return Q * polar.C_D0 + F_L**2 * polar.k_alpha / (Q * polar.a**2)


def specific_force(R, a_world, g_world=(0.0, 0.0, -G0)):
    """Accelerometer reading ``R.T (a - g)`` in the body frame."""
    return np.asarray(R, dtype=float).T @ (np.asarray(a_world, float) - np.asarray(g_world, float))


def constant_rates(s: TetherScenario, R):
    return AngularState(np.asarray(R).T @ (s.omega_cir * E3), np.zeros(3))


def attitude(s: TetherScenario, alpha, t=0.0):
    d = demand(s, s.psi(t))
    return body_axes(alpha, d.e_a_world, d.s_world, d.n_curve_world)[3]


def analytic_solution(s: TetherScenario, params: AircraftParams, polar: AeroPolar, t=0.0, trim=None):
    """Closed-form inverse solution at time ``t`` (constant rates, zero body acceleration)."""
    if trim is None:
        trim = implicit_trim(s, polar, params)
    R = attitude(s, trim.alpha, t)
    rates = constant_rates(s, R)
    tau = required_torque(params.I_B, rates.omega_body, rates.omega_dot_body)
    C = moment_coefficients(tau, params.D_omega, rates.omega_body, s.q, params.S, params.b, params.c_bar)
    pt = parallel_state(s, t)
    F_req = pt.a * s.m + np.array([0.0, 0.0, s.m * s.g]) - pt.f_ext_world
    return InverseSolution(
        t=t, R=R, omega_body=rates.omega_body, omega_dot_body=rates.omega_dot_body,
        T=trim.T, alpha=trim.alpha, beta=0.0, C_l=C[0], C_m=C[1], C_n=C[2], u=np.zeros(0),
        q=s.q, F_req_world=F_req, tau_req_body=tau,
    )
