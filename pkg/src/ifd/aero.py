"""Aerodynamic directions, angles, force/moment models and UAV presets.

Body axes follow the Forward-Left-Up convention: ``c = e1`` (chord),
``s = e2`` (span, left), ``n = e3`` (wing normal, up). Pitch and yaw moment
coefficients therefore carry the opposite sign of Forward-Right-Down tables;
roll is unaffected.
"""

import math
import os
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .geom import E1, E2, E3, unit, vec3

RHO_SEA_LEVEL = 1.225
DEFAULT_EPS_AIRSPEED = 0.5


class DegenerateLiftError(ValueError):
    """Flow is parallel to the wing normal, so the lift direction is undefined."""

    def __init__(self, message, surface=None):
        super().__init__(message)
        self.surface = surface


def default_eps():
    """Airspeed regularization threshold, overridable via ``IFD_EPS_AIRSPEED``."""
    raw = os.environ.get("IFD_EPS_AIRSPEED")
    if raw is None or raw.strip() == "":
        return DEFAULT_EPS_AIRSPEED
    eps = float(raw)
    if not eps > 0.0:
        raise ValueError(f"IFD_EPS_AIRSPEED must be positive, got {raw!r}")
    return eps


@dataclass(frozen=True)
class AircraftParams:
    """Mass, inertia and aerodynamic reference data.

    ``D_omega`` is the rate-damping matrix added as ``D_omega @ omega`` to the
    aerodynamic moment; it must be negative semidefinite (dissipative).
    """

    m: float
    I_B: np.ndarray
    S: float
    b: float
    c_bar: float
    rho: float = RHO_SEA_LEVEL
    D_omega: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))
    u_t_body: np.ndarray = field(default_factory=lambda: E1.copy())
    alpha_max: float = math.radians(15.0)
    T_max: float = math.inf
    u_min: Optional[np.ndarray] = None
    u_max: Optional[np.ndarray] = None

    def __post_init__(self):
        I_B = np.asarray(self.I_B, dtype=float).reshape(3, 3)
        D = np.asarray(self.D_omega, dtype=float).reshape(3, 3)
        u_t = np.asarray(self.u_t_body, dtype=float).reshape(3)
        for name in ("m", "S", "b", "c_bar", "rho"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)!r}")
        if not np.allclose(I_B, I_B.T, atol=1e-12):
            raise ValueError("I_B must be symmetric")
        try:
            np.linalg.cholesky(I_B)
        except np.linalg.LinAlgError as exc:
            raise ValueError("I_B must be positive definite") from exc
        if np.max(np.linalg.eigvalsh(0.5 * (D + D.T))) > 1e-12:
            raise ValueError("D_omega must be negative semidefinite")
        if abs(np.linalg.norm(u_t) - 1.0) > 1e-12:
            raise ValueError("u_t_body must be a unit vector")
        if not 0.0 < self.alpha_max < math.pi / 2:
            raise ValueError("alpha_max must lie in (0, pi/2)")
        object.__setattr__(self, "I_B", I_B)
        object.__setattr__(self, "D_omega", D)
        object.__setattr__(self, "u_t_body", u_t)
        for name in ("u_min", "u_max"):
            val = getattr(self, name)
            if val is not None:
                object.__setattr__(self, name, np.asarray(val, dtype=float).ravel())

    @property
    def AR(self):
        return self.b**2 / self.S


@dataclass(frozen=True)
class AeroPolar:
    """Small-angle lift/drag maps ``C_L = a*alpha``, ``C_D = C_D0 + k_alpha*alpha**2``.

    ``k`` is the induced-drag factor of the parabolic polar in lift
    (``C_D = C_D0 + k*C_L**2``); if omitted it is derived as
    ``k_alpha / a**2``. ``cl_fn``/``cd_fn`` replace the small-angle maps with
    arbitrary functions of alpha.
    """

    a: float
    C_D0: float
    k_alpha: float
    k: Optional[float] = None
    cl_fn: Optional[Callable[[float], float]] = None
    cd_fn: Optional[Callable[[float], float]] = None

    def __post_init__(self):
        # Zero coefficients are allowed so aerodynamics can be switched off
        # in forward-model checks; solvers check their own preconditions.
        for name in ("a", "C_D0", "k_alpha"):
            if not getattr(self, name) >= 0.0:
                raise ValueError(f"{name} must be non-negative, got {getattr(self, name)!r}")
        if self.k is None:
            object.__setattr__(self, "k", self.k_alpha / self.a**2 if self.a > 0 else 0.0)

    @classmethod
    def from_induced(cls, a, C_D0, k):
        return cls(a=a, C_D0=C_D0, k_alpha=k_alpha_of(k, a), k=k)

    @property
    def is_small_angle(self):
        return self.cl_fn is None and self.cd_fn is None

    def coefficients(self, alpha):
        C_L = self.cl_fn(alpha) if self.cl_fn is not None else self.a * alpha
        C_D = self.cd_fn(alpha) if self.cd_fn is not None else self.C_D0 + self.k_alpha * alpha * alpha
        return C_L, C_D

    def slopes(self, alpha, h=1e-6):
        """``(dC_L/dalpha, dC_D/dalpha)``; custom maps use central differences."""
        if self.cl_fn is None:
            dL = self.a
        else:
            dL = (self.cl_fn(alpha + h) - self.cl_fn(alpha - h)) / (2 * h)
        if self.cd_fn is None:
            dD = 2.0 * self.k_alpha * alpha
        else:
            dD = (self.cd_fn(alpha + h) - self.cd_fn(alpha - h)) / (2 * h)
        return dL, dD


@dataclass(frozen=True)
class AeroAngles:
    alpha: float
    beta: float


@dataclass(frozen=True)
class AeroDirections:
    """Unit drag, side-force and lift directions (body frame)."""

    e_D: np.ndarray
    e_Y: np.ndarray
    e_L: np.ndarray


@dataclass(frozen=True)
class AirState:
    v_a_world: np.ndarray
    v_a_body: np.ndarray
    e_a_world: np.ndarray
    e_a_body: np.ndarray
    q: float
    regularized: bool


@dataclass(frozen=True)
class LiftingSurface:
    r_body: np.ndarray
    S: float
    polar: AeroPolar


def air_state(v_world, w_world, R, rho, eps=None):
    """Air-relative velocity, flow direction and dynamic pressure.

    Below ``eps`` m/s the norm is replaced by ``eps`` for both the flow
    direction and ``q`` and the state is marked ``regularized``.
    """
    if eps is None:
        eps = default_eps()
    if not eps > 0.0:
        raise ValueError("eps must be positive")
    R = np.asarray(R, dtype=float)
    v_a_w = vec3(v_world, "v_world") - vec3(w_world, "w_world")
    v_a_b = R.T @ v_a_w
    speed = float(np.linalg.norm(v_a_w))
    regularized = speed < eps
    speed_eps = eps if regularized else speed
    e_a_w = v_a_w / speed_eps
    return AirState(
        v_a_world=v_a_w,
        v_a_body=v_a_b,
        e_a_world=e_a_w,
        e_a_body=R.T @ e_a_w,
        q=0.5 * rho * speed_eps**2,
        regularized=regularized,
    )


def aero_directions(e_a_body, n_body=E3, tol=1e-9):
    e_a = unit(e_a_body, "e_a_body")
    n = unit(n_body, "n_body")
    proj = n - (n @ e_a) * e_a
    nrm = np.linalg.norm(proj)
    if nrm <= tol:
        raise DegenerateLiftError("flow is parallel to the wing normal; lift direction undefined")
    e_L = proj / nrm
    # (e_a, e_Y, e_L) right-handed, so e_Y points left for forward flow
    return AeroDirections(e_D=-e_a, e_Y=np.cross(e_L, e_a), e_L=e_L)


def angle_of_attack(e_a_body, c_body=E1, n_body=E3):
    """Positive when the flow hits the wing from below (nose up relative to flow)."""
    e_a = np.asarray(e_a_body, dtype=float)
    return float(math.atan2(-(e_a @ n_body), e_a @ c_body))


def sideslip(e_a_body, s_body=E2):
    """Positive for wind from starboard (span axis points left)."""
    e_a = np.asarray(e_a_body, dtype=float)
    ps = float(e_a @ s_body)
    return float(math.atan2(-ps, math.sqrt(max(0.0, 1.0 - ps * ps))))


def aero_angles(e_a_body):
    return AeroAngles(angle_of_attack(e_a_body), sideslip(e_a_body))


def flow_from_angles(alpha, beta):
    """Unit body-frame flow direction with the given angle of attack and sideslip."""
    cb = math.cos(beta)
    return np.array([cb * math.cos(alpha), -math.sin(beta), -cb * math.sin(alpha)])


def polar_eval(polar: AeroPolar, alpha):
    return polar.coefficients(alpha)


def aero_force_body(q, S, C_D, C_L, C_Y, dirs: AeroDirections):
    return q * S * (C_D * dirs.e_D + C_L * dirs.e_L + C_Y * dirs.e_Y)


def aero_moment_body(q, S, b, c_bar, C_l, C_m, C_n, D_omega, omega_body):
    coeff = q * S * np.array([C_l * b, C_m * c_bar, C_n * b])
    return coeff + np.asarray(D_omega, dtype=float) @ np.asarray(omega_body, dtype=float)


def distributed_aero_loads(surfaces, v_a_body, omega_body, rho):
    """Net force and moment about the CoM from individually modelled surfaces.

    Each surface sees the local flow ``v_a + omega x r_i``.
    """
    v_a = vec3(v_a_body, "v_a_body")
    w = vec3(omega_body, "omega_body")
    F = np.zeros(3)
    tau = np.zeros(3)
    for i, surf in enumerate(surfaces):
        r = vec3(surf.r_body, "r_body")
        v_loc = v_a + np.cross(w, r)
        speed = np.linalg.norm(v_loc)
        if speed == 0.0:
            continue
        e_a = v_loc / speed
        try:
            dirs = aero_directions(e_a)
        except DegenerateLiftError as exc:
            raise DegenerateLiftError(f"surface {i}: {exc}", surface=i) from exc
        C_L, C_D = surf.polar.coefficients(angle_of_attack(e_a))
        F_i = aero_force_body(0.5 * rho * speed**2, surf.S, C_D, C_L, 0.0, dirs)
        F += F_i
        tau += np.cross(r, F_i)
    return F, tau


def distributed_aero_moment(surfaces, v_a_body, omega_body, rho):
    return distributed_aero_loads(surfaces, v_a_body, omega_body, rho)[1]


def finite_wing_lift_slope(a0, AR, e):
    """Finite-wing lift-curve slope ``a0 / (1 + a0/(pi e AR))``."""
    _check_wing(AR, e)
    if not a0 > 0.0:
        raise ValueError("a0 must be positive")
    return a0 / (1.0 + a0 / (math.pi * e * AR))


def induced_factor(AR, e):
    """Parabolic-polar induced drag factor ``1/(pi e AR)``."""
    _check_wing(AR, e)
    return 1.0 / (math.pi * e * AR)


def k_alpha_of(k, a):
    """Quadratic drag coefficient in alpha, ``k * a**2``."""
    return k * a * a


def _check_wing(AR, e):
    if not AR > 0.0:
        raise ValueError("aspect ratio must be positive")
    if not 0.0 < e <= 1.0:
        raise ValueError("Oswald efficiency must lie in (0, 1]")


# Nominal columns of the UAV class table, stored as printed. Inertia, damping
# and stall limits are not tabulated there; the values below are rough
# placeholders of plausible magnitude for airframes of that size.
_PRESETS = {
    "ClassA": dict(
        b=2.12, S=0.80, m=3.0, V_cruise=18.0, AR=5.62, e=0.80,
        C_L_alpha=4.35, C_D0=0.035, k=0.0708, k_alpha=1.34, q=198.0,
        I_B=[0.25, 0.15, 0.38], D_omega=[-0.05, -0.08, -0.03], alpha_max_deg=15.0,
    ),
    "ClassB": dict(
        b=5.00, S=2.615, m=40.0, V_cruise=27.0, AR=9.56, e=0.90,
        C_L_alpha=5.10, C_D0=0.030, k=0.0370, k_alpha=0.962, q=447.0,
        I_B=[12.0, 8.0, 19.0], D_omega=[-2.0, -3.0, -1.5], alpha_max_deg=15.0,
    ),
}

_ALIASES = {
    "classa": "ClassA", "a": "ClassA",
    "classb": "ClassB", "b": "ClassB",
    "p5air": "Paper5", "tethered": "Paper5",
}


def _p5_airframe():
    AR, e, a, S = 5.6, 0.8, 4.3, 0.25
    k = induced_factor(AR, e)
    b = math.sqrt(AR * S)
    V = 11.7
    return dict(
        b=b, S=S, m=2.0, V_cruise=V, AR=AR, e=e,
        C_L_alpha=a, C_D0=0.035, k=k, k_alpha=k_alpha_of(k, a),
        q=0.5 * RHO_SEA_LEVEL * V * V,
        I_B=[0.02, 0.03, 0.05], D_omega=[-0.01, -0.015, -0.01], alpha_max_deg=20.0,
    )


PRESET_IDS = ("ClassA", "ClassB", "Paper5")


def canonical_preset_id(class_id):
    if class_id in PRESET_IDS:
        return class_id
    key = _ALIASES.get(str(class_id).strip().lower())
    if key is None:
        raise KeyError(f"unknown preset {class_id!r}; expected one of {PRESET_IDS}")
    return key


def preset_dict(class_id):
    """JSON-ready description of a preset."""
    cid = canonical_preset_id(class_id)
    d = dict(_p5_airframe() if cid == "Paper5" else _PRESETS[cid])
    d = {"id": cid, **d, "rho": RHO_SEA_LEVEL, "c_bar": d["S"] / d["b"]}
    return d


def params_from_dict(d):
    """Build ``(AircraftParams, AeroPolar, q)`` from a :func:`preset_dict` mapping."""
    diag = lambda x: np.diag(x) if np.ndim(x) == 1 else np.asarray(x, dtype=float)
    params = AircraftParams(
        m=float(d["m"]),
        I_B=diag(d["I_B"]),
        S=float(d["S"]),
        b=float(d["b"]),
        c_bar=float(d.get("c_bar", d["S"] / d["b"])),
        rho=float(d.get("rho", RHO_SEA_LEVEL)),
        D_omega=diag(d.get("D_omega", [0.0, 0.0, 0.0])),
        alpha_max=math.radians(float(d.get("alpha_max_deg", 15.0))),
        T_max=float(d.get("T_max", math.inf)),
    )
    polar = AeroPolar(a=float(d["C_L_alpha"]), C_D0=float(d["C_D0"]),
                      k_alpha=float(d["k_alpha"]), k=float(d["k"]))
    return params, polar, float(d["q"])


def preset(class_id):
    """Nominal ``(AircraftParams, AeroPolar, cruise q)`` for a UAV class.

    ``ClassA``/``ClassB`` hold nominal small and medium class values; ``Paper5`` is
    the 2 kg tethered-flight airframe (S=0.25, AR=5.6, e=0.8, a=4.3,
    C_D0=0.035) with ``k_alpha`` derived from the finite-wing relations.
    """
    return params_from_dict(preset_dict(class_id))
