"""File formats: scenario JSON, trajectory and solution CSV, telemetry CSV.

Numbers are written with ``repr`` (shortest text that round-trips a double),
so re-reading a file and writing it again reproduces it byte for byte.
Angles in files carry a ``_deg`` suffix and are in degrees.
"""

import csv
import json
import math
from dataclasses import replace

import numpy as np

from .aero import AeroPolar, params_from_dict, preset_dict
from .inverse import G0, TrajectoryPoint
from .tether import TetherScenario

TRAJECTORY_COLUMNS = ("t", "px", "py", "pz", "vx", "vy", "vz", "ax", "ay", "az",
                      "fx", "fy", "fz", "taux", "tauy", "tauz", "wx", "wy", "wz")
_REQUIRED = 10  # t, p, v, a; force, torque and wind groups may be omitted
_MATRIX = tuple(f"R{i}{j}" for i in (1, 2, 3) for j in (1, 2, 3))
TELEMETRY_COLUMNS = ("t", "px", "py", "pz", *_MATRIX, "wx_b", "wy_b", "wz_b", "pos_err", "att_err")


class InputError(ValueError):
    """Malformed user input; ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


def fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_rows(path_or_file, header, rows):
    """CSV writer shared by every command; ``path_or_file`` may be an open stream."""
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    fh = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else fmt(v) for v in row])
    finally:
        if own:
            fh.close()


def read_rows(path):
    """``(header, rows)`` with rows as lists of strings; blank lines are skipped."""
    with open(path, newline="") as fh:
        lines = [(i, r) for i, r in enumerate(csv.reader(fh), start=1) if r and any(c.strip() for c in r)]
    if not lines:
        raise InputError("file is empty", 1)
    return [c.strip() for c in lines[0][1]], lines[1:]


# -- scenario ----------------------------------------------------------------

def _num(d, key, default=None):
    if key not in d:
        if default is None:
            raise InputError(f"scenario is missing {key!r}")
        return default
    try:
        val = float(d[key])
    except (TypeError, ValueError):
        raise InputError(f"{key!r} must be a number, got {d[key]!r}") from None
    if not math.isfinite(val):
        raise InputError(f"{key!r} must be finite")
    return val


def load_scenario(path_or_dict):
    """Parse a scenario into ``(TetherScenario, AircraftParams, AeroPolar)``.

    The airframe comes from ``preset`` (default ``Paper5``); ``S``, ``b``,
    ``c_bar`` and ``alpha_max_deg`` override it and ``polar`` replaces its
    lift and drag model. ``m`` overrides the preset mass. The circle is
    given by ``theta_deg`` or by its radius ``r``.
    """
    if isinstance(path_or_dict, dict):
        d = path_or_dict
    else:
        try:
            with open(path_or_dict) as fh:
                d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InputError(f"invalid JSON: {exc.msg}", exc.lineno) from None
    if not isinstance(d, dict):
        raise InputError("scenario must be a JSON object")
    try:
        base = preset_dict(d.get("preset", "Paper5"))
    except KeyError as exc:
        raise InputError(str(exc.args[0])) from None
    for key in ("S", "b", "c_bar", "alpha_max_deg", "m"):
        if key in d:
            base[key] = _num(d, key)
    try:
        params, polar, _ = params_from_dict(base)
        if "polar" in d:
            pd = d["polar"]
            if not isinstance(pd, dict):
                raise InputError("'polar' must be an object with a, C_D0, k_alpha")
            polar = AeroPolar(a=_num(pd, "a"), C_D0=_num(pd, "C_D0"), k_alpha=_num(pd, "k_alpha"))
        common = dict(v0=_num(d, "v0"), F_ext=_num(d, "F_ext", 0.0), m=params.m,
                      g=_num(d, "g", G0), rho=_num(d, "rho", params.rho),
                      psi0=math.radians(_num(d, "psi0_deg", 0.0)))
        if "r" in d and "theta_deg" not in d:
            scen = TetherScenario.from_radius(_num(d, "L"), _num(d, "r"), **common)
        else:
            scen = TetherScenario(L=_num(d, "L"), theta=math.radians(_num(d, "theta_deg")), **common)
    except InputError:
        raise
    except ValueError as exc:
        raise InputError(str(exc)) from None
    if scen.rho != params.rho:
        params = replace(params, rho=scen.rho)
    return scen, params, polar


def scenario_dict(s: TetherScenario, preset_id="Paper5"):
    return {"L": s.L, "theta_deg": math.degrees(s.theta), "v0": s.v0, "F_ext": s.F_ext, "m": s.m,
            "g": s.g, "rho": s.rho, "psi0_deg": math.degrees(s.psi0), "preset": preset_id}


# -- trajectories ------------------------------------------------------------

def read_trajectory(path):
    header, rows = read_rows(path)
    n = len(header)
    if tuple(header) != TRAJECTORY_COLUMNS[:n] or n < _REQUIRED or (n - _REQUIRED) % 3:
        raise InputError(f"header must be a prefix of {','.join(TRAJECTORY_COLUMNS)} "
                         f"ending on a complete group", 1)
    samples = []
    for line, row in rows:
        if len(row) != n:
            raise InputError(f"expected {n} fields, found {len(row)}", line)
        try:
            vals = [float(x) for x in row]
        except ValueError:
            raise InputError("non-numeric field", line) from None
        vals += [0.0] * (len(TRAJECTORY_COLUMNS) - n)
        try:
            samples.append(TrajectoryPoint(
                t=vals[0], p=vals[1:4], v=vals[4:7], a=vals[7:10],
                f_ext_world=vals[10:13], tau_ext_body=vals[13:16], w_world=vals[16:19]))
        except ValueError as exc:
            raise InputError(str(exc), line) from None
    if not samples:
        raise InputError("no samples", 2)
    times = [s.t for s in samples]
    for i in range(1, len(times)):
        if not times[i] > times[i - 1]:
            raise InputError("time must increase strictly", rows[i][0])
    return samples


def write_trajectory(path, samples):
    rows = [[pt.t, *pt.p, *pt.v, *pt.a, *pt.f_ext_world, *pt.tau_ext_body, *pt.w_world]
            for pt in samples]
    write_rows(path, TRAJECTORY_COLUMNS, rows)


def solution_header(n_u):
    return ("t", *_MATRIX, "wx_b", "wy_b", "wz_b", "T", "alpha_deg", "beta_deg",
            "Cl", "Cm", "Cn", *(f"u{i + 1}" for i in range(n_u)), "flags")


def solution_rows(solutions):
    for s in solutions:
        yield [s.t, *np.asarray(s.R).ravel(), *s.omega_body, s.T, math.degrees(s.alpha),
               math.degrees(s.beta), s.C_l, s.C_m, s.C_n, *s.u, ";".join(s.flags)]


def write_solutions(path, solutions):
    n_u = len(solutions[0].u) if solutions else 0
    write_rows(path, solution_header(n_u), solution_rows(solutions))


def write_telemetry(path, rt):
    tr = rt.trajectory
    rows = ([t, *p, *R.ravel(), *w, pe, ae]
            for t, p, R, w, pe, ae in zip(tr.t, tr.p, tr.R, tr.omega_body, rt.pos_err, rt.att_err))
    write_rows(path, TELEMETRY_COLUMNS, rows)
