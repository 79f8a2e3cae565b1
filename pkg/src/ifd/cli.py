"""``ifd`` command-line tool.

Exit codes: 0 success, 1 verification threshold exceeded, 2 bad input,
3 infeasible scenario.
"""

import argparse
import json
import math
import sys
from contextlib import contextmanager

import numpy as np

from . import io
from .aero import PRESET_IDS, canonical_preset_id, preset, preset_dict
from .forward import NonFiniteStateError, roundtrip
from .inverse import InfeasibleError, InverseOptions, invert_trajectory
from .tether import (
    InvertedRegimeError,
    Regime,
    bank_angle,
    bank_angle_grid,
    implicit_trim,
    reference_scenario,
    zero_bank_eta,
    zero_bank_tension,
)

EXIT_OK, EXIT_THRESHOLD, EXIT_INPUT, EXIT_INFEASIBLE = 0, 1, 2, 3


class CliError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def parse_grid(text, name="grid"):
    """``a:b:step`` (inclusive of ``b`` up to rounding) or a comma list."""
    try:
        if ":" in text:
            a, b, step = (float(x) for x in text.split(":"))
            if not step > 0.0:
                raise CliError(EXIT_INPUT, f"{name}: step must be positive")
            if b < a:
                raise CliError(EXIT_INPUT, f"{name}: end is below start")
            n = int(math.floor((b - a) / step + 1e-9)) + 1
            vals = [a + i * step for i in range(n)]
        else:
            vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise CliError(EXIT_INPUT, f"{name}: cannot parse {text!r}") from None
    if not vals or not all(math.isfinite(v) for v in vals):
        raise CliError(EXIT_INPUT, f"{name}: grid must be a nonempty set of finite numbers")
    return vals


@contextmanager
def _output(path):
    if path is None or path == "-":
        yield sys.stdout
    else:
        try:
            fh = open(path, "w", newline="")
        except OSError as exc:
            raise CliError(EXIT_INPUT, f"cannot write {path}: {exc.strerror}") from None
        with fh:
            yield fh


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (float, np.floating)):
        return float(x) if math.isfinite(x) else None
    if isinstance(x, Regime):
        return x.value
    return x


def _emit(records, header, fmt, out):
    with _output(out) as fh:
        if fmt == "json":
            json.dump(_jsonable(records), fh, indent=2)
            fh.write("\n")
        else:
            io.write_rows(fh, header, ([r[k] for k in header] for r in records))


def _scenario(args):
    if args.scenario:
        try:
            return io.load_scenario(args.scenario)
        except OSError as exc:
            raise CliError(EXIT_INPUT, f"cannot read {args.scenario}: {exc.strerror}") from None
    params, polar, _ = preset("Paper5")
    return reference_scenario(16.0), params, polar


# -- commands ----------------------------------------------------------------

def cmd_tether(args):
    scen, params, polar = _scenario(args)
    grid = parse_grid(args.grid_F_ext, "--grid-F-ext") if args.grid_F_ext else [scen.F_ext]
    records = []
    for F in grid:
        s = scen.with_tension(F)
        try:
            bank = bank_angle(s)
            trim = implicit_trim(s, polar, params)
        except (InfeasibleError, InvertedRegimeError) as exc:
            raise CliError(EXIT_INFEASIBLE, f"F_ext={F!r}: {exc}") from None
        records.append({
            "F_ext": F, "mu_deg": math.degrees(bank.mu), "alpha_deg": math.degrees(trim.alpha),
            "T": trim.T, "omega_cir": s.omega_cir, "regime": bank.regime.value,
            "F_ext_zero_bank": zero_bank_tension(s),
        })
    header = ("F_ext", "mu_deg", "alpha_deg", "T", "omega_cir", "regime", "F_ext_zero_bank")
    _emit(records, header, args.format, args.out)
    return EXIT_OK


def sweep_table(etas, thetas_deg, kappas):
    """Long-format rows in deterministic ``kappa, theta, eta`` order."""
    K, TH, E = np.meshgrid(np.asarray(kappas, float), np.radians(thetas_deg), np.asarray(etas, float),
                           indexing="ij")
    mu = bank_angle_grid(K, E, TH)
    eta_star = K / np.sin(TH) ** 2
    band = 1e-9 * np.abs(eta_star)
    regime = np.where(E < eta_star - band, Regime.INWARD.value,
                      np.where(E > eta_star + band, Regime.OUTWARD.value, Regime.ZERO_BANK.value))
    th_deg = np.broadcast_to(np.asarray(thetas_deg, float)[None, :, None], K.shape)
    return [{"eta": e, "theta_deg": t, "kappa": k, "mu_deg": math.degrees(m), "regime": r}
            for e, t, k, m, r in zip(E.ravel().tolist(), th_deg.ravel().tolist(), K.ravel().tolist(),
                                     mu.ravel().tolist(), regime.ravel().tolist())]


def locus_table(thetas_deg, kappas):
    return [{"kappa": k, "theta_deg": t, "eta_star": zero_bank_eta(k, math.radians(t))}
            for k in kappas for t in thetas_deg]


def cmd_sweep(args):
    etas = parse_grid(args.grid_eta, "--grid-eta")
    thetas = parse_grid(args.grid_theta_deg, "--grid-theta-deg")
    if any(not 0.0 < t <= 90.0 for t in thetas):
        raise CliError(EXIT_INPUT, "--grid-theta-deg values must lie in (0, 90]")
    if args.grid_kappa:
        kappas = parse_grid(args.grid_kappa, "--grid-kappa")
    else:
        kappas = [_scenario(args)[0].kappa]
    if any(not k > 0.0 for k in kappas):
        raise CliError(EXIT_INPUT, "--grid-kappa values must be positive")
    _emit(sweep_table(etas, thetas, kappas), ("eta", "theta_deg", "kappa", "mu_deg", "regime"),
          args.format, args.out)
    locus_out = args.locus_out
    if locus_out is None and args.out and args.out != "-":
        stem, dot, ext = args.out.rpartition(".")
        locus_out = f"{stem}_locus.{ext}" if dot else f"{args.out}_locus"
    if locus_out:
        header = ("theta_deg", "eta_star") if len(kappas) == 1 else ("kappa", "theta_deg", "eta_star")
        _emit(locus_table(thetas, kappas), header, args.format, locus_out)
    return EXIT_OK


def _airframe(args):
    if args.scenario:
        return _scenario(args)[1:]
    try:
        return preset(args.preset)[:2]
    except KeyError as exc:
        raise CliError(EXIT_INPUT, str(exc.args[0])) from None


def cmd_invert(args):
    if not args.trajectory:
        raise CliError(EXIT_INPUT, "--trajectory is required")
    params, polar = _airframe(args)
    try:
        samples = io.read_trajectory(args.trajectory)
    except OSError as exc:
        raise CliError(EXIT_INPUT, f"cannot read {args.trajectory}: {exc.strerror}") from None
    try:
        sols = invert_trajectory(samples, params, polar, options=InverseOptions())
    except ValueError as exc:
        raise CliError(EXIT_INPUT, str(exc)) from None
    n_u = len(sols[0].u) if sols else 0
    with _output(args.out) as fh:
        io.write_rows(fh, io.solution_header(n_u), io.solution_rows(sols))
    return EXIT_OK


def cmd_verify(args):
    scen, params, polar = _scenario(args)
    if not args.dt > 0.0 or not args.orbits > 0:
        raise CliError(EXIT_INPUT, "--dt and --orbits must be positive")
    try:
        rt = roundtrip(scen, params, polar, dt=args.dt, n_orbits=args.orbits)
        report = rt.report.as_dict()
    except InfeasibleError as exc:
        raise CliError(EXIT_INFEASIBLE, str(exc)) from None
    except NonFiniteStateError as exc:
        rt = None
        report = {"max_pos_err": math.inf, "max_att_err": math.inf, "max_speed_err": math.inf,
                  "error": str(exc)}
    report.update(dt=args.dt, orbits=args.orbits, threshold=args.threshold)
    passed = math.isfinite(report["max_pos_err"]) and report["max_pos_err"] < args.threshold
    report["passed"] = passed
    with _output(args.out) as fh:
        json.dump(_jsonable(report), fh, indent=2)
        fh.write("\n")
    if args.telemetry and rt is not None:
        io.write_telemetry(args.telemetry, rt)
    return EXIT_OK if passed else EXIT_THRESHOLD


def cmd_presets(args):
    try:
        ids = [canonical_preset_id(args.preset)] if args.preset else list(PRESET_IDS)
    except KeyError as exc:
        raise CliError(EXIT_INPUT, str(exc.args[0])) from None
    data = {cid: preset_dict(cid) for cid in ids}
    with _output(args.out) as fh:
        json.dump(_jsonable(data), fh, indent=2)
        fh.write("\n")
    return EXIT_OK


# -- entry point -------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="ifd", description="Inverse flight dynamics toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, fmt=True):
        sp.add_argument("--scenario", help="scenario JSON")
        sp.add_argument("--out", help="output path (default stdout)")
        if fmt:
            sp.add_argument("--format", choices=("csv", "json"), default="csv")

    sp = sub.add_parser("tether", help="bank, trim and thrust over a tension grid")
    common(sp)
    sp.add_argument("--grid-F-ext", dest="grid_F_ext", default="10:16:1.5", metavar="A:B:STEP")
    sp.set_defaults(func=cmd_tether)

    sp = sub.add_parser("sweep", help="bank-angle map over (eta, theta, kappa)")
    common(sp)
    sp.add_argument("--grid-eta", default="0:3:0.1")
    sp.add_argument("--grid-theta-deg", default="10:90:10")
    sp.add_argument("--grid-kappa", default=None, help="default: kappa of the scenario")
    sp.add_argument("--locus-out", default=None, help="default: <out>_locus.<ext>")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("invert", help="invert a sampled trajectory CSV")
    common(sp, fmt=False)
    sp.add_argument("--trajectory", required=False)
    sp.add_argument("--preset", default="Paper5")
    sp.set_defaults(func=cmd_invert)

    sp = sub.add_parser("verify", help="forward round trip of the tethered circle")
    common(sp, fmt=False)
    sp.add_argument("--dt", type=float, default=1e-3)
    sp.add_argument("--orbits", type=float, default=1.0)
    sp.add_argument("--threshold", type=float, default=1e-2, help="max position error [m]")
    sp.add_argument("--telemetry", default=None, help="optional telemetry CSV")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("presets", help="dump airframe presets as JSON")
    sp.add_argument("--preset", default=None)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_presets)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args)
    except CliError as exc:
        print(f"ifd: {exc}", file=sys.stderr)
        return exc.code
    except io.InputError as exc:
        print(f"ifd: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except BrokenPipeError:
        # downstream reader closed early (e.g. piped into head)
        sys.stderr.close()
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
