"""Compiled vs numpy timings for the hot loops.

    python benchmarks/bench_kernels.py [--n 100000] [--repeat 5]

Each case is run once to warm up (and trigger numba compilation), then timed
as the best of ``--repeat`` runs. With ``IFD_DISABLE_NUMBA=1`` only the numpy
column is printed.
"""

import argparse
import time

import numpy as np

from ifd._accel import NUMBA_AVAILABLE
from ifd.aero import preset
from ifd.forward import roundtrip
from ifd.kernels import cardano_batch, trim_batch
from ifd.tether import reference_scenario


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(n):
    params, polar, _ = preset("Paper5")
    rng = np.random.default_rng(0)
    Q = rng.uniform(5.0, 40.0, n)
    f_par = rng.uniform(-2.0, 4.0, n)
    f_perp = rng.uniform(0.0, 30.0, n)
    scen = reference_scenario(16.0)
    yield ("trim_batch", n,
           lambda fast: trim_batch(f_par, f_perp, Q, polar.a, polar.C_D0, polar.k_alpha,
                                   params.alpha_max, fast=fast))
    yield ("cardano_batch", n,
           lambda fast: cardano_batch(f_perp / Q, polar.a, polar.C_D0, polar.k_alpha, fast=fast))
    steps = int(scen.period / 1e-3)
    yield ("orbit (1 lap, dt=1e-3)", steps,
           lambda fast: roundtrip(scen, params, polar, dt=1e-3, fast=fast))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=100_000, help="batch size for trim and cardano")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    print(f"numba available: {NUMBA_AVAILABLE}")
    print(f"{'case':<24}{'size':>9}{'numpy [ms]':>13}{'numba [ms]':>13}{'speedup':>10}")
    for name, size, run in cases(args.n):
        t_np = best_of(lambda: run(False), args.repeat)
        if NUMBA_AVAILABLE:
            t_nb = best_of(lambda: run(True), args.repeat)
            extra = f"{t_nb * 1e3:13.2f}{t_np / t_nb:9.1f}x"
        else:
            extra = f"{'n/a':>13}{'':>10}"
        print(f"{name:<24}{size:>9}{t_np * 1e3:13.2f}{extra}")


if __name__ == "__main__":
    main()
