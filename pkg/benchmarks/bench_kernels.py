"""Numba vs numpy timing of the hot kernels.

Both backends are called directly on identical inputs, so one process
measures both regardless of ``COMPCACHE_DISABLE_NUMBA``. Numba compile time
is excluded by a warm-up call; each figure is the best of ``--repeat`` runs.

    python benchmarks/bench_kernels.py [--repeat 5] [--scale 1.0]
"""

import argparse
import time

import numpy as np

from compcache import interference, scdp, sim
from compcache.interference import ClusterGeometry, PathlossModel
from compcache.scdp import block_rng
from compcache.sim import SimProtocol, draw_batch

GEOM = ClusterGeometry(100.0, 1e-4)
MODEL = PathlossModel(4.0)


def best_time(fn, args, repeat):
    fn(*args)  # warm-up (compiles the numba version)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(scale):
    rng = np.random.default_rng(0)
    n = int(200_000 * scale)
    thetas = np.geomspace(0.01, 30.0, 25)
    u = rng.random((n, 3))
    us = np.sort(u, axis=1)
    s = rng.uniform(0, 1e10, 4 * n)
    x = rng.uniform(1.0, 500.0, 4 * n)
    batch = draw_batch(SimProtocol(window=1000.0), GEOM, block_rng(0, 21, 0), int(4000 * scale))
    bargs = (batch.coop_r2, batch.coop_count, batch.intf_r2, batch.intf_off, batch.jt_re,
             batch.jt_im, batch.ss_gain, batch.os_gain, batch.jt_intf, batch.ss_intf,
             batch.os_intf, 4.0)
    return [
        (f"JT kernel ({n} draws x {len(thetas)} thetas)", scdp._jt_a4_loop, scdp._jt_a4_numpy,
         (u, GEOM.R, 1e-4, thetas)),
        (f"PT-SS kernel ({n} draws x {len(thetas)} thetas)", scdp._ptss_a4_loop,
         scdp._ptss_a4_numpy, (us, GEOM.R, 1e-4, thetas)),
        (f"log Laplace ({4 * n} points)", interference._log_laplace_a4_loop,
         interference._log_laplace_a4_numpy, (s, x, 1e-4)),
        (f"batch SIRs ({batch.n} layouts)", sim._batch_sirs_loop, sim._batch_sirs_numpy, bargs),
    ]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--scale", type=float, default=1.0, help="multiply problem sizes")
    args = ap.parse_args()
    print(f"{'kernel':<44} {'numba [ms]':>11} {'numpy [ms]':>11} {'speed-up':>9}")
    for name, fast, slow, fargs in cases(args.scale):
        a = fast(*fargs)
        b = slow(*fargs)
        for p, q in zip(a if isinstance(a, tuple) else (a,), b if isinstance(b, tuple) else (b,)):
            np.testing.assert_allclose(p, q, rtol=1e-10)
        tf = best_time(fast, fargs, args.repeat)
        ts = best_time(slow, fargs, args.repeat)
        print(f"{name:<44} {tf * 1e3:11.2f} {ts * 1e3:11.2f} {ts / tf:8.1f}x")


if __name__ == "__main__":
    main()
