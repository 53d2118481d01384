"""
Compiled kernels against their numpy twins on the optomechanical sizes.

    python benchmarks/bench_kernels.py --repeats 20

Run with MOMEX_DISABLE_NUMBA unset; both paths are timed in one process.
"""
import argparse
import time

import numpy as np

from momex import _accel, kernels
from momex.lindblad import rho_generator
from momex.moments import chi_generator
from momex.optomech import OptomechParams, build_model
from momex.position import stencil_coefficients


def timeit(fn, repeats):
    fn()
    runs = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        runs.append(time.perf_counter() - t0)
    return float(np.median(runs))


def cases():
    rng = np.random.default_rng(0)
    lin = OptomechParams(n_mec=30)
    quad = lin.with_(g_quad=0.025)
    for label, p, gen in (("rho lin (12,30)", lin, lambda s: rho_generator(s, 12)),
                          ("chi_rec lin (3,24)", lin.with_(n_mec=24), lambda s: chi_generator(s, 3, 1)),
                          ("chi n<=2 quad (6,30)", quad, lambda s: chi_generator(s, 6, 3)),
                          ("chi n<=2 quad (36,30)", quad, lambda s: chi_generator(s, 36, 3))):
        g = gen(build_model(p))
        x = rng.normal(size=g.shape) + 1j * rng.normal(size=g.shape)
        out = np.empty_like(x)
        yield (label, lambda g=g, x=x, out=out: g.apply(x, out, use_numba=True),
               lambda g=g, x=x, out=out: g.apply(x, out, use_numba=False))
    f = rng.normal(size=(2000, 4)) + 1j * rng.normal(size=(2000, 4))
    c1, c2 = stencil_coefficients(1), stencil_coefficients(2)
    d1, d2 = np.empty_like(f), np.empty_like(f)
    nb, npy = kernels.IMPLEMENTATIONS["stencil"]
    yield ("stencil n_x=2000 d=2", lambda: nb(f, c1, c2, 50.0, 2500.0, d1, d2),
           lambda: npy(f, c1, c2, 50.0, 2500.0, d1, d2))


def main():
    ap = argparse.ArgumentParser(description=__doc__.strip().splitlines()[0])
    ap.add_argument("--repeats", type=int, default=10)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()
    if not _accel.HAVE_NUMBA:
        raise SystemExit("numba is not installed")
    _accel.set_num_threads(args.threads)
    print(f"{'case':24s} {'numba [ms]':>11s} {'numpy [ms]':>11s} {'speedup':>8s}")
    for label, fast, slow in cases():
        a, b = timeit(fast, args.repeats), timeit(slow, args.repeats)
        print(f"{label:24s} {1e3 * a:11.3f} {1e3 * b:11.3f} {b / a:8.1f}")


if __name__ == "__main__":
    main()
