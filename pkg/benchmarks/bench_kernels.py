"""Compare the compiled stencil kernels against the numpy fallback.

Imports both backend modules directly (bypassing the FLUIDLAB_KERNELS
dispatch) so one process can time the pair side by side. Reports
microseconds per call and the compiled/numpy speedup, and cross-checks
that the outputs agree while it is at it.

Usage: python3 benchmarks/bench_kernels.py [--sizes 16,64,128,256] [--iters 200]
"""

import argparse
import time

import numpy as np

from fluidlab import _pykernels

try:
    from fluidlab import _cykernels
except ImportError:
    _cykernels = None


def time_call(fn, args, iters):
    fn(*args)  # warmup and JIT-free sanity call
    t0 = time.perf_counter()
    for _ in range(iters):
        fn(*args)
    return (time.perf_counter() - t0) / iters * 1e6  # us per call


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", default="16,64,128,256")
    parser.add_argument("--iters", type=int, default=200)
    parser.add_argument("--channels", type=int, default=8)
    args = parser.parse_args(argv)

    if _cykernels is None:
        print("compiled extension not built; timing the numpy backend only")

    kernels = [
        ("laplacian d=1", "laplacian", (1,)),
        ("laplacian d=4", "laplacian", (4,)),
        ("adjoint   d=1", "laplacian_adjoint", (1,)),
        ("adjoint   d=4", "laplacian_adjoint", (4,)),
        ("box_smooth3", "box_smooth3", ()),
    ]

    header = "%-16s %6s %12s %12s %9s" % ("kernel", "size", "numpy us",
                                          "cython us", "speedup")
    print(header)
    print("-" * len(header))
    rng = np.random.default_rng(0)
    for size in [int(s) for s in args.sizes.split(",")]:
        u = rng.normal(size=(args.channels, size, size))
        for label, name, extra in kernels:
            py_fn = getattr(_pykernels, name)
            t_py = time_call(py_fn, (u, *extra), args.iters)
            if _cykernels is None:
                print("%-16s %6d %12.1f %12s %9s" % (label, size, t_py, "-", "-"))
                continue
            cy_fn = getattr(_cykernels, name)
            gap = float(np.abs(py_fn(u, *extra) - cy_fn(u, *extra)).max())
            if gap > 1e-12:
                raise SystemExit("backend outputs disagree on %s size %d: %g"
                                 % (name, size, gap))
            t_cy = time_call(cy_fn, (u, *extra), args.iters)
            print("%-16s %6d %12.1f %12.1f %8.2fx"
                  % (label, size, t_py, t_cy, t_py / t_cy))


if __name__ == "__main__":
    main()
