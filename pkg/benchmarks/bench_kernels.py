"""Compare the compiled and pure-Python quadrature kernels.

Usage: python3 benchmarks/bench_kernels.py [--n 2048] [--stride 16] [--repeat 3]

Both backends integrate the bilinear operator of a smooth grid density at a
sub-sampled set of nodes; the script reports wall time, mean evaluations per
point, speedup and the largest relative disagreement.
"""

import argparse
import time

import numpy as np

from fraclab import _backend
from fraclab.experiments import gaussian_density
from fraclab.functions import encode_1d
from fraclab.quadrature import gauss_pair


def run(kernel, xs, enc, theta, rel_tol, order):
    R = np.full(len(xs), 2.0)
    t0 = time.perf_counter()
    out = kernel.bilinear_1d(xs, R, *enc, *enc, theta - 1.0, theta, 0.5, rel_tol, 1e-12,
                             *gauss_pair(order), 40, 0.0, 10 ** 7)
    return time.perf_counter() - t0, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=2048, help="grid cells of the density")
    ap.add_argument("--stride", type=int, default=16, help="evaluate every STRIDE-th node")
    ap.add_argument("--theta", type=float, default=0.3)
    ap.add_argument("--rel-tol", type=float, default=1e-8)
    ap.add_argument("--order", type=int, default=4)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    rho = gaussian_density(args.n)
    enc = encode_1d(rho)
    xs = np.ascontiguousarray(rho.origin[0] + rho.spacing * np.arange(args.n + 1)[::args.stride])
    results = {}
    for name in ("python", "cython"):
        try:
            kern = _backend.get_kernel(name)
        except ImportError:
            print(f"{name:>7}: not available")
            continue
        best, out = min((run(kern, xs, enc, args.theta, args.rel_tol, args.order)
                         for _ in range(args.repeat)), key=lambda r: r[0])
        results[name] = out
        print(f"{name:>7}: {best:8.3f} s for {len(xs)} points, "
              f"{out[2].mean():.0f} evaluations per point")
        results[name + "_time"] = best
    if "python" in results and "cython" in results:
        a, b = results["python"][0], results["cython"][0]
        print(f"speedup: {results['python_time'] / results['cython_time']:.1f}x")
        print(f"max relative difference: {np.max(np.abs(a - b)) / np.max(np.abs(b)):.2e}")


if __name__ == "__main__":
    main()
