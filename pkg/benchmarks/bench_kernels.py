"""Compare the compiled and numpy Navier-Stokes element kernels.

Usage: python benchmarks/bench_kernels.py [--levels 1,2,3] [--repeat 5]
"""
import argparse
import time

import numpy as np

from evosurf import kernels
from evosurf.geometry import element_geometry
from evosurf.mesh import make_icosphere


def kernel_inputs(level, order=3):
    mesh = make_icosphere(level, order)
    geo = element_geometry(mesh)
    phi, G = geo.basis(order)
    psi, _ = geo.basis(order - 1)
    rng = np.random.default_rng(0)
    w = rng.standard_normal(geo.x.shape)
    return mesh, (phi, G, psi, geo.nu, geo.P, w, geo.dA, 1e-3, 1e-3, 10.0)


def best_time(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--levels", default="1,2,3")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    names = sorted(kernels.backends())
    print(f"default backend: {kernels.BACKEND}; available: {', '.join(names)}")
    print(f"{'level':>5} {'elements':>8} " + " ".join(f"{n + ' [ms]':>14}" for n in names)
          + f" {'speedup':>8} {'max rel diff':>12}")
    for level in (int(s) for s in args.levels.split(",")):
        mesh, inputs = kernel_inputs(level)
        times, outs = {}, {}
        for n in names:
            outs[n] = kernels.ns_element_matrices(*inputs, backend=n)
            times[n] = best_time(lambda: kernels.ns_element_matrices(*inputs, backend=n), args.repeat)
        row = f"{level:>5} {mesh.n_elements:>8} " + " ".join(f"{1e3 * times[n]:>14.2f}" for n in names)
        if "cython" in names:
            A_py, D_py = outs["python"]
            A_cy, D_cy = outs["cython"]
            diff = max(np.abs(A_py - A_cy).max() / np.abs(A_py).max(),
                       np.abs(D_py - D_cy).max() / np.abs(D_py).max())
            row += f" {times['python'] / times['cython']:>8.2f} {diff:>12.2e}"
        print(row)


if __name__ == "__main__":
    main()
