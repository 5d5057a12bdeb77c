"""Time the compiled element kernels against the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--nmax 5000] [--repeat 5]
"""
import argparse
import time

import numpy as np

from avem import _kernels_py
from avem.adapt import AdaptConfig, galerkin_loop
from avem.mesh import Mesh
from avem.problems import problem_kellogg
from avem.vem import element_arrays

try:
    from avem import _ckernels
except ImportError:
    _ckernels = None


def _graded_mesh(nmax: int) -> Mesh:
    prob = problem_kellogg()
    mesh = prob.make_mesh()
    galerkin_loop(mesh, AdaptConfig(nmax=nmax), prob.exact_u)
    return mesh


def _time(fn, args, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--nmax", type=int, default=5000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    mesh = _graded_mesh(args.nmax)
    ea = element_arrays(mesh)
    X = mesh.coords_array()[ea.nodes]
    kargs = (X, ea.ptr, ea.vpos, ea.ia, ea.ib, ea.t, ea.coefA, ea.c, ea.f, 1.0)
    print(f"{len(ea.eids)} elements, {len(ea.nodes)} boundary slots, sizes {np.bincount(ea.sizes)[3:]}")

    t_py, out_py = _time(_kernels_py.element_kernels, kargs, args.repeat)
    print(f"numpy   : {t_py * 1e3:9.2f} ms")
    if _ckernels is None:
        print("compiled: extension not built")
        return
    t_c, out_c = _time(_ckernels.element_kernels, kargs, args.repeat)
    diff = max(float(np.max(np.abs(a - b))) for a, b in zip(out_py, out_c))
    print(f"compiled: {t_c * 1e3:9.2f} ms  (speedup {t_py / t_c:.1f}x, max abs difference {diff:.1e})")


if __name__ == "__main__":
    main()
