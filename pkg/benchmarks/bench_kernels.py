"""Timing of the numba kernels against their numpy fallbacks.

Run from the repository root::

    python3 benchmarks/bench_kernels.py [--h 0.05] [--repeat 5]

Each kernel is called once before timing so numba compilation is excluded.
"""
import argparse
import timeit

import numpy as np
import scipy.sparse as sp

from ddrom import _kernels
from ddrom.fem import TaylorHoodSpace
from ddrom.mesh import generate_cavity_mesh
from ddrom.rom.operators import quad_fields


def cases(h, n_modes):
    s = generate_cavity_mesh(h).submesh(2)
    space = TaylorHoodSpace(s.vertices, s.triangles, s.boundary_edges, s.vertex_ids)
    rng = np.random.default_rng(0)
    w = rng.standard_normal((2, space.n_nodes))
    conv = (space.cell_nodes, space.phi, space.dphi, space.wts, w)
    A = sp.csr_matrix(space.K)
    x = rng.standard_normal(A.shape[0])
    mv = (A.indptr, A.indices, A.data, x)
    val, grad = quad_fields(space, rng.standard_normal((space.n_u, n_modes)))
    tri = (val, grad, val, space.wts.ravel())
    yield "convection_local", conv, space.n_u
    yield "csr_matvec", mv, A.nnz
    yield "trilinear_tensor", tri, n_modes


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--h", type=float, default=0.05)
    ap.add_argument("--modes", type=int, default=20)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if not _kernels.USE_NUMBA:
        print("numba backend disabled (DDROM_NUMBA=0 or numba missing); timing numpy only")
    print(f"{'kernel':18s} {'size':>8s} {'numpy [ms]':>11s} {'numba [ms]':>11s} {'speedup':>8s}")
    for name, args_, size in cases(args.h, args.modes):
        fns = {"numpy": getattr(_kernels, f"{name}_numpy")}
        if _kernels.USE_NUMBA:
            fns["numba"] = getattr(_kernels, f"{name}_numba")
        times = {}
        for key, fn in fns.items():
            fn(*args_)
            times[key] = min(timeit.repeat(lambda: fn(*args_), number=1, repeat=args.repeat)) * 1e3
        nb = times.get("numba", float("nan"))
        print(f"{name:18s} {size:8d} {times['numpy']:11.2f} {nb:11.2f} {times['numpy'] / nb:8.1f}")


if __name__ == "__main__":
    main()
