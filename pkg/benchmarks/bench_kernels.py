"""Benchmark the compiled geometry kernels against the numpy fallback.

The four kernels are the hot path of mesh adaptation: every fixed-point
iteration recomputes all cell and face geometry of the transported mesh.
This script times both implementations on representative meshes and checks
that they agree bitwise-or-nearly (the compiled core accumulates in the same
order, so results are expected to match exactly).

Run from the repository root:

    python benchmarks/bench_kernels.py [--grid 120] [--bisections 5] [--repeat 20]
"""

import argparse
import time

import numpy as np

from otmesh._kernels import _core_py

try:
    from otmesh._kernels import _core
except ImportError:
    _core = None

from otmesh.base_meshes import HexIcosahedron, SquareGrid, build_base_mesh


def best_of(repeat, fn, *args):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def compare(name, py_out, c_out):
    worst = 0.0
    for a, b in zip(py_out, c_out):
        a, b = np.asarray(a), np.asarray(b)
        scale = max(np.abs(a).max(), 1.0)
        worst = max(worst, np.abs(a - b).max() / scale)
    print(f"    max rel diff vs fallback: {worst:.2e}")
    if worst > 1e-12:
        raise SystemExit(f"{name}: implementations disagree ({worst:.2e})")


def bench(name, args_tuple, repeat):
    py_fn = getattr(_core_py, name)
    t_py = best_of(repeat, py_fn, *args_tuple)
    print(f"  {name}")
    print(f"    numpy fallback: {t_py * 1e3:8.3f} ms")
    if _core is None:
        print("    compiled core : not built")
        return
    c_fn = getattr(_core, name)
    t_c = best_of(repeat, c_fn, *args_tuple)
    print(f"    compiled core : {t_c * 1e3:8.3f} ms   ({t_py / t_c:4.1f}x)")
    compare(name, py_fn(*args_tuple), c_fn(*args_tuple))


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--grid", type=int, default=120,
                        help="planar grid size (default 120 -> 14400 cells)")
    parser.add_argument("--bisections", type=int, default=5,
                        help="sphere bisections (default 5 -> 10242 cells)")
    parser.add_argument("--repeat", type=int, default=20,
                        help="repetitions; best time is reported")
    opts = parser.parse_args()

    plane = build_base_mesh(SquareGrid(opts.grid))
    lx, ly = plane.geometry.lx, plane.geometry.ly
    print(f"plane {opts.grid}x{opts.grid} ({plane.n_cells} cells, "
          f"{plane.n_faces} faces)")
    bench("plane_cell_geometry",
          (plane.vertices, plane.cell_vertices, plane.cell_nv, lx, ly),
          opts.repeat)
    bench("plane_face_geometry",
          (plane.vertices, plane.face_vertices, plane.face_owner,
           plane.face_neighbour, plane.cell_centroid, lx, ly),
          opts.repeat)

    sphere = build_base_mesh(HexIcosahedron(opts.bisections))
    radius = sphere.geometry.radius
    print(f"sphere n={opts.bisections} ({sphere.n_cells} cells, "
          f"{sphere.n_faces} faces)")
    bench("sphere_cell_geometry",
          (sphere.vertices, sphere.cell_vertices, sphere.cell_nv, radius),
          opts.repeat)
    bench("sphere_face_geometry",
          (sphere.vertices, sphere.face_vertices, sphere.face_owner,
           sphere.face_neighbour, sphere.cell_centroid, radius),
          opts.repeat)


if __name__ == "__main__":
    main()
