"""Timing comparison of the compiled element kernels against the NumPy
fallback, plus an end-to-end nonlinear solve with each backend.

Usage:
    python benchmarks/bench_kernels.py [--sizes 33,65,129] [--repeats 7]

The kernel rows time one call on a 2D mesh of the given resolution (best of
--repeats).  The solve rows time torsion_function at p = 3, swapping the
kernel bindings in place so both backends run in the same process.
"""

import argparse
import time

import numpy as np

from plapsys import _kernels
from plapsys._kernels import numpy_backend
from plapsys.mesh import Domain, build_mesh
from plapsys.plap import torsion_function

try:
    from plapsys._kernels import _speedups
except ImportError:
    _speedups = None

KERNEL_NAMES = ("element_gradients", "diffusivity_weights",
                "scale_local_matrices", "plap_apply",
                "node_max_over_elements")


def _best_of(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _kernel_calls(mesh, impl):
    rng = np.random.default_rng(404)
    values = rng.standard_normal(mesh.n_nodes)
    values[mesh.boundary_mask] = 0.0
    values = np.ascontiguousarray(values)
    conn = np.ascontiguousarray(mesh.elements)
    gradop = np.ascontiguousarray(mesh.gradop)
    vols = np.ascontiguousarray(mesh.volumes)
    kloc = np.ascontiguousarray(mesh.local_stiffness)
    grads = np.ascontiguousarray(impl.element_gradients(values, conn, gradop))
    weights = np.ascontiguousarray(impl.diffusivity_weights(grads, 3.0, 1e-8))
    per_elem = np.ascontiguousarray(rng.uniform(0.0, 1.0, mesh.n_elems))
    return {
        "element_gradients": lambda: impl.element_gradients(values, conn,
                                                            gradop),
        "diffusivity_weights": lambda: impl.diffusivity_weights(grads, 3.0,
                                                                1e-8),
        "scale_local_matrices": lambda: impl.scale_local_matrices(kloc,
                                                                  weights),
        "plap_apply": lambda: impl.plap_apply(values, conn, gradop, vols,
                                              3.0, 1e-8, mesh.n_nodes),
        "node_max_over_elements": lambda: impl.node_max_over_elements(
            conn, per_elem, mesh.n_nodes),
    }


def _bind(impl):
    for name in KERNEL_NAMES:
        setattr(_kernels, name, getattr(impl, name))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="33,65,129",
                    help="comma-separated 2D mesh resolutions")
    ap.add_argument("--repeats", type=int, default=7)
    args = ap.parse_args()

    if _speedups is None:
        print("compiled core not built; nothing to compare "
              "(pip install -e . --no-build-isolation)")
        return 1
    sizes = [int(s) for s in args.sizes.split(",")]

    print(f"{'kernel':<24} {'res':>5} {'numpy':>12} {'compiled':>12} "
          f"{'speedup':>8}")
    for res in sizes:
        mesh = build_mesh(Domain("rectangle", (1.0, 1.0)), res)
        calls_np = _kernel_calls(mesh, numpy_backend)
        calls_cy = _kernel_calls(mesh, _speedups)
        for name in KERNEL_NAMES:
            t_np = _best_of(calls_np[name], args.repeats)
            t_cy = _best_of(calls_cy[name], args.repeats)
            print(f"{name:<24} {res:>5} {t_np * 1e6:>10.1f}us "
                  f"{t_cy * 1e6:>10.1f}us {t_np / t_cy:>7.2f}x")

    res = sizes[-1]
    mesh = build_mesh(Domain("rectangle", (1.0, 1.0)), res)
    times = {}
    original = {name: getattr(_kernels, name) for name in KERNEL_NAMES}
    try:
        for label, impl in (("numpy", numpy_backend), ("compiled", _speedups)):
            _bind(impl)
            t0 = time.perf_counter()
            torsion_function(mesh, 3.0)
            times[label] = time.perf_counter() - t0
    finally:
        for name, fn in original.items():
            setattr(_kernels, name, fn)
    print(f"\ntorsion solve p=3, res {res}: numpy {times['numpy']:.3f}s, "
          f"compiled {times['compiled']:.3f}s "
          f"({times['numpy'] / times['compiled']:.2f}x)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
