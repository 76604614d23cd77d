"""Time the compiled and pure-numpy Volterra marches on the same meshes.

    python3 benchmarks/bench_volterra.py [--repeat 3]

Both kernels are called directly, so one process measures both paths; the
``JOSTSCAT_DISABLE_NUMBA`` switch only decides which one the library uses.
"""
import argparse
import time

import numpy as np

from jostscat import _volterra, jost
from jostscat import potential as P
from jostscat._accel import use_numba


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - start)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if not use_numba():
        print("numba unavailable or disabled: only the numpy path can be timed")
    cases = [("gaussian(0.3, 1), 16 momenta", P.gaussian(0.3, 1.0), np.linspace(0.1, 8.0, 16)),
             ("poschl_teller(1), 64 momenta", P.poschl_teller(1), np.linspace(0.05, 8.0, 64))]
    print(f"{'case':32s} {'mesh':>8s} {'numpy s':>9s} {'numba s':>9s} {'speedup':>8s} {'max diff':>9s}")
    for label, spec, ks in cases:
        V = P.build_potential(spec)
        sw = jost._Sweeper(V, np.linspace(-5, 5, 41))
        mesh = sw.mesh(1, jost.step_for(float(ks.max())))
        margs = (ks.astype(complex), mesh.y, mesh.cnt, mesh.w, mesh.vs, mesh.out_idx)
        t_np, a = best_of(lambda: _volterra._march_many_numpy(*margs), args.repeat)
        if use_numba():
            _volterra._march_many_numba(*margs)   # compile outside the timing
            t_nb, b = best_of(lambda: _volterra._march_many_numba(*margs), args.repeat)
            diff = max(float(np.max(np.abs(u - v))) for u, v in zip(a, b))
            print(f"{label:32s} {mesh.y.size:8d} {t_np:9.3f} {t_nb:9.3f} {t_np / t_nb:8.1f} "
                  f"{diff:9.1e}")
        else:
            print(f"{label:32s} {mesh.y.size:8d} {t_np:9.3f} {'-':>9s} {'-':>8s} {'-':>9s}")


if __name__ == "__main__":
    main()
