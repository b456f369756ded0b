"""Compare the compiled mesh kernels against the numpy fallback.

Run with ``python3 benchmarks/bench_kernels.py [--levels 4 5 6] [--repeat 5]``.
"""

import argparse
import timeit

import numpy as np

from specbound import _kernels_py
from specbound.quadrature import icosphere

try:
    from specbound._ext import _kernels as _compiled
except ImportError:
    _compiled = None


def face_lengths(level):
    v, f = icosphere(level)
    L = np.stack([np.linalg.norm(v[f[:, (j + 1) % 3]] - v[f[:, (j + 2) % 3]], axis=1)
                  for j in range(3)], axis=1)
    return np.ascontiguousarray(f, dtype=np.int64), np.ascontiguousarray(L)


def best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--levels", type=int, nargs="+", default=[4, 5, 6])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if _compiled is None:
        print("compiled extension not built; only the fallback is timed")
    print(f"{'level':>5} {'faces':>8} {'kernel':>14} {'python ms':>10} {'cython ms':>10} {'speedup':>8}")
    for level in args.levels:
        f, L = face_lengths(level)
        for name in ("triangle_areas", "cotan_assemble"):
            py = getattr(_kernels_py, name)
            call_py = (lambda: py(L)) if name == "triangle_areas" else (lambda: py(f, L))
            t_py = best(call_py, args.repeat)
            if _compiled is not None:
                cy = getattr(_compiled, name)
                call_cy = (lambda: cy(L)) if name == "triangle_areas" else (lambda: cy(f, L))
                t_cy = best(call_cy, args.repeat)
                cy_ms, ratio = f"{1e3 * t_cy:10.2f}", f"{t_py / t_cy:7.1f}x"
            else:
                cy_ms, ratio = f"{'-':>10}", f"{'-':>8}"
            print(f"{level:>5} {len(f):>8} {name:>14} {1e3 * t_py:10.2f} {cy_ms} {ratio}")


if __name__ == "__main__":
    main()
