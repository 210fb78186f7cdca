"""Time the compiled kernels against their numpy twins.

Usage: ``python benchmarks/bench_kernels.py [--repeat N]``.  Prints one line
per kernel with the best-of-N time for each backend and the speedup.
"""

import argparse
import timeit

import numpy as np

from ramp import _kernels_py as python_backend
from ramp import kernels
from ramp.envs import load_maze


def cases(rng):
    spec = load_maze("hard")
    s = rng.uniform(-1, 1, (2000, 2))
    a = rng.uniform(-1, 1, (2000, 2))
    p = s + 0.05 * a
    u = rng.random(2000)
    slots = rng.integers(0, 2000, 2000)
    lo, hi = np.array([-1.0, -1.0]), np.array([1.0, 1.0])
    w, b = spec.walls, spec.bounds
    return {
        "step_one x2000": lambda k: [k.step_one(x, y, ax, ay, 0.05, w, b) for (x, y), (ax, ay) in zip(s, a)],
        "step_batch 2000": lambda k: k.step_batch(s, a, 0.05, w, b),
        "segment_hits_any 2000": lambda k: k.segment_hits_any(s, p, w),
        "cell_index 2000": lambda k: k.cell_index(s, lo, hi, 50),
        "last_writer 2000": lambda k: k.last_writer(u, slots, 0.1, 2000),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    compiled = kernels.compiled_backend
    if compiled is None:
        print("compiled extension not available; build with `pip install -e . --no-build-isolation`")
        return
    print(f"{'kernel':<24}{'cython ms':>12}{'python ms':>12}{'speedup':>10}")
    for name, fn in cases(np.random.default_rng(0)).items():
        t = {}
        for label, mod in (("cython", compiled), ("python", python_backend)):
            number = 3
            t[label] = min(timeit.repeat(lambda: fn(mod), number=number, repeat=args.repeat)) / number * 1e3
        print(f"{name:<24}{t['cython']:>12.3f}{t['python']:>12.3f}{t['python'] / t['cython']:>9.1f}x")


if __name__ == "__main__":
    main()
