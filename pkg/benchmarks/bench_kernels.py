"""Time the compiled kernels against the numpy fallback.

Usage: ``python3 benchmarks/bench_kernels.py [--repeat N]``
"""

import argparse
import timeit

import numpy as np

from abpverify import _kernels_py

try:
    from abpverify import _kernels as _compiled
except ImportError:
    _compiled = None


def _cases():
    rng = np.random.default_rng(0)
    pts = rng.normal(size=(20_000, 3))
    vals = rng.normal(size=20_000)
    targets = rng.normal(size=(2_000, 3))
    b = rng.normal(size=(2 * 3000 + 1, 3, 3))
    s = b @ np.swapaxes(b, 1, 2) * 0.1
    return {
        "contact_argmin 20k x 2k": ("contact_argmin", (pts, vals, targets)),
        "jacobi_rk4 3000 steps k=3": ("jacobi_rk4", (s, np.eye(3), np.zeros((3, 3)), 1e-3)),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    impls = {"python": _kernels_py}
    if _compiled is not None:
        impls["cython"] = _compiled
    print(f"{'kernel':30s} " + " ".join(f"{k:>12s}" for k in impls) + "     speedup")
    for label, (name, call_args) in _cases().items():
        times = {}
        for key, mod in impls.items():
            fn = getattr(mod, name)
            times[key] = min(timeit.repeat(lambda: fn(*call_args), number=1, repeat=args.repeat))
        speed = times["python"] / times["cython"] if "cython" in times else float("nan")
        print(f"{label:30s} " + " ".join(f"{t * 1e3:10.2f}ms" for t in times.values())
              + f"  {speed:8.1f}x")


if __name__ == "__main__":
    main()
