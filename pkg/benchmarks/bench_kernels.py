"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import timeit

import numpy as np

from pdsi_extremes import _kernels


def cases(rng):
    x = rng.integers(0, 50, 1380).astype(float)
    X = rng.normal(size=(2755, 2))
    C = rng.normal(size=(10, 2))
    lab = rng.integers(0, 4, 2755).astype(np.int64)
    return {
        "mk_score n=1380": lambda m: m.mk_score(x),
        "assign_nearest 2755x10": lambda m: m.assign_nearest(X, C),
        "silhouette_samples n=2755 k=4": lambda m: m.silhouette_samples(X, lab, 4),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = _kernels.available_backends()
    print(f"backends: {', '.join(sorted(backends))}")
    rng = np.random.default_rng(0)
    for name, fn in cases(rng).items():
        times = {b: min(timeit.repeat(lambda: fn(m), number=1, repeat=args.repeat)) for b, m in sorted(backends.items())}
        row = "  ".join(f"{b} {t * 1e3:9.2f} ms" for b, t in times.items())
        if "cython" in times:
            row += f"  speedup {times['python'] / times['cython']:.1f}x"
        print(f"{name:32s} {row}")


if __name__ == "__main__":
    main()
