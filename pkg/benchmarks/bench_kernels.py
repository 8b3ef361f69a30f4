"""Time each hot kernel under the compiled and pure-numpy backends.

Usage: ``python3 benchmarks/bench_kernels.py [--repeat N]``. Prints one
line per kernel with the best-of-N wall time for each backend, the speedup,
and the maximum absolute difference between the two outputs.
"""

import argparse
import timeit

import numpy as np

from uncertainty_lab import kernels
from uncertainty_lab.sets import sphere_directions


def cases(rng):
    pts = rng.uniform(0, 6, size=(20000, 2)) + 1j * rng.uniform(-0.5, 0.5, size=(20000, 2))
    om = rng.uniform(-3, 3, size=(81, 2))
    co = rng.standard_normal(81) + 1j * rng.standard_normal(81)
    x = rng.uniform(0, 2, size=200000) + 0j
    poly = rng.standard_normal((4, 3)) + 1j * rng.standard_normal((4, 3))
    lam = rng.uniform(-20, 20, size=4)
    arr = rng.random((1024, 256))
    w = rng.random((256, 256))
    dirs = sphere_directions(2, 2048)
    lengths = np.full(dirs.shape[0], 1.5)
    return {
        "expsum_eval": lambda b: kernels.expsum_eval(pts, om, co, backend=b),
        "poly_expsum_eval": lambda b: kernels.poly_expsum_eval(x, poly, lam, backend=b),
        "periodic_window_sum": lambda b: kernels.periodic_window_sum(arr, 37, 0, backend=b),
        "ray_density": lambda b: kernels.ray_density(w, 0.05, np.array([3.0, 3.0]), dirs, lengths, 200.0,
                                                     backend=b),
    }


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    backends = list(kernels.BACKENDS)
    print(f"backends available: {', '.join(backends)}")
    for name, fn in cases(np.random.default_rng(0)).items():
        times = {b: min(timeit.repeat(lambda: fn(b), number=1, repeat=args.repeat)) for b in backends}
        line = f"{name:22s}" + "".join(f" {b}={t * 1e3:9.2f} ms" for b, t in times.items())
        if "compiled" in times:
            diff = float(np.max(np.abs(np.asarray(fn("compiled")) - np.asarray(fn("python")))))
            line += f"  speedup={times['python'] / times['compiled']:6.2f}x  max|diff|={diff:.2e}"
        print(line)


if __name__ == "__main__":
    main()
