"""Compare the numpy and numba versions of the hot kernels.

    python3 benchmarks/bench_kernels.py [--repeat R]

Reports the best-of-R wall time per call for the quadratic feature map and
the wave right-hand side, plus a full desk-scale trajectory under each
backend (numba timings exclude the first, compiling call).
"""
import argparse
import os
import timeit

import numpy as np

from streamqm import _kernels, datagen


def best(fn, repeat, number):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def trajectory_seconds(backend, repeat):
    os.environ["STREAMQM_NUMBA"] = "1" if backend == "numba" else "0"
    cfg = datagen.WaveConfig(mu=0.5)
    datagen.trajectory_matrix(datagen.WaveConfig(g=8, T=0.5))
    return best(lambda: datagen.trajectory_matrix(cfg), repeat, 1)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    rng = np.random.default_rng(0)

    rows = []
    for n, M in ((5, 1449), (15, 1449), (15, 20000)):
        Z = rng.standard_normal((n, M))
        _kernels.quad_features_matrix_numba(Z)
        rows.append((
            f"quad features n={n} M={M}",
            best(lambda: _kernels.quad_features_matrix_numpy(Z), args.repeat, 20),
            best(lambda: _kernels.quad_features_matrix_numba(Z), args.repeat, 20),
        ))
    for g in (64, 256):
        rho, v1, v2 = (rng.standard_normal((g, g)) for _ in range(3))
        _kernels.wave_rhs_numba(rho, v1, v2, 1.0)
        rows.append((
            f"wave rhs g={g}",
            best(lambda: _kernels.wave_rhs_numpy(rho, v1, v2, 1.0), args.repeat, 50),
            best(lambda: _kernels.wave_rhs_numba(rho, v1, v2, 1.0), args.repeat, 50),
        ))
    rows.append((
        "trajectory g=64 T=8",
        trajectory_seconds("numpy", args.repeat),
        trajectory_seconds("numba", args.repeat),
    ))

    print(f"{'kernel':<30}{'numpy ms':>12}{'numba ms':>12}{'speedup':>10}")
    for name, t_np, t_nb in rows:
        print(f"{name:<30}{t_np * 1e3:>12.3f}{t_nb * 1e3:>12.3f}{t_np / t_nb:>10.2f}")


if __name__ == "__main__":
    main()
