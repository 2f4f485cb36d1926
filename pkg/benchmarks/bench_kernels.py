#!/usr/bin/env python3
"""Time the numba and numpy versions of each kernel on the same inputs.

    python benchmarks/bench_kernels.py [--repeat 5] [--json out.json]
"""
import argparse
import json
import time

import numpy as np

from postrand import kernels as K
from postrand._accel import numba_available
from postrand.noniid import _PAIRS_A, _PAIRS_B, _singlet_cdf


def best_of(fn, args, repeat):
    fn(*args)  # warm-up, also triggers compilation
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def cases(n_runs, n_photons):
    rng = np.random.default_rng(1)
    u = rng.random(n_runs)
    amp = rng.standard_normal(n_photons + 1)
    UA = K._rotation_matrix_np(n_photons, 0.3)
    UB = K._rotation_matrix_np(n_photons, -0.7)
    D = K.click_weights(n_photons, 0.9)
    return {
        "rotation_matrix": (K._rotation_matrix_nb, K._rotation_matrix_np, (n_photons, 0.3)),
        "sector_joint": (K._sector_joint_nb, K._sector_joint_np, (amp, UA, UB, D, D)),
        "example1": (K._example1_nb, K._example1_np,
                     (n_runs, u, _singlet_cdf(), _PAIRS_A, _PAIRS_B)),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--runs", type=int, default=1_000_000, help="simulation length")
    ap.add_argument("--photons", type=int, default=40, help="Fock sector size")
    ap.add_argument("--json", help="write timings here")
    args = ap.parse_args()
    if not numba_available:
        raise SystemExit("numba is not installed")

    results = {}
    print(f"{'kernel':<18}{'numba [ms]':>12}{'numpy [ms]':>12}{'speedup':>10}")
    for name, (nb, np_, a) in cases(args.runs, args.photons).items():
        t_nb = best_of(nb, a, args.repeat)
        t_np = best_of(np_, a, args.repeat)
        results[name] = {"numba_s": t_nb, "numpy_s": t_np}
        print(f"{name:<18}{1e3 * t_nb:12.3f}{1e3 * t_np:12.3f}{t_np / t_nb:10.2f}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(results, fh, indent=2)


if __name__ == "__main__":
    main()
