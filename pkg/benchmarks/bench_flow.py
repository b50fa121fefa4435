"""Compare the compiled and pure-numpy flow kernels on 112x112 patch pairs.

    python benchmarks/bench_flow.py [--repeat 20] [--size 112]

Prints per-kernel and end-to-end timings for both backends and the maximum
difference between their flow fields.
"""

import argparse
import importlib
import time

import numpy as np

from maneuver_net.flow import FlowParams, farneback_flow
from maneuver_net.flow import _kernels_py


def _load_cython():
    try:
        return importlib.import_module("maneuver_net.flow._kernels")
    except ImportError:
        return None


def _time(fn, repeat):
    fn()  # warm-up
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--size", type=int, default=112)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    base = rng.uniform(0, 255, (args.size + 8, args.size + 8))
    prev = base[4:-4, 4:-4].copy()
    nxt = base[3:-5, 5:-3].copy()  # shifted by (+1, -1)
    params = FlowParams()
    backends = {"python": _kernels_py}
    cy = _load_cython()
    if cy is not None:
        backends["cython"] = cy
    else:
        print("compiled kernels not built; timing the numpy fallback only")

    flow0 = np.zeros((args.size, args.size, 2))
    results = {}
    print(f"{'backend':<8}{'poly_exp':>12}{'update_mat':>12}{'blur_solve':>12}{'full flow':>12}")
    for name, k in backends.items():
        R0 = k.poly_exp(prev, params.poly_n, params.poly_sigma)
        R1 = k.poly_exp(nxt, params.poly_n, params.poly_sigma)
        M = k.update_matrices(R0, R1, flow0)
        t_poly = _time(lambda: k.poly_exp(prev, params.poly_n, params.poly_sigma), args.repeat)
        t_mat = _time(lambda: k.update_matrices(R0, R1, flow0), args.repeat)
        t_blur = _time(lambda: k.update_flow_blur(M, params.winsize), args.repeat)
        t_full = _time(lambda: farneback_flow(prev, nxt, params, k), args.repeat)
        results[name] = farneback_flow(prev, nxt, params, k)
        print(f"{name:<8}" + "".join(f"{t * 1e3:>10.2f}ms" for t in (t_poly, t_mat, t_blur, t_full)))
    if len(results) == 2:
        diff = np.abs(results["python"] - results["cython"]).max()
        print(f"max |python - cython| = {diff:.3g} px")


if __name__ == "__main__":
    main()
