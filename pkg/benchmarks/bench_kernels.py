#!/usr/bin/env python3
"""Benchmark the compiled chain kernels against the pure numpy fallback.

Usage: python benchmarks/bench_kernels.py [repeats]
"""

import sys
import time

import numpy as np

from vkcuam import kernels
from vkcuam.chain import build_virtual_base
from vkcuam.dynamics import uam_robot_chain


def packed(chain):
    return (chain._kinds, chain._axes, chain._org_rot, chain._org_tr, chain._qidx,
            chain._masses, chain._coms, chain._inertias)


def bench(fn, args_list, repeats):
    t0 = time.perf_counter()
    for _ in range(repeats):
        for args in args_list:
            fn(*args)
    return (time.perf_counter() - t0) / (repeats * len(args_list))


def main():
    repeats = int(sys.argv[1]) if len(sys.argv) > 1 else 200
    rng = np.random.default_rng(0)
    arm = uam_robot_chain()
    vkc = build_virtual_base(arm)
    backends = kernels.backends()
    print(f"backends: {', '.join(backends)}  (active: {kernels.BACKEND})")

    cases = {
        "fk_all (10-DoF VKC)": [
            packed(vkc)[:5] + (rng.uniform(-1, 1, vkc.dof),) for _ in range(20)
        ],
        "rne (4-DoF arm)": [
            packed(arm) + (rng.uniform(-1, 1, 4), rng.uniform(-1, 1, 4),
                           rng.uniform(-1, 1, 4), np.array([0.0, 0.0, -9.81]))
            for _ in range(20)
        ],
        "mass_matrix (4-DoF arm)": [
            packed(arm) + (rng.uniform(-1, 1, 4),) for _ in range(20)
        ],
    }
    fns = {"fk_all": "fk_all", "rne": "rne", "mass_matrix": "mass_matrix"}
    for label, args_list in cases.items():
        name = label.split(" ")[0]
        line = [f"{label:28s}"]
        times = {}
        for bname, mod in backends.items():
            dt = bench(getattr(mod, fns[name]), args_list, repeats)
            times[bname] = dt
            line.append(f"{bname}: {dt * 1e6:9.2f} us")
        if "compiled" in times and "pure" in times:
            line.append(f"speedup: {times['pure'] / times['compiled']:6.1f}x")
        print("  ".join(line))


if __name__ == "__main__":
    main()
