"""Compare the compiled and interpreted simulation kernels.

Times repeated full-schedule evaluations of random genomes on the bundled
instance (or one given on the command line) and reports evaluations/second
for both kernels plus the speedup.

Usage: python benchmarks/compare_kernels.py [--instance PATH] [--evals N]
"""
from __future__ import annotations

import argparse
import sys
import time

import numpy as np

import crudesched.simulate  # noqa: F401  (register the submodule)
from crudesched import Evaluator, bundled_instance_path, genome_bounds, load_instance
from crudesched.engine import KERNEL_COMPILED, load_pure_kernel


def time_kernel(instance, genomes, evals: int) -> float:
    ev = Evaluator(instance)
    t0 = time.perf_counter()
    for i in range(evals):
        ev.evaluate(genomes[i % len(genomes)])
    return time.perf_counter() - t0


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--instance", default=None)
    ap.add_argument("--evals", type=int, default=20_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    inst = load_instance(args.instance or bundled_instance_path())
    rng = np.random.default_rng(args.seed)
    lo, hi = genome_bounds(inst)
    genomes = [rng.uniform(lo, hi) for _ in range(256)]

    if not KERNEL_COMPILED:
        print("compiled kernel unavailable (pure mode forced or not built); "
              "timing the interpreted kernel only")
        dt = time_kernel(inst, genomes, args.evals)
        print(f"interpreted: {args.evals / dt:,.0f} evals/s")
        return

    # the package re-exports a simulate() function, so fetch the module by name
    sim = sys.modules["crudesched.simulate"]
    dt_fast = time_kernel(inst, genomes, args.evals)
    saved = sim.core
    sim.core = load_pure_kernel()
    try:
        slow_evals = max(args.evals // 20, 100)
        dt_slow = time_kernel(inst, genomes, slow_evals)
    finally:
        sim.core = saved
    fast = args.evals / dt_fast
    slow = slow_evals / dt_slow
    print(f"compiled:    {fast:,.0f} evals/s ({args.evals} evals, {dt_fast:.3f}s)")
    print(f"interpreted: {slow:,.0f} evals/s ({slow_evals} evals, {dt_slow:.3f}s)")
    print(f"speedup:     {fast / slow:.1f}x")


if __name__ == "__main__":
    main()
