#!/usr/bin/env python3
"""Sweep the fairness parameter on one instance and dump convergence traces.

Writes one CSV per fairness value (consumable by any plotting tool) plus a
summary table to stdout.

Usage: python scripts/convergence_trace.py [outdir]
"""

import pathlib
import sys

import numpy as np

from fairpc import SolverConfig, instance_from_dense, solve_packing
from fairpc.cli import emit_trace


def main():
    outdir = pathlib.Path(sys.argv[1]) if len(sys.argv) > 1 else pathlib.Path("traces")
    outdir.mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng(7)
    dense = np.where(rng.random((6, 8)) < 0.4, rng.uniform(1.0, 10.0, (6, 8)), 0.0)
    dense[np.arange(6), np.arange(6)] = rng.uniform(1.0, 10.0, 6)
    for j in range(8):
        if not dense[:, j].any():
            dense[rng.integers(6), j] = rng.uniform(1.0, 10.0)
    inst, _ = instance_from_dense(dense)

    print(f"instance: {inst.m}x{inst.n}, width={inst.rho:.2f}")
    print(f"{'alpha':>6} {'eps':>5} {'iters':>7} {'utility':>12} {'max_load':>9}")
    for alpha in (0.0, 0.5, 1.0, 2.0):
        eps = 0.1 if alpha <= 1.0 else 0.05
        config = SolverConfig(
            fairness=alpha, epsilon=eps, max_iters=30_000, trace_stride=30,
            early_stop=(alpha > 1.0),
        )
        sol = solve_packing(inst, config)
        path = outdir / f"trace_alpha_{alpha:g}.csv"
        emit_trace(sol.trace, path)
        print(f"{alpha:6.2f} {eps:5.2f} {sol.iterations_run:7d} "
              f"{sol.utility:12.5f} {sol.max_load:9.5f}  -> {path}")


if __name__ == "__main__":
    main()
