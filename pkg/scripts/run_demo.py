#!/usr/bin/env python3
"""End-to-end demo: solve one packing and one covering instance and print
the certificates the solvers produce."""

import numpy as np

from fairpc import (
    COVER,
    SolverConfig,
    covering_closed_form_optimum,
    instance_from_dense,
    single_constraint_packing_optimum,
    solve_covering,
    solve_packing,
)


def main():
    # packing: two users sharing one link, one user twice as expensive
    a = np.array([[1.0, 2.0]])
    inst, record = instance_from_dense(a, fairness=1.0)
    config = SolverConfig(fairness=1.0, epsilon=0.1, max_iters=200_000)
    sol = solve_packing(inst, config, scaling=record)
    oracle = single_constraint_packing_optimum([1.0, 2.0], 1.0)
    print("== proportional-fair packing on a single link ==")
    print(f"allocation      : {sol.x}")
    print(f"utility         : {sol.utility:.6f}   (optimum {oracle.objective:.6f})")
    print(f"max load        : {sol.max_load:.6f}  feasible: {sol.is_feasible}")
    print(f"guarantee       : gap <= {sol.eps_f:.4f}  ({sol.eps_f_form})")
    print(f"iterations      : {sol.iterations_run}")

    # covering: two workers, one constraint demanding combined effort
    inst, record = instance_from_dense(
        np.array([[1.0], [2.0]]), mode=COVER, fairness=1.0
    )
    csol = solve_covering(
        inst, SolverConfig(fairness=1.0, epsilon=0.1, mode=COVER), scaling=record
    )
    oracle = covering_closed_form_optimum(inst, 1.0)
    print("\n== fair covering: split work between two workers ==")
    print(f"work vector     : {csol.y}")
    print(f"cost            : {csol.cost:.6f}  (pre-scale {csol.cost_prescale:.6f}, "
          f"optimum {oracle.objective:.6f})")
    print(f"min column load : {csol.min_load:.6f}  feasible: {csol.is_feasible}")
    print(f"gap certificate : {csol.gap_estimate:.6f}")
    print(f"iterations      : {csol.iterations_run}")


if __name__ == "__main__":
    main()
