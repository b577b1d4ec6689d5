"""Sequencing under the stiffness constraint alone.

Each cantilever bay carries two arms; the tolerance admits one arm without
its diagonal tie but not two. Forward sequencing finds an order directly.
Regression with random tie-breaking removes the wrong elements first and
spends its budget backtracking; guiding it with the forward order fixes that.

Run: python3 demos/stiffness_only.py
"""
import numpy as np

from extruplan import make_heuristic, plan_stiffness
from extruplan.benchmarks import stiffness_suite
from extruplan.search import regression_stiffness_only

BUDGET = 5000


def main() -> None:
    for generated in stiffness_suite():
        problem = generated.problem
        forward = plan_stiffness(problem, max_expansions=BUDGET)
        solved_random = sum(
            regression_stiffness_only(problem, make_heuristic(problem, "random", np.random.default_rng(seed)),
                                      max_expansions=BUDGET).status == "solved"
            for seed in range(5))
        guided = regression_stiffness_only(problem, make_heuristic(problem, "stiffplan"), max_expansions=BUDGET)
        print(f"{problem.name:<16} forward {'ok' if forward else 'fail':<5} "
              f"regression-random {solved_random}/5  regression-stiffplan {guided.status} "
              f"({guided.backtracks} backtracks)")


if __name__ == "__main__":
    main()
