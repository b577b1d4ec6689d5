"""Why lookahead matters: a post enclosed by leaning legs.

Printing lowest-first lays all the legs before the post's upper segment,
after which no tool orientation can reach it. Plain forward search has to
discover this by backtracking; forward checking notices the blocked
neighbour one step earlier; regression removes the blocked element first.

Run: python3 demos/trap_backtracks.py
"""
import numpy as np

from extruplan import plan
from extruplan.benchmarks import trap_suite
from extruplan.heuristics import euclidean_dist


def main() -> None:
    algorithms = ("progression", "forward_check", "regression")
    print(f"{'problem':<22}" + "".join(f"{a:>15}" for a in algorithms))
    totals = dict.fromkeys(algorithms, 0)
    for generated in trap_suite():
        problem = generated.problem
        heuristic = euclidean_dist(problem)
        row = []
        for algorithm in algorithms:
            result = plan(problem, algorithm, heuristic, np.random.default_rng(0), timeout=60)
            totals[algorithm] += result.stats.backtracks
            row.append(f"{result.stats.backtracks:>15}")
        print(f"{problem.name:<22}" + "".join(row))
    print(f"{'total backtracks':<22}" + "".join(f"{totals[a]:>15}" for a in algorithms))


if __name__ == "__main__":
    main()
