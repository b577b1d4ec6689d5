"""Plan a small lattice tower end to end and check the result independently.

Run: python3 demos/plan_tower.py
"""
import numpy as np

from extruplan import StiffnessChecker, make_heuristic, plan, validate_plan
from extruplan.benchmarks import tower


def main() -> None:
    problem = tower(2, 2, 2).problem
    print(f"{problem.name}: {problem.num_elements} elements, {len(problem.ground)} ground nodes")

    stiff = StiffnessChecker(problem)
    rng = np.random.default_rng(0)
    heuristic = make_heuristic(problem, "stiffplan", rng, stiff)
    result = plan(problem, "regression", heuristic, rng, stiff=stiff, timeout=60)
    print(f"status {result.status}; {result.stats.expansions} expansions, {result.stats.backtracks} backtracks")

    # the planner never certifies itself; the validator re-checks every clause
    verdict = validate_plan(problem, result.plan)
    print(f"validator: {'valid' if verdict.valid else verdict.to_json()}")
    order = [d.element for d in result.plan.sequence]
    print("extrusion order:", order)


if __name__ == "__main__":
    main()
