"""Plan a pyramid and write colored geometry for an external viewer.

Writes pyramid.ply (full sequence, purple first and red last) and
pyramid_half.ply (first half colored, the rest black) to the output
directory, plus the plan itself.

Run: python3 demos/export_sequence.py [output-dir]
"""
import sys
from pathlib import Path

import numpy as np

from extruplan import make_heuristic, plan, save_plan, validate_plan
from extruplan.benchmarks import pyramid
from extruplan.export import export


def main(out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    problem = pyramid(2).problem
    rng = np.random.default_rng(1)
    result = plan(problem, "regression", make_heuristic(problem, "euclidean", rng), rng, timeout=60)
    assert validate_plan(problem, result.plan).valid
    save_plan(result.plan, out / "pyramid_plan.json")
    sequence = result.plan.sequence
    export(problem, sequence, out / "pyramid.ply")
    export(problem, sequence[: len(sequence) // 2], out / "pyramid_half.ply")
    for name in ("pyramid_plan.json", "pyramid.ply", "pyramid_half.ply"):
        print(f"wrote {out / name} ({(out / name).stat().st_size} bytes)")


if __name__ == "__main__":
    main(Path(sys.argv[1] if len(sys.argv) > 1 else "demo_output"))
