import json

import numpy as np
import pytest

from extruplan.frame import (DirectedElement, ProblemError, grounded_elements, is_grounded, is_valid_sequence,
                             load_problem, orient_sequence, printable_elements, printed_nodes, save_problem)
from helpers import make_problem


def _minimal(**overrides):
    data = {
        "nodes": [[0, 0, 0], [0, 0, 0.05]],
        "elements": [[0, 1]],
        "ground": [0],
        "material": {"E": 3.5e9, "G": 1.3e9, "density": 1240, "area": 1.2e-5, "Iy": 1.2e-11,
                     "Iz": 1.2e-11, "J": 2.4e-11, "g": 9.81},
        "radius": 0.002,
        "q0": {"position": [0, 0, 0.2], "orientation": [0, 1, 0, 0]},
        "tolerances": {"trans": 1e-3, "rot": None, "eps": 1e-6, "retraction": 0.01},
    }
    data.update(overrides)
    return data


def _load(tmp_path, data):
    path = tmp_path / "p.json"
    path.write_text(json.dumps(data))
    return load_problem(path)


def test_minimal_file_loads(tmp_path):
    problem = _load(tmp_path, _minimal())
    assert problem.num_elements == 1
    assert problem.ground == {0}
    assert np.isinf(problem.tolerances.rot)


def test_unknown_node_rejected(tmp_path):
    data = _minimal(nodes=[[0, 0, 0], [0, 0, 0.05], [0, 0.05, 0]], elements=[[0, 99]])
    with pytest.raises(ProblemError, match="unknown node"):
        _load(tmp_path, data)


def test_floating_island_rejected(tmp_path):
    data = _minimal(nodes=[[0, 0, 0], [0, 0, 0.05], [1, 0, 0.1], [1, 0, 0.2]], elements=[[0, 1], [2, 3]])
    with pytest.raises(ProblemError, match="not grounded"):
        _load(tmp_path, data)


@pytest.mark.parametrize("change, message", [
    ({"elements": [[0, 0]]}, "identical"),
    ({"elements": [[0, 1], [1, 0]]}, "duplicate"),
    ({"nodes": [[0, 0, 0], [0, 0, 0]]}, "length"),
    ({"ground": []}, "ground"),
    ({"radius": 0}, "radius"),
])
def test_invariants(tmp_path, change, message):
    with pytest.raises(ProblemError, match=message):
        _load(tmp_path, _minimal(**change))


def test_missing_key_and_bad_json(tmp_path):
    data = _minimal()
    del data["tolerances"]
    with pytest.raises(ProblemError, match="tolerances"):
        _load(tmp_path, data)
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(ProblemError):
        load_problem(path)


def test_round_trip(tmp_path):
    problem = _load(tmp_path, _minimal())
    save_problem(problem, tmp_path / "again.json")
    again = load_problem(tmp_path / "again.json")
    assert again.to_json() == problem.to_json()


def _tee():
    # 0 ground; 0-1 vertical; 1-2 and 1-3 horizontal arms; 4 ground with 4-2 strut
    nodes = [(0, 0, 0), (0, 0, 0.05), (0.05, 0, 0.05), (-0.05, 0, 0.05), (0.05, 0, 0)]
    return make_problem(nodes, [(0, 1), (1, 2), (1, 3), (4, 2)], [0, 4])


def test_printed_and_printable():
    problem = _tee()
    assert printed_nodes(problem, []) == {0, 4}
    assert printable_elements(problem, []) == {0, 3}
    assert printable_elements(problem, [0]) == {1, 2, 3}
    assert grounded_elements(problem, [1, 2]) == set()
    assert is_grounded(problem, [0, 2]) and not is_grounded(problem, [2])


def test_sequence_checks():
    problem = _tee()
    good = [DirectedElement(0, 0, 1), DirectedElement(1, 1, 2), DirectedElement(2, 1, 3), DirectedElement(3, 4, 2)]
    assert is_valid_sequence(problem, good, stiff=lambda p: True)
    cases = {
        "connectivity": [DirectedElement(1, 1, 2)] + good,
        "duplicate": good[:1] + good[:1],
        "direction": [DirectedElement(0, 0, 2)],
        "unknown_element": [DirectedElement(9, 0, 1)],
        "omission": good[:3],
    }
    for reason, sequence in cases.items():
        assert is_valid_sequence(problem, sequence, stiff=lambda p: True).reason == reason
    check = is_valid_sequence(problem, good, stiff=lambda p: len(p) < 2)
    assert check.reason == "stiffness" and check.index == 1


def test_orient_sequence_starts_from_printed_nodes():
    problem = _tee()
    directed = orient_sequence(problem, [3, 1, 0, 2])
    assert directed[0] == DirectedElement(3, 4, 2)
    assert directed[1] == DirectedElement(1, 2, 1)
    assert is_valid_sequence(problem, directed, stiff=lambda p: True)
