import dataclasses
import json
import threading

import numpy as np
import pytest

from extruplan.frame import MaterialSpec
from extruplan.stiffness import (StiffnessChecker, analyze, assemble, element_self_weight, element_stiffness,
                                 local_frame, stiff)
from helpers import UNIT, column, make_problem, random_frame
from oracles import dense_displacements


def test_unit_column_axial():
    report = analyze(column(), [0])
    assert report.displacements[1, 2] == pytest.approx(-0.5, abs=1e-12)
    assert report.max_trans == pytest.approx(0.5, abs=1e-12)


def test_unit_cantilever_tip():
    problem = make_problem([(0, 0, 0), (1, 0, 0)], [(0, 1)], [0], material=UNIT, trans=10.0)
    u = analyze(problem, [0]).displacements[1]
    # uniform load w over length L: tip deflection wL^4/8EI, slope wL^3/6EI
    assert u[2] == pytest.approx(-1 / 8, abs=1e-12)
    assert u[4] == pytest.approx(1 / 6, abs=1e-12)
    assert np.allclose(u[[0, 1, 3, 5]], 0.0, atol=1e-14)


def test_stiffness_matrix_is_symmetric_psd():
    problem = random_frame(np.random.default_rng(3))
    for e in range(problem.num_elements):
        k = element_stiffness(problem, e)
        assert np.allclose(k, k.T)
        eig = np.linalg.eigvalsh(k)
        assert eig.min() > -1e-9 * eig.max()
        # six rigid-body modes
        assert np.sum(eig < 1e-9 * eig.max()) == 6


def test_self_weight_totals():
    problem = random_frame(np.random.default_rng(4))
    mat = problem.material
    for e in range(problem.num_elements):
        f = element_self_weight(problem, e)
        weight = mat.density * mat.area * mat.g * problem.element_length(e)
        assert f[2] + f[8] == pytest.approx(-weight)
        assert np.allclose(f[[0, 1, 6, 7]], 0.0)


def test_local_frame_vertical_switch():
    r = local_frame(np.zeros(3), np.array([0.0, 0.0, 1.0]))
    assert np.allclose(r @ r.T, np.eye(3))
    assert np.allclose(r[0], [0, 0, 1])
    r = local_frame(np.zeros(3), np.array([1.0, 1.0, 0.0]))
    assert np.allclose(r @ r.T, np.eye(3))
    assert np.isclose(np.linalg.det(r), 1.0)


@pytest.mark.parametrize("seed", range(10))
def test_matches_dense_oracle(seed):
    problem = random_frame(np.random.default_rng(100 + seed))
    printed = range(problem.num_elements)
    expected = dense_displacements(problem.nodes, problem.elements, problem.ground, problem.material.to_json(), printed)
    got = analyze(problem, printed).displacements
    scale = np.abs(expected).max()
    assert np.abs(got - expected).max() <= 1e-9 * scale


def test_doubling_modulus_halves_displacements():
    problem = random_frame(np.random.default_rng(5))
    stiffer = problem.replace(material=dataclasses.replace(problem.material, E=2 * problem.material.E,
                                                           G=2 * problem.material.G))
    everything = range(problem.num_elements)
    a = analyze(problem, everything).displacements
    b = analyze(stiffer, everything).displacements
    assert np.allclose(b, a / 2, rtol=1e-9, atol=1e-9 * np.abs(a).max())


def test_mirror_symmetry():
    problem = random_frame(np.random.default_rng(6))
    mirrored_nodes = problem.nodes * np.array([-1.0, 1.0, 1.0])
    circular = MaterialSpec.circular(0.002, E=3.5e9, G=1.3e9, density=1240.0)
    original = problem.replace(material=circular)
    mirrored = original.replace(nodes=mirrored_nodes)
    everything = range(problem.num_elements)
    a = analyze(original, everything).displacements
    b = analyze(mirrored, everything).displacements
    # translations are vectors, rotations pseudovectors
    flip = np.array([-1.0, 1.0, 1.0, 1.0, -1.0, -1.0])
    assert np.abs(b - a * flip).max() <= 1e-9 * np.abs(a).max()


def test_ungrounded_subset_fails():
    problem = make_problem([(0, 0, 0), (0, 0, 0.05), (0.05, 0, 0.05)], [(0, 1), (1, 2)], [0])
    report = analyze(problem, [1])
    assert not report.passed and report.diagnosis == "not_grounded"
    assert not stiff(problem, [1])
    assert stiff(problem, [])


def test_tolerance_decides():
    problem = make_problem([(0, 0, 0), (0.05, 0, 0)], [(0, 1)], [0], trans=1.0)
    deflection = analyze(problem, [0]).max_trans
    tight = problem.replace(tolerances=dataclasses.replace(problem.tolerances, trans=deflection * 0.99))
    loose = problem.replace(tolerances=dataclasses.replace(problem.tolerances, trans=deflection * 1.01))
    assert not stiff(tight, [0]) and stiff(loose, [0])
    with_rot = loose.replace(tolerances=dataclasses.replace(loose.tolerances, rot=1e-12))
    assert not stiff(with_rot, [0])


def test_only_touched_nodes_are_free():
    problem = make_problem([(0, 0, 0), (0, 0, 0.05), (0, 0, 0.1)], [(0, 1), (1, 2)], [0])
    system = assemble(problem, [0])
    assert sorted(system.free) == list(range(6, 12))


def test_report_json():
    report = analyze(column(2), [0, 1])
    data = json.loads(json.dumps(report.to_json()))
    assert set(data) >= {"pass", "max_trans", "max_rot", "worst_node", "displacements"}
    assert data["worst_node"] == 2 and len(data["displacements"]) == 3
    assert all(len(row) == 6 for row in data["displacements"])


def test_checker_memoizes_and_is_thread_safe():
    problem = random_frame(np.random.default_rng(7), max_elements=12)
    checker = StiffnessChecker(problem)
    subsets = [frozenset(range(k)) for k in range(problem.num_elements + 1)]
    results = {}

    def work():
        for s in subsets:
            results.setdefault(s, set()).add(checker(s))

    threads = [threading.Thread(target=work) for _ in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert all(len(v) == 1 for v in results.values())
    assert checker.checks + checker.hits == 4 * len(subsets)
    before = checker.checks
    checker(subsets[-1])
    assert checker.checks == before
