import json

import pytest

from extruplan.benchmarks import chain, tower
from extruplan.cli import CSV_COLUMNS, EXIT_ERROR, EXIT_OK, EXIT_TIMEOUT, main, read_csv
from extruplan.frame import save_problem


@pytest.fixture
def chain_file(tmp_path):
    path = tmp_path / "chain.json"
    save_problem(chain(3).problem, path)
    return path


@pytest.fixture
def planned(tmp_path, chain_file):
    out = tmp_path / "plan.json"
    assert main(["plan", str(chain_file), "--out", str(out)]) == EXIT_OK
    return out


def test_plan_is_byte_identical_across_runs(tmp_path, chain_file, planned):
    again = tmp_path / "again.json"
    stats = tmp_path / "stats.json"
    assert main(["plan", str(chain_file), "--out", str(again), "--stats", str(stats)]) == EXIT_OK
    assert again.read_bytes() == planned.read_bytes()
    report = json.loads(stats.read_text())
    assert report["status"] == "solved" and "runtime" not in report["stats"]


def test_validate_and_reject(tmp_path, chain_file, planned):
    assert main(["validate", str(chain_file), str(planned), "--out", str(tmp_path / "v.json")]) == EXIT_OK
    assert json.loads((tmp_path / "v.json").read_text())["valid"] is True
    data = json.loads(planned.read_text())
    last = max(k for k, t in enumerate(data["trajectories"]) if t["kind"] == "extrusion")
    del data["trajectories"][last]
    broken = tmp_path / "broken.json"
    broken.write_text(json.dumps(data))
    assert main(["validate", str(chain_file), str(broken), "--out", str(tmp_path / "v2.json")]) == EXIT_ERROR


def test_check_stiffness(tmp_path, chain_file, planned):
    out = tmp_path / "r.json"
    assert main(["check-stiffness", str(chain_file), "--elements", "0,1", "--out", str(out)]) == EXIT_OK
    assert json.loads(out.read_text())["pass"] is True
    assert main(["check-stiffness", str(chain_file), "--plan", str(planned), "--out", str(out)]) == EXIT_OK
    assert main(["check-stiffness", str(chain_file), "--elements", "7"]) == EXIT_ERROR


def test_sequence(tmp_path, chain_file):
    out = tmp_path / "seq.json"
    assert main(["sequence", str(chain_file), "--out", str(out)]) == EXIT_OK
    assert [step[0] for step in json.loads(out.read_text())["sequence"]] == [0, 1, 2]


def test_export_formats(tmp_path, chain_file, planned):
    assert main(["export", str(chain_file), str(planned), "--out", str(tmp_path / "s.ply")]) == EXIT_OK
    assert (tmp_path / "s.ply").read_bytes().startswith(b"ply\n")
    assert main(["export", str(chain_file), str(planned), "--out", str(tmp_path / "s.json"),
                 "--prefix", "1"]) == EXIT_OK
    colors = [c["color"] for c in json.loads((tmp_path / "s.json").read_text())["capsules"]]
    assert colors[1] == colors[2] == [0, 0, 0]
    assert main(["export", str(chain_file), str(planned), "--out", str(tmp_path / "s.obj")]) == EXIT_ERROR


def test_generate(tmp_path):
    assert main(["generate", "--family", "tower", "--size", "2", "--witness", "--out",
                 str(tmp_path / "t.json")]) == EXIT_OK
    assert (tmp_path / "t.witness.json").exists()
    assert main(["generate", "--suite", "trap", "--out", str(tmp_path / "traps")]) == EXIT_OK
    assert len(list((tmp_path / "traps").glob("*.json"))) == 6


def test_timeout_exit_code(tmp_path, capsys):
    path = tmp_path / "tower.json"
    save_problem(tower(4, 4, 5).problem, path)
    assert main(["plan", str(path), "--timeout", "0.001"]) == EXIT_TIMEOUT
    assert json.loads(capsys.readouterr().out)["status"] == "timeout"


def test_missing_problem_file(tmp_path):
    assert main(["plan", str(tmp_path / "nope.json")]) == EXIT_ERROR


def test_bench_csv_shape_and_determinism(tmp_path):
    files = []
    for n in (2, 3):
        path = tmp_path / f"chain{n}.json"
        save_problem(chain(n).problem, path)
        files.append(str(path))
    args = ["bench", *files, "--algorithms", "progression", "regression", "--trials", "2"]
    assert main(args + ["--out", str(tmp_path / "a.csv")]) == EXIT_OK
    assert main(args + ["--out", str(tmp_path / "b.csv"), "--workers", "2"]) == EXIT_OK
    text = (tmp_path / "a.csv").read_text()
    assert text == (tmp_path / "b.csv").read_text()
    assert text.splitlines()[0] == ",".join(CSV_COLUMNS)
    rows = read_csv(text)
    assert len(rows) == 2 * 2 * 2
    assert all(r["success"] and r["runtime"] is None for r in rows)
    assert main(args + ["--out", str(tmp_path / "c.csv"), "--timing", "--trials", "1"]) == EXIT_OK
    assert all(r["runtime"] is not None for r in read_csv((tmp_path / "c.csv").read_text()))


def test_bench_stiffness_only(tmp_path):
    path = tmp_path / "chain.json"
    save_problem(chain(3).problem, path)
    out = tmp_path / "s.csv"
    assert main(["bench", str(path), "--stiffness-only", "--out", str(out)]) == EXIT_OK
    rows = read_csv(out.read_text())
    assert {r["algorithm"] for r in rows} == {"plan_stiffness", "regression"}
    assert all(r["success"] for r in rows)
    assert main(["bench", str(path), "--stiffness-only", "--algorithms", "progression"]) == EXIT_ERROR
