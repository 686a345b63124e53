import csv
import io
import json

import numpy as np
import pytest

from xxsynth.approximator import nearest_point
from xxsynth.circuit_polytope import circuit_polytope
from xxsynth.cli import HISTOGRAM_COLUMNS, SCAN_1D_COLUMNS, SCAN_2D_COLUMNS, main
from xxsynth.decomposer import TwoQubitCircuit, reconstruct
from xxsynth.optimizer import GateSet, expected_cost_exact
from xxsynth.weyl import CX, SWAP, average_infidelity, can_matrix, haar_random_unitary, monodromy_coordinate, unitary_from_json, unitary_to_json

P = np.pi


@pytest.fixture
def write_unitary(tmp_path):
    def write(u, name="u.json"):
        path = tmp_path / name
        path.write_text(json.dumps(unitary_to_json(u)))
        return str(path)

    return write


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_coord_matches_library(capsys, write_unitary):
    u = haar_random_unitary(4)
    path = write_unitary(u)
    code, out, _ = run(capsys, "coord", path)
    assert code == 0
    a = monodromy_coordinate(unitary_from_json(json.load(open(path))))
    assert out.splitlines()[0] == ", ".join(repr(float(x)) for x in a)
    cx = run(capsys, "coord", write_unitary(CX, "cx.json"))[1].splitlines()[0].split(", ")
    assert float(cx[0]) == pytest.approx(P / 4, abs=1e-15) and cx[1:] == ["0", "0"]
    code, out, _ = run(capsys, "coord", path, "--format", "json")
    assert json.loads(out)["coordinate"] == a.tolist()


def test_exit_codes(capsys, tmp_path, write_unitary, monkeypatch):
    bad_shape = tmp_path / "bad.json"
    bad_shape.write_text(json.dumps({"re": [[1, 0], [0, 1]], "im": [[0, 0], [0, 0]]}))
    garbage = tmp_path / "garbage.json"
    garbage.write_text("{not json")
    u = write_unitary(CX)
    assert run(capsys, "coord", str(bad_shape))[0] == 2
    assert run(capsys, "coord", str(garbage))[0] == 2
    assert run(capsys, "frobnicate")[0] == 2
    assert run(capsys, "coord", write_unitary(2 * np.eye(4), "scaled.json"))[0] == 3
    code, _, err = run(capsys, "synth", u, "--gates", "1", "--m", "-1")
    assert code == 3 and "--m" in err
    assert run(capsys, "synth", u, "--gates", "1.5")[0] == 3
    assert run(capsys, "synth", u, "--gates", "")[0] == 4
    assert run(capsys, "stats", "--gates", "1", "--seed", "-1")[0] == 3
    monkeypatch.setenv("XXSYNTH_THREADS", "0")
    assert run(capsys, "stats", "--gates", "1", "--n", "10")[0] == 3


def test_member(capsys):
    code, out, _ = run(capsys, "member", "--gates", "0.5,0.3333333333333333,0.3333333333333333", "--coord", "0.968,0.273,0.038")
    assert code == 0 and json.loads(out)["member"] is True
    assert json.loads(run(capsys, "member", "--gates", "1,1", "--coord", "0.785,0.785,0.785")[1])["member"] is False
    assert run(capsys, "member", "--gates", "1", "--coord", "0.1,0.2")[0] == 2


def test_synth_json_round_trip(capsys, write_unitary):
    u = haar_random_unitary(8)
    code, out, _ = run(capsys, "synth", write_unitary(u), "--gates", "1,0.5,0.3333333333333333", "--mirror", "--approx")
    assert code == 0
    obj = json.loads(out)
    assert obj["format"] == 1
    circuit = TwoQubitCircuit.from_json(obj["circuit"])
    goal = u @ SWAP if obj["mirrored"] else u
    assert average_infidelity(reconstruct(circuit), goal) == pytest.approx(obj["residual"], abs=1e-12)
    assert obj["total_cost"] == pytest.approx(obj["template_cost"] + obj["infidelity"], abs=1e-15)


def test_synth_approximation_matches_nearest_point(capsys, write_unitary):
    target = (0.05, 0.02, 0.01)
    obj = json.loads(run(capsys, "synth", write_unitary(can_matrix(target)), "--gates", "0.5", "--approx")[1])
    word = obj["word"]
    # the coordinate is too small to be worth any gate
    assert word == []
    expected = nearest_point(obj["target"], circuit_polytope(word))
    assert obj["infidelity"] == pytest.approx(expected.infidelity, abs=1e-15)
    assert obj["infidelity"] > 0 and obj["residual"] == pytest.approx(obj["infidelity"], abs=1e-12)


def test_volume(capsys):
    obj = json.loads(run(capsys, "volume", "--gates", "1,1,1", "--haar")[1])
    assert obj["volume"] == pytest.approx(1, abs=1e-10)


def test_scan_csv(capsys):
    code, out, _ = run(capsys, "scan", "--gates-template", "1.0,x", "--grid", "2")
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert tuple(rows[0]) == SCAN_1D_COLUMNS
    assert [r[0] for r in rows[1:]] == ["0.5", "1.0"]
    # x = 1 duplicates the fixed CX
    assert float(rows[2][1]) == expected_cost_exact(GateSet([P / 4]))
    assert float(rows[1][1]) == expected_cost_exact(GateSet([P / 4, P / 8]))
    code, out, _ = run(capsys, "scan", "--gates-template", "1.0,x,y", "--grid", "1")
    assert tuple(next(csv.reader(io.StringIO(out)))) == SCAN_2D_COLUMNS
    assert run(capsys, "scan", "--gates-template", "1.0,z", "--grid", "2")[0] == 2


def test_stats_reproducible_with_histogram(capsys, tmp_path):
    args = ["stats", "--gates", "1,0.5", "--n", "500", "--seed", "5", "--approx", "--mirror"]
    first = run(capsys, *args, "--histogram", str(tmp_path / "a.csv"))[1]
    second = run(capsys, *args, "--histogram", str(tmp_path / "b.csv"))[1]
    assert first == second
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    rows = list(csv.reader(open(tmp_path / "a.csv")))
    assert tuple(rows[0]) == HISTOGRAM_COLUMNS
    assert sum(int(r[2]) for r in rows[1:]) == 500
    assert sum(float(r[3]) for r in rows[1:]) == pytest.approx(1)
    assert json.loads(first)["n"] == 500
