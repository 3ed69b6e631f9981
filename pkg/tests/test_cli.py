import json
from pathlib import Path

import pytest

from tropma.cli import main

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def write(path, obj):
    path.write_text(json.dumps(obj))
    return path


@pytest.fixture
def green_1d(tmp_path):
    return write(tmp_path / "g.json", {"lattice": {"dim": 1, "basis": [["1"]]}, "b": [["1"]]})


@pytest.fixture
def problem_1d(tmp_path):
    return write(tmp_path / "p.json", {
        "green_data": {"lattice": {"dim": 1, "basis": [["1"]]}, "b": [["1"]]},
        "grid_n": 64, "f": "expr:0.1*cos(1)"})


def test_degree(capsys, tmp_path):
    code, out, _ = run(capsys, "degree", "--green", CONFIGS / "green_2d.json", "--out", tmp_path)
    assert code == 0 and out.strip() == "12"
    assert json.loads((tmp_path / "degree.json").read_text())["degree"] == "12"


def test_approx_writes_pieces_and_decomposition(capsys, tmp_path, green_1d):
    code, out, _ = run(capsys, "approx", "--green", green_1d, "--n", 2, "--out", tmp_path,
                       "--dump-decomposition", tmp_path / "dec.json")
    assert code == 0 and "pieces=2" in out
    pieces = json.loads((tmp_path / "pl.json").read_text())["pieces"]
    assert pieces[1]["intercept"] == "-1/8"
    dec = json.loads((tmp_path / "dec.json").read_text())
    assert [v["x"] for v in dec["vertices"]] == [["1/4"], ["3/4"]]


def test_measure_json_path(capsys, tmp_path, green_1d):
    out_path = tmp_path / "m.json"
    code, out, _ = run(capsys, "measure", "--green", green_1d, "--n", 8, "--out", out_path)
    assert code == 0 and "mass=1 " in out
    atoms = json.loads(out_path.read_text())["atoms"]
    assert [a["w"] for a in atoms] == ["1/8"] * 8
    assert (tmp_path / "m.csv").read_text().startswith("x1,w,w_exact\n")


def test_solve_outputs(capsys, tmp_path, problem_1d):
    code, _, _ = run(capsys, "solve", "--problem", problem_1d, "--out", tmp_path)
    assert code == 0
    meta = json.loads((tmp_path / "solution.json").read_text())
    assert set(meta) >= {"residual", "iters", "min_eig"} and meta["residual"] <= 1e-9
    lines = (tmp_path / "phi.csv").read_text().splitlines()
    assert lines[0] == "64" and len(lines[1].split(",")) == 64


def test_calabi_yau_config(capsys, tmp_path, problem_1d):
    cfg = write(tmp_path / "cfg.json", {"problem": "p.json", "n_list": [8, 16, 32], "out": "run"})
    code, out, _ = run(capsys, "calabi-yau", "--config", cfg)
    assert code == 0
    table = (tmp_path / "run" / "convergence.csv").read_text().splitlines()
    assert table[0] == "N,atoms,mass,weak_distance"
    dists = [float(row.split(",")[3]) for row in table[1:]]
    assert [row.split(",")[2] for row in table[1:]] == ["1"] * 3
    assert all(b < a for a, b in zip(dists, dists[1:]))
    for name in ("phi.csv", "solution.json", "measure.json", "measure.csv", "density.csv"):
        assert (tmp_path / "run" / name).exists()


def test_flags_override_config(capsys, tmp_path, problem_1d):
    cfg = write(tmp_path / "cfg.json", {"problem": "p.json", "n_list": [8, 16], "out": "run"})
    code, out, _ = run(capsys, "calabi-yau", "--config", cfg, "--n", 4)
    assert code == 0 and "N=4 " in out and "N=8 " not in out


def test_flat_density_gives_equal_atoms(capsys, tmp_path):
    p = write(tmp_path / "p.json", {"green_data": {"lattice": {"dim": 1, "basis": [["1"]]},
                                                   "b": [["1"]]}, "grid_n": 16, "f": "expr:0"})
    code, out, _ = run(capsys, "calabi-yau", "--problem", p, "--n", 8, "--out", tmp_path / "o")
    assert code == 0
    atoms = json.loads((tmp_path / "o" / "measure.json").read_text())["atoms"]
    assert [a["w"] for a in atoms] == ["1/8"] * 8
    assert float(out.split("weak_distance=")[1]) <= 0.05


def test_exit_code_2_for_ampleness(capsys, tmp_path):
    g = write(tmp_path / "g.json", {"lattice": {"dim": 1, "basis": [["1"]]}, "b": [["-1"]]})
    code, _, err = run(capsys, "degree", "--green", g)
    assert code == 2 and "not positive definite" in err
    p = write(tmp_path / "p.json", {"green_data": {"lattice": {"dim": 1, "basis": [["1"]]},
                                                   "b": [["-1"]]}, "f": "expr:0"})
    assert run(capsys, "calabi-yau", "--problem", p)[0] == 2


@pytest.mark.parametrize("argv", [
    ["degree"],
    ["degree", "--green", "missing.json"],
    ["approx", "--green", "{green}", "--n", "0"],
    ["solve", "--problem", "{problem}", "--grid-n", "4"],
    ["solve", "--problem", "{problem}", "--tol", "-1"],
])
def test_exit_code_2_for_bad_input(capsys, green_1d, problem_1d, argv):
    argv = [a.format(green=green_1d, problem=problem_1d) for a in argv]
    assert run(capsys, *argv)[0] == 2


def test_unknown_config_key(capsys, tmp_path, green_1d):
    cfg = write(tmp_path / "cfg.json", {"green": str(green_1d), "colour": "red"})
    assert run(capsys, "degree", "--config", cfg)[0] == 2


def test_exit_code_3_for_convergence(capsys, problem_1d):
    code, _, err = run(capsys, "solve", "--problem", problem_1d, "--tol", "1e-30")
    assert code == 3 and "convergence failure" in err


def test_verify_deterministic_and_injectable(capsys, tmp_path):
    assert run(capsys, "verify", "--seed", 5, "--out", tmp_path / "a")[0] == 0
    assert run(capsys, "verify", "--seed", 5, "--out", tmp_path / "b")[0] == 0
    a, b = ((tmp_path / d / "verify.json").read_bytes() for d in "ab")
    assert a == b
    code, out, _ = run(capsys, "verify", "--inject", "value_bound", "--out", tmp_path / "c")
    assert code == 1
    report = json.loads((tmp_path / "c" / "verify.json").read_text())
    assert [c["name"] for c in report["checks"] if c["status"] == "fail"] == ["plapprox.value_bound"]


def test_sample_configs_run(capsys, tmp_path):
    code, out, _ = run(capsys, "measure", "--green", CONFIGS / "green_2d.json", "--n", 3)
    assert code == 0 and "mass=12 degree=12" in out
    code, _, _ = run(capsys, "solve", "--problem", CONFIGS / "problem_2d.json", "--out", tmp_path)
    assert code == 0
