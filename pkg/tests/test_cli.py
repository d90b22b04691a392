import json
import subprocess
import sys

import pytest

from lazywalk.cli import main, parse_range


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def payload(text):
    data = json.loads(text)
    data.pop("manifest")
    return data


# [PAPER] C5 gathering from (0,2) at p = 0.2: 16 / 2.56
def test_solve_gathering_state(capsys):
    code, out, _ = run(capsys, "solve", "--graph", "cycle:5", "--agents", "3", "--goal", "gather",
                       "--p", "0.2", "--start", "state:0,2")
    assert code == 0
    assert json.loads(out)["report"]["start_time"] == pytest.approx(6.25, abs=1e-9)


def test_solve_non_absorbing_exit_2(capsys):
    code, out, err = run(capsys, "solve", "--graph", "cycle:4", "--agents", "2", "--goal", "distance:2",
                         "--p", "0", "--start", "adjacent")
    assert code == 2 and out == ""
    assert "no absorbing state" in err


# [DERIVED] 6 / (1 + 2p - 3p^2) at p = 1/3
def test_solve_c3_dispersion(capsys):
    code, out, _ = run(capsys, "solve", "--graph", "cycle:3", "--agents", "3", "--goal", "distance:1",
                       "--p", "0.3333333", "--start", "gathered")
    assert json.loads(out)["report"]["start_time"] == pytest.approx(4.5, abs=1e-6)


def test_solve_infeasible_exit_2(capsys):
    code, _, err = run(capsys, "solve", "--graph", "cycle:5", "--agents", "3", "--goal", "distance:2", "--p", "0")
    assert code == 2 and "no placement" in err


def test_solve_population_flag(capsys):
    code, out, _ = run(capsys, "solve", "--graph", "cycle:5", "--agents", "2", "--goal", "distance:2",
                       "--pk", "0.3722813,0", "--start", "adjacent")
    assert json.loads(out)["report"]["start_time"] == pytest.approx(2.59307, abs=1e-5)


def test_solve_capture(capsys):
    code, out, _ = run(capsys, "solve", "--graph", "cycle:3", "--searchers", "2", "--goal", "capture",
                       "--p", "0.3333333333333333", "--hider-p", "0.7", "--start", "random")
    assert json.loads(out)["report"]["start_time"] == pytest.approx(0.8, abs=1e-9)


# [PAPER] C5 gathering random start: 0.283, 6.794
def test_optimize_table_row(capsys):
    code, out, _ = run(capsys, "optimize", "--graph", "cycle:5", "--agents", "3", "--goal", "gather",
                       "--start", "random")
    res = json.loads(out)["result"]
    assert res["argmin"] == pytest.approx(0.283, abs=1e-3)
    assert res["value"] == pytest.approx(6.794, abs=1e-3)


def test_saddle_reports_certificate(capsys):
    code, out, _ = run(capsys, "saddle", "--graph", "cycle:3", "--searchers", "2")
    res = json.loads(out)["result"]
    assert code == 0 and res["certified"]
    assert res["value"] == pytest.approx(0.8, abs=1e-9)


def test_game_subcommands(capsys):
    _, out, _ = run(capsys, "game", "capture-prob", "--s", "0", "--h", "0.5097")
    assert json.loads(out)["W"] == pytest.approx(0.377425)
    _, out, _ = run(capsys, "game", "disperse", "--q", "1", "--p", "0.3")
    assert json.loads(out)["deviator"] == pytest.approx(0.7 ** 2 / (1 - 0.09))
    _, out, _ = run(capsys, "game", "competitive", "--r", "0.2", "--s", "0.2", "--h", "0.5")
    o = json.loads(out)["outcome"]
    assert o["a3_searcher2_wins"] == pytest.approx(o["a4_searcher1_wins"])


def test_sweep_grid_corner(capsys):
    code, out, err = run(capsys, "sweep", "--graph", "grid:4", "--agents", "3", "--goal", "distance:2",
                         "--start", "corner", "--p", "0:0.8:0.2", "--trials", "5000", "--seed", "42")
    lines = out.strip().splitlines()
    assert code == 0 and lines[0] == "p,mean,stderr,trials,censored"
    assert len(lines) == 6
    assert json.loads(err.splitlines()[0])["manifest"]["seed"] == 42


def test_sweep_requires_seed(capsys):
    code, _, err = run(capsys, "sweep", "--graph", "grid:3", "--agents", "3", "--goal", "distance:2",
                       "--p", "0:0.4:0.2")
    assert code == 1 and "--seed" in err


def test_simulate_out_file_and_manifest(tmp_path, capsys):
    out = tmp_path / "sim.csv"
    code, _, _ = run(capsys, "simulate", "--graph", "line:6", "--agents", "3", "--goal", "distance:2",
                     "--start", "left", "--p", "0.2", "--trials", "300", "--seed", "1", "--out", str(out))
    assert code == 0 and out.read_text().startswith("p,mean")
    manifest = json.loads((tmp_path / "sim.csv.manifest.json").read_text())
    assert manifest["config"]["trials"] == 300 and manifest["version"]


def test_json_config_replay_is_identical(tmp_path, capsys):
    argv = ["solve", "--graph", "cycle:5", "--agents", "3", "--goal", "distance:1", "--p", "0.4",
            "--start", "state:0,0,1"]
    _, first, _ = run(capsys, *argv)
    path = tmp_path / "run.json"
    path.write_text(first)
    _, second, _ = run(capsys, "solve", "--config", str(path))
    assert json.dumps(payload(first)) == json.dumps(payload(second))


def test_csv_config_replay_is_identical(tmp_path, capsys):
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    run(capsys, "sweep", "--graph", "cycle:6", "--agents", "2", "--goal", "distance:2", "--p", "0,0.5",
        "--trials", "400", "--seed", "3", "--out", str(out1))
    run(capsys, "sweep", "--config", str(out1) + ".manifest.json", "--out", str(out2))
    assert out1.read_bytes() == out2.read_bytes()


def test_config_from_other_command_rejected(tmp_path, capsys):
    _, first, _ = run(capsys, "saddle")
    path = tmp_path / "s.json"
    path.write_text(first)
    code, _, _ = run(capsys, "solve", "--config", str(path))
    assert code == 1


@pytest.mark.parametrize(
    "argv",
    [
        ["solve", "--graph", "cycle:5", "--agents", "2", "--goal", "distance:2"],
        ["solve", "--graph", "torus:5", "--agents", "2", "--p", "0.1"],
        ["solve", "--graph", "cycle:5", "--agents", "2", "--p", "1.5"],
        ["solve", "--graph", "cycle:5", "--agents", "2", "--p", "abc"],
        ["solve", "--graph", "cycle:5", "--agents", "2", "--goal", "hover", "--p", "0.1"],
        ["solve", "--graph", "cycle:5", "--agents", "2", "--p", "0.1", "--start", "state:0,9"],
        ["frobnicate"],
        [],
    ],
)
def test_usage_errors_exit_1(argv, capsys):
    assert main(argv) == 1 or pytest.fail(str(argv))


def test_parse_range():
    assert parse_range("0:0.8:0.2") == [0.0, 0.2, 0.4, 0.6, 0.8]
    assert parse_range("0.1,0.3") == [0.1, 0.3]


def test_help_documents_flags():
    proc = subprocess.run([sys.executable, "-m", "lazywalk.cli", "sweep", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    for flag in ("--graph", "--seed", "--trials", "--out", "--start"):
        assert flag in proc.stdout


def test_console_script_exit_code():
    proc = subprocess.run(["lazywalk", "solve", "--graph", "cycle:4", "--agents", "2", "--goal", "distance:2",
                           "--p", "0", "--start", "adjacent"], capture_output=True, text=True)
    assert proc.returncode == 2
