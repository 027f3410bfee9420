import json
import subprocess
import sys

import pytest

from treewalk.cli import EXIT_CAPACITY, EXIT_CONFIG, EXIT_FAIL, EXIT_OK, main

SMALL = {
    "identity-check": {"radius": 8, "n_random": 10, "hs_radius": 8},
    "mourre": {"free_probes": 3},
    "wave": {"n_max": 8, "fit_window": [3, 8], "tail_from": 4, "duality_n": [0, 3], "modes": ["triple", "tilde"]},
}


def write(tmp_path, name, cfg):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def run(tmp_path, experiment, cfg, out="out", *extra):
    return main([experiment, "--config", write(tmp_path, f"{out}.json", cfg), "--out", str(tmp_path / out), *extra])


@pytest.mark.parametrize("experiment", sorted(SMALL))
def test_small_runs_pass(tmp_path, experiment):
    assert run(tmp_path, experiment, SMALL[experiment]) == EXIT_OK
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert report["passed"] and report["experiment"] == experiment
    assert (tmp_path / "out" / "run.log").exists()


def test_wave_outputs(tmp_path):
    assert run(tmp_path, "wave", SMALL["wave"]) == EXIT_OK
    names = {p.name for p in (tmp_path / "out").iterdir()}
    assert "convergence_triple_plus_probe0.csv" in names
    assert "convergence_tilde_minus_probe2.csv" in names
    assert "channel_masses.csv" in names


def test_thread_count_does_not_change_output(tmp_path):
    cfg = SMALL["wave"]
    assert run(tmp_path, "wave", cfg, "one") == EXIT_OK
    assert run(tmp_path, "wave", cfg, "four", "--threads", "4") == EXIT_OK
    for p in (tmp_path / "one").iterdir():
        if p.name != "run.log":
            assert p.read_bytes() == (tmp_path / "four" / p.name).read_bytes(), p.name


def test_report_config_round_trips(tmp_path):
    assert run(tmp_path, "mourre", SMALL["mourre"], "first") == EXIT_OK
    first = (tmp_path / "first" / "report.json").read_text()
    resolved = json.loads(first)["config"]
    assert run(tmp_path, "mourre", resolved, "second") == EXIT_OK
    assert (tmp_path / "second" / "report.json").read_text() == first


def test_seed_flag_overrides_config(tmp_path):
    cfg = dict(SMALL["identity-check"], seed=3)
    assert run(tmp_path, "identity-check", cfg, "a", "--seed", "9") == EXIT_OK
    assert json.loads((tmp_path / "a" / "report.json").read_text())["config"]["seed"] == 9


@pytest.mark.parametrize(
    "cfg",
    [
        {"colour": "blue"},
        {"radius": -1},
        {"tolerances": {"nonsense": 1.0}},
        {"coin": {"preset": "pure", "eps": [1, 1, 0]}},
        {"coin": {"preset": "warped"}},
    ],
)
def test_config_errors(tmp_path, cfg):
    assert run(tmp_path, "identity-check", cfg) == EXIT_CONFIG


def test_unreadable_config_and_bad_arguments(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["wave", "--config", str(bad), "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert main(["nonsense", "--config", str(bad), "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    good = write(tmp_path, "g.json", {})
    assert main(["wave", "--config", good, "--out", str(tmp_path / "o"), "--threads", "0"]) == EXIT_CONFIG


def test_capacity_error(tmp_path):
    cfg = dict(SMALL["wave"], n_max=70, fit_window=[4, 70], coin={"preset": "pure"}, modes=["tilde"])
    assert run(tmp_path, "wave", cfg) == EXIT_CAPACITY


def test_failed_check_exits_one(tmp_path):
    cfg = dict(SMALL["wave"], tolerances={"slope_max": -50.0})
    assert run(tmp_path, "wave", cfg) == EXIT_FAIL
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert report["passed"] is False


def test_console_script(tmp_path):
    cfg = write(tmp_path, "c.json", SMALL["identity-check"])
    proc = subprocess.run(
        [sys.executable, "-m", "treewalk.cli", "identity-check", "--config", cfg, "--out", str(tmp_path / "o")],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert "identity-check: pass" in proc.stdout
