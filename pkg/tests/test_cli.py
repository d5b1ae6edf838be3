import json

import pytest

from cavitycool.cli import main


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_theory_prints_operating_point(capsys):
    code, out, _ = run_cli(capsys, "theory", "--set", "control.epsilon=0.1")
    assert code == 0
    line = next(l for l in out.splitlines() if l.strip().startswith("0.1 "))
    eps, beta, centroid, squeezing = (float(tok) for tok in line.split())
    assert abs(beta - 0.068) <= 1e-3
    assert 6.70 <= centroid <= 6.78
    assert squeezing < centroid


def test_theory_flags_uncontrollable_epsilon(capsys):
    code, out, _ = run_cli(capsys, "theory", "--set", "control.epsilon=0.003")
    assert code == 0
    assert "(beta>=1)" in out


def test_unknown_key_exits_2_and_names_key(capsys):
    code, _, err = run_cli(capsys, "theory", "--set", "control.epsilom=0.1")
    assert code == 2
    assert "control.epsilom" in err


def test_bad_value_exits_2(capsys):
    code, _, err = run_cli(capsys, "theory", "--set", "control.epsilon=fast")
    assert code == 2
    assert "control.epsilon" in err


def test_fig1_is_deterministic(tmp_path, capsys):
    args = ["fig1", "--seed", "7", "--ntraj", "1",
            "--set", "sim.t_max=0.3", "--set", "sim.output_stride=200"]
    code, *_ = run_cli(capsys, *args, "--out", str(tmp_path / "a"))
    assert code == 0
    code, *_ = run_cli(capsys, *args, "--out", str(tmp_path / "b"))
    assert code == 0
    first = (tmp_path / "a" / "fig1_trajectory.csv").read_text()
    second = (tmp_path / "b" / "fig1_trajectory.csv").read_text()
    assert first == second
    header = first.splitlines()[0].split(",")
    for column in ("time", "x_true", "x_est", "vx_true", "vx_est", "energy"):
        assert column in header


def test_fig1_manifest_round_trips_overrides(tmp_path, capsys):
    code, *_ = run_cli(capsys, "fig1", "--out", str(tmp_path),
                       "--set", "control.epsilon=0.17",
                       "--set", "sim.t_max=0.2")
    assert code == 0
    manifest = json.loads((tmp_path / "fig1_manifest.json").read_text())
    assert manifest["config"]["control.epsilon"] == "0.17"
    assert manifest["config"]["sim.t_max"] == "0.2"


def test_run_writes_ensemble_outputs(tmp_path, capsys):
    code, out, _ = run_cli(capsys, "run", "--out", str(tmp_path),
                           "--ntraj", "2", "--seed", "5",
                           "--set", "sim.t_max=0.2")
    assert code == 0
    assert (tmp_path / "ensemble.csv").exists()
    manifest = json.loads((tmp_path / "ensemble_manifest.json").read_text())
    assert manifest["kind"] == "run"
    assert manifest["n_trajectories"] == 2
    assert "final-window energy" in out


def test_fig2_writes_three_sources(tmp_path, capsys):
    code, out, _ = run_cli(capsys, "fig2", "--out", str(tmp_path),
                           "--ntraj", "2", "--set", "sim.t_max=0.2")
    assert code == 0
    for source in ("estimator", "photocurrent", "none"):
        assert (tmp_path / f"fig2_{source}.csv").exists()
        assert (tmp_path / f"fig2_{source}_manifest.json").exists()


def test_fig4_sweep_csv(tmp_path, capsys):
    code, out, _ = run_cli(capsys, "fig4", "--out", str(tmp_path),
                           "--ntraj", "2", "--set", "sim.t_max=0.2",
                           "--set", "sweep.epsilons=0.05,0.1")
    assert code == 0
    lines = (tmp_path / "fig4_sweep.csv").read_text().splitlines()
    assert len(lines) == 1 + 2 * 2      # header + epsilons x sources
    assert lines[0].startswith("epsilon,source,energy_final_mean")


def test_validate_passes(capsys):
    code, out, _ = run_cli(capsys, "validate")
    assert code == 0
    assert "[PASS]" in out and "[FAIL]" not in out
