"""Command-line driver."""

import io
import json

import numpy as np
import pytest

from tqdiff import analytic, cli, verify
from tqdiff.errors import ParameterError
from tqdiff.phys import BathParams, derive


def run(tmp_path, *argv):
    return cli.main(["--out", str(tmp_path), *argv])


def test_constants_prints_json(tmp_path, capsys):
    assert run(tmp_path, "constants", "--T", "2") == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["constants"]["D"] == 2.0
    assert (tmp_path / "constants.json").is_file()


def test_front_csv(tmp_path):
    assert run(tmp_path, "front", "--tmax", "10", "--points", "5") == 0
    header, data = cli.read_csv(tmp_path / "front.csv")
    assert header == ["t", "sigma2_quantum", "sigma2_classical"]
    assert data.shape == (5, 3)
    c = derive(BathParams())
    assert data[-1, 1] == pytest.approx(analytic.front_sigma2(analytic.FrontQuery(10.0, c)), rel=1e-12)
    assert np.all(data[:, 1] > data[:, 2])
    text = (tmp_path / "front.csv").read_text()
    assert text.startswith("# tqdiff ") and "# params:" in text


def test_missing_config_is_reported(tmp_path, capsys):
    missing = tmp_path / "nope.json"
    assert cli.main(["--config", str(missing), "constants"]) == 2
    assert str(missing) in capsys.readouterr().err


def test_bad_parameters_exit_2(tmp_path, capsys):
    assert run(tmp_path, "constants", "--m", "-1") == 2
    assert "configuration error" in capsys.readouterr().err


def test_config_sections_and_flag_override(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"params": {"T": 4.0}, "front": {"tmax": 2.0, "points": 3}}))
    assert cli.main(["--config", str(cfg), "--out", str(tmp_path), "front", "--points", "4"]) == 0
    _, data = cli.read_csv(tmp_path / "front.csv")
    assert data.shape[0] == 4 and data[-1, 0] == pytest.approx(2.0)
    assert data[-1, 2] == pytest.approx(2 * 4.0 * 2.0)


def test_output_directory_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUTPUT_ENV, str(tmp_path / "env"))
    assert cli.main(["front", "--points", "3"]) == 0
    assert (tmp_path / "env" / "front.csv").is_file()


def test_sde_runs_replay_byte_for_byte(tmp_path):
    argv = ["sde", "--omega0", "1", "--force", "meanfield_quantum", "--sigma2-0", "1", "--n-traj", "50", "--t-end", "0.5", "--seed", "4", "--record-trajectories", "3"]
    assert run(tmp_path / "a", *argv) == 0
    assert run(tmp_path / "b", *argv) == 0
    for name in ("sde.csv", "sde_trajectories.csv", "sde_final.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_sde_single_trajectory_meanfield(tmp_path, capsys):
    assert run(tmp_path, "sde", "--force", "meanfield_quantum", "--sigma2-0", "1", "--n-traj", "1") == 2
    assert "N ≥ 2" in capsys.readouterr().err


def test_pde_and_oscillator_commands(tmp_path):
    assert run(tmp_path, "pde", "--n", "160", "--t-end", "0.2", "--outputs", "3") == 0
    header, data = cli.read_csv(tmp_path / "pde.csv")
    assert header[:3] == ["t", "sigma2", "mass"] and data.shape[0] == 3
    assert np.allclose(data[:, 2], 1.0, atol=1e-10)
    assert run(tmp_path, "oscillator", "--omega0", "1", "--tmax", "2", "--points", "5") == 0
    assert (tmp_path / "oscillator_summary.json").is_file()


def test_spectrum_pipeline(tmp_path):
    assert run(tmp_path, "sde", "--omega0", "1", "--force", "effective_spring", "--n-traj", "16", "--t-end", "60", "--record-stride", "5", "--record-trajectories", "16", "--burn-in", "5") == 0
    assert run(tmp_path, "spectrum", "--omega0", "1", "--input", str(tmp_path / "sde_trajectories.csv"), "--segment-len", "256") == 0
    header, data = cli.read_csv(tmp_path / "acf.csv")
    assert header == ["tau", "C", "stderr", "C_theory"]
    assert data[0, 1] == pytest.approx(data[0, 3], rel=0.3)


def test_spectrum_rejects_short_record(tmp_path):
    assert run(tmp_path, "sde", "--n-traj", "4", "--dt", "0.1", "--t-end", "5", "--record-stride", "1", "--record-trajectories", "4") == 0
    assert run(tmp_path, "spectrum", "--input", str(tmp_path / "sde_trajectories.csv")) == 2


def test_verify_exit_codes(tmp_path, capsys):
    assert run(tmp_path, "verify", "--only", "front_law", "fixed_point") == 0
    report = json.loads((tmp_path / "verify_report.json").read_text())
    assert report["passed"] is True
    assert run(tmp_path, "verify", "--only", "asymptotes") == 1
    out = capsys.readouterr().out
    assert "FAIL" in out and "front law limits" in out


def test_empty_report_is_an_error():
    with pytest.raises(ParameterError, match="non-empty"):
        verify.emit_report(verify.VerifyReport("quick", []), None, io.StringIO())


def test_library_error_becomes_failed_row():
    def boom():
        raise ParameterError("bad input")

    c = verify._timed("boom", boom)
    assert not c.passed and "bad input" in c.details["error"]
