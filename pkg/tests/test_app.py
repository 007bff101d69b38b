import json

import pytest

from app import main
from export.artifacts import CONFIG_FILE, DIAGNOSTICS_FILE, PFD_FILE, ROC_FILE

TINY = """\
groups = 2
sensors_per_group = 2
antennas = 4
scaling_kinds = ["haar"]
detectors = ["zf"]
snr_grid_db = [10.0]
trials_per_point = 3
threshold_points = 5
"""


@pytest.fixture(autouse=True)
def _isolated_env(monkeypatch, tmp_path):
    monkeypatch.setenv("WPDM_CACHE_PATH", str(tmp_path / "cache.db"))
    monkeypatch.setenv("WPDM_OUTPUT_DIR", str(tmp_path / "results"))
    monkeypatch.delenv("WPDM_WORKERS", raising=False)
    monkeypatch.delenv("WPDM_LOG_LEVEL", raising=False)


def test_validate_filters_for_default_design(capsys):
    assert main(["validate-filters", "--Q", "14", "--K", "2", "--B", "1.4142135623730951", "--Z", "4"]) == 0
    assert "K0=2" in capsys.readouterr().out


def test_validate_filters_rejects_low_regularity(capsys):
    assert main(["validate-filters", "--Q", "14", "--K", "1", "--B", "4", "--Z", "4"]) == 1
    assert "K0" in capsys.readouterr().err


def test_validate_filters_smallest_design(tmp_path):
    out = tmp_path / "filters"
    assert main(["validate-filters", "--Q", "2", "--K", "1", "--B", "1", "--Z", "2", "--out", str(out)]) == 0
    report = json.loads((out / DIAGNOSTICS_FILE).read_text())
    assert report["filters"]["within_tolerance"] is True


def test_run_writes_all_artifacts(tmp_path):
    config = tmp_path / "tiny.toml"
    config.write_text(TINY)
    out = tmp_path / "out"
    assert main(["run", "--config", str(config), "--out", str(out), "--no-cache"]) == 0
    for name in (ROC_FILE, PFD_FILE, DIAGNOSTICS_FILE, CONFIG_FILE):
        assert (out / name).exists()
    diagnostics = json.loads((out / DIAGNOSTICS_FILE).read_text())
    assert diagnostics["trials_executed"] == 6
    assert diagnostics["partial"] is False


def test_rerun_is_served_from_cache(tmp_path):
    config = tmp_path / "tiny.toml"
    config.write_text(TINY)
    first, second = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--config", str(config), "--out", str(first)]) == 0
    assert main(["run", "--config", str(config), "--out", str(second)]) == 0
    assert (first / ROC_FILE).read_bytes() == (second / ROC_FILE).read_bytes()


def test_sweep_snr_grid(tmp_path):
    config = tmp_path / "tiny.toml"
    config.write_text(TINY)
    out = tmp_path / "sweep"
    code = main(["sweep-snr", "--config", str(config), "--snr-grid", "0:10:5", "--out", str(out), "--no-cache"])
    assert code == 0
    snapshot = json.loads((out / CONFIG_FILE).read_text())
    assert snapshot["config"]["snr_grid_db"] == [0.0, 5.0, 10.0]


def test_single_group_config_exits_with_config_error(tmp_path, capsys):
    config = tmp_path / "bad.toml"
    config.write_text(TINY.replace("groups = 2", "groups = 1"))
    assert main(["run", "--config", str(config), "--no-cache"]) == 1
    err = capsys.readouterr().err
    assert "groups" in err
    assert "bad.toml:1" in err


def test_calibrate_noise_rejects_bad_probability(capsys):
    assert main(["calibrate-noise", "--p-imp", "1.5"]) == 1
    assert "p_imp" in capsys.readouterr().err


def test_calibrate_gaussian_noise(tmp_path):
    out = tmp_path / "noise"
    assert main(["calibrate-noise", "--kind", "gaussian", "--samples", "1000000", "--out", str(out)]) == 0
    report = json.loads((out / "noise_calibration.json").read_text())
    assert report["within_tolerance"] is True


def test_calibrate_noise_needs_enough_samples():
    assert main(["calibrate-noise", "--samples", "10"]) == 1


def test_invalid_environment(monkeypatch, capsys):
    monkeypatch.setenv("WPDM_WORKERS", "-3")
    assert main(["validate-filters"]) == 1
    assert "WPDM_WORKERS" in capsys.readouterr().err


def test_short_preset_name_runs_the_roc_scenario(tmp_path):
    out = tmp_path / "fig2"
    assert main(["preset", "fig2", "--trials", "2", "--out", str(out), "--no-cache"]) == 0
    config = json.loads((out / CONFIG_FILE).read_text())["config"]
    assert (config["groups"], config["sensors_per_group"], config["antennas"]) == (4, 8, 64)
    assert config["p_imp"] == 0.3
    assert config["snr_grid_db"] == [10.0]


def test_unknown_preset_is_rejected():
    with pytest.raises(SystemExit):
        main(["preset", "fig9"])


def test_validate_filters_reports_unwritable_output(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["validate-filters", "--out", str(blocker)]) == 2
    assert "could not write" in capsys.readouterr().err
