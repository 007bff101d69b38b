"""Writes a campaign's CSV tables and JSON snapshots to an output directory."""
from __future__ import annotations

import json
import logging
from pathlib import Path

from tenacity import retry, retry_if_exception_type, stop_after_attempt, wait_exponential

from export.csv_export import build_pfd_csv, build_roc_csv
from models import ResultSet, ResultsWriteError, ScenarioConfig

logger = logging.getLogger(__name__)

ROC_FILE = "roc.csv"
PFD_FILE = "pfd_vs_snr.csv"
DIAGNOSTICS_FILE = "diagnostics.json"
CONFIG_FILE = "config.json"
CALIBRATION_FILE = "noise_calibration.json"


@retry(
    stop=stop_after_attempt(3),
    wait=wait_exponential(min=0.1, max=2),
    retry=retry_if_exception_type(OSError),
    reraise=True,
)
def _write_text(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8", newline="")


def _write(path: Path, text: str) -> None:
    try:
        _write_text(path, text)
    except OSError as e:
        raise ResultsWriteError(str(path), e) from e
    logger.debug(f"wrote {path} ({len(text)} bytes)")


def _dump(data: dict) -> str:
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def _output_dir(out_dir: str | Path) -> Path:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ResultsWriteError(str(out), e) from e
    return out


def write_json(out_dir: str | Path, name: str, data: dict) -> Path:
    """One sorted-key JSON report, for the single-purpose commands."""
    path = _output_dir(out_dir) / name
    _write(path, _dump(data))
    return path


def persist_results(rs: ResultSet, out_dir: str | Path) -> list[Path]:
    """roc.csv, pfd_vs_snr.csv, diagnostics.json and config.json; returns the paths."""
    out = _output_dir(out_dir)

    diagnostics = rs.diagnostics.model_dump(mode="json") if rs.diagnostics else {}
    diagnostics.update(
        {
            "config_hash": rs.config_hash,
            "seed": rs.seed,
            "trials_executed": rs.trials_executed,
            "partial": rs.partial,
        }
    )
    snapshot = {
        "config_hash": rs.config_hash,
        "seed": rs.seed,
        "config": rs.config.model_dump(mode="json"),
    }

    files = [
        (out / ROC_FILE, build_roc_csv(rs.roc)),
        (out / PFD_FILE, build_pfd_csv(rs.pfd_vs_snr)),
        (out / DIAGNOSTICS_FILE, _dump(diagnostics)),
        (out / CONFIG_FILE, _dump(snapshot)),
    ]
    for path, text in files:
        _write(path, text)
    logger.info(f"results written to {out} (config {rs.config_hash[:12]}, seed {rs.seed})")
    return [path for path, _ in files]


def load_config_snapshot(out_dir: str | Path) -> ScenarioConfig:
    path = Path(out_dir) / CONFIG_FILE
    data = json.loads(path.read_text(encoding="utf-8"))
    return ScenarioConfig.model_validate(data["config"])
