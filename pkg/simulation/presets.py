"""Named scenarios.

roc-imp30..roc-imp70 are ROC runs at 10 dB for p_imp 0.3, 0.5 and 0.7;
sweep-imp30..sweep-imp70 are the matching false-detection-vs-SNR sweeps
under both impulsive models. Trial counts are desk-scale; override them
with --trials.

With 64 antennas the uplink is error-free from 0 dB upwards and every
variant sits on the fusion floor, so the sweeps run below 0 dB.
"""
from __future__ import annotations

from models import ConfigError, DetectorKind, NoiseKind, ScenarioConfig

SWEEP_GRID = [-35.0, -30.0, -25.0, -20.0, -15.0, -10.0, -5.0, 0.0]

_ROC = {"snr_grid_db": [10.0], "trials_per_point": 2000}
_SWEEP = {
    "snr_grid_db": SWEEP_GRID,
    "trials_per_point": 2000,
    "noise_kinds": [NoiseKind.CLASS_A, NoiseKind.BERNOULLI_GAUSSIAN],
    "detectors": [DetectorKind.ZF],
}

PRESETS: dict[str, dict] = {
    "roc-imp30": {**_ROC, "p_imp": 0.3},
    "roc-imp50": {**_ROC, "p_imp": 0.5},
    "roc-imp70": {**_ROC, "p_imp": 0.7},
    "sweep-imp30": {**_SWEEP, "p_imp": 0.3},
    "sweep-imp50": {**_SWEEP, "p_imp": 0.5},
    "sweep-imp70": {**_SWEEP, "p_imp": 0.7},
    "smoke": {
        "groups": 2,
        "sensors_per_group": 4,
        "antennas": 8,
        "snr_grid_db": [10.0],
        "trials_per_point": 20,
        "threshold_points": 21,
    },
}

# short names used on the command line
ALIASES: dict[str, str] = {
    "fig2": "roc-imp30",
    "fig3": "roc-imp50",
    "fig4": "roc-imp70",
    "fig5": "sweep-imp30",
    "fig6": "sweep-imp50",
    "fig7": "sweep-imp70",
}

PRESET_NAMES = sorted([*PRESETS, *ALIASES])


def preset_config(name: str) -> ScenarioConfig:
    try:
        overrides = PRESETS[ALIASES.get(name, name)]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}") from None
    return ScenarioConfig(**overrides)
