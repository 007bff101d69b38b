"""WPDM encoding of sensor decisions and the receiver-side correlator bank."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import signal

from models import WaveformError
from wavelets.filters import (
    ScalingFunction,
    WaveletPacketTree,
    autocorrelation,
    sample_scaling_function,
)

logger = logging.getLogger(__name__)

GAIN_GRID_STEP = 1.0 / 64.0


@dataclass(frozen=True)
class SensorDecisionFrame:
    group: int
    level: int
    decisions: np.ndarray
    symbol_interval: float = 1e-3

    def __post_init__(self) -> None:
        x = np.asarray(self.decisions)
        if x.ndim != 1 or x.size == 0:
            raise WaveformError("a decision frame needs at least one sensor")
        if not np.all(np.isin(x, (-1, 1))):
            raise WaveformError("local decisions must be +1 or -1")
        object.__setattr__(self, "decisions", x.astype(np.int8))

    @property
    def sensors(self) -> int:
        return len(self.decisions)


@dataclass(frozen=True)
class EncodedFrame:
    """Per-sensor coded waveforms s_m(t) = x_m sigma_m(t), one row per sensor."""

    group: int
    level: int
    sensor_waveforms: np.ndarray
    oversampling: int
    symbol_interval: float

    @property
    def samples(self) -> np.ndarray:
        return self.sensor_waveforms.sum(axis=0)

    @property
    def sensors(self) -> int:
        return self.sensor_waveforms.shape[0]


@dataclass(frozen=True)
class SlotEntry:
    group: int
    level: int
    slot_duration: float
    first_row: int
    sensors: int


@dataclass(frozen=True)
class MultiplexedSignal:
    sensor_waveforms: np.ndarray
    oversampling: int
    symbol_interval: float
    schedule: tuple[SlotEntry, ...] = field(default_factory=tuple)

    @property
    def samples(self) -> np.ndarray:
        return self.sensor_waveforms.sum(axis=0)

    def rows(self, group: int) -> slice:
        for entry in self.schedule:
            if entry.group == group:
                return slice(entry.first_row, entry.first_row + entry.sensors)
        raise WaveformError(f"group {group} is not in this frame")


@dataclass(frozen=True)
class RecoveredFrame:
    """Correlator outputs: samples[n, m] is antenna n at sensor slot m."""

    group: int
    level: int
    samples: np.ndarray


def leaf_waveform(
    tree: WaveletPacketTree,
    sf: ScalingFunction,
    group: int,
    oversampling: int,
    offset: float = 0.0,
) -> np.ndarray:
    """Unit-energy waveform sum_q f_z[q] phi(t - q - offset) at OSF samples per T0."""
    if oversampling < 1:
        raise WaveformError(f"oversampling must be >= 1, got {oversampling}")
    taps = tree.leaf(group)
    lo, hi = sf.support
    span = (len(taps) - 1) + (hi - lo)
    count = int(np.ceil(span * oversampling - 1e-9))
    t = lo + np.arange(count) / oversampling
    # rounding keeps Haar edges from flickering across block boundaries
    arg = np.round(t[:, None] - np.arange(len(taps))[None, :] - offset, 12)
    wave = sf.evaluate(arg) @ taps
    energy = float(np.sum(wave**2))
    if energy <= 0.0:
        raise WaveformError(f"leaf {group} waveform has zero energy")
    return wave / np.sqrt(energy)


def encode_amplitudes(
    amplitudes: np.ndarray,
    group: int,
    tree: WaveletPacketTree,
    sf: ScalingFunction,
    oversampling: int = 8,
) -> np.ndarray:
    """Place amplitude m on the leaf waveform delayed by m 2^L symbol intervals."""
    amplitudes = np.asarray(amplitudes, dtype=float)
    wave = leaf_waveform(tree, sf, group, oversampling)
    stride = tree.leaf_shift * oversampling
    rows = np.zeros((len(amplitudes), (len(amplitudes) - 1) * stride + len(wave)))
    for m, a in enumerate(amplitudes):
        rows[m, m * stride : m * stride + len(wave)] = a * wave
    return rows


def encode_group(
    frame: SensorDecisionFrame,
    tree: WaveletPacketTree,
    sf: ScalingFunction,
    oversampling: int = 8,
) -> EncodedFrame:
    if not 0 <= frame.group < tree.groups:
        raise WaveformError(f"group {frame.group} outside [0, {tree.groups})")
    rows = encode_amplitudes(frame.decisions, frame.group, tree, sf, oversampling)
    return EncodedFrame(
        group=frame.group,
        level=tree.levels,
        sensor_waveforms=rows,
        oversampling=oversampling,
        symbol_interval=frame.symbol_interval,
    )


def multiplex_groups(frames: Sequence[EncodedFrame]) -> MultiplexedSignal:
    """Superpose the groups' frames, rows ordered by group index."""
    if not frames:
        raise WaveformError("nothing to multiplex")
    ordered = sorted(frames, key=lambda f: f.group)
    groups = [f.group for f in ordered]
    if len(set(groups)) != len(groups):
        raise WaveformError(f"duplicate groups in multiplex: {groups}")
    if len({f.oversampling for f in ordered}) > 1:
        raise WaveformError("frames disagree on oversampling")
    if len({f.symbol_interval for f in ordered}) > 1:
        raise WaveformError("frames disagree on symbol interval")

    length = max(f.sensor_waveforms.shape[1] for f in ordered)
    total = sum(f.sensors for f in ordered)
    rows = np.zeros((total, length))
    schedule = []
    row = 0
    for f in ordered:
        rows[row : row + f.sensors, : f.sensor_waveforms.shape[1]] = f.sensor_waveforms
        schedule.append(
            SlotEntry(
                group=f.group,
                level=f.level,
                slot_duration=(2**f.level) * f.symbol_interval,
                first_row=row,
                sensors=f.sensors,
            )
        )
        row += f.sensors
    return MultiplexedSignal(
        sensor_waveforms=rows,
        oversampling=ordered[0].oversampling,
        symbol_interval=ordered[0].symbol_interval,
        schedule=tuple(schedule),
    )


def reconstruct(
    received: np.ndarray,
    tree: WaveletPacketTree,
    sf: ScalingFunction,
    group: int,
    sensors: int,
    oversampling: int = 8,
    offset: float = 0.0,
) -> RecoveredFrame:
    """Correlate each antenna stream with group ``group``'s leaf waveform.

    The correlator output is sampled at the sensor slots m 2^L T0; a
    non-zero ``offset`` (in T0) misaligns the receiver template.
    """
    received = np.atleast_2d(received)
    template = leaf_waveform(tree, sf, group, oversampling, offset)
    stride = tree.leaf_shift * oversampling
    needed = (sensors - 1) * stride + len(template)
    if received.shape[1] < needed:
        raise WaveformError(
            f"frame too short for filter support: {received.shape[1]} samples, need {needed}"
        )
    out = signal.correlate(received, template[None, :], mode="valid")
    lags = np.arange(sensors) * stride
    return RecoveredFrame(group=group, level=tree.levels, samples=out[:, lags])


def correlation_gain(
    tree: WaveletPacketTree, sf: ScalingFunction, group: int, offset: float = 0.0
) -> float:
    """sigma_hat: normalised leaf correlation under a receiver offset.

    sum_{k,q} f[k] f[q] R(k - q + offset) / sum_{k,q} f[k] f[q] R(k - q),
    using an autocorrelation table computed on a fine grid.
    """
    taps = tree.leaf(group)
    fine = sample_scaling_function(sf.kind, GAIN_GRID_STEP, sf.extent)
    r_f = signal.correlate(taps, taps, mode="full", method="direct")
    lags = np.arange(-(len(taps) - 1), len(taps))
    shifted = autocorrelation(fine, lags + offset).values
    aligned = autocorrelation(fine, lags).values
    denom = float(r_f @ aligned)
    if denom <= 0.0:
        raise WaveformError(f"leaf {group} has non-positive correlation energy")
    return float(r_f @ shifted) / denom


def encode_without_wpdm(decisions: np.ndarray, oversampling: int = 8) -> np.ndarray:
    """Bare BPSK: every sensor sends x_m on one unit-energy rectangular pulse."""
    pulse = np.full(oversampling, 1.0 / np.sqrt(oversampling))
    return np.outer(np.asarray(decisions, dtype=float), pulse)


def project_without_wpdm(received: np.ndarray, oversampling: int = 8) -> np.ndarray:
    pulse = np.full(oversampling, 1.0 / np.sqrt(oversampling))
    return np.atleast_2d(received)[:, :oversampling] @ pulse
