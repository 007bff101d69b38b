"""Sensor deployment, large-scale fading and the massive-MIMO multiple-access channel."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from channel.noise import NoiseRealization
from models import ChannelError, ScenarioConfig

logger = logging.getLogger(__name__)

# half-normal cluster offsets are truncated at this many standard deviations
CLUSTER_SIGMAS = 3.0


@dataclass(frozen=True)
class NetworkGeometry:
    group_centers: np.ndarray  # (Z, 2) metres
    sensor_positions: np.ndarray  # (Z, M, 2) metres
    radius_min: float
    radius_max: float

    @property
    def groups(self) -> int:
        return self.sensor_positions.shape[0]

    @property
    def sensors_per_group(self) -> int:
        return self.sensor_positions.shape[1]

    def distances(self) -> np.ndarray:
        return np.linalg.norm(self.sensor_positions, axis=-1)

    def center_radii(self) -> np.ndarray:
        return np.linalg.norm(self.group_centers, axis=-1)


@dataclass(frozen=True)
class ChannelRealization:
    """G = H diag(sqrt(lambda)) for the sensors in ``groups``."""

    groups: tuple[int, ...]
    small_scale: np.ndarray  # H, (N, M)
    large_scale: np.ndarray  # lambda, (M,)
    shadowing_db: np.ndarray
    power: float

    @property
    def gains(self) -> np.ndarray:
        return self.small_scale * np.sqrt(self.large_scale)[None, :]

    @property
    def antennas(self) -> int:
        return self.small_scale.shape[0]

    @property
    def sensors(self) -> int:
        return self.small_scale.shape[1]

    @classmethod
    def stack(cls, realizations: Sequence["ChannelRealization"]) -> "ChannelRealization":
        if not realizations:
            raise ChannelError("nothing to stack")
        if len({r.power for r in realizations}) > 1:
            raise ChannelError("stacked channels disagree on transmit power")
        return cls(
            groups=tuple(g for r in realizations for g in r.groups),
            small_scale=np.hstack([r.small_scale for r in realizations]),
            large_scale=np.concatenate([r.large_scale for r in realizations]),
            shadowing_db=np.concatenate([r.shadowing_db for r in realizations]),
            power=realizations[0].power,
        )


def _cluster_offsets(extent: float, size: tuple[int, ...], rng: np.random.Generator) -> np.ndarray:
    scale = extent / CLUSTER_SIGMAS
    return stats.truncnorm.rvs(0.0, CLUSTER_SIGMAS, loc=0.0, scale=scale, size=size, random_state=rng)


def deploy(config: ScenarioConfig, rng: np.random.Generator) -> NetworkGeometry:
    """Drop Z group centres uniformly (by area) in the annulus and cluster M sensors around each.

    Cluster offsets are half-normal, radially outward and tangentially to
    one side, so no sensor is closer to the array than its group centre.
    """
    r_min, r_max = config.radius_min, config.radius_max
    if not 0 < r_min <= r_max:
        raise ChannelError(f"need 0 < radius_min <= radius_max, got {r_min}, {r_max}")
    if config.cluster_width <= 0 or config.cluster_height <= 0:
        raise ChannelError("cluster extent must be positive")
    Z, M = config.groups, config.sensors_per_group

    radius = np.sqrt(rng.random(Z) * (r_max**2 - r_min**2) + r_min**2)
    angle = 2.0 * np.pi * rng.random(Z)
    radial = np.stack([np.cos(angle), np.sin(angle)], axis=-1)
    tangential = np.stack([-np.sin(angle), np.cos(angle)], axis=-1)
    centers = radius[:, None] * radial

    along = _cluster_offsets(config.cluster_width, (Z, M), rng)
    across = _cluster_offsets(config.cluster_height, (Z, M), rng)
    positions = (
        centers[:, None, :]
        + along[..., None] * radial[:, None, :]
        + across[..., None] * tangential[:, None, :]
    )
    return NetworkGeometry(
        group_centers=centers, sensor_positions=positions, radius_min=r_min, radius_max=r_max
    )


def large_scale_gains(
    distances: np.ndarray,
    radius_min: float,
    exponent: float,
    mean_db: float,
    std_db: float,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """lambda = (phi_min / phi)^eta * 10^(s / 10), s ~ N(mean_db, std_db^2)."""
    if np.any(distances < radius_min * (1 - 1e-12)):
        raise ChannelError("a sensor lies inside the minimum radius")
    shadow = rng.normal(mean_db, std_db, size=distances.shape)
    return (radius_min / distances) ** exponent * 10.0 ** (shadow / 10.0), shadow


def draw_channel(
    geom: NetworkGeometry, config: ScenarioConfig, rng: np.random.Generator
) -> list[ChannelRealization]:
    """One realization per group: Rayleigh H (N x M) times sqrt(lambda)."""
    N = config.antennas
    lam, shadow = large_scale_gains(
        geom.distances(),
        geom.radius_min,
        config.pathloss_exponent,
        config.shadowing_mean_db,
        config.shadowing_std_db,
        rng,
    )
    out = []
    for z in range(geom.groups):
        M = geom.sensors_per_group
        h = (rng.standard_normal((N, M)) + 1j * rng.standard_normal((N, M))) / np.sqrt(2.0)
        out.append(
            ChannelRealization(
                groups=(z,),
                small_scale=h,
                large_scale=lam[z],
                shadowing_db=shadow[z],
                power=config.power,
            )
        )
    return out


def apply_mac(
    streams: np.ndarray,
    chan: ChannelRealization,
    noise: Optional[NoiseRealization] = None,
) -> np.ndarray:
    """Y = sqrt(rho) G S + e, with one row of S per transmitting sensor."""
    streams = np.atleast_2d(getattr(streams, "sensor_waveforms", streams))
    if streams.shape[0] != chan.sensors:
        raise ChannelError(
            f"{streams.shape[0]} sensor streams but the channel has {chan.sensors} columns"
        )
    y = np.sqrt(chan.power) * (chan.gains @ streams)
    if noise is not None:
        if noise.samples.shape != y.shape:
            raise ChannelError(f"noise shape {noise.samples.shape} does not match {y.shape}")
        y = y + noise.samples
    return y
