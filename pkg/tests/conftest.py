import math

import numpy as np
import pytest

from channel.deployment import ChannelRealization
from models import DetectorKind, ScalingKind, ScenarioConfig
from wavelets.filters import build_packet_tree, design_prototype_filters, sample_scaling_function


@pytest.fixture(scope="session")
def default_pair():
    return design_prototype_filters(14, 2, math.sqrt(2.0))


@pytest.fixture(scope="session")
def tree2(default_pair):
    return build_packet_tree(default_pair, 2)


@pytest.fixture(scope="session")
def tree4(default_pair):
    return build_packet_tree(default_pair, 4)


@pytest.fixture(scope="session")
def scaling():
    return {kind: sample_scaling_function(kind, 1.0 / 64.0) for kind in ScalingKind}


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def small_config():
    return ScenarioConfig(
        groups=4,
        sensors_per_group=4,
        antennas=16,
        scaling_kinds=[ScalingKind.HAAR],
        detectors=[DetectorKind.MF, DetectorKind.ZF],
        snr_grid_db=[10.0],
        trials_per_point=15,
        threshold_points=21,
        master_seed=7,
    )


def unit_channel(antennas: int, sensors: int, power: float = 1.0) -> ChannelRealization:
    """Every antenna sees every sensor with gain 1."""
    return ChannelRealization(
        groups=(0,),
        small_scale=np.ones((antennas, sensors), dtype=complex),
        large_scale=np.ones(sensors),
        shadowing_db=np.zeros(sensors),
        power=power,
    )
