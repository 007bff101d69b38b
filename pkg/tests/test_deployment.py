import numpy as np
import pytest
from scipy import stats

from channel.deployment import (
    ChannelRealization,
    NetworkGeometry,
    apply_mac,
    deploy,
    draw_channel,
    large_scale_gains,
)
from channel.noise import NoiseRealization
from models import ChannelError, ScenarioConfig
from tests.conftest import unit_channel


def test_group_centres_inside_annulus(rng):
    geom = deploy(ScenarioConfig(groups=500, sensors_per_group=8), rng)
    radii = geom.center_radii()
    assert np.all(radii >= 100.0 - 1e-9)
    assert np.all(radii <= 1000.0 + 1e-9)
    assert np.all(geom.distances() >= radii[:, None] - 1e-9)


def test_degenerate_annulus_fixes_the_radius(rng):
    geom = deploy(ScenarioConfig(radius_min=500.0, radius_max=500.0), rng)
    np.testing.assert_allclose(geom.center_radii(), 500.0)


def test_group_centres_uniform_by_area(rng):
    geom = deploy(ScenarioConfig(groups=100_000, sensors_per_group=1), rng)
    a, b = 100.0, 1000.0
    cdf = lambda r: (r**2 - a**2) / (b**2 - a**2)
    assert stats.kstest(geom.center_radii(), cdf).statistic < 0.01


def test_sensors_stay_inside_their_cluster(rng):
    config = ScenarioConfig(groups=50, sensors_per_group=20)
    geom = deploy(config, rng)
    radial = geom.group_centers / geom.center_radii()[:, None]
    tangential = np.stack([-radial[:, 1], radial[:, 0]], axis=-1)
    offsets = geom.sensor_positions - geom.group_centers[:, None, :]
    along = np.einsum("zmk,zk->zm", offsets, radial)
    across = np.einsum("zmk,zk->zm", offsets, tangential)
    assert np.all((along >= -1e-9) & (along <= config.cluster_width + 1e-9))
    assert np.all((across >= -1e-9) & (across <= config.cluster_height + 1e-9))


def test_large_scale_gain_at_minimum_radius_without_spread(rng):
    lam, shadow = large_scale_gains(np.array([100.0]), 100.0, 2.0, 4.0, 0.0, rng)
    assert lam[0] == pytest.approx(10**0.4)
    assert shadow[0] == pytest.approx(4.0)


def test_large_scale_gain_follows_pathloss(rng):
    lam, _ = large_scale_gains(np.array([100.0, 200.0]), 100.0, 2.0, 0.0, 0.0, rng)
    assert lam[1] / lam[0] == pytest.approx(0.25)


def test_large_scale_rejects_sensor_inside_minimum_radius(rng):
    with pytest.raises(ChannelError):
        large_scale_gains(np.array([50.0]), 100.0, 2.0, 4.0, 2.0, rng)


def test_small_scale_fading_has_unit_power(rng):
    config = ScenarioConfig(groups=4, sensors_per_group=8, antennas=32_768)
    channels = draw_channel(deploy(config, rng), config, rng)
    power = np.mean([np.mean(np.abs(c.small_scale) ** 2) for c in channels])
    assert power == pytest.approx(1.0, rel=0.005)


def test_gram_matrix_approaches_large_scale_diagonal(rng):
    config = ScenarioConfig(groups=2, sensors_per_group=8, antennas=64)
    geom = deploy(config, rng)
    normalised = []
    for _ in range(200):
        chan = draw_channel(geom, config, rng)[0]
        gram = chan.gains.conj().T @ chan.gains / config.antennas
        scale = np.sqrt(np.outer(chan.large_scale, chan.large_scale))
        normalised.append(gram / scale)
    mean = np.mean(normalised, axis=0)
    np.testing.assert_allclose(mean, np.eye(8), atol=0.1)


def test_mac_without_noise_copies_the_waveform():
    streams = np.array([[0.5, -1.0, 2.0]])
    y = apply_mac(streams, unit_channel(3, 1))
    np.testing.assert_allclose(y, np.repeat(streams, 3, axis=0))


def test_mac_with_silent_sensors_returns_the_noise(rng):
    noise = NoiseRealization(
        samples=rng.normal(size=(4, 6)) + 1j * rng.normal(size=(4, 6)),
        impulsive=np.zeros((4, 6), dtype=bool),
    )
    y = apply_mac(np.zeros((2, 6)), unit_channel(4, 2), noise)
    np.testing.assert_array_equal(y, noise.samples)


def test_mac_output_dimensions(rng):
    config = ScenarioConfig()
    channels = draw_channel(deploy(config, rng), config, rng)
    chan = ChannelRealization.stack(channels)
    y = apply_mac(np.ones((32, 100)), chan)
    assert y.shape == (64, 100)
    assert chan.groups == (0, 1, 2, 3)


def test_mac_rejects_mismatched_streams():
    with pytest.raises(ChannelError):
        apply_mac(np.ones((3, 5)), unit_channel(2, 2))


def test_received_energy_matches_large_scale_gains(rng):
    config = ScenarioConfig(groups=2, sensors_per_group=4, antennas=16)
    geom = deploy(config, rng)
    streams = rng.choice([-1.0, 1.0], size=(4, 1)) * rng.normal(size=(4, 30))
    ratios = []
    for _ in range(2000):
        chan = draw_channel(geom, config, rng)[0]
        y = apply_mac(streams, chan)
        expected = chan.power * config.antennas * np.sum(chan.large_scale * np.sum(streams**2, axis=1))
        ratios.append((np.sum(np.abs(y) ** 2), expected))
    got, want = np.sum(ratios, axis=0)
    assert got / want == pytest.approx(1.0, rel=0.02)


def test_geometry_reports_shape(rng):
    geom = deploy(ScenarioConfig(groups=3, sensors_per_group=5), rng)
    assert isinstance(geom, NetworkGeometry)
    assert geom.groups == 3
    assert geom.sensors_per_group == 5
