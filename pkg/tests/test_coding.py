import numpy as np
import pytest

from channel.deployment import apply_mac
from models import ScalingKind, WaveformError
from tests.conftest import unit_channel
from wavelets.coding import (
    SensorDecisionFrame,
    correlation_gain,
    encode_amplitudes,
    encode_group,
    encode_without_wpdm,
    multiplex_groups,
    project_without_wpdm,
    reconstruct,
)
from wavelets.filters import build_packet_tree


def _frame(group, decisions, level=2):
    return SensorDecisionFrame(group=group, level=level, decisions=np.asarray(decisions))


def test_haar_encoding_repeats_leaf_coefficients(tree2, scaling):
    encoded = encode_group(_frame(0, [1], level=1), tree2, scaling[ScalingKind.HAAR], oversampling=4)
    expected = np.repeat(tree2.leaf_filters[0], 4) / 2.0
    np.testing.assert_allclose(encoded.samples, expected, atol=1e-12)


@pytest.mark.parametrize("kind", list(ScalingKind))
@pytest.mark.parametrize("group", [0, 1, 2, 3])
def test_single_sensor_waveform_has_unit_energy(tree4, scaling, kind, group):
    encoded = encode_group(_frame(group, [1]), tree4, scaling[kind])
    assert np.sum(encoded.samples**2) == pytest.approx(1.0)


def test_sign_flip_negates_that_sensor(tree4, scaling):
    sf = scaling[ScalingKind.SPLINE]
    a = encode_group(_frame(1, [1, 1, -1]), tree4, sf)
    b = encode_group(_frame(1, [1, -1, -1]), tree4, sf)
    np.testing.assert_allclose(a.sensor_waveforms[0], b.sensor_waveforms[0])
    np.testing.assert_allclose(a.sensor_waveforms[1], -b.sensor_waveforms[1])


def test_encoding_is_linear_in_amplitudes(tree4, scaling, rng):
    sf = scaling[ScalingKind.SHANNON]
    x1, x2 = rng.normal(size=5), rng.normal(size=5)
    np.testing.assert_allclose(
        encode_amplitudes(x1 + x2, 2, tree4, sf),
        encode_amplitudes(x1, 2, tree4, sf) + encode_amplitudes(x2, 2, tree4, sf),
        atol=1e-12,
    )


def test_decision_frame_rejects_non_binary_values():
    with pytest.raises(WaveformError):
        _frame(0, [1, 0, -1])


def test_encode_rejects_group_outside_tree(tree4, scaling):
    with pytest.raises(WaveformError):
        encode_group(_frame(4, [1]), tree4, scaling[ScalingKind.HAAR])


def test_multiplex_orders_groups_and_reports_slots(tree4, scaling):
    sf = scaling[ScalingKind.HAAR]
    frames = [encode_group(_frame(z, [1, -1]), tree4, sf) for z in (3, 0, 2, 1)]
    mux = multiplex_groups(frames)
    assert [e.group for e in mux.schedule] == [0, 1, 2, 3]
    assert all(e.slot_duration == pytest.approx(4e-3) for e in mux.schedule)
    assert mux.sensor_waveforms.shape[0] == 8
    assert mux.rows(2) == slice(4, 6)


def test_multiplex_rejects_mismatched_oversampling(tree4, scaling):
    sf = scaling[ScalingKind.HAAR]
    a = encode_group(_frame(0, [1]), tree4, sf, oversampling=8)
    b = encode_group(_frame(1, [1]), tree4, sf, oversampling=4)
    with pytest.raises(WaveformError):
        multiplex_groups([a, b])


def test_multiplex_rejects_duplicate_groups(tree4, scaling):
    a = encode_group(_frame(0, [1]), tree4, scaling[ScalingKind.HAAR])
    with pytest.raises(WaveformError):
        multiplex_groups([a, a])


@pytest.mark.slow
@pytest.mark.parametrize("kind", list(ScalingKind))
@pytest.mark.parametrize("groups", [2, 4])
@pytest.mark.parametrize("sensors", [1, 8])
def test_perfect_reconstruction_noiseless(default_pair, scaling, rng, kind, groups, sensors):
    tree = build_packet_tree(default_pair, groups)
    sf = scaling[kind]
    chan = unit_channel(1, sensors)
    for _ in range(1000):
        group = int(rng.integers(groups))
        x = rng.choice([-1, 1], size=sensors)
        encoded = encode_group(_frame(group, x, tree.levels), tree, sf)
        received = apply_mac(encoded, chan)
        recovered = reconstruct(received, tree, sf, group, sensors)
        np.testing.assert_array_equal(np.sign(recovered.samples[0].real), x)


def test_reconstruct_of_silence_is_zero(tree4, scaling):
    sf = scaling[ScalingKind.HAAR]
    length = encode_group(_frame(0, [1] * 3), tree4, sf).sensor_waveforms.shape[1]
    recovered = reconstruct(np.zeros((2, length), dtype=complex), tree4, sf, 0, 3)
    assert recovered.samples.shape == (2, 3)
    assert np.all(recovered.samples == 0)


def test_reconstruct_rejects_short_frame(tree4, scaling):
    with pytest.raises(WaveformError, match="too short"):
        reconstruct(np.zeros((1, 10), dtype=complex), tree4, scaling[ScalingKind.HAAR], 0, 2)


def test_other_groups_leak_little(tree4, scaling):
    for kind, bound in ((ScalingKind.HAAR, 0.05), (ScalingKind.SHANNON, 0.1)):
        sf = scaling[kind]
        encoded = encode_group(_frame(2, [1] * 8), tree4, sf)
        leak = reconstruct(encoded.samples[None, :], tree4, sf, 0, 8)
        assert np.max(np.abs(leak.samples)) <= bound


def test_timing_offset_lowers_the_correlation_peak(tree2, scaling):
    sf = scaling[ScalingKind.HAAR]
    encoded = encode_group(_frame(0, [1], level=1), tree2, sf, oversampling=20)
    peaks = [
        reconstruct(encoded.samples[None, :], tree2, sf, 0, 1, oversampling=20, offset=d).samples[0, 0].real
        for d in (0.0, 0.05, 0.1, 0.2)
    ]
    assert peaks[0] == pytest.approx(1.0)
    assert all(a > b for a, b in zip(peaks, peaks[1:]))


def test_correlation_gain(tree4, scaling):
    sf = scaling[ScalingKind.HAAR]
    assert correlation_gain(tree4, sf, 1, 0.0) == pytest.approx(1.0)
    gains = [correlation_gain(tree4, sf, 1, d) for d in (0.0, 0.1, 0.3)]
    assert gains[0] > gains[1] > gains[2] > 0.0


def test_bare_bpsk_round_trip():
    x = np.array([1, -1, 1])
    streams = encode_without_wpdm(x, oversampling=8)
    assert np.sum(streams[0] ** 2) == pytest.approx(1.0)
    np.testing.assert_allclose(project_without_wpdm(streams, 8), x)
