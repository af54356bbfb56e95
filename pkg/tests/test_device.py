import numpy as np
import pytest

import oracles
from memchan import rand
from memchan.channel import KrausChannel, amplitude_damping, apply, choi_distance, constant_channel, identity_channel
from memchan.device import (
    MemoryDevice,
    SequenceError,
    amplitude_damping_device,
    complete_isometry,
    final_device,
    identity_device,
    induced_channel,
    memory_map,
    memoryless,
    run_sequence,
    stinespring_device,
    swap_device,
    transcript_chain_residual,
    use_once,
)
from memchan.linalg import DimensionError, ValidationError, ket_to_density, maximally_mixed

ZERO = np.diag([1.0, 0.0])


def test_device_validates_dimensions():
    with pytest.raises(DimensionError):
        MemoryDevice(np.eye(4), maximally_mixed(2), 3)
    with pytest.raises(ValidationError, match="unitarity"):
        MemoryDevice(2 * np.eye(4), maximally_mixed(2), 2)
    with pytest.raises(ValidationError, match="unit trace"):
        MemoryDevice(np.eye(4), np.eye(2), 2)


def test_use_once_matches_index_sum_oracle(rng):
    u = rand.random_unitary(6, rng)
    xi = rand.random_density(3, rng)
    rho = rand.random_density(2, rng)
    dev = MemoryDevice(u, xi, 2)
    out, _ = use_once(dev, rho)
    assert np.abs(out.matrix - oracles.induced_output_by_sum(u, xi, rho)).max() < 1e-12
    assert np.abs(apply(induced_channel(dev), rho).matrix - out.matrix).max() < 1e-12


def test_memory_map_reproduces_memory_update(rng):
    dev = MemoryDevice(rand.random_unitary(4, rng), rand.random_density(2, rng), 2)
    rho = rand.random_density(2, rng)
    _, nxt = use_once(dev, rho)
    assert np.abs(apply(memory_map(dev, rho), dev.memory).matrix - nxt.memory.matrix).max() < 1e-12


def test_swap_device_outputs_previous_input():
    dev = swap_device(ZERO)
    plus = ket_to_density([1, 1])
    minus = ket_to_density([1, -1])
    out, dev = use_once(dev, plus)
    assert np.allclose(out.matrix, ZERO)
    out, dev = use_once(dev, minus)
    assert np.allclose(out.matrix, plus)
    assert np.allclose(dev.memory.matrix, minus)
    # induced channel is constant at the stored state
    assert choi_distance(induced_channel(dev), constant_channel(minus)) < 1e-12


def test_memoryless_swap_keeps_resetting():
    dev = memoryless(swap_device(ZERO))
    for rho in (ket_to_density([1, 1]), ket_to_density([0, 1])):
        out, dev = use_once(dev, rho)
        assert np.allclose(out.matrix, ZERO)
        assert np.allclose(dev.memory.matrix, ZERO)


def test_identity_device_is_identity_channel():
    assert choi_distance(induced_channel(identity_device(3, 2)), identity_channel(2)) < 1e-14


def test_stinespring_dilation_reproduces_channel(rng):
    ch = amplitude_damping(0.5)
    dev = amplitude_damping_device(0.5)
    assert dev.dims == (2, 2)
    assert choi_distance(induced_channel(dev), ch) < 1e-12
    unitary = rand.random_unitary(3, rng)
    kraus = np.stack([np.sqrt(p) * unitary for p in (0.2, 0.8)])
    noisy = KrausChannel(kraus)
    assert choi_distance(induced_channel(stinespring_device(noisy)), noisy) < 1e-12


def test_complete_isometry_is_unitary(rng):
    v = rand.random_unitary(5, rng)[:, :2]
    u = complete_isometry(v)
    assert np.abs(u.conj().T @ u - np.eye(5)).max() < 1e-12
    assert np.abs(u[:, :2] - v).max() == 0


def test_run_sequence_records_everything(rng):
    dev = MemoryDevice(rand.random_unitary(4, rng), rand.random_density(2, rng), 2)
    inputs = [rand.random_density(2, rng) for _ in range(5)]
    t = run_sequence(dev, inputs)
    assert len(t) == 5
    assert len(t.memory_states) == 6
    assert len(t.induced_channels) == 5
    assert len(t.entropies) == 6
    assert transcript_chain_residual(t) < 1e-12
    assert np.allclose(final_device(t).memory.matrix, t.memory_states[-1].matrix)
    assert t.channel_spread()[0] == 0.0


def test_run_sequence_reports_failing_step():
    dev = swap_device(ZERO)
    with pytest.raises(SequenceError) as info:
        run_sequence(dev, [ZERO, np.eye(3) / 3])
    assert info.value.step == 2
    assert isinstance(info.value.cause, DimensionError)


def test_amplitude_damping_dilation_drifts():
    t = run_sequence(amplitude_damping_device(0.5), [maximally_mixed(2)] * 3)
    spread = t.channel_spread()
    assert spread[0] == 0.0
    assert spread[1] > 1e-3
