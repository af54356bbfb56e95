import math

import numpy as np
import pytest

from memchan import rand
from memchan.channel import (
    RandomUnitarySpec,
    amplitude_damping,
    constant_channel,
    dephasing,
    depolarizing,
    identity_channel,
    is_unital,
    random_spec,
    random_unitary_channel,
)
from memchan.device import (
    MemoryDevice,
    amplitude_damping_device,
    induced_channel,
    memoryless,
    run_sequence,
    swap_device,
)
from memchan.linalg import PAULI_Z, maximally_mixed
from memchan.repeatability import (
    UNBOUNDED,
    SizeCapError,
    check_repeatable,
    control_blocks,
    controlled_u_device,
    controlled_unitary,
    diagonal_preservation_check,
    entropy_chain,
    entropy_chain_check,
    max_qubit_deficit,
    max_repetitions,
    mixed_memory_unitality_check,
    probe_states,
    repeatability_bound,
    shift_register_device,
)

ZERO = np.diag([1.0, 0.0])


def dephasing_spec():
    return RandomUnitarySpec([0.5, 0.5], [np.eye(2), PAULI_Z])


def test_controlled_unitary_blocks(rng):
    us = [rand.random_unitary(2, rng) for _ in range(3)]
    dev = controlled_u_device(RandomUnitarySpec([0.2, 0.3, 0.5], us))
    for got, want in zip(control_blocks(dev), us):
        assert np.abs(got - want).max() == 0
    assert controlled_unitary(us).shape == (6, 6)
    with pytest.raises(ValueError, match="not controlled"):
        control_blocks(swap_device(ZERO))


def test_coherences_must_have_zero_diagonal():
    with pytest.raises(ValueError, match="zero diagonal"):
        controlled_u_device(dephasing_spec(), np.diag([0.1, -0.1]))


def test_controlled_u_with_coherent_memory_is_repeatable():
    coh = np.array([[0, 0.3], [0.3, 0]])
    dev = controlled_u_device(dephasing_spec(), coh)
    report = check_repeatable(dev, dephasing(1.0), 20, "random", seed=3)
    assert report.repeatable
    assert report.max_choi_deviation < 1e-12


def test_coherence_update_closed_form():
    report = diagonal_preservation_check(controlled_u_device(dephasing_spec(), [[0, 0.4j], [-0.4j, 0]]), 50, seed=1)
    assert report.passed()


def test_swap_device_is_not_repeatable():
    report = check_repeatable(swap_device(ZERO), constant_channel(ZERO), 2, "worst")
    assert report.per_step_deviation[0] < 1e-12
    assert report.per_step_deviation[1] == pytest.approx(1.0)
    assert report.first_deviating_step == 2
    assert not report.repeatable


def test_memoryless_swap_is_repeatable():
    report = check_repeatable(memoryless(swap_device(ZERO)), constant_channel(ZERO), 10, "random")
    assert report.repeatable


def test_amplitude_damping_dilation_deviates_on_second_use():
    report = check_repeatable(amplitude_damping_device(0.5), amplitude_damping(0.5), 3, "random", seed=0)
    assert report.first_deviating_step == 2


def test_check_repeatable_input_sources():
    dev = controlled_u_device(dephasing_spec())
    assert check_repeatable(dev, dephasing(1.0), 3, "mixture").input_source == "mixture"
    assert check_repeatable(dev, dephasing(1.0), 3, ZERO).input_source == "fixed"
    with pytest.raises(ValueError):
        check_repeatable(dev, dephasing(1.0), 3, "sometimes")
    with pytest.raises(ValueError):
        check_repeatable(dev, dephasing(1.0), 0)


def test_probe_states():
    qubit = probe_states(2)
    assert len(qubit) == 7
    assert np.allclose(sum(qubit[:6]) / 6, maximally_mixed(2))
    assert len(probe_states(3)) == 7


def test_max_repetitions_floor_and_ties():
    assert max_repetitions(2, 0.188722) == (5, False)
    assert max_repetitions(2, 1.0) == (1, True)
    assert max_repetitions(4, 0.5) == (4, True)
    assert max_repetitions(2, 0.0) == (UNBOUNDED, False)
    assert max_repetitions(2, 1e-12) == (UNBOUNDED, False)
    assert max_repetitions(8, 0.7) == (math.floor(3 / 0.7), False)
    # a one-dimensional memory cannot absorb any entropy
    assert max_repetitions(1, 0.188722) == (0, False)


def test_bound_report_alternatives_on_tie():
    report = repeatability_bound(constant_channel(ZERO), 2, grid=21)
    assert report.tie_mixture
    assert report.n_max_mixture_alternatives == [1, 0]


def test_max_deficit_not_below_mixture_value():
    ch = amplitude_damping(0.5)
    best, point = max_qubit_deficit(ch, grid=51)
    report = repeatability_bound(ch, 2, grid=51)
    assert best >= report.delta_at_mixture
    assert np.linalg.norm(point) <= 1.0 + 1e-12
    # a pure-ish input loses more entropy than the mixture: limit tightens
    assert report.n_max_estimate <= report.n_max_mixture


def test_bound_for_qutrit_is_lower_bound():
    report = repeatability_bound(dephasing(1.0), 4)
    assert report.n_max_mixture == UNBOUNDED
    assert repeatability_bound(depolarizing(0.4, dim=3), 3).delta_max_is_lower_bound


def test_entropy_chain_on_amplitude_damping_dilation():
    t = run_sequence(amplitude_damping_device(0.5), [maximally_mixed(2)] * 4)
    report = entropy_chain_check(t)
    assert report.ok
    assert report.constant_input
    assert max(report.conservation_residuals) < 1e-9


def test_entropy_chain_flags_corrupted_columns():
    ok = entropy_chain([1.0, 1.0], [1.0, 1.0], [0.0, 0.0, 0.0], [1.0, 1.0], 2)
    assert ok.ok
    bad = entropy_chain([1.0, 1.0], [1.0, 0.5], [0.0, 0.0, 0.0], None, 2)
    assert bad.first_violation == 2
    assert bad.violation == "subadditivity"
    broken = entropy_chain([1.0], [1.0], [0.0, 0.0], [0.3], 2)
    assert broken.violation == "entropy conservation"
    with pytest.raises(ValueError):
        entropy_chain([1.0], [1.0], [0.0], None, 2)


def test_entropy_chain_refuses_reset_devices():
    t = run_sequence(memoryless(swap_device(ZERO)), [ZERO])
    with pytest.raises(ValueError):
        entropy_chain_check(t)


def test_shift_register_one_slot_is_inner_device():
    inner = amplitude_damping_device(0.5)
    dev = shift_register_device(inner, 1)
    assert np.allclose(dev.unitary.matrix, inner.unitary.matrix)


@pytest.mark.parametrize("n", [2, 3])
def test_shift_register_is_exactly_n_repeatable(n):
    dev = shift_register_device(amplitude_damping_device(0.5), n)
    report = check_repeatable(dev, amplitude_damping(0.5), n + 1, "worst")
    assert max(report.per_step_deviation[:n]) < 1e-10
    assert report.per_step_deviation[n] > 1e-3
    assert report.first_deviating_step == n + 1


def test_shift_register_size_cap():
    with pytest.raises(SizeCapError):
        shift_register_device(amplitude_damping_device(0.5), 12)
    with pytest.raises(ValueError):
        shift_register_device(amplitude_damping_device(0.5), 0)


def test_mixed_memory_unitality_qutrit_system():
    report = mixed_memory_unitality_check(3, 3, samples=10, seed=2)
    assert report.all_unital


def test_pure_memory_can_break_unitality(rng):
    u = rand.random_unitary(4, rng)
    assert not is_unital(induced_channel(MemoryDevice(u, ZERO, 2)))


def test_random_specs_have_repeatable_dilations(rng):
    for _ in range(3):
        spec = random_spec(3, rng)
        report = check_repeatable(controlled_u_device(spec), random_unitary_channel(spec), 5, "worst")
        assert report.repeatable
    assert check_repeatable(controlled_u_device(RandomUnitarySpec([1.0], [np.eye(2)])), identity_channel(2), 3).repeatable
