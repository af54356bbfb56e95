import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from memchan import rand
from memchan.linalg import (
    MEMORY,
    SYSTEM,
    SWAP,
    DensityOperator,
    DimensionError,
    ValidationError,
    default_tol,
    eigh,
    ket_to_density,
    maximally_mixed,
    partial_trace,
    permutation_unitary,
    relative_entropy,
    shannon_entropy,
    tensor,
    trace_norm,
    validate_density,
    validate_unitary,
    von_neumann_entropy,
)


def test_tensor_index_convention():
    a = np.arange(4).reshape(2, 2)
    b = np.arange(9).reshape(3, 3) + 10
    t = tensor(a, b)
    assert t.shape == (6, 6)
    for i in range(2):
        for j in range(2):
            for k in range(3):
                for l in range(3):
                    assert t[i * 3 + k, j * 3 + l] == a[i, j] * b[k, l]


def test_tensor_matches_numpy_kron(rng):
    a = rng.normal(size=(3, 2)) + 1j * rng.normal(size=(3, 2))
    b = rng.normal(size=(2, 4))
    assert np.abs(tensor(a, b) - np.kron(a, b)).max() < 1e-14


def test_partial_trace_of_product(rng):
    xi = rand.random_density(3, rng)
    rho = rand.random_density(2, rng)
    joint = tensor(xi, rho)
    assert np.abs(partial_trace(joint, (3, 2), MEMORY) - xi).max() < 1e-14
    assert np.abs(partial_trace(joint, (3, 2), SYSTEM) - rho).max() < 1e-14


@settings(max_examples=40, deadline=None)
@given(d0=st.integers(1, 4), d1=st.integers(1, 4), seed=st.integers(0, 2**32 - 1), keep=st.sampled_from([0, 1]))
def test_partial_trace_matches_index_sum(d0, d1, seed, keep):
    r = np.random.default_rng(seed)
    m = r.normal(size=(d0 * d1, d0 * d1)) + 1j * r.normal(size=(d0 * d1, d0 * d1))
    expected = oracles.partial_trace_by_sum(m, d0, d1, keep)
    got = partial_trace(m, (d0, d1), keep)
    assert np.abs(got - expected).max() < 1e-12
    assert abs(np.trace(got) - np.trace(m)) < 1e-10


def test_partial_trace_rejects_mismatched_dims():
    with pytest.raises(DimensionError, match="does not match"):
        partial_trace(np.eye(6), (2, 2), MEMORY)
    with pytest.raises(ValueError):
        partial_trace(np.eye(4), (2, 2), 2)


def test_eigh_descending_and_reconstructs(rng):
    h = rand.random_hermitian(5, rng)
    vals, vecs = eigh(h)
    assert np.all(np.diff(vals) <= 0)
    assert np.abs(vecs @ np.diag(vals) @ vecs.conj().T - h).max() < 1e-12


def test_eigh_rejects_non_hermitian():
    with pytest.raises(ValidationError) as info:
        eigh(np.array([[0, 1], [0, 0]]))
    assert info.value.invariant == "hermiticity"
    assert info.value.residual == pytest.approx(1.0)


def test_validate_density_reports_each_invariant():
    with pytest.raises(ValidationError, match="unit trace"):
        validate_density(np.eye(2))
    with pytest.raises(ValidationError, match="positivity"):
        validate_density(np.diag([1.5, -0.5]))
    with pytest.raises(ValidationError, match="hermiticity"):
        validate_density(np.array([[0.5, 0.1], [0.0, 0.5]]))
    state = validate_density(np.diag([0.75, 0.25]))
    assert isinstance(state, DensityOperator)
    assert state.dim == 2


def test_validate_density_tolerates_noise_within_tolerance():
    noisy = np.diag([1.0 + 5e-10, -5e-10])
    assert validate_density(noisy).dim == 2
    with pytest.raises(ValidationError):
        validate_density(noisy, tol=1e-12)


def test_tolerance_env_override(monkeypatch):
    monkeypatch.setenv("MEMCHAN_TOLERANCE", "1e-6")
    assert default_tol() == 1e-6
    validate_density(np.diag([1.0 + 5e-7, -5e-7]))
    monkeypatch.setenv("MEMCHAN_TOLERANCE", "-1")
    with pytest.raises(ValueError):
        default_tol()


def test_validate_unitary():
    assert validate_unitary(SWAP).dim == 4
    with pytest.raises(ValidationError, match="unitarity"):
        validate_unitary(np.diag([1.0, 0.5]))


def test_entropy_known_values():
    assert von_neumann_entropy(np.diag([0.75, 0.25])) == pytest.approx(oracles.H_075, abs=1e-12)
    assert abs(oracles.binary_entropy(0.75) - oracles.H_075) < 1e-15
    assert von_neumann_entropy(maximally_mixed(4)) == pytest.approx(2.0, abs=1e-12)
    assert von_neumann_entropy(ket_to_density([1, 1j])) == pytest.approx(0.0, abs=1e-12)
    assert shannon_entropy([0.5, 0.5, 0.0]) == pytest.approx(1.0)


def test_entropy_is_unitarily_invariant(rng):
    rho = rand.random_density(3, rng)
    u = rand.random_unitary(3, rng)
    assert von_neumann_entropy(u @ rho @ u.conj().T) == pytest.approx(von_neumann_entropy(rho), abs=1e-12)


def test_entropy_of_pure_bipartite_marginals_agree(rng):
    psi = rand.random_pure_state(6, rng)
    a = partial_trace(psi, (2, 3), MEMORY)
    b = partial_trace(psi, (2, 3), SYSTEM)
    assert von_neumann_entropy(a) == pytest.approx(von_neumann_entropy(b), abs=1e-10)


def test_relative_entropy_commuting_matches_classical_kl():
    p = [0.6, 0.3, 0.1]
    q = [0.2, 0.5, 0.3]
    got = relative_entropy(np.diag(p), np.diag(q))
    assert got == pytest.approx(oracles.kl_bits(p, q), abs=1e-12)


def test_relative_entropy_to_mixture(rng):
    rho = rand.random_density(3, rng)
    expected = math.log2(3) - von_neumann_entropy(rho)
    assert relative_entropy(rho, maximally_mixed(3)) == pytest.approx(expected, abs=1e-12)


def test_relative_entropy_infinite_outside_support():
    assert relative_entropy(maximally_mixed(2), np.diag([1.0, 0.0])) == math.inf
    assert relative_entropy(np.diag([1.0, 0.0]), maximally_mixed(2)) == pytest.approx(1.0)


def test_trace_norm_matches_eigenvalue_oracle(rng):
    h = rand.random_hermitian(4, rng)
    assert trace_norm(h) == pytest.approx(oracles.trace_norm_by_eigenvalues(h), abs=1e-12)
    m = rng.normal(size=(3, 3))
    assert trace_norm(m) == pytest.approx(np.linalg.svd(m, compute_uv=False).sum())


def test_permutation_unitary_moves_factors(rng):
    vs = [rand.random_density(d, rng) for d in (2, 3, 2)]
    p = permutation_unitary([2, 3, 2], [2, 0, 1])
    lhs = p @ tensor(tensor(vs[0], vs[1]), vs[2]) @ p.conj().T
    rhs = tensor(tensor(vs[2], vs[0]), vs[1])
    assert np.abs(lhs - rhs).max() < 1e-14
    with pytest.raises(ValueError):
        permutation_unitary([2, 2], [0, 0])
