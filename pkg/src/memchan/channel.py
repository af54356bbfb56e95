"""CPTP maps in Kraus and Choi form.

The Choi matrix used throughout is normalized to unit trace and ordered
input factor first::

    C = (1/d) * sum_ij |i><j| ⊗ E(|i><j|)

so trace preservation reads ``Tr_out C = I/d`` and two channels coincide iff
their Choi trace distance is zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import rand
from .linalg import (
    PAULI_I,
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    DensityOperator,
    DimensionError,
    OperatorLike,
    ValidationError,
    as_matrix,
    default_tol,
    eigh,
    maximally_mixed,
    relative_entropy,
    trace_norm,
    validate_density,
    validate_unitary,
    von_neumann_entropy,
)


@dataclass(frozen=True, eq=False)
class KrausChannel:
    """Channel ``rho -> sum_k K_k rho K_k†`` on a ``dim``-dimensional system.

    ``kraus`` is stored as an array of shape ``(r, dim, dim)``. Construction
    checks ``sum_k K_k† K_k = I`` entrywise within ``tol``.
    """

    kraus: np.ndarray
    tol: float = field(default_factory=default_tol)

    def __post_init__(self):
        ops = np.asarray(self.kraus, dtype=complex)
        if ops.ndim == 2:
            ops = ops[None]
        if ops.ndim != 3 or ops.shape[0] == 0 or ops.shape[1] != ops.shape[2]:
            raise DimensionError(f"Kraus operators must be a nonempty list of square matrices, got shape {ops.shape}")
        residual = tp_residual(ops)
        if residual > self.tol:
            raise ValidationError("trace preservation", residual, self.tol)
        object.__setattr__(self, "kraus", ops)

    @property
    def dim(self) -> int:
        return self.kraus.shape[1]

    @property
    def rank(self) -> int:
        return self.kraus.shape[0]

    def __call__(self, rho: OperatorLike) -> DensityOperator:
        return apply(self, rho)

    def __repr__(self) -> str:
        return f"KrausChannel(dim={self.dim}, kraus_count={self.rank})"


@dataclass(frozen=True, eq=False)
class RandomUnitarySpec:
    """Mixture ``sum_j probs[j] U_j rho U_j†``."""

    probs: np.ndarray
    unitaries: tuple

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float).reshape(-1)
        us = tuple(validate_unitary(u).matrix for u in self.unitaries)
        if len(probs) != len(us) or len(us) == 0:
            raise ValueError(f"need one probability per unitary, got {len(probs)} and {len(us)}")
        if np.any(probs < 0) or np.any(probs > 1):
            raise ValueError(f"probabilities must lie in [0, 1], got {probs.tolist()}")
        if abs(probs.sum() - 1.0) > 1e-12:
            raise ValidationError("normalization", abs(probs.sum() - 1.0), 1e-12, "probabilities must sum to 1")
        dims = {u.shape[0] for u in us}
        if len(dims) != 1:
            raise DimensionError(f"unitaries have mixed dimensions {sorted(dims)}")
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "unitaries", us)

    @property
    def dim(self) -> int:
        return self.unitaries[0].shape[0]

    def __len__(self) -> int:
        return len(self.probs)


def tp_residual(kraus: np.ndarray) -> float:
    ops = np.asarray(kraus, dtype=complex)
    total = np.einsum("kai,kaj->ij", ops.conj(), ops)
    return float(np.max(np.abs(total - np.eye(ops.shape[-1]))))


def _check_dim(ch: KrausChannel, m: np.ndarray) -> None:
    if m.shape != (ch.dim, ch.dim):
        raise DimensionError(f"channel acts on dimension {ch.dim}, got operator of shape {m.shape}")


def apply_kraus(kraus: np.ndarray, m: np.ndarray) -> np.ndarray:
    """Raw ``sum_k K m K†`` on an arbitrary operator, no validation."""
    return np.einsum("kab,bc,kdc->ad", kraus, m, kraus.conj())


def apply(ch: KrausChannel, rho: OperatorLike) -> DensityOperator:
    m = as_matrix(rho)
    _check_dim(ch, m)
    return validate_density(apply_kraus(ch.kraus, m), ch.tol)


def kraus_to_choi(ch: KrausChannel) -> np.ndarray:
    k = ch.kraus
    d = ch.dim
    # C[(i,a),(j,b)] = (1/d) sum_k K[k,a,i] conj(K[k,b,j])
    choi = np.einsum("kai,kbj->iajb", k, k.conj()) / d
    return choi.reshape(d * d, d * d)


def choi_to_kraus(choi: np.ndarray, tol: float | None = None) -> KrausChannel:
    """Kraus form of a CPTP Choi matrix; negative eigenvalues beyond ``tol`` raise."""
    tol = default_tol() if tol is None else tol
    choi = as_matrix(choi)
    d = int(round(np.sqrt(choi.shape[0])))
    if d * d != choi.shape[0]:
        raise DimensionError(f"Choi matrix dimension {choi.shape[0]} is not a square")
    vals, vecs = eigh(choi, tol)
    if vals[-1] < -tol:
        raise ValidationError("complete positivity", -vals[-1], tol, "Choi matrix has a negative eigenvalue")
    keep = vals > tol * 1e-3
    # K[a, i] = sqrt(d * lam) * v[(i, a)]
    vecs = vecs[:, keep].T.reshape(-1, d, d)
    ops = np.sqrt(d * vals[keep])[:, None, None] * np.swapaxes(vecs, 1, 2)
    if ops.shape[0] == 0:
        raise ValidationError("trace preservation", 1.0, tol, "Choi matrix is zero")
    return KrausChannel(ops, tol=max(tol, 1e-9))


def apply_choi(choi: np.ndarray, m: OperatorLike) -> np.ndarray:
    m = as_matrix(m)
    d = m.shape[0]
    blocks = as_matrix(choi).reshape(d, d, d, d)
    return d * np.einsum("ij,iajb->ab", m, blocks)


def choi_distance(a, b) -> float:
    """Half the trace norm of the Choi difference; 0 iff the channels agree.

    Accepts :class:`KrausChannel` or raw Choi matrices (the latter need not be
    CP, which matters for naive tomography estimates).
    """
    ca = kraus_to_choi(a) if isinstance(a, KrausChannel) else as_matrix(a)
    cb = kraus_to_choi(b) if isinstance(b, KrausChannel) else as_matrix(b)
    if ca.shape != cb.shape:
        raise DimensionError(f"Choi matrices differ in shape: {ca.shape} vs {cb.shape}")
    return 0.5 * trace_norm(ca - cb)


class UnitalityCheck(NamedTuple):
    unital: bool
    residual: float

    def __bool__(self) -> bool:
        return self.unital


def is_unital(ch: KrausChannel, tol: float | None = None) -> UnitalityCheck:
    tol = default_tol() if tol is None else tol
    image = np.einsum("kab,kcb->ac", ch.kraus, ch.kraus.conj())
    residual = float(np.max(np.abs(image - np.eye(ch.dim))))
    return UnitalityCheck(residual <= tol, residual)


def entropy_deficit(ch: KrausChannel, rho: OperatorLike) -> float:
    """``S(rho) - S(E[rho])`` in bits. Positive values mean the channel purifies."""
    state = validate_density(rho, ch.tol)
    return von_neumann_entropy(state) - von_neumann_entropy(apply(ch, state))


# -- qubit Bloch picture ------------------------------------------------------

_PAULI_BASIS = (PAULI_I, PAULI_X, PAULI_Y, PAULI_Z)


def bloch_vector(rho: OperatorLike) -> np.ndarray:
    m = as_matrix(rho)
    if m.shape != (2, 2):
        raise DimensionError(f"Bloch vectors need a qubit state, got shape {m.shape}")
    return np.array([np.real(np.trace(p @ m)) for p in _PAULI_BASIS[1:]])


def bloch_to_density(r) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    return 0.5 * (PAULI_I + r[0] * PAULI_X + r[1] * PAULI_Y + r[2] * PAULI_Z)


def bloch_affine(ch: KrausChannel) -> tuple[np.ndarray, np.ndarray]:
    """Qubit channel as ``r -> A r + b`` on Bloch vectors."""
    if ch.dim != 2:
        raise DimensionError("Bloch representation needs a qubit channel")
    image_id = apply_kraus(ch.kraus, PAULI_I)
    b = np.array([np.real(np.trace(p @ image_id)) / 2 for p in _PAULI_BASIS[1:]])
    a = np.array(
        [[np.real(np.trace(p @ apply_kraus(ch.kraus, q))) / 2 for q in _PAULI_BASIS[1:]] for p in _PAULI_BASIS[1:]]
    )
    return a, b


def affine_to_choi(a, b) -> np.ndarray:
    """Choi matrix of the trace-preserving qubit map ``r -> A r + b``.

    The result is Hermitian with the right partial trace but is only
    positive when the affine map is a genuine channel.
    """
    transfer = np.zeros((4, 4))
    transfer[0, 0] = 1.0
    transfer[1:, 0] = np.asarray(b, dtype=float)
    transfer[1:, 1:] = np.asarray(a, dtype=float)
    choi = np.zeros((4, 4), dtype=complex)
    for k in range(2):
        for l in range(2):
            unit = np.zeros((2, 2), dtype=complex)
            unit[k, l] = 1.0
            coeffs = np.array([np.trace(p @ unit) / 2 for p in _PAULI_BASIS])
            image = sum(
                transfer[mu, nu] * coeffs[nu] * _PAULI_BASIS[mu] for mu in range(4) for nu in range(4)
            )
            choi[2 * k:2 * k + 2, 2 * l:2 * l + 2] = image / 2
    return choi


# -- constructors -------------------------------------------------------------


def identity_channel(dim: int = 2) -> KrausChannel:
    return KrausChannel(np.eye(dim, dtype=complex)[None])


def unitary_channel(u: OperatorLike) -> KrausChannel:
    return KrausChannel(validate_unitary(u).matrix[None])


def random_unitary_channel(spec: RandomUnitarySpec) -> KrausChannel:
    mask = spec.probs > 0
    ops = np.sqrt(spec.probs[mask])[:, None, None] * np.stack(spec.unitaries)[mask]
    return KrausChannel(ops)


def amplitude_damping(gamma: float) -> KrausChannel:
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must lie in [0, 1], got {gamma}")
    k0 = np.array([[1, 0], [0, np.sqrt(1 - gamma)]], dtype=complex)
    k1 = np.array([[0, np.sqrt(gamma)], [0, 0]], dtype=complex)
    return KrausChannel(np.stack([k0, k1]))


def dephasing(p: float = 1.0) -> KrausChannel:
    """Qubit dephasing ``rho -> (1-p) rho + p diag(rho)``; ``p=1`` kills coherences."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    return random_unitary_channel(RandomUnitarySpec([1 - p / 2, p / 2], [PAULI_I, PAULI_Z]))


def weyl_operators(dim: int) -> list[np.ndarray]:
    """The ``dim**2`` clock-and-shift operators ``X^a Z^b``, identity first."""
    omega = np.exp(2j * np.pi / dim)
    shift = np.roll(np.eye(dim, dtype=complex), 1, axis=0)
    clock = np.diag(omega ** np.arange(dim))
    return [
        np.linalg.matrix_power(shift, a) @ np.linalg.matrix_power(clock, b)
        for a in range(dim)
        for b in range(dim)
    ]


def depolarizing(p: float, dim: int = 2) -> KrausChannel:
    """``rho -> (1-p) rho + p I/dim``; ``p=1`` is the completely depolarizing channel."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    if dim == 2:
        unitaries = [PAULI_I, PAULI_X, PAULI_Y, PAULI_Z]
    else:
        unitaries = weyl_operators(dim)
    n = len(unitaries)
    probs = np.full(n, p / n)
    probs[0] += 1 - p
    return random_unitary_channel(RandomUnitarySpec(probs, unitaries))


def constant_channel(xi: OperatorLike) -> KrausChannel:
    """Channel sending every input to ``xi``; Kraus set ``sqrt(l_i) |e_i><j|``."""
    state = validate_density(xi)
    vals, vecs = eigh(state)
    d = state.dim
    ops = [
        np.sqrt(lam) * np.outer(vecs[:, i], np.eye(d)[j])
        for i, lam in enumerate(vals)
        if lam > 0
        for j in range(d)
    ]
    return KrausChannel(np.stack(ops))


def random_unital_channel(dim: int = 2, rng=None, max_terms: int = 4) -> KrausChannel:
    """Random-unitary mixture of between 1 and ``max_terms`` seeded unitaries."""
    rng = rand.make_rng(rng)
    terms = int(rng.integers(1, max_terms + 1))
    spec = RandomUnitarySpec(
        rand.random_probs(terms, rng), [rand.random_unitary(dim, rng) for _ in range(terms)]
    )
    return random_unitary_channel(spec)


def random_spec(dim: int = 2, rng=None, min_terms: int = 2, max_terms: int = 4) -> RandomUnitarySpec:
    rng = rand.make_rng(rng)
    terms = int(rng.integers(min_terms, max_terms + 1))
    return RandomUnitarySpec(
        rand.random_probs(terms, rng), [rand.random_unitary(dim, rng) for _ in range(terms)]
    )


# -- entropy monotonicity harness ---------------------------------------------


@dataclass
class MonotonicityReport:
    samples: int
    seed: int | None
    margins: np.ndarray
    relative_route_gap: float
    tol: float

    @property
    def worst_margin(self) -> float:
        return float(np.min(self.margins))

    @property
    def passed(self) -> bool:
        return self.worst_margin >= -self.tol


def unital_monotonicity_harness(
    ch: KrausChannel, samples: int = 1000, seed: int | None = 0, tol: float | None = None
) -> MonotonicityReport:
    """Check ``S(E[rho]) >= S(rho)`` on seeded random states for a unital channel.

    Each margin ``S(E[rho]) - S(rho)`` is computed twice: directly, and as
    ``S(rho||I/d) - S(E[rho]||I/d)``. The largest disagreement between the
    two routes is reported as ``relative_route_gap``.
    """
    tol = default_tol() if tol is None else tol
    check = is_unital(ch, tol)
    if not check.unital:
        raise ValueError(f"channel is not unital (residual {check.residual:.3e}); the harness requires E[I] = I")
    rng = rand.make_rng(seed)
    mixture = maximally_mixed(ch.dim)
    margins = np.empty(samples)
    gap = 0.0
    for i in range(samples):
        rho = validate_density(rand.random_state(ch.dim, rng))
        out = apply(ch, rho)
        margins[i] = von_neumann_entropy(out) - von_neumann_entropy(rho)
        via_relative = relative_entropy(rho, mixture) - relative_entropy(out, mixture)
        gap = max(gap, abs(via_relative - margins[i]))
    return MonotonicityReport(samples, seed if isinstance(seed, int) else None, margins, gap, tol)


__all__ = [
    "KrausChannel",
    "RandomUnitarySpec",
    "UnitalityCheck",
    "MonotonicityReport",
    "affine_to_choi",
    "apply",
    "apply_choi",
    "apply_kraus",
    "amplitude_damping",
    "bloch_affine",
    "bloch_to_density",
    "bloch_vector",
    "choi_distance",
    "choi_to_kraus",
    "constant_channel",
    "dephasing",
    "depolarizing",
    "entropy_deficit",
    "identity_channel",
    "is_unital",
    "kraus_to_choi",
    "random_spec",
    "random_unital_channel",
    "random_unitary_channel",
    "unital_monotonicity_harness",
    "unitary_channel",
    "weyl_operators",
]
