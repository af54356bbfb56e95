"""Unitary memory model: a fixed interaction U on memory ⊗ system.

Each use takes the current memory state ``xi`` and an input ``rho``, applies
``U (xi ⊗ rho) U†`` and hands back the system marginal as the output and the
memory marginal as the memory for the next use. Inputs are always fresh
product states; correlations between inputs are not modelled.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .channel import KrausChannel, amplitude_damping, apply_kraus, choi_distance
from .linalg import (
    MEMORY,
    SYSTEM,
    DensityOperator,
    DimensionError,
    OperatorLike,
    UnitaryOperator,
    as_matrix,
    dagger,
    default_tol,
    permutation_unitary,
    partial_trace,
    tensor,
    validate_density,
    validate_unitary,
    von_neumann_entropy,
)


@dataclass(frozen=True, eq=False)
class MemoryDevice:
    """Interaction ``unitary`` on ``dim_m * dim_s`` plus the current ``memory``.

    With ``reset_to`` set, the memory is restored to that state after every
    use, which gives the memoryless (relaxed) version of the same device.
    """

    unitary: UnitaryOperator
    memory: DensityOperator
    dim_s: int
    reset_to: DensityOperator | None = None

    def __post_init__(self):
        u = validate_unitary(self.unitary)
        xi = validate_density(self.memory)
        if u.dim != xi.dim * self.dim_s:
            raise DimensionError(
                f"unitary dimension {u.dim} != dim_m * dim_s = {xi.dim} * {self.dim_s}"
            )
        object.__setattr__(self, "unitary", u)
        object.__setattr__(self, "memory", xi)
        if self.reset_to is not None:
            reset = validate_density(self.reset_to)
            if reset.dim != xi.dim:
                raise DimensionError(f"reset state has dimension {reset.dim}, memory has {xi.dim}")
            object.__setattr__(self, "reset_to", reset)

    @property
    def dim_m(self) -> int:
        return self.memory.dim

    @property
    def dims(self) -> tuple[int, int]:
        return (self.dim_m, self.dim_s)

    def with_memory(self, xi: OperatorLike) -> "MemoryDevice":
        return replace(self, memory=validate_density(xi))

    def __repr__(self) -> str:
        tag = ", memoryless" if self.reset_to is not None else ""
        return f"MemoryDevice(dim_m={self.dim_m}, dim_s={self.dim_s}{tag})"


def memoryless(dev: MemoryDevice) -> MemoryDevice:
    """Same device, but with the memory reset to its current state after each use."""
    return replace(dev, reset_to=dev.memory)


def _check_input(dev: MemoryDevice, rho: OperatorLike) -> DensityOperator:
    state = validate_density(rho)
    if state.dim != dev.dim_s:
        raise DimensionError(f"device expects {dev.dim_s}-dimensional inputs, got dimension {state.dim}")
    return state


def joint_after(dev: MemoryDevice, rho: OperatorLike) -> np.ndarray:
    """``U (xi ⊗ rho) U†`` for the current memory state."""
    state = _check_input(dev, rho)
    u = dev.unitary.matrix
    return u @ tensor(dev.memory, state) @ dagger(u)


def _marginal(joint: np.ndarray, dims, keep: int, tol: float) -> DensityOperator:
    # marginals of a unitarily evolved product of valid states are valid up to rounding
    m = partial_trace(joint, dims, keep)
    return DensityOperator(0.5 * (m + dagger(m)), tol)


def _use(dev: MemoryDevice, rho: OperatorLike) -> tuple[DensityOperator, MemoryDevice, np.ndarray]:
    joint = joint_after(dev, rho)
    tol = dev.memory.tol
    output = _marginal(joint, dev.dims, SYSTEM, tol)
    if dev.reset_to is not None:
        return output, replace(dev, memory=dev.reset_to), joint
    return output, replace(dev, memory=_marginal(joint, dev.dims, MEMORY, tol)), joint


def use_once(dev: MemoryDevice, rho: OperatorLike) -> tuple[DensityOperator, MemoryDevice]:
    """One use: returns the output state and the device with its updated memory."""
    output, nxt, _ = _use(dev, rho)
    return output, nxt


def _unitary_blocks(dev: MemoryDevice) -> np.ndarray:
    # blocks[m', s', m, s] = <m' s'| U |m s>
    dm, ds = dev.dims
    return dev.unitary.matrix.reshape(dm, ds, dm, ds)


def _spectrum(state: DensityOperator) -> tuple[np.ndarray, np.ndarray]:
    vals, vecs = np.linalg.eigh(state.matrix)
    vals = np.clip(vals, 0.0, None)
    vals = vals / vals.sum()
    keep = vals > 1e-14
    return vals[keep], vecs[:, keep]


def induced_channel(dev: MemoryDevice) -> KrausChannel:
    """Channel on the system for the current memory state.

    Kraus operators are ``sqrt(l_j) (<i| ⊗ I) U (|e_j> ⊗ I)`` over the memory
    eigenbasis ``xi = sum_j l_j |e_j><e_j|``; null directions are dropped.
    """
    blocks = _unitary_blocks(dev)
    vals, vecs = _spectrum(dev.memory)
    ops = np.einsum("j,iamb,mj->jiab", np.sqrt(vals), blocks, vecs)
    return KrausChannel(ops.reshape(-1, dev.dim_s, dev.dim_s), tol=max(default_tol(), 1e-9))


def memory_map(dev: MemoryDevice, rho: OperatorLike) -> KrausChannel:
    """Channel on the memory driven by input ``rho``.

    Built like :func:`induced_channel` with the roles swapped: Kraus operators
    ``sqrt(m_j) (I ⊗ <i|) U (I ⊗ |f_j>)`` over the eigenbasis of ``rho``.
    """
    state = _check_input(dev, rho)
    blocks = _unitary_blocks(dev)
    vals, vecs = _spectrum(state)
    ops = np.einsum("j,aibs,sj->jiab", np.sqrt(vals), blocks, vecs)
    return KrausChannel(ops.reshape(-1, dev.dim_m, dev.dim_m), tol=max(default_tol(), 1e-9))


class SequenceError(RuntimeError):
    def __init__(self, step: int, cause: Exception):
        self.step = step
        self.cause = cause
        super().__init__(f"step {step} failed: {cause}")


@dataclass
class UsageTranscript:
    """Record of ``n`` consecutive uses of one device.

    ``memory_states`` has ``n + 1`` entries, the initial memory first.
    ``induced_channels[k]`` is the channel the device implemented at use
    ``k + 1``, i.e. computed from the memory state before that use.
    """

    device: MemoryDevice
    inputs: list[DensityOperator] = field(default_factory=list)
    outputs: list[DensityOperator] = field(default_factory=list)
    memory_states: list[DensityOperator] = field(default_factory=list)
    induced_channels: list[KrausChannel] = field(default_factory=list)
    joint_entropies: list[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.inputs)

    @property
    def dims(self) -> tuple[int, int]:
        return self.device.dims

    @property
    def entropies(self) -> list[float]:
        """Memory entropies ``S(xi_k)`` for ``k = 1 .. n+1``."""
        return [von_neumann_entropy(x) for x in self.memory_states]

    @property
    def input_entropies(self) -> list[float]:
        return [von_neumann_entropy(x) for x in self.inputs]

    @property
    def output_entropies(self) -> list[float]:
        return [von_neumann_entropy(x) for x in self.outputs]

    def channel_spread(self) -> list[float]:
        """Choi distance of every recorded induced channel from the first one."""
        if not self.induced_channels:
            return []
        first = self.induced_channels[0]
        return [choi_distance(first, ch) for ch in self.induced_channels]


def run_sequence(
    dev: MemoryDevice, inputs: Sequence[OperatorLike], record_channels: bool = True
) -> UsageTranscript:
    transcript = UsageTranscript(device=dev, memory_states=[dev.memory])
    current = dev
    for step, rho in enumerate(inputs, start=1):
        try:
            state = _check_input(current, rho)
            if record_channels:
                transcript.induced_channels.append(induced_channel(current))
            output, current, joint = _use(current, state)
        except Exception as exc:
            raise SequenceError(step, exc) from exc
        transcript.inputs.append(state)
        transcript.outputs.append(output)
        transcript.memory_states.append(current.memory)
        transcript.joint_entropies.append(von_neumann_entropy(joint))
    return transcript


def final_device(t: UsageTranscript) -> MemoryDevice:
    return t.device.with_memory(t.memory_states[-1])


def transcript_chain_residual(t: UsageTranscript) -> float:
    """Largest mismatch between recorded memory states and the memory maps.

    Only meaningful for devices without a reset.
    """
    worst = 0.0
    current = t.device
    for k, rho in enumerate(t.inputs):
        current = current.with_memory(t.memory_states[k])
        predicted = apply_kraus(memory_map(current, rho).kraus, t.memory_states[k].matrix)
        worst = max(worst, float(np.max(np.abs(predicted - t.memory_states[k + 1].matrix))))
    return worst


# -- device constructors --------------------------------------------------------


def swap_unitary(dim: int = 2) -> np.ndarray:
    return permutation_unitary([dim, dim], [1, 0])


def swap_device(xi: OperatorLike) -> MemoryDevice:
    """Device whose interaction exchanges the stored state with the input."""
    memory = validate_density(xi)
    return MemoryDevice(swap_unitary(memory.dim), memory, memory.dim)


def identity_device(dim_m: int = 2, dim_s: int = 2, xi: OperatorLike | None = None) -> MemoryDevice:
    memory = np.eye(dim_m, dtype=complex) / dim_m if xi is None else xi
    return MemoryDevice(np.eye(dim_m * dim_s, dtype=complex), memory, dim_s)


def complete_isometry(v: np.ndarray) -> np.ndarray:
    """Append orthonormal columns to an isometry ``v`` to get a square unitary."""
    v = as_matrix(v)
    n, k = v.shape
    if k == n:
        return v.copy()
    u, _, _ = np.linalg.svd(v, full_matrices=True)
    complement = u[:, k:]
    # project out residual overlap with v before re-orthonormalizing
    complement = complement - v @ (dagger(v) @ complement)
    q, _ = np.linalg.qr(complement)
    return np.concatenate([v, q], axis=1)


def stinespring_device(ch: KrausChannel) -> MemoryDevice:
    """Dilation with memory ``|0><0|`` of dimension equal to the Kraus count.

    The first ``dim_s`` columns of the unitary form the isometry
    ``|psi> -> sum_i |i> ⊗ K_i |psi>``; the rest is an arbitrary completion.
    """
    r, d = ch.rank, ch.dim
    isometry = ch.kraus.reshape(r * d, d)
    u = complete_isometry(isometry)
    xi = np.zeros((r, r), dtype=complex)
    xi[0, 0] = 1.0
    return MemoryDevice(u, xi, d)


def amplitude_damping_device(gamma: float) -> MemoryDevice:
    return stinespring_device(amplitude_damping(gamma))
