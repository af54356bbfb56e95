"""Repeatable implementations of channels and the entropy limit on them.

A device is repeatable for a target channel when the channel it induces is
the same at every use, whatever inputs came before. Controlled-unitary
devices achieve this for random-unitary channels. Channels that lower the
entropy of some input cannot be repeated indefinitely with a finite memory:
``n * deficit <= log2(dim_memory)`` bounds the number of faithful uses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from . import rand
from .channel import (
    KrausChannel,
    RandomUnitarySpec,
    bloch_affine,
    choi_distance,
    entropy_deficit,
    is_unital,
)
from .device import (
    MemoryDevice,
    UsageTranscript,
    induced_channel,
    use_once,
)
from .linalg import (
    PAULIS,
    DimensionError,
    OperatorLike,
    as_matrix,
    dagger,
    default_tol,
    ket_to_density,
    maximally_mixed,
    permutation_unitary,
    validate_density,
)

DEFAULT_THRESHOLD = 1e-8
DEFAULT_SIZE_CAP = 4096
UNBOUNDED = "unbounded"
TIE_WINDOW = 1e-12

InputSource = Union[str, np.ndarray]


# -- controlled-unitary construction -------------------------------------------


def controlled_unitary(unitaries: Sequence[np.ndarray]) -> np.ndarray:
    """Block-diagonal ``sum_j |j><j| ⊗ U_j`` with the memory as control."""
    us = [as_matrix(u) for u in unitaries]
    d = us[0].shape[0]
    k = len(us)
    out = np.zeros((k * d, k * d), dtype=complex)
    for j, u in enumerate(us):
        out[j * d:(j + 1) * d, j * d:(j + 1) * d] = u
    return out


def controlled_u_device(spec: RandomUnitarySpec, coherences: OperatorLike | None = None) -> MemoryDevice:
    """Repeatable dilation of ``spec``.

    The memory starts in ``diag(probs)`` plus the optional off-diagonal
    ``coherences``, whose diagonal must vanish. Coherences change from use
    to use but never the diagonal, which alone fixes the induced channel.
    """
    xi = np.diag(spec.probs).astype(complex)
    if coherences is not None:
        extra = as_matrix(coherences)
        if extra.shape != xi.shape:
            raise DimensionError(f"coherence matrix must be {xi.shape}, got {extra.shape}")
        diagonal = float(np.max(np.abs(np.diag(extra))))
        if diagonal > default_tol():
            raise ValueError(
                f"coherence matrix must have a zero diagonal (largest entry {diagonal:.3e}); "
                "the diagonal is fixed by the probabilities"
            )
        xi = xi + extra - np.diag(np.diag(extra))
    return MemoryDevice(controlled_unitary(spec.unitaries), validate_density(xi), spec.dim)


def control_blocks(dev: MemoryDevice, tol: float | None = None) -> list[np.ndarray]:
    """Recover the ``U_j`` of a controlled-unitary device; raises if it is not one."""
    tol = default_tol() if tol is None else tol
    dm, ds = dev.dims
    blocks = dev.unitary.matrix.reshape(dm, ds, dm, ds)
    off = max(
        (float(np.max(np.abs(blocks[j, :, k, :]))) for j in range(dm) for k in range(dm) if j != k),
        default=0.0,
    )
    if off > tol:
        raise ValueError(f"device is not controlled by the memory basis (off-diagonal block norm {off:.3e})")
    return [blocks[j, :, j, :] for j in range(dm)]


# -- repeatability verification -------------------------------------------------


@dataclass
class RepeatabilityReport:
    n_requested: int
    per_step_deviation: list[float]
    threshold: float
    input_source: str
    seed: int | None = None

    @property
    def max_choi_deviation(self) -> float:
        return max(self.per_step_deviation, default=0.0)

    @property
    def first_deviating_step(self) -> int | None:
        """1-based index of the first use whose channel misses the target."""
        for k, dev in enumerate(self.per_step_deviation, start=1):
            if dev > self.threshold:
                return k
        return None

    @property
    def repeatable(self) -> bool:
        return self.first_deviating_step is None


def probe_states(dim: int) -> list[np.ndarray]:
    """Test inputs for worst-case checks: Pauli eigenstates and ``I/2`` for qubits.

    Other dimensions use the computational and Fourier basis states instead
    of the Pauli eigenstates.
    """
    if dim == 2:
        states = []
        for p in PAULIS:
            _, vecs = np.linalg.eigh(p)
            states += [np.outer(vecs[:, 1], vecs[:, 1].conj()), np.outer(vecs[:, 0], vecs[:, 0].conj())]
    else:
        eye = np.eye(dim, dtype=complex)
        fourier = np.exp(2j * np.pi * np.outer(np.arange(dim), np.arange(dim)) / dim)
        states = [np.outer(eye[k], eye[k]) for k in range(dim)]
        states += [ket_to_density(fourier[:, k]) for k in range(dim)]
    return states + [maximally_mixed(dim)]


def _deviations_along(dev: MemoryDevice, target: KrausChannel, inputs) -> list[float]:
    out = []
    current = dev
    for rho in inputs:
        out.append(choi_distance(induced_channel(current), target))
        _, current = use_once(current, rho)
    return out


def check_repeatable(
    dev: MemoryDevice,
    target: KrausChannel,
    n: int,
    input_source: InputSource = "random",
    threshold: float = DEFAULT_THRESHOLD,
    seed: int | None = 0,
) -> RepeatabilityReport:
    """Run ``n`` uses and compare each induced channel with ``target``.

    ``input_source`` is ``"random"`` (seeded random states), ``"worst"``
    (one constant-input run per probe state, keeping the largest deviation
    per step), ``"mixture"`` (constant ``I/d``) or an explicit density matrix
    fed at every use.
    """
    if target.dim != dev.dim_s:
        raise DimensionError(f"target acts on dimension {target.dim}, device on {dev.dim_s}")
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    d = dev.dim_s
    if isinstance(input_source, str):
        label = input_source
        if input_source == "random":
            rng = rand.make_rng(seed)
            devs = _deviations_along(dev, target, (rand.random_state(d, rng) for _ in range(n)))
        elif input_source == "worst":
            runs = [_deviations_along(dev, target, [p] * n) for p in probe_states(d)]
            devs = [max(col) for col in zip(*runs)]
        elif input_source == "mixture":
            devs = _deviations_along(dev, target, [maximally_mixed(d)] * n)
        else:
            raise ValueError(f"unknown input source {input_source!r}; use random, worst, mixture or a state")
    else:
        label = "fixed"
        state = validate_density(input_source)
        devs = _deviations_along(dev, target, [state] * n)
    return RepeatabilityReport(n, devs, threshold, label, seed if label == "random" else None)


@dataclass
class DiagonalReport:
    samples: int
    max_diagonal_drift: float
    max_coherence_error: float

    def passed(self, tol: float = 1e-10) -> bool:
        return self.max_diagonal_drift <= tol and self.max_coherence_error <= tol


def diagonal_preservation_check(dev: MemoryDevice, samples: int = 100, seed: int | None = 0) -> DiagonalReport:
    """Feed ``samples`` random inputs through a controlled-unitary device.

    Tracks two things at every use: how far the memory diagonal has moved
    from its initial value, and how well the coherences follow the closed
    form ``xi'_jk = xi_jk Tr[U_j rho U_k†]``.
    """
    us = control_blocks(dev)
    rng = rand.make_rng(seed)
    start = np.real(np.diag(dev.memory.matrix)).copy()
    drift = 0.0
    coherence_err = 0.0
    current = dev
    for _ in range(samples):
        rho = rand.random_state(dev.dim_s, rng)
        before = current.memory.matrix
        _, current = use_once(current, rho)
        after = current.memory.matrix
        drift = max(drift, float(np.max(np.abs(np.diag(after) - start))))
        factors = np.array([[np.trace(uj @ rho @ dagger(uk)) for uk in us] for uj in us])
        coherence_err = max(coherence_err, float(np.max(np.abs(before * factors - after))))
    return DiagonalReport(samples, drift, coherence_err)


# -- entropy bound ---------------------------------------------------------------


def max_repetitions(mem_dim: int, delta: float, tol: float | None = None):
    """Largest ``n`` with ``n * delta <= log2(mem_dim)``.

    Returns ``(n, tie)`` where ``n`` is ``UNBOUNDED`` when ``delta <= tol``.
    ``tie`` is true when the ratio sits within ``1e-12`` of an integer, in
    which case the integer itself is returned (the bound is non-strict).
    """
    tol = default_tol() if tol is None else tol
    if delta <= tol:
        return UNBOUNDED, False
    ratio = math.log2(mem_dim) / delta
    if ratio == 0:
        return 0, False
    nearest = round(ratio)
    if abs(ratio - nearest) <= TIE_WINDOW:
        return int(nearest), True
    return int(math.floor(ratio)), False


def _binary_entropy_of_norm(r: np.ndarray) -> np.ndarray:
    p = np.clip((1.0 + r) / 2.0, 0.0, 1.0)
    q = 1.0 - p
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, -p * np.log2(p), 0.0) + np.where(q > 0, -q * np.log2(q), 0.0)
    return terms


def _qubit_deficit(a: np.ndarray, b: np.ndarray, pts: np.ndarray) -> np.ndarray:
    r_in = np.linalg.norm(pts, axis=1)
    r_out = np.linalg.norm(pts @ a.T + b, axis=1)
    return _binary_entropy_of_norm(r_in) - _binary_entropy_of_norm(r_out)


def _project_ball(pts: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(pts, axis=1, keepdims=True)
    return np.where(norms > 1.0, pts / np.maximum(norms, 1e-300), pts)


def max_qubit_deficit(ch: KrausChannel, grid: int = 201, refine_rounds: int = 6) -> tuple[float, np.ndarray]:
    """Maximize the entropy deficit over the Bloch ball.

    Coarse search over a ``grid**3`` lattice of the cube clipped to the ball,
    then repeated local lattices around the incumbent, each ten times finer.
    Returns the best deficit and its Bloch vector.
    """
    a, b = bloch_affine(ch)
    axis = np.linspace(-1.0, 1.0, grid)
    yy, zz = np.meshgrid(axis, axis, indexing="ij")
    plane = np.stack([yy.ravel(), zz.ravel()], axis=1)
    best_val, best_pt = -np.inf, np.zeros(3)
    for x in axis:
        pts = np.column_stack([np.full(len(plane), x), plane])
        pts = pts[np.einsum("ij,ij->i", pts, pts) <= 1.0]
        if len(pts) == 0:
            continue
        vals = _qubit_deficit(a, b, pts)
        i = int(np.argmax(vals))
        if vals[i] > best_val:
            best_val, best_pt = float(vals[i]), pts[i]
    step = axis[1] - axis[0] if grid > 1 else 1.0
    local = np.linspace(-1.0, 1.0, 21)
    offsets = np.stack(np.meshgrid(local, local, local, indexing="ij"), axis=-1).reshape(-1, 3)
    for _ in range(refine_rounds):
        pts = _project_ball(best_pt + step * offsets)
        vals = _qubit_deficit(a, b, pts)
        i = int(np.argmax(vals))
        if vals[i] > best_val:
            best_val, best_pt = float(vals[i]), pts[i]
        step /= 10.0
    return best_val, best_pt


@dataclass
class BoundReport:
    mem_dim: int
    delta_at_mixture: float
    delta_max_estimate: float
    delta_max_is_lower_bound: bool
    n_max_mixture: Union[int, str]
    n_max_estimate: Union[int, str]
    tie_mixture: bool = False
    tie_estimate: bool = False
    argmax_bloch: list | None = None

    @staticmethod
    def _alternatives(n, tie):
        return [n, n - 1] if tie else None

    @property
    def n_max_mixture_alternatives(self):
        return self._alternatives(self.n_max_mixture, self.tie_mixture)

    @property
    def n_max_estimate_alternatives(self):
        return self._alternatives(self.n_max_estimate, self.tie_estimate)


def repeatability_bound(ch: KrausChannel, mem_dim: int, grid: int = 201, tol: float | None = None) -> BoundReport:
    """How many faithful repetitions a ``mem_dim``-dimensional memory can afford.

    The deficit at the maximally mixed input is the primary witness. For
    qubits the maximal deficit over all inputs is also searched, which can
    only tighten the limit; for larger systems the mixture value is reported
    as a lower bound on the maximum.
    """
    if mem_dim < 1:
        raise ValueError(f"mem_dim must be positive, got {mem_dim}")
    delta_mix = entropy_deficit(ch, maximally_mixed(ch.dim))
    argmax = None
    if ch.dim == 2:
        delta_max, pt = max_qubit_deficit(ch, grid=grid)
        delta_max = max(delta_max, delta_mix)
        argmax = [float(v) for v in pt]
        lower_bound = False
    else:
        delta_max = delta_mix
        lower_bound = True
    n_mix, tie_mix = max_repetitions(mem_dim, delta_mix, tol)
    n_est, tie_est = max_repetitions(mem_dim, delta_max, tol)
    return BoundReport(
        mem_dim=mem_dim,
        delta_at_mixture=delta_mix,
        delta_max_estimate=delta_max,
        delta_max_is_lower_bound=lower_bound,
        n_max_mixture=n_mix,
        n_max_estimate=n_est,
        tie_mixture=tie_mix,
        tie_estimate=tie_est,
        argmax_bloch=argmax,
    )


# -- entropy chain along a transcript -------------------------------------------


@dataclass
class ChainReport:
    """Per-step entropy bookkeeping for a run of the memory model.

    ``cumulative_deficit[n-1]`` is the summed deficit of the first ``n``
    uses and ``memory_gain[n-1]`` is ``S(xi_{n+1}) - S(xi_1)``.
    """

    mem_dim: int
    constant_input: bool
    conservation_residuals: list[float]
    subadditivity_slack: list[float]
    cumulative_deficit: list[float]
    memory_gain: list[float]
    tol: float
    first_violation: int | None = None
    violation: str | None = None

    @property
    def log_mem_dim(self) -> float:
        return math.log2(self.mem_dim)

    @property
    def ok(self) -> bool:
        return self.first_violation is None


def entropy_chain(
    input_entropies: Sequence[float],
    output_entropies: Sequence[float],
    memory_entropies: Sequence[float],
    joint_entropies: Sequence[float] | None,
    mem_dim: int,
    constant_input: bool = False,
    tol: float | None = None,
) -> ChainReport:
    """Check conservation, subadditivity and the accumulated bound step by step.

    ``memory_entropies`` has one more entry than the inputs. Pass
    ``joint_entropies=None`` to skip the conservation check.
    """
    tol = default_tol() if tol is None else tol
    n = len(input_entropies)
    if len(output_entropies) != n or len(memory_entropies) != n + 1:
        raise ValueError(
            f"inconsistent lengths: {n} inputs, {len(output_entropies)} outputs, {len(memory_entropies)} memory states"
        )
    s_in = np.asarray(input_entropies, dtype=float)
    s_out = np.asarray(output_entropies, dtype=float)
    s_mem = np.asarray(memory_entropies, dtype=float)
    if joint_entropies is not None:
        conservation = np.abs(s_mem[:-1] + s_in - np.asarray(joint_entropies, dtype=float))
    else:
        conservation = np.zeros(n)
    slack = s_out + s_mem[1:] - s_mem[:-1] - s_in
    cum = np.cumsum(s_in - s_out)
    gain = s_mem[1:] - s_mem[0]
    bound = math.log2(mem_dim)

    report = ChainReport(
        mem_dim=mem_dim,
        constant_input=constant_input,
        conservation_residuals=conservation.tolist(),
        subadditivity_slack=slack.tolist(),
        cumulative_deficit=cum.tolist(),
        memory_gain=gain.tolist(),
        tol=tol,
    )
    for k in range(n):
        reason = None
        if conservation[k] > tol:
            reason = "entropy conservation"
        elif slack[k] < -tol:
            reason = "subadditivity"
        elif cum[k] > gain[k] + tol:
            reason = "accumulated deficit exceeds memory entropy gain"
        elif gain[k] > bound + tol:
            reason = "memory entropy gain exceeds log2(mem_dim)"
        if reason is not None:
            report.first_violation = k + 1
            report.violation = reason
            break
    return report


def entropy_chain_check(t: UsageTranscript, mem_dim: int | None = None, tol: float | None = None) -> ChainReport:
    """Entropy chain for a recorded run; ``mem_dim`` defaults to the device's.

    With a constant input and a repeatable device the accumulated deficit is
    ``n * deficit``; otherwise it is the sum of the per-step deficits of the
    channels actually realized.
    """
    if t.device.reset_to is not None:
        raise ValueError("entropy chain applies to the unitary memory model; this device resets its memory")
    mem_dim = t.device.dim_m if mem_dim is None else mem_dim
    constant = all(np.allclose(x.matrix, t.inputs[0].matrix, atol=1e-12) for x in t.inputs)
    return entropy_chain(
        t.input_entropies,
        t.output_entropies,
        t.entropies,
        t.joint_entropies,
        mem_dim,
        constant_input=constant,
        tol=tol,
    )


# -- shift register ----------------------------------------------------------------


class SizeCapError(ValueError):
    pass


def shift_register_device(inner: MemoryDevice, n: int, size_cap: int = DEFAULT_SIZE_CAP) -> MemoryDevice:
    """``n`` fresh copies of the inner memory, used one after another.

    Each use lets the inner unitary act on the first memory slot and the
    input, then rotates the slots one place to the left so the spent slot
    goes to the back. The first ``n`` uses therefore all see a fresh copy
    of the inner memory state; use ``n + 1`` meets a spent one.
    """
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    dx, ds = inner.dims
    total = dx**n * ds
    if total > size_cap:
        raise SizeCapError(f"register of {n} slots needs total dimension {total} > cap {size_cap}")
    if n == 1:
        return MemoryDevice(inner.unitary, inner.memory, ds)
    dims = [dx] * n + [ds]
    # interaction order: slot 0, system, slots 1..n-1
    to_interaction = permutation_unitary(dims, [0, n] + list(range(1, n)))
    interaction = dagger(to_interaction) @ np.kron(inner.unitary.matrix, np.eye(dx ** (n - 1))) @ to_interaction
    shift = permutation_unitary(dims, list(range(1, n)) + [0, n])
    memory = inner.memory.matrix
    for _ in range(n - 1):
        memory = np.kron(memory, inner.memory.matrix)
    return MemoryDevice(shift @ interaction, memory, ds)


# -- maximally mixed memory ------------------------------------------------------


@dataclass
class MixedMemoryReport:
    dims: tuple
    residuals: list[float] = field(default_factory=list)
    tol: float = 1e-9

    @property
    def max_residual(self) -> float:
        return max(self.residuals, default=0.0)

    @property
    def all_unital(self) -> bool:
        return self.max_residual <= self.tol


def mixed_memory_unitality_check(
    dim_m: int = 2,
    dim_s: int = 2,
    samples: int = 100,
    seed: int | None = 0,
    unitaries: Sequence[OperatorLike] | None = None,
    tol: float = 1e-9,
) -> MixedMemoryReport:
    """Unitality of channels induced with the memory in ``I/dim_m``.

    Uses the given ``unitaries`` or, when absent, ``samples`` seeded random
    ones on ``dim_m * dim_s``.
    """
    if unitaries is None:
        rng = rand.make_rng(seed)
        unitaries = [rand.random_unitary(dim_m * dim_s, rng) for _ in range(samples)]
    report = MixedMemoryReport((dim_m, dim_s), tol=tol)
    mixture = maximally_mixed(dim_m)
    for u in unitaries:
        dev = MemoryDevice(u, mixture, dim_s)
        report.residuals.append(is_unital(induced_channel(dev), tol).residual)
    return report


__all__ = [
    "BoundReport",
    "ChainReport",
    "DiagonalReport",
    "MixedMemoryReport",
    "RepeatabilityReport",
    "SizeCapError",
    "UNBOUNDED",
    "check_repeatable",
    "control_blocks",
    "controlled_u_device",
    "controlled_unitary",
    "diagonal_preservation_check",
    "entropy_chain",
    "entropy_chain_check",
    "max_qubit_deficit",
    "max_repetitions",
    "mixed_memory_unitality_check",
    "probe_states",
    "repeatability_bound",
    "shift_register_device",
]
