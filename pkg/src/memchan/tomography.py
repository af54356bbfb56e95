"""Six-probe qubit process tomography run against a memory device.

The device is used as a black box: probe states go in, outputs come out,
and the memory is never reset between uses. An affine Bloch map is fitted
by least squares to the per-probe mean outputs. For a device whose memory
matters, the estimate depends on the order in which probes are fed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import (
    KrausChannel,
    affine_to_choi,
    bloch_vector,
    choi_distance,
    choi_to_kraus,
    depolarizing,
    identity_channel,
)
from .device import MemoryDevice, use_once
from .linalg import DimensionError, dagger, ket_to_density, sqrtm_psd, validate_density

DEFAULT_SEED = 0xC0FFEE
DEFAULT_MAX_USES = 1_000_000
PROBE_LABELS = ("+x", "-x", "+y", "-y", "+z", "-z")
PROBE_BLOCH = np.array(
    [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]], dtype=float
)


def pauli_probes() -> list[np.ndarray]:
    """Eigenstates of X, Y, Z as density matrices, ordered +x, -x, +y, -y, +z, -z."""
    s = 1 / np.sqrt(2)
    kets = [
        [s, s],
        [s, -s],
        [s, 1j * s],
        [s, -1j * s],
        [1, 0],
        [0, 1],
    ]
    return [ket_to_density(k) for k in kets]


@dataclass(frozen=True)
class ProbeStrategy:
    """How probes are scheduled.

    ``sequential`` feeds ``shots_per_probe`` copies of each probe in turn;
    ``randomized`` draws ``6 * shots_per_probe`` probes uniformly with ``seed``.
    """

    kind: str = "sequential"
    shots_per_probe: int = 100
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        if self.kind not in ("sequential", "randomized"):
            raise ValueError(f"unknown probe strategy {self.kind!r}")
        if int(self.shots_per_probe) < 1:
            raise ValueError(f"shots_per_probe must be at least 1, got {self.shots_per_probe}")


@dataclass
class TomographyResult:
    strategy: ProbeStrategy
    mode: str
    bloch_map: np.ndarray
    bloch_shift: np.ndarray
    choi: np.ndarray
    estimated: KrausChannel | None
    min_choi_eigenvalue: float
    dist_to_identity: float
    dist_to_depolarizing: float
    probe_means: np.ndarray
    probe_counts: list[int]
    projected: bool = False
    uses: int = 0

    @property
    def completely_positive(self) -> bool:
        return self.estimated is not None


def _schedule(strategy: ProbeStrategy, rng: np.random.Generator) -> np.ndarray:
    n = int(strategy.shots_per_probe)
    if strategy.kind == "sequential":
        return np.repeat(np.arange(6), n)
    return rng.integers(0, 6, size=6 * n)


def _sample_bloch(outputs: list[np.ndarray], rng: np.random.Generator) -> np.ndarray:
    """Estimate a Bloch vector with one Pauli measurement per output, bases round-robin."""
    sums = np.zeros(3)
    counts = np.zeros(3)
    for i, out in enumerate(outputs):
        axis = i % 3
        expectation = bloch_vector(out)[axis]
        p_plus = min(1.0, max(0.0, (1.0 + expectation) / 2.0))
        sums[axis] += 1.0 if rng.random() < p_plus else -1.0
        counts[axis] += 1
    return np.divide(sums, counts, out=np.zeros(3), where=counts > 0)


def fit_affine(inputs: np.ndarray, outputs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares ``outputs ≈ inputs @ A.T + b`` over Bloch-vector pairs."""
    design = np.column_stack([inputs, np.ones(len(inputs))])
    coef, *_ = np.linalg.lstsq(design, outputs, rcond=None)
    return coef[:3].T.copy(), coef[3].copy()


def project_cptp(choi: np.ndarray) -> np.ndarray:
    """Clip negative Choi eigenvalues, then rescale the input side to restore TP."""
    d = int(round(np.sqrt(choi.shape[0])))
    vals, vecs = np.linalg.eigh(0.5 * (choi + dagger(choi)))
    clipped = (vecs * np.clip(vals, 0.0, None)) @ dagger(vecs)
    marginal = d * np.einsum("iaja->ij", clipped.reshape(d, d, d, d))
    inv_sqrt = np.linalg.pinv(sqrtm_psd(marginal))
    fix = np.kron(inv_sqrt, np.eye(d))
    return fix @ clipped @ dagger(fix)


@dataclass
class ProbeRecord:
    """Raw outputs of one tomography run, grouped by probe index."""

    strategy: ProbeStrategy
    order: np.ndarray
    outputs: list[list[np.ndarray]]

    @property
    def uses(self) -> int:
        return len(self.order)


def collect_probe_outputs(
    dev: MemoryDevice, strategy: ProbeStrategy, max_uses: int = DEFAULT_MAX_USES
) -> ProbeRecord:
    """Feed probes through the device in strategy order, never resetting it."""
    if dev.dim_s != 2:
        raise DimensionError(f"six-probe tomography needs a qubit system, got dimension {dev.dim_s}")
    total = 6 * int(strategy.shots_per_probe)
    if total > max_uses:
        raise ValueError(f"{total} device uses exceed the cap of {max_uses}")
    order_seq, _ = np.random.SeedSequence(strategy.seed).spawn(2)
    order = _schedule(strategy, np.random.default_rng(order_seq))
    probes = [validate_density(p) for p in pauli_probes()]
    outputs: list[list[np.ndarray]] = [[] for _ in probes]
    current = dev
    for k in order:
        out, current = use_once(current, probes[k])
        outputs[k].append(out.matrix)
    return ProbeRecord(strategy, order, outputs)


def reconstruct(record: ProbeRecord, mode: str = "exact", project: bool = False) -> TomographyResult:
    """Fit the affine Bloch map to a probe record.

    In ``exact`` mode each probe's mean output is computed exactly; in
    ``sampled`` mode every use contributes one ±1 outcome of X, Y or Z,
    drawn from a generator derived from the strategy seed. Estimates that
    are not completely positive are kept as raw Choi matrices unless
    ``project`` is set.
    """
    if mode not in ("exact", "sampled"):
        raise ValueError(f"mode must be 'exact' or 'sampled', got {mode!r}")
    _, sample_seq = np.random.SeedSequence(record.strategy.seed).spawn(2)
    sampler = np.random.default_rng(sample_seq)
    outputs = record.outputs
    seen = [k for k in range(6) if outputs[k]]
    if mode == "exact":
        means = np.array([bloch_vector(np.mean(outputs[k], axis=0)) for k in seen])
    else:
        means = np.array([_sample_bloch(outputs[k], sampler) for k in seen])
    a, b = fit_affine(PROBE_BLOCH[seen], means)
    choi = affine_to_choi(a, b)
    if project:
        choi = project_cptp(choi)
    min_eig = float(np.linalg.eigvalsh(choi)[0])
    estimated = choi_to_kraus(choi) if min_eig >= -1e-9 else None

    full_means = np.full((6, 3), np.nan)
    full_means[seen] = means
    return TomographyResult(
        strategy=record.strategy,
        mode=mode,
        bloch_map=a,
        bloch_shift=b,
        choi=choi,
        estimated=estimated,
        min_choi_eigenvalue=min_eig,
        dist_to_identity=choi_distance(choi, identity_channel(2)),
        dist_to_depolarizing=choi_distance(choi, depolarizing(1.0)),
        probe_means=full_means,
        probe_counts=[len(o) for o in outputs],
        projected=project,
        uses=record.uses,
    )


def run_tomography(
    dev: MemoryDevice,
    strategy: ProbeStrategy,
    mode: str = "exact",
    project: bool = False,
    max_uses: int = DEFAULT_MAX_USES,
) -> TomographyResult:
    """Estimate the qubit channel a device appears to implement."""
    if mode not in ("exact", "sampled"):
        raise ValueError(f"mode must be 'exact' or 'sampled', got {mode!r}")
    return reconstruct(collect_probe_outputs(dev, strategy, max_uses), mode, project)


@dataclass
class StrategyComparison:
    sequential: TomographyResult
    randomized: TomographyResult
    distance: float = field(default=0.0)


def compare_strategies(
    dev: MemoryDevice, shots_per_probe: int, seed: int = DEFAULT_SEED, mode: str = "exact", project: bool = False
) -> StrategyComparison:
    """Tomograph the same device twice, probes in blocks and probes shuffled."""
    seq = run_tomography(dev, ProbeStrategy("sequential", shots_per_probe, seed), mode, project)
    rnd = run_tomography(dev, ProbeStrategy("randomized", shots_per_probe, seed), mode, project)
    return StrategyComparison(seq, rnd, choi_distance(seq.choi, rnd.choi))
