"""Dense operator primitives: tensor products, partial traces, spectra, entropies.

All entropies are in bits (log base 2). Bipartite spaces are ordered
memory first, system second, so ``tensor(xi, rho)`` is the joint state of a
memory ``xi`` and an input ``rho``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

DEFAULT_TOL = 1e-9
TOL_ENV_VAR = "MEMCHAN_TOLERANCE"

MEMORY = 0
SYSTEM = 1


def default_tol() -> float:
    """Global numeric tolerance, overridable through ``MEMCHAN_TOLERANCE``."""
    raw = os.environ.get(TOL_ENV_VAR)
    if raw is None or raw.strip() == "":
        return DEFAULT_TOL
    value = float(raw)
    if not value > 0:
        raise ValueError(f"{TOL_ENV_VAR} must be positive, got {raw!r}")
    return value


class ValidationError(ValueError):
    """An operator failed an invariant check.

    ``invariant`` names the violated property and ``residual`` is the measured
    violation, so borderline inputs can be diagnosed.
    """

    def __init__(self, invariant: str, residual: float, tol: float, message: str = ""):
        self.invariant = invariant
        self.residual = float(residual)
        self.tol = float(tol)
        text = f"{invariant} violated: residual {self.residual:.3e} exceeds tolerance {self.tol:.1e}"
        if message:
            text = f"{text} ({message})"
        super().__init__(text)


class DimensionError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """A validated density matrix. Build it through :func:`validate_density`."""

    matrix: np.ndarray
    tol: float = DEFAULT_TOL

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.matrix
        return self.matrix.astype(dtype)

    def __repr__(self) -> str:
        return f"DensityOperator(dim={self.dim})"


@dataclass(frozen=True, eq=False)
class UnitaryOperator:
    matrix: np.ndarray
    tol: float = DEFAULT_TOL

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.matrix
        return self.matrix.astype(dtype)

    def __repr__(self) -> str:
        return f"UnitaryOperator(dim={self.dim})"


OperatorLike = Union[np.ndarray, DensityOperator, UnitaryOperator, Sequence]


def as_matrix(m: OperatorLike) -> np.ndarray:
    """Coerce to a 2-D complex array without validating anything else."""
    if isinstance(m, (DensityOperator, UnitaryOperator)):
        return m.matrix
    arr = np.asarray(m, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionError(f"expected a non-empty 2-D matrix, got shape {arr.shape}")
    return arr


def _as_square(m: OperatorLike) -> np.ndarray:
    arr = as_matrix(m)
    if arr.shape[0] != arr.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {arr.shape}")
    return arr


def dagger(m: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(m, -1, -2))


def hermitian_residual(m: OperatorLike) -> float:
    arr = _as_square(m)
    return float(np.max(np.abs(arr - dagger(arr))))


def tensor(a: OperatorLike, b: OperatorLike) -> np.ndarray:
    """Kronecker product with ``(a ⊗ b)[i*db + k, j*db + l] = a[i, j] * b[k, l]``."""
    a, b = as_matrix(a), as_matrix(b)
    return (a[:, None, :, None] * b[None, :, None, :]).reshape(
        a.shape[0] * b.shape[0], a.shape[1] * b.shape[1]
    )


def _check_space(arr: np.ndarray, dims: Sequence[int]) -> tuple[int, int]:
    if len(dims) != 2:
        raise DimensionError(f"only bipartite spaces are supported, got factors {tuple(dims)}")
    d0, d1 = (int(d) for d in dims)
    if d0 < 1 or d1 < 1:
        raise DimensionError(f"factor dimensions must be positive, got {(d0, d1)}")
    if arr.shape != (d0 * d1, d0 * d1):
        raise DimensionError(
            f"matrix of shape {arr.shape} does not match product space {d0}x{d1}={d0 * d1}"
        )
    return d0, d1


def partial_trace(m: OperatorLike, dims: Sequence[int], keep: int) -> np.ndarray:
    """Reduce a bipartite operator onto one factor.

    Args:
        m: square matrix on the product space.
        dims: ``(dim_memory, dim_system)``.
        keep: :data:`MEMORY` (0) or :data:`SYSTEM` (1), the factor to keep.

    Returns:
        The reduced matrix on the kept factor. Its trace equals ``Tr(m)``.
    """
    arr = _as_square(m)
    d0, d1 = _check_space(arr, dims)
    blocks = arr.reshape(d0, d1, d0, d1)
    if keep == MEMORY:
        return np.einsum("ikjk->ij", blocks)
    if keep == SYSTEM:
        return np.einsum("kikj->ij", blocks)
    raise ValueError(f"keep must be MEMORY (0) or SYSTEM (1), got {keep!r}")


def eigh(m: OperatorLike, tol: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix, eigenvalues in descending order.

    The input is symmetrized before calling LAPACK so that noise within
    ``tol`` does not leak into the spectrum.
    """
    tol = default_tol() if tol is None else tol
    arr = _as_square(m)
    residual = hermitian_residual(arr)
    scale = max(1.0, float(np.max(np.abs(arr))))
    if residual > tol * scale:
        raise ValidationError("hermiticity", residual, tol * scale)
    vals, vecs = np.linalg.eigh(0.5 * (arr + dagger(arr)))
    return vals[::-1].copy(), vecs[:, ::-1].copy()


def validate_density(m: OperatorLike, tol: float | None = None) -> DensityOperator:
    """Check hermiticity, unit trace and positivity; return a :class:`DensityOperator`."""
    tol = default_tol() if tol is None else tol
    if isinstance(m, DensityOperator) and m.tol <= tol:
        return m
    arr = _as_square(m)
    residual = hermitian_residual(arr)
    if residual > tol:
        raise ValidationError("hermiticity", residual, tol)
    trace_err = abs(np.trace(arr) - 1.0)
    if trace_err > tol:
        raise ValidationError("unit trace", trace_err, tol)
    herm = 0.5 * (arr + dagger(arr))
    min_eig = float(np.linalg.eigvalsh(herm)[0])
    if min_eig < -tol:
        raise ValidationError("positivity", -min_eig, tol, f"minimum eigenvalue {min_eig:.3e}")
    return DensityOperator(herm, tol)


def validate_unitary(m: OperatorLike, tol: float | None = None) -> UnitaryOperator:
    tol = default_tol() if tol is None else tol
    if isinstance(m, UnitaryOperator) and m.tol <= tol:
        return m
    arr = _as_square(m)
    residual = float(np.max(np.abs(dagger(arr) @ arr - np.eye(arr.shape[0]))))
    if residual > tol:
        raise ValidationError("unitarity", residual, tol)
    return UnitaryOperator(arr, tol)


def shannon_entropy(probs: Sequence[float]) -> float:
    p = np.asarray(probs, dtype=float)
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p))) + 0.0


def _clamped_spectrum(rho: OperatorLike, tol: float | None) -> np.ndarray:
    # PSD noise in [-tol, 0) is clamped so entropies never go NaN
    state = validate_density(rho, tol)
    vals = np.linalg.eigvalsh(state.matrix)
    return np.clip(vals, 0.0, None)


def von_neumann_entropy(rho: OperatorLike, tol: float | None = None) -> float:
    """``S(rho) = -Tr[rho log2 rho]`` in bits, with ``0 log 0 = 0``."""
    vals = _clamped_spectrum(rho, tol)
    return max(0.0, shannon_entropy(vals))


def relative_entropy(rho: OperatorLike, omega: OperatorLike, tol: float | None = None) -> float:
    """Quantum relative entropy ``S(rho||omega) = Tr[rho (log2 rho - log2 omega)]``.

    Returns ``math.inf`` when the support of ``rho`` is not contained in the
    support of ``omega``.
    """
    tol = default_tol() if tol is None else tol
    r = validate_density(rho, tol).matrix
    w = validate_density(omega, tol).matrix
    if r.shape != w.shape:
        raise DimensionError(f"dimension mismatch: {r.shape} vs {w.shape}")

    r_vals, r_vecs = np.linalg.eigh(r)
    w_vals, w_vecs = np.linalg.eigh(w)
    r_vals = np.clip(r_vals, 0.0, None)
    w_vals = np.clip(w_vals, 0.0, None)

    kernel = w_vecs[:, w_vals <= tol]
    if kernel.size and float(np.real(np.trace(dagger(kernel) @ r @ kernel))) > tol:
        return float("inf")

    neg_entropy = -shannon_entropy(r_vals)
    # overlap[i, j] = |<r_i|w_j>|^2
    overlap = np.abs(dagger(r_vecs) @ w_vecs) ** 2
    support = w_vals > tol
    log_w = np.zeros_like(w_vals)
    log_w[support] = np.log2(w_vals[support])
    cross = float(r_vals @ overlap[:, support] @ log_w[support])
    return max(0.0, neg_entropy - cross)


def maximally_mixed(dim: int) -> np.ndarray:
    return np.eye(dim, dtype=complex) / dim


def ket_to_density(psi: Sequence[complex]) -> np.ndarray:
    v = np.asarray(psi, dtype=complex).reshape(-1)
    v = v / np.linalg.norm(v)
    return np.outer(v, v.conj())


def trace_norm(m: OperatorLike) -> float:
    """Sum of singular values; uses the spectrum directly for Hermitian input."""
    arr = _as_square(m)
    if hermitian_residual(arr) <= 1e-12 * max(1.0, float(np.max(np.abs(arr)))):
        return float(np.sum(np.abs(np.linalg.eigvalsh(0.5 * (arr + dagger(arr))))))
    return float(np.sum(np.linalg.svd(arr, compute_uv=False)))


def sqrtm_psd(m: OperatorLike) -> np.ndarray:
    vals, vecs = np.linalg.eigh(0.5 * (as_matrix(m) + dagger(as_matrix(m))))
    return (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ dagger(vecs)


def permutation_unitary(dims: Sequence[int], perm: Sequence[int]) -> np.ndarray:
    """Unitary that moves tensor factor ``perm[k]`` into position ``k``.

    For product vectors, ``P (v_0 ⊗ ... ⊗ v_{n-1}) = v_{perm[0]} ⊗ ... ⊗ v_{perm[n-1]}``.
    """
    dims = [int(d) for d in dims]
    if sorted(perm) != list(range(len(dims))):
        raise ValueError(f"{perm!r} is not a permutation of {len(dims)} factors")
    total = int(np.prod(dims))
    idx = np.arange(total).reshape(dims)
    src = np.transpose(idx, perm).reshape(-1)
    out = np.zeros((total, total), dtype=complex)
    out[np.arange(total), src] = 1.0
    return out


PAULI_I = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (PAULI_X, PAULI_Y, PAULI_Z)

SWAP = permutation_unitary([2, 2], [1, 0])
