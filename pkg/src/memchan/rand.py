"""Seeded random states, unitaries and channels for property checks.

Unitaries come from QR of a complex Gaussian matrix with the diagonal phases
of R absorbed, which is reproducible under a seed and adequate for testing.
"""

from __future__ import annotations

import numpy as np

from .linalg import dagger


def make_rng(seed=None) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def ginibre(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    return rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))


def random_unitary(dim: int, rng=None) -> np.ndarray:
    rng = make_rng(rng)
    q, r = np.linalg.qr(ginibre(dim, dim, rng))
    phases = np.diag(r) / np.abs(np.diag(r))
    return q * phases


def random_pure_state(dim: int, rng=None) -> np.ndarray:
    rng = make_rng(rng)
    v = ginibre(dim, 1, rng)[:, 0]
    v /= np.linalg.norm(v)
    return np.outer(v, v.conj())


def random_density(dim: int, rng=None, rank: int | None = None) -> np.ndarray:
    """Random mixed state ``G G† / Tr(G G†)`` with ``G`` of shape ``dim x rank``."""
    rng = make_rng(rng)
    g = ginibre(dim, dim if rank is None else rank, rng)
    rho = g @ dagger(g)
    rho = 0.5 * (rho + dagger(rho))
    return rho / np.real(np.trace(rho))


def random_state(dim: int, rng=None) -> np.ndarray:
    """Mix of pure and full-rank states so that both regimes get exercised."""
    rng = make_rng(rng)
    if rng.random() < 0.3:
        return random_pure_state(dim, rng)
    return random_density(dim, rng)


def random_probs(k: int, rng=None) -> np.ndarray:
    rng = make_rng(rng)
    p = rng.dirichlet(np.ones(k))
    return p / p.sum()


def random_hermitian(dim: int, rng=None) -> np.ndarray:
    rng = make_rng(rng)
    g = ginibre(dim, dim, rng)
    return 0.5 * (g + dagger(g))
