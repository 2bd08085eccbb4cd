"""Random operators for property checks and demos."""

from __future__ import annotations

import numpy as np

from carq.dynamics import Partition
from carq.linalg import dagger


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def rand_unitary(d: int, seed=None) -> np.ndarray:
    # Haar measure via QR of a Ginibre matrix with the phase fix.
    rng = _rng(seed)
    z = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def rand_hermitian(d: int, seed=None) -> np.ndarray:
    rng = _rng(seed)
    z = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return (z + dagger(z)) / 2


def rand_density(d: int, seed=None, rank: int | None = None) -> np.ndarray:
    rng = _rng(seed)
    rank = d if rank is None else rank
    z = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = z @ dagger(z)
    return rho / np.trace(rho).real


def rand_probability(d: int, seed=None) -> np.ndarray:
    p = _rng(seed).random(d)
    return p / p.sum()


def rand_projective_partition(d: int, seed=None) -> Partition:
    """Rank-1 projections onto the columns of a Haar-random unitary."""
    v = rand_unitary(d, seed)
    return Partition(tuple(np.outer(v[:, j], v[:, j].conj()) for j in range(d)), "orthogonal-projective")


def rand_kraus_partition(d: int, k: int, seed=None) -> Partition:
    """``k`` Kraus operators from an isometry ``C^d -> C^(k d)``."""
    v = rand_unitary(k * d, seed)[:, :d]
    return Partition(tuple(v[j * d:(j + 1) * d] for j in range(k)), "kraus")


def rand_permutation_unitary(d: int, seed=None) -> np.ndarray:
    perm = _rng(seed).permutation(d)
    u = np.zeros((d, d), dtype=np.complex128)
    u[perm, np.arange(d)] = 1.0
    return u


def commuting_pair(d: int, seed=None):
    """A random unitary and a random density operator diagonal in the same basis."""
    rng = _rng(seed)
    v = rand_unitary(d, rng)
    phases = np.exp(1j * rng.uniform(0, 2 * np.pi, d))
    p = rand_probability(d, rng)
    u = (v * phases) @ dagger(v)
    rho = (v * p) @ dagger(v)
    return u, rho
