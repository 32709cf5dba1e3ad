"""Counter-based random streams.

Every stochastic routine in the package draws from a stream keyed by
``(seed, label, index)`` so that results are reproducible for a fixed seed
no matter how samples are scheduled or parallelized.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["stream", "haar_state", "random_density", "random_hermitian"]


def _key(seed: int, label: str, index: int) -> int:
    h = hashlib.blake2b(digest_size=16)
    h.update(str(seed).encode())
    h.update(b"\x00")
    h.update(label.encode())
    h.update(b"\x00")
    h.update(str(index).encode())
    return int.from_bytes(h.digest(), "little")


def stream(seed: int, label: str, index: int = 0) -> np.random.Generator:
    """Independent Philox stream for sample `index` of experiment `label`."""
    return np.random.Generator(np.random.Philox(key=_key(seed, label, index)))


def random_hermitian(rng: np.random.Generator, dim: int) -> np.ndarray:
    m = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return (m + m.conj().T) / 2


def haar_state(rng: np.random.Generator, dim: int) -> np.ndarray:
    """Haar-random pure state vector."""
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def random_density(rng: np.random.Generator, dim: int, full_rank: bool = True) -> np.ndarray:
    """Hilbert-Schmidt-ensemble density matrix, floored to full rank if asked."""
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = g @ g.conj().T
    rho /= np.trace(rho).real
    if full_rank:
        eps = 1e-6
        rho = (1 - eps) * rho + eps * np.eye(dim) / dim
    return rho
