"""Float32 tensor helpers and deterministic random number generation.

All numeric state in this package is carried by plain ``numpy.ndarray``
objects with dtype float32 and row-major (C) layout; ``Tensor`` is an alias
documenting that contract.  Randomness always flows through :class:`Prng`,
which wraps numpy's PCG64 so that a seed fully determines every draw on
every platform.
"""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np

from .errors import ShapeMismatchError

Tensor = np.ndarray

F32 = np.float32


def product(shape: Iterable[int]) -> int:
    return math.prod(shape)


def as_f32(data, shape: Sequence[int] | None = None) -> Tensor:
    """Materialize ``data`` as a contiguous float32 array, optionally reshaped."""
    arr = np.ascontiguousarray(data, dtype=F32)
    if shape is not None:
        arr = reshape(arr, shape)
    return arr


def reshape(t: Tensor, new_shape: Sequence[int]) -> Tensor:
    """Reinterpret ``t`` with ``new_shape``; element count must be unchanged.

    Returns a view whenever the input is contiguous (no copy).
    """
    new_shape = tuple(int(d) for d in new_shape)
    if product(new_shape) != t.size:
        raise ShapeMismatchError(
            f"cannot reshape {tuple(t.shape)} ({t.size} elements) "
            f"to {new_shape} ({product(new_shape)} elements)"
        )
    return t.reshape(new_shape)


class Prng:
    """Deterministic random source backed by PCG64.

    Equal seeds produce equal streams across runs and platforms.  ``derive``
    builds statistically independent child generators from integer tags, so
    subsystems (init, shuffling, dropout) can be reseeded independently
    without consuming each other's draws.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._spawn_key: tuple[int, ...] = ()
        self._gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence(self.seed)))

    def derive(self, *tags: int) -> "Prng":
        child = object.__new__(Prng)
        child.seed = self.seed
        child._spawn_key = self._spawn_key + tuple(int(t) for t in tags)
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=child._spawn_key)
        child._gen = np.random.Generator(np.random.PCG64(seq))
        return child

    def normal(self, shape: Sequence[int] | int, std: float = 1.0) -> Tensor:
        return (self._gen.standard_normal(size=shape) * std).astype(F32)

    def uniform(self, shape: Sequence[int] | int) -> Tensor:
        return self._gen.random(size=shape, dtype=np.float32)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def integers(self, low: int, high: int, size=None):
        return self._gen.integers(low, high, size=size)

    def __repr__(self) -> str:  # pragma: no cover
        return f"Prng(seed={self.seed}, spawn_key={self._spawn_key})"


def sample_indices_without_replacement(p: Prng, pool_size: int, k: int) -> list[int]:
    """Draw ``k`` distinct indices from ``range(pool_size)``.

    Slicing a fresh permutation keeps the exhaustion guarantee: consuming a
    permutation in consecutive chunks visits every index exactly once.
    """
    if k < 0 or pool_size < 0:
        raise ValueError("pool_size and k must be non-negative")
    if k > pool_size:
        raise ValueError(f"cannot draw {k} distinct indices from a pool of {pool_size}")
    return p.permutation(pool_size)[:k].tolist()
