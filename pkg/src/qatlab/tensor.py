"""Dense float64 tensors and the seeded generator used everywhere else.

Tensors are immutable: the backing array is marked read-only, and every
operation returns a new Tensor.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import EmptyTensorError, ShapeMismatchError

RNG_ALGORITHM = "PCG64"


class Tensor:
    """Row-major float64 array with a fixed shape."""

    __slots__ = ("_array",)

    def __init__(self, data, shape: Sequence[int] | None = None):
        arr = np.array(data, dtype=np.float64)
        if shape is not None:
            shape = tuple(int(d) for d in shape)
            if any(d < 1 for d in shape):
                raise EmptyTensorError(f"shape entries must be >= 1, got {shape}")
            if arr.size != int(np.prod(shape)):
                raise ShapeMismatchError(
                    f"data length {arr.size} does not match shape {shape}"
                )
            arr = arr.reshape(shape)
        elif arr.ndim == 0:
            arr = arr.reshape(1)
        if arr.size == 0:
            raise EmptyTensorError("tensor must have at least one element")
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        self._array = arr

    @classmethod
    def _wrap(cls, arr: np.ndarray) -> "Tensor":
        # Trusted constructor for arrays produced inside this package.
        t = cls.__new__(cls)
        arr = np.ascontiguousarray(arr, dtype=np.float64)
        if arr.size == 0:
            raise EmptyTensorError("tensor must have at least one element")
        if arr.ndim == 0:
            arr = arr.reshape(1)
        arr.flags.writeable = False
        t._array = arr
        return t

    @property
    def shape(self) -> tuple[int, ...]:
        return self._array.shape

    @property
    def size(self) -> int:
        return self._array.size

    @property
    def data(self) -> np.ndarray:
        """Flat read-only view of the elements."""
        return self._array.reshape(-1)

    @property
    def array(self) -> np.ndarray:
        """Read-only n-d view; copy before mutating."""
        return self._array

    def tolist(self):
        return self._array.tolist()

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self._array
        return self._array.astype(dtype)

    def __len__(self) -> int:
        return self._array.shape[0]

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, data={self._array.tolist()!r})"


def as_tensor(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(x)


def zeros(*shape: int) -> Tensor:
    return Tensor._wrap(np.zeros(shape))


def ones(*shape: int) -> Tensor:
    return Tensor._wrap(np.ones(shape))


def identity(n: int) -> Tensor:
    return Tensor._wrap(np.eye(n))


def tensor_map(t: Tensor, f: Callable[[float], float]) -> Tensor:
    """Apply ``f`` to every element. numpy ufuncs are applied directly."""
    t = as_tensor(t)
    if isinstance(f, np.ufunc):
        out = f(t.array)
    else:
        out = np.vectorize(f, otypes=[np.float64])(t.array)
    return Tensor._wrap(np.asarray(out, dtype=np.float64).reshape(t.shape))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.array.ndim != 2 or b.array.ndim != 2:
        raise ShapeMismatchError(f"matmul needs 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeMismatchError(f"inner dimensions differ: {a.shape} @ {b.shape}")
    return Tensor._wrap(a.array @ b.array)


_REDUCERS: dict[str, Callable[[np.ndarray], float]] = {
    "sum": lambda v: float(np.sum(v)),
    "mean": lambda v: float(np.mean(v)),
    "l2norm": lambda v: float(np.sqrt(np.sum(v * v))),
    "max_abs": lambda v: float(np.max(np.abs(v))),
}


def reduce(t, kind: str) -> float:
    """Reduce all elements to a scalar: ``sum``, ``mean``, ``l2norm`` or ``max_abs``."""
    if kind not in _REDUCERS:
        raise ValueError(f"unknown reduction {kind!r}; expected one of {sorted(_REDUCERS)}")
    if not isinstance(t, Tensor):
        v = np.asarray(t, dtype=np.float64)
        if v.size == 0:
            raise EmptyTensorError(f"cannot reduce an empty tensor ({kind})")
    else:
        v = t.data
    return _REDUCERS[kind](v)


@dataclass(frozen=True)
class Rng:
    """Seeded, splittable PCG64 stream.

    ``child(i)`` derives an independent stream from (seed, path + (i,)), so a
    shard's samples never depend on how many siblings were created.
    """

    seed: int
    spawn_key: tuple[int, ...] = ()

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @property
    def algorithm(self) -> str:
        return RNG_ALGORITHM

    def child(self, index: int) -> "Rng":
        return Rng(self.seed, self.spawn_key + (int(index),))

    def children(self, indices: Iterable[int]) -> list["Rng"]:
        return [self.child(i) for i in indices]

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=self.spawn_key)
        return np.random.Generator(np.random.PCG64(ss))
