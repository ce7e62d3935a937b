"""Dense float64 linear algebra helpers and a reproducible random generator.

Matrices and vectors are plain ``numpy.ndarray`` objects of dtype float64
in C (row-major) order. The helpers here only add the shape checks the rest
of the package relies on.
"""

from __future__ import annotations

import numpy as np

from .errors import ParameterError, ShapeError

__all__ = [
    "as_matrix",
    "as_vector",
    "matvec",
    "add",
    "outer",
    "transpose_matvec",
    "Rng",
    "rng_uniform",
]


def as_matrix(data, rows: int | None = None, cols: int | None = None) -> np.ndarray:
    m = np.ascontiguousarray(data, dtype=np.float64)
    if m.ndim == 1 and rows is not None and cols is not None:
        if m.size != rows * cols:
            raise ShapeError(f"cannot reshape {m.size} values into {rows}x{cols}")
        m = m.reshape(rows, cols)
    if m.ndim != 2 or 0 in m.shape:
        raise ShapeError(f"expected a nonempty 2-D matrix, got shape {m.shape}")
    return m


def as_vector(data) -> np.ndarray:
    v = np.ascontiguousarray(data, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise ShapeError(f"expected a nonempty 1-D vector, got shape {v.shape}")
    return v


def matvec(m: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Return ``m @ v``."""
    if m.ndim != 2 or v.ndim != 1 or m.shape[1] != v.shape[0]:
        raise ShapeError(f"matvec: matrix {m.shape} incompatible with vector {v.shape}")
    return m @ v


def add(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape != b.shape:
        raise ShapeError(f"add: shapes {a.shape} and {b.shape} differ")
    return a + b


def outer(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.outer(a, b)


def transpose_matvec(m: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Return ``m.T @ v``."""
    if m.ndim != 2 or v.ndim != 1 or m.shape[0] != v.shape[0]:
        raise ShapeError(
            f"transpose_matvec: matrix {m.shape} incompatible with vector {v.shape}"
        )
    return v @ m


_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_INV_2_53 = 1.0 / (1 << 53)


def _mix64(z: int) -> int:
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


class Rng:
    """SplitMix64 generator.

    The state advances by the golden-ratio increment ``0x9E3779B97F4A7C15``
    and each output is the standard SplitMix64 finaliser of the new state.
    Floats use the top 53 bits, so ``uniform01`` lies in [0, 1). Bulk draws
    are vectorised but produce exactly the same stream as repeated scalar
    calls.
    """

    __slots__ = ("state",)

    def __init__(self, seed: int = 0):
        self.state = int(seed) & _MASK64

    def __repr__(self):
        return f"Rng(state=0x{self.state:016x})"

    def next_u64(self) -> int:
        self.state = (self.state + _GAMMA) & _MASK64
        return _mix64(self.state)

    def uniform01(self) -> float:
        return (self.next_u64() >> 11) * _INV_2_53

    def uniform(self, lo: float = 0.0, hi: float = 1.0) -> float:
        if not lo < hi:
            raise ParameterError(f"uniform bounds require lo < hi, got [{lo}, {hi})")
        x = lo + (hi - lo) * self.uniform01()
        # rounding in lo + span*u can land on hi
        return x if x < hi else float(np.nextafter(hi, lo))

    def u64_array(self, n: int) -> np.ndarray:
        if n < 0:
            raise ParameterError(f"draw count must be nonnegative, got {n}")
        steps = np.arange(1, n + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            z = np.uint64(self.state) + steps * np.uint64(_GAMMA)
            z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
            z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
            z = z ^ (z >> np.uint64(31))
        self.state = (self.state + n * _GAMMA) & _MASK64
        return z

    def uniform01_array(self, n: int) -> np.ndarray:
        return (self.u64_array(n) >> np.uint64(11)).astype(np.float64) * _INV_2_53

    def uniform_array(self, n: int, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
        if not lo < hi:
            raise ParameterError(f"uniform bounds require lo < hi, got [{lo}, {hi})")
        x = lo + (hi - lo) * self.uniform01_array(n)
        return np.minimum(x, np.nextafter(hi, lo))

    def permutation(self, n: int) -> np.ndarray:
        """Random permutation of ``range(n)`` by sorting ``n`` uniform keys."""
        keys = self.u64_array(n)
        return np.argsort(keys, kind="stable")

    def spawn(self) -> "Rng":
        """Child generator seeded from the next output of this one."""
        return Rng(self.next_u64())

    @classmethod
    def stream(cls, seed: int, stream: int) -> "Rng":
        """Generator for an independent named sub-stream of ``seed``.

        Stream 0 is ``Rng(seed)`` itself.
        """
        if stream == 0:
            return cls(seed)
        return cls(_mix64((int(seed) ^ _mix64(int(stream) & _MASK64)) & _MASK64))


def rng_uniform(rng: Rng, lo: float, hi: float) -> float:
    return rng.uniform(lo, hi)
