"""Seed-addressable exponential environment on the lattice.

Weights are never stored.  Each vertex weight is ``-log(U)`` where ``U`` is a
keyed splitmix64 hash of ``(master_seed, x, y, stream)`` mapped to (0, 1); the
diagonal ``x == y`` carries rate ``r`` instead of 1.  In coupled mode the
diagonal draw reuses the off-diagonal stream and is divided by ``r``, so the
whole field is pointwise non-increasing in ``r``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _kernels

MASK64 = (1 << 64) - 1


class VertexId(NamedTuple):
    x: int
    y: int


def precedes(u, v) -> bool:
    """Coordinate-wise order ``u <= v``."""
    return u[0] <= v[0] and u[1] <= v[1]


def _mix64(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def _key(master_seed: int) -> int:
    return _mix64((master_seed + 0x9E3779B97F4A7C15) & MASK64)


@dataclass(frozen=True)
class WeightField:
    """Immutable lattice environment.

    ``coupling_mode`` is ``"coupled"`` (default) or ``"independent"``; the
    latter draws the diagonal from its own counter stream.
    """

    master_seed: int
    diagonal_rate: float = 1.0
    coupling_mode: str = "coupled"

    def __post_init__(self):
        if not 0 <= int(self.master_seed) <= MASK64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")
        if not 0.0 < float(self.diagonal_rate) <= 1.0:
            raise ValueError("diagonal_rate must lie in (0, 1]")
        if self.coupling_mode not in ("coupled", "independent"):
            raise ValueError("coupling_mode must be 'coupled' or 'independent'")
        object.__setattr__(self, "master_seed", int(self.master_seed))
        object.__setattr__(self, "diagonal_rate", float(self.diagonal_rate))

    @property
    def key(self) -> np.uint64:
        return np.uint64(_key(self.master_seed))

    @property
    def mode_code(self) -> int:
        return _kernels.COUPLED if self.coupling_mode == "coupled" else _kernels.INDEPENDENT

    def with_rate(self, r: float) -> "WeightField":
        return WeightField(self.master_seed, r, self.coupling_mode)

    def weight_at(self, v) -> float:
        return weight_at(self, v)

    def block(self, low, high) -> np.ndarray:
        """Weights on the rectangle ``low..high`` as an array ``[x, y]``."""
        nx = high[0] - low[0] + 1
        ny = high[1] - low[1] + 1
        arr = _kernels.fill_weights(
            self.key, self.diagonal_rate, self.mode_code, low[0], low[1], nx, ny
        )
        return arr.T


@dataclass(frozen=True)
class ExplicitWeights:
    """Hand-specified weights on a finite rectangle (tests and oracles).

    ``values`` is indexed ``[x - origin.x, y - origin.y]``.
    """

    values: np.ndarray
    origin: tuple = (0, 0)

    def __post_init__(self):
        arr = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        if arr.ndim != 2:
            raise ValueError("explicit weights must be a 2-d array")
        if not np.all(arr > 0):
            raise ValueError("weights must be positive")
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "origin", VertexId(*self.origin))

    @property
    def high(self) -> VertexId:
        return VertexId(
            self.origin.x + self.values.shape[0] - 1, self.origin.y + self.values.shape[1] - 1
        )

    def contains(self, v) -> bool:
        return precedes(self.origin, v) and precedes(v, self.high)

    def weight_at(self, v) -> float:
        if not self.contains(v):
            raise IndexError(f"vertex {tuple(v)} outside explicit rectangle")
        return float(self.values[v[0] - self.origin.x, v[1] - self.origin.y])

    def block(self, low, high) -> np.ndarray:
        ox, oy = self.origin
        return self.values[low[0] - ox : high[0] - ox + 1, low[1] - oy : high[1] - oy + 1]


def weight_at(field, v) -> float:
    """Weight of vertex ``v``; pure in ``(field, v)``."""
    if isinstance(field, ExplicitWeights):
        return field.weight_at(v)
    return float(
        _kernels.field_weight(field.key, field.diagonal_rate, field.mode_code, int(v[0]), int(v[1]))
    )


def derive_replica_seed(master_seed: int, replica_index: int) -> int:
    """Seed for replica ``replica_index``.

    ``mix64(mix64(master + golden) + (i + 1) * golden)``: both mixes are
    bijections on 64-bit words and the golden-ratio step is odd, so the map is
    injective in ``i`` for a fixed master seed.  Frozen for reproducibility.
    """
    if replica_index < 0:
        raise ValueError("replica_index must be non-negative")
    base = _mix64((int(master_seed) + 0x9E3779B97F4A7C15) & MASK64)
    return _mix64((base + (replica_index + 1) * 0x9E3779B97F4A7C15) & MASK64)
