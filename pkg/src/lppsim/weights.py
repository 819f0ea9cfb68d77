"""Reproducible i.i.d. Exp(1) vertex weights, hashed from (seed, coordinate).

The weight at a lattice point is a pure function of the field seed and the
point: a splitmix64-style chain mixes (seed, y, x) into 64 bits, the top 53
bits form a uniform u on [0, 1 - 2^-53], and the weight is -ln(1 - u).
Nothing is ever materialized, so any operation can read any vertex and
independent trials are embarrassingly parallel.

The exact chain (see _kernels.coord_hash, frozen by golden fixtures):

    h = mix64(seed + GAMMA); h = mix64((h ^ y) + GAMMA); h = mix64((h ^ x) + GAMMA)

with mix64 the splitmix64 finalizer, GAMMA = 0x9E3779B97F4A7C15, and signed
coordinates reduced to two's complement.  The log is numpy's log1p ufunc,
which is identical for scalar and vectorized evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _kernels
from .errors import DomainError

_U64 = (1 << 64) - 1
GOLDEN_GAMMA = _kernels.GOLDEN_GAMMA
UNIFORM_SCALE = 2.0 ** -53


class LatticePoint(NamedTuple):
    x: int
    y: int

    def depth(self) -> int:
        """d(p) = x + y; one up-right step increases it by exactly 1."""
        return self.x + self.y


def as_point(p) -> LatticePoint:
    """Coerce any (x, y) pair to a LatticePoint."""
    return LatticePoint(int(p[0]), int(p[1]))


def depth(p) -> int:
    return int(p[0]) + int(p[1])


def mix64(z: int) -> int:
    """Pure-Python splitmix64 finalizer; bit-identical to the numba kernel."""
    z &= _U64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _U64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _U64
    return z ^ (z >> 31)


def coord_hash(seed: int, x: int, y: int) -> int:
    """Pure-Python mirror of _kernels.coord_hash (reference for tests)."""
    h = mix64((seed + GOLDEN_GAMMA) & _U64)
    h = mix64(((h ^ (y & _U64)) + GOLDEN_GAMMA) & _U64)
    return mix64(((h ^ (x & _U64)) + GOLDEN_GAMMA) & _U64)


def exp_inverse_cdf(u: float) -> float:
    """Inverse CDF of Exp(1): -ln(1 - u), strictly increasing on [0, 1)."""
    if not 0.0 <= u < 1.0:
        raise DomainError(f"exp_inverse_cdf requires 0 <= u < 1, got {u!r}")
    return float(-np.log1p(-u))


@dataclass(frozen=True)
class WeightField:
    """An i.i.d. Exp(1) environment on Z^2, determined entirely by its seed."""

    seed: int

    def __post_init__(self):
        if not 0 <= self.seed <= _U64:
            raise DomainError(f"seed must fit in 64 bits, got {self.seed!r}")

    @property
    def sampler(self):
        return self.weight

    def weight(self, p) -> float:
        x, y = int(p[0]), int(p[1])
        u = (coord_hash(self.seed, x, y) >> 11) * UNIFORM_SCALE
        return float(-np.log1p(-u))

    def fill_block(self, lo, out: np.ndarray) -> np.ndarray:
        """Fill out[j, i] with the weight at (lo.x + i, lo.y + j)."""
        _kernels.fill_neg_uniforms(np.uint64(self.seed), int(lo[0]), int(lo[1]), out)
        np.log1p(out, out=out)
        np.negative(out, out=out)
        return out

    def block(self, lo, shape: tuple[int, int]) -> np.ndarray:
        """Dense (ny, nx) block of weights anchored at lo."""
        return self.fill_block(lo, np.empty(shape, np.float64))


@dataclass(frozen=True)
class ArrayField:
    """Explicit weights on a finite rectangle, for fixtures and oracles.

    values[j, i] is the weight at (lo.x + i, lo.y + j); queries outside the
    rectangle are a domain error.
    """

    values: np.ndarray
    lo: LatticePoint = LatticePoint(0, 0)

    @staticmethod
    def from_rows(rows, lo=(0, 0)) -> "ArrayField":
        return ArrayField(np.asarray(rows, dtype=np.float64), as_point(lo))

    @property
    def sampler(self):
        return self.weight

    def weight(self, p) -> float:
        j = int(p[1]) - self.lo.y
        i = int(p[0]) - self.lo.x
        ny, nx = self.values.shape
        if not (0 <= i < nx and 0 <= j < ny):
            raise DomainError(f"point {tuple(p)} outside explicit field")
        return float(self.values[j, i])

    def fill_block(self, lo, out: np.ndarray) -> np.ndarray:
        ny, nx = out.shape
        j0 = int(lo[1]) - self.lo.y
        i0 = int(lo[0]) - self.lo.x
        vy, vx = self.values.shape
        if not (0 <= i0 and 0 <= j0 and i0 + nx <= vx and j0 + ny <= vy):
            raise DomainError("requested block leaves the explicit field")
        out[:, :] = self.values[j0:j0 + ny, i0:i0 + nx]
        return out

    def block(self, lo, shape: tuple[int, int]) -> np.ndarray:
        return self.fill_block(lo, np.empty(shape, np.float64))


def weight_at(field, p) -> float:
    """Weight of the environment `field` at lattice point p."""
    return field.weight(p)
