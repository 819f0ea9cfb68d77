"""Passage-time dynamic programming, geodesic extraction, and the
exhaustive small-lattice oracle.

A single reverse sweep anchored at the sink serves every start point in the
same environment, which is exactly the coupling the coalescence experiments
need.  Backtracking compares grid values exactly (no epsilon): ties have
probability zero under continuous weights, and on hand-built fixtures the
convention is to step +x (the right-most geodesic).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from math import comb

import numpy as np

from . import _kernels
from .errors import (
    CapacityError,
    DomainError,
    InvalidRegionError,
    OrderingError,
    DepthRangeError,
)
from .weights import LatticePoint, as_point, depth

# 2^28 grid cells ~ 2 GB of float64; larger requests fail loudly.
DEFAULT_MAX_CELLS = 2 ** 28

# Exhaustive enumeration refuses above this many up-right paths.
DEFAULT_MAX_PATHS = 10 ** 6

TO_SINK = "to-sink"
FROM_SOURCES = "from-source-set"


@dataclass(frozen=True)
class Region:
    """Inclusive lattice rectangle [lo, hi]."""

    lo: LatticePoint
    hi: LatticePoint

    def __post_init__(self):
        object.__setattr__(self, "lo", as_point(self.lo))
        object.__setattr__(self, "hi", as_point(self.hi))
        if self.lo.x > self.hi.x or self.lo.y > self.hi.y:
            raise InvalidRegionError(f"region lo {self.lo} exceeds hi {self.hi}")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.hi.y - self.lo.y + 1, self.hi.x - self.lo.x + 1)

    @property
    def area(self) -> int:
        ny, nx = self.shape
        return ny * nx

    def contains(self, p) -> bool:
        return self.lo.x <= p[0] <= self.hi.x and self.lo.y <= p[1] <= self.hi.y


def leq(u, v) -> bool:
    """Coordinatewise u <= v (the path-existence order)."""
    return u[0] <= v[0] and u[1] <= v[1]


@dataclass(frozen=True)
class Geodesic:
    """An up-right lattice path stored as the x-coordinate per depth.

    Point number t sits on line L_{start_depth + t}, so y = depth - x and
    the crossing with any line in range is an O(1) lookup.
    """

    start_depth: int
    xs: np.ndarray

    @property
    def first(self) -> LatticePoint:
        return LatticePoint(int(self.xs[0]), self.start_depth - int(self.xs[0]))

    @property
    def last(self) -> LatticePoint:
        d = self.start_depth + len(self.xs) - 1
        return LatticePoint(int(self.xs[-1]), d - int(self.xs[-1]))

    @property
    def end_depth(self) -> int:
        return self.start_depth + len(self.xs) - 1

    def __len__(self) -> int:
        return len(self.xs)

    def point_at_depth(self, n: int) -> LatticePoint:
        if not self.start_depth <= n <= self.end_depth:
            raise DepthRangeError(
                f"depth {n} outside geodesic range [{self.start_depth}, {self.end_depth}]"
            )
        x = int(self.xs[n - self.start_depth])
        return LatticePoint(x, n - x)

    @property
    def points(self) -> list[LatticePoint]:
        return [
            LatticePoint(int(x), self.start_depth + t - int(x))
            for t, x in enumerate(self.xs)
        ]

    def __iter__(self):
        return iter(self.points)


def path_weight(fld, g: Geodesic) -> float:
    """Total weight T of the path, recomputed from the environment."""
    return float(sum(fld.weight(p) for p in g.points))


def geodesic_from_points(points) -> Geodesic:
    pts = [as_point(p) for p in points]
    for a, b in zip(pts, pts[1:]):
        if (b.x - a.x, b.y - a.y) not in ((1, 0), (0, 1)):
            raise DomainError(f"not an up-right path: {a} -> {b}")
    return Geodesic(pts[0].depth(), np.array([p.x for p in pts], dtype=np.int64))


@dataclass(frozen=True)
class PassageGrid:
    """Passage times on a region, anchored at a sink (or a source set)."""

    region: Region
    anchor: LatticePoint
    direction: str
    values: np.ndarray = field(repr=False)

    def value_at(self, p) -> float:
        if not self.region.contains(p):
            raise DomainError(f"point {tuple(p)} outside grid region")
        return float(self.values[p[1] - self.region.lo.y, p[0] - self.region.lo.x])


def passage_grid_to_sink(fld, sink, region: Region, *,
                         max_cells: int = DEFAULT_MAX_CELLS,
                         out: np.ndarray | None = None) -> PassageGrid:
    """Passage times T_{p, sink} for every p in the region, one reverse sweep.

    The sink must be the region's top-right corner.  `out`, if given, is a
    caller-owned (ny, nx) buffer reused for the values (every cell is
    overwritten).
    """
    sink = as_point(sink)
    if sink != region.hi:
        raise InvalidRegionError(f"sink {sink} must equal region.hi {region.hi}")
    if region.area > max_cells:
        raise CapacityError(
            f"region needs {region.area} cells, cap is {max_cells}"
        )
    if out is None:
        out = np.empty(region.shape, np.float64)
    elif out.shape != region.shape:
        raise DomainError(f"buffer shape {out.shape} != region shape {region.shape}")
    fld.fill_block(region.lo, out)
    _kernels.sweep_to_sink(out)
    return PassageGrid(region, sink, TO_SINK, out)


def geodesic(grid: PassageGrid, u) -> Geodesic:
    """The maximal path from u to the grid's sink, by greedy backtracking."""
    if grid.direction != TO_SINK:
        raise DomainError("geodesic extraction needs a to-sink grid")
    u = as_point(u)
    if not leq(u, grid.anchor):
        raise OrderingError(f"start {u} is not <= sink {grid.anchor}")
    if not grid.region.contains(u):
        raise DomainError(f"start {u} outside grid region")
    lo = grid.region.lo
    xs = _kernels.backtrack_xs(grid.values, u.x - lo.x, u.y - lo.y)
    return Geodesic(u.depth(), xs + lo.x)


def brute_force_passage(fld, u, w, *, max_paths: int = DEFAULT_MAX_PATHS):
    """Exhaustively enumerate all up-right paths from u to w.

    Returns (max total weight, argmax path).  Tie-break matches geodesic():
    paths are visited with +x steps preferred at the earliest divergence and
    only a strictly better total displaces the incumbent.
    """
    u, w = as_point(u), as_point(w)
    if not leq(u, w):
        raise OrderingError(f"need u <= w, got {u}, {w}")
    dx, dy = w.x - u.x, w.y - u.y
    n_paths = comb(dx + dy, dx)
    if n_paths > max_paths:
        raise CapacityError(f"{n_paths} paths exceeds cap {max_paths}")
    block = fld.block(u, (dy + 1, dx + 1))
    n_steps = dx + dy
    best_total = -np.inf
    best_path = None
    for xpos in combinations(range(n_steps), dx):
        i = j = 0
        total = block[0, 0]
        pts = [(0, 0)]
        xset = set(xpos)
        for t in range(n_steps):
            if t in xset:
                i += 1
            else:
                j += 1
            total += block[j, i]
            pts.append((i, j))
        if total > best_total:
            best_total = total
            best_path = pts
    points = [LatticePoint(u.x + i, u.y + j) for i, j in best_path]
    return float(best_total), geodesic_from_points(points)


def _common_depth(points) -> int:
    ds = {depth(p) for p in points}
    if len(ds) != 1:
        raise DomainError(f"points span several anti-diagonals: {sorted(ds)}")
    return ds.pop()


def segment_sup_passage(fld, A, B, *, max_cells: int = DEFAULT_MAX_CELLS) -> float:
    """sup over (a, b) in A x B of T_{a, b}, via one multi-source forward sweep.

    A must sit on one anti-diagonal, B on a strictly higher one, and every
    b in B must dominate some a in A.
    """
    A = [as_point(p) for p in A]
    B = [as_point(p) for p in B]
    if not A or not B:
        raise DomainError("A and B must be nonempty")
    da, db = _common_depth(A), _common_depth(B)
    if db <= da:
        raise DomainError(f"B must lie on a higher anti-diagonal ({db} <= {da})")
    for b in B:
        if not any(leq(a, b) for a in A):
            raise DomainError(f"end {b} dominates no start in A")
    lo = LatticePoint(min(p.x for p in A), min(p.y for p in A))
    hi = LatticePoint(max(p.x for p in B), max(p.y for p in B))
    region = Region(lo, hi)
    if region.area > max_cells:
        raise CapacityError(f"region needs {region.area} cells, cap is {max_cells}")
    w = fld.block(lo, region.shape)
    is_src = np.zeros(region.shape, dtype=np.bool_)
    for a in A:
        is_src[a.y - lo.y, a.x - lo.x] = True
    v = _kernels.sweep_from_sources(w, is_src)
    return float(max(v[b.y - lo.y, b.x - lo.x] for b in B))
