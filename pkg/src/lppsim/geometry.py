"""Geodesic-level constructions: anti-diagonal order, coalescence points,
line crossings, transversal offsets, and translated start/end families.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import PassageGrid, Region, Geodesic, geodesic, leq, passage_grid_to_sink
from .errors import DomainError, GeometryError, DepthRangeError, OrderingError, InvariantViolation
from .weights import LatticePoint, as_point


def precedes(u, v) -> bool:
    """Anti-diagonal order: u1 <= v1 and u2 >= v2."""
    return u[0] <= v[0] and u[1] >= v[1]


def strictly_precedes(u, v) -> bool:
    return precedes(u, v) and tuple(u) != tuple(v)


def two_thirds_floor(k: int) -> int:
    """floor(k^(2/3)), nudged up by 1e-9 so exact cubes are not lost to rounding."""
    if k < 0:
        raise DomainError(f"k must be nonnegative, got {k}")
    return int(float(k) ** (2.0 / 3.0) + 1e-9)


def kbar(k: int) -> LatticePoint:
    """(floor(k^{2/3}), -floor(k^{2/3})) on L_0."""
    c = two_thirds_floor(k)
    return LatticePoint(c, -c)


def ktilde(k: int) -> LatticePoint:
    """(0, floor(k^{2/3}))."""
    return LatticePoint(0, two_thirds_floor(k))


def ktilde_prime(k: int) -> LatticePoint:
    """(floor(k^{2/3}), 0), the reflection of ktilde across the diagonal."""
    return LatticePoint(two_thirds_floor(k), 0)


def transversal_offset(p) -> int:
    """x - y: twice the signed deviation from the diagonal (in f units)."""
    return int(p[0]) - int(p[1])


def line_fluctuation(p) -> int:
    """f with p = (floor(n/2) + f, ceil(n/2) - f) on its own line L_n.

    On even lines f = offset/2; on odd lines f = (offset + 1)/2, which is a
    convention choice, not forced by the construction.
    """
    p = as_point(p)
    return p.x - (p.depth() // 2)


@dataclass(frozen=True)
class CoalescenceRecord:
    """First common point of two geodesics sharing a sink."""

    point: LatticePoint
    depth: int
    first_coord: int

    @staticmethod
    def at(p) -> "CoalescenceRecord":
        p = as_point(p)
        return CoalescenceRecord(p, p.depth(), p.x)


def first_common_point(g1: Geodesic, g2: Geodesic) -> LatticePoint:
    """Earliest (minimal depth) point common to both paths.

    Both paths must share their final point; since each crosses every line
    in its range exactly once, a common point must sit at equal depth in
    both, so the aligned x arrays are compared directly.
    """
    n0 = max(g1.start_depth, g2.start_depth)
    a = g1.xs[n0 - g1.start_depth:]
    b = g2.xs[n0 - g2.start_depth:]
    L = min(len(a), len(b))
    eq = a[:L] == b[:L]
    if not eq.any():
        raise DomainError("paths share no point (distinct endpoints?)")
    idx = int(np.argmax(eq))
    x = int(a[idx])
    return LatticePoint(x, n0 + idx - x)


def coalescence_point(grid: PassageGrid, u, v) -> CoalescenceRecord:
    """C^{u,v;w}: the first coalescence point of the geodesics from u and v
    to the grid's sink w."""
    u, v = as_point(u), as_point(v)
    w = grid.anchor
    for s in (u, v):
        if not (leq(s, w) and s != w):
            raise OrderingError(f"start {s} is not < sink {w}")
    return CoalescenceRecord.at(first_common_point(geodesic(grid, u), geodesic(grid, v)))


def line_crossing(g: Geodesic, n: int) -> LatticePoint:
    """The unique point of the path on L_n."""
    return g.point_at_depth(n)


@dataclass(frozen=True)
class ParallelFamily:
    """Starts u_i = (a + i*d, -a - i*d) on L_0 and ends
    v_i = (floor(s/2) + b + i*d, ceil(s/2) - b - i*d) on L_s, i = 0..m.

    Each start/end pair is a translate of the previous by (d, -d), so the
    geodesics are identically distributed up to translation.
    """

    a: int
    b: int
    d_spacing: int
    m: int
    s: int
    starts: tuple[LatticePoint, ...]
    ends: tuple[LatticePoint, ...]


def parallel_family(a: int, b: int, d_spacing: int, m: int, s: int) -> ParallelFamily:
    if d_spacing < 1:
        raise DomainError(f"d_spacing must be >= 1, got {d_spacing}")
    if m < 0:
        raise DomainError(f"m must be >= 0, got {m}")
    if s < 1:
        raise DomainError(f"s must be >= 1, got {s}")
    starts = []
    ends = []
    for i in range(m + 1):
        u = LatticePoint(a + i * d_spacing, -a - i * d_spacing)
        v = LatticePoint(s // 2 + b + i * d_spacing, (s + 1) // 2 - b - i * d_spacing)
        if not leq(u, v):
            raise GeometryError(f"start {u} not <= end {v} at index {i}")
        starts.append(u)
        ends.append(v)
    return ParallelFamily(a, b, d_spacing, m, s, tuple(starts), tuple(ends))


def family_geodesics(fld, fam: ParallelFamily, **grid_kw) -> list[Geodesic]:
    """One geodesic per (u_i, v_i) pair, each from its own sink-anchored grid.

    Ends are pairwise distinct whenever d_spacing >= 1, so each pair gets
    its own grid; a shared-sink cache would never hit.
    """
    out = []
    for u, v in zip(fam.starts, fam.ends):
        grid = passage_grid_to_sink(fld, v, Region(u, v), **grid_kw)
        out.append(geodesic(grid, u))
    return out


def crossing_count(fld, fam: ParallelFamily, r: int, **grid_kw) -> int:
    """Number of distinct points where the family's geodesics cross L_r.

    Computed twice -- as the size of the crossing set and as
    1 + #{i : w_i != w_{i+1}} -- and the two are asserted equal, which is
    only guaranteed while the crossings stay ordered.
    """
    if not 0 < r < fam.s:
        raise DepthRangeError(f"need 0 < r < s, got r={r}, s={fam.s}")
    crossings = [line_crossing(g, r) for g in family_geodesics(fld, fam, **grid_kw)]
    offsets = [transversal_offset(w) for w in crossings]
    if any(o2 < o1 for o1, o2 in zip(offsets, offsets[1:])):
        raise InvariantViolation(f"family crossings out of order at L_{r}: {offsets}")
    distinct = len(set(crossings))
    adjacent = 1 + sum(w1 != w2 for w1, w2 in zip(crossings, crossings[1:]))
    if distinct != adjacent:
        raise InvariantViolation(
            f"crossing-count formulas disagree: {distinct} vs {adjacent}"
        )
    return distinct
