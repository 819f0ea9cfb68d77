"""Order relations, coalescence, crossings, offsets, and parallel families."""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from lppsim.core import Region, geodesic, passage_grid_to_sink, brute_force_passage
from lppsim.errors import (
    DepthRangeError,
    DomainError,
    GeometryError,
    OrderingError,
)
from lppsim.geometry import (
    CoalescenceRecord,
    coalescence_point,
    crossing_count,
    first_common_point,
    kbar,
    ktilde,
    ktilde_prime,
    line_crossing,
    line_fluctuation,
    parallel_family,
    precedes,
    strictly_precedes,
    transversal_offset,
    two_thirds_floor,
)
from lppsim.harness import trial_seed
from lppsim.weights import ArrayField, LatticePoint, WeightField

_rows3 = np.ones((3, 3))
_rows3[1, 1] = 1.2
_rows3[1, 2] = 100.0
FIX3 = ArrayField(_rows3)

coords = st.integers(min_value=-50, max_value=50)


def test_precedes_examples():
    assert precedes((0, 0), (0, 0))
    assert precedes((-1, 1), (1, -1))
    assert not precedes((1, 1), (0, 0))
    assert not strictly_precedes((2, 3), (2, 3))
    assert strictly_precedes((2, 3), (2, 2))


@given(st.tuples(coords, coords), st.tuples(coords, coords))
def test_precedes_is_a_partial_order(u, v):
    assert precedes(u, u)
    if precedes(u, v) and precedes(v, u):
        assert tuple(u) == tuple(v)


def test_two_thirds_floor():
    assert two_thirds_floor(1) == 1
    assert two_thirds_floor(8) == 4
    assert two_thirds_floor(27) == 9
    assert two_thirds_floor(1000) == 100
    assert two_thirds_floor(7) == 3   # 7^(2/3) = 3.659
    assert two_thirds_floor(0) == 0
    with pytest.raises(DomainError):
        two_thirds_floor(-1)


def test_scaled_start_points():
    assert kbar(8) == (4, -4)
    assert ktilde(8) == (0, 4)
    assert ktilde_prime(8) == (4, 0)
    assert ktilde(1) == (0, 1)
    assert kbar(1) == (1, -1)


def test_transversal_offset_and_fluctuation():
    assert transversal_offset((4, 4)) == 0
    assert transversal_offset((5, 3)) == 2
    assert line_fluctuation((5, 3)) == 1      # f=1 on L_8
    assert transversal_offset((2, 3)) == -1
    assert line_fluctuation((2, 3)) == 0      # f=0 on L_5, odd-line convention
    assert line_fluctuation((4, 4)) == 0


def test_coalescence_identical_starts():
    grid = passage_grid_to_sink(FIX3, (2, 2), Region((0, 0), (2, 2)))
    rec = coalescence_point(grid, (0, 1), (0, 1))
    assert rec.point == (0, 1) and rec.depth == 1 and rec.first_coord == 0


def test_coalescence_forced_single_steps():
    # u=(0,1), v=(1,0), w=(1,1): both paths are single forced steps
    for seed in (1, 2, 3):
        fld = WeightField(seed)
        grid = passage_grid_to_sink(fld, (1, 1), Region((0, 0), (1, 1)))
        rec = coalescence_point(grid, (0, 1), (1, 0))
        assert rec.point == (1, 1) and rec.depth == 2


def test_coalescence_3x3_fixture():
    grid = passage_grid_to_sink(FIX3, (2, 2), Region((0, 0), (2, 2)))
    rec = coalescence_point(grid, (0, 1), (1, 0))
    assert rec.point == (1, 1)
    assert rec.depth == 2
    assert rec.first_coord == 1


def test_coalescence_ordering_errors():
    grid = passage_grid_to_sink(FIX3, (2, 2), Region((0, 0), (2, 2)))
    with pytest.raises(OrderingError):
        coalescence_point(grid, (2, 2), (0, 0))  # u not < w
    with pytest.raises(OrderingError):
        coalescence_point(grid, (0, 0), (2, 2))  # v not < w


def test_line_crossing():
    grid = passage_grid_to_sink(FIX3, (2, 2), Region((0, 0), (2, 2)))
    g = geodesic(grid, (1, 0))
    assert line_crossing(g, 1) == (1, 0)
    assert line_crossing(g, 4) == (2, 2)
    assert line_crossing(g, 3) == (2, 1)
    with pytest.raises(DepthRangeError):
        line_crossing(g, 0)


def test_parallel_family_tail_instantiation():
    # k = 8, so the L_0 spacing is 2*floor(k^(2/3)) = 8 and a = -4
    n = 32
    fam = parallel_family(a=-4, b=0, d_spacing=8, m=1, s=2 * n)
    assert fam.starts[0] == (-4, 4) == tuple(-np.array(kbar(8)))
    assert fam.starts[1] == (4, -4) == kbar(8)
    assert fam.ends[0] == (n, n)
    assert fam.ends[1] == (n + 8, n - 8)  # (n, n) + 2*kbar


def test_parallel_family_arithmetic():
    fam = parallel_family(0, 0, 1, 2, 4)
    assert fam.starts == ((0, 0), (1, -1), (2, -2))
    assert fam.ends == ((2, 2), (3, 1), (4, 0))
    single = parallel_family(1, 2, 2, 0, 5)
    assert len(single.starts) == len(single.ends) == 1
    assert single.starts[0] == (1, -1)
    assert single.ends[0] == (4, 1)


def test_parallel_family_validation():
    with pytest.raises(GeometryError):
        parallel_family(10, -10, 1, 0, 2)  # u_0=(10,-10) not <= v_0=(-9,11)... fails
    with pytest.raises(DomainError):
        parallel_family(0, 0, 0, 1, 4)
    with pytest.raises(DomainError):
        parallel_family(0, 0, 1, -1, 4)
    with pytest.raises(DomainError):
        parallel_family(0, 0, 1, 1, 0)


@given(st.integers(-5, 5), st.integers(-3, 3), st.integers(1, 4),
       st.integers(0, 4), st.integers(2, 40))
def test_parallel_family_lines(a, b, d, m, s):
    try:
        fam = parallel_family(a, b, d, m, s)
    except GeometryError:
        return
    for u in fam.starts:
        assert u.x + u.y == 0
    for v in fam.ends:
        assert v.x + v.y == s
    for i in range(m):
        assert strictly_precedes(fam.starts[i], fam.starts[i + 1])
        assert strictly_precedes(fam.ends[i], fam.ends[i + 1])


def test_crossing_count_single_geodesic():
    fam = parallel_family(0, 0, 1, 0, 10)
    for seed in (4, 5):
        assert crossing_count(WeightField(seed), fam, 5) == 1


def test_crossing_count_bounds_and_range():
    fam = parallel_family(0, 0, 2, 3, 12)
    for seed in range(10):
        c = crossing_count(WeightField(seed), fam, 6)
        assert 1 <= c <= 4
    with pytest.raises(DepthRangeError):
        crossing_count(WeightField(1), fam, 0)
    with pytest.raises(DepthRangeError):
        crossing_count(WeightField(1), fam, 12)


def test_crossing_count_pinned_against_enumeration():
    # seed=42, family a=0 b=0 d=2 m=2 s=8, r=4: oracle gives 3 distinct points
    fld = WeightField(42)
    fam = parallel_family(0, 0, 2, 2, 8)
    assert crossing_count(fld, fam, 4) == 3
    pts = []
    for u, v in zip(fam.starts, fam.ends):
        _, g = brute_force_passage(fld, u, v)
        hits = [p for p in g.points if p.depth() == 4]
        assert len(hits) == 1  # single-crossing
        pts.append(hits[0])
    assert len(set(pts)) == 3
    assert pts == [(2, 2), (3, 1), (6, -2)]


def _suffix_sets_equal(g1, g2, rec_point):
    """Common points of g1, g2 must be exactly the suffix from rec_point."""
    s1 = {tuple(p) for p in g1.points}
    s2 = {tuple(p) for p in g2.points}
    common = s1 & s2
    n0 = rec_point[0] + rec_point[1]
    suffix = {tuple(g1.point_at_depth(d)) for d in range(n0, g1.end_depth + 1)}
    return common == suffix


def test_intersection_is_a_suffix():
    # two geodesics into one sink agree exactly from
    # their first common point onward (suffix structure)
    for s in range(30):
        fld = WeightField(trial_seed(1234, s))
        sink = (12, 12)
        grid = passage_grid_to_sink(fld, sink, Region((-4, -4), sink))
        g1 = geodesic(grid, (4, -4))
        g2 = geodesic(grid, (-4, 4))
        p = first_common_point(g1, g2)
        assert _suffix_sets_equal(g1, g2, p)
        rec = coalescence_point(grid, (4, -4), (-4, 4))
        assert rec.point == p


def test_geodesic_ordering_between_nested_pairs():
    # u' preceding u'' and v' preceding v'' keeps every pair of crossings ordered
    for s in range(30):
        fld = WeightField(trial_seed(777, s))
        sink = (14, 14)
        grid = passage_grid_to_sink(fld, sink, Region((-6, -6), sink))
        g_lo = geodesic(grid, (-5, 5))
        g_hi = geodesic(grid, (5, -5))
        for d in range(0, g_lo.end_depth + 1):
            w_lo = g_lo.point_at_depth(d)
            w_hi = g_hi.point_at_depth(d)
            assert not strictly_precedes(w_hi, w_lo) or w_hi == w_lo
            assert transversal_offset(w_lo) <= transversal_offset(w_hi)


def test_max_identity_on_samples():
    # d(C^{kt,kt';n}) = max(d(C^{0,kt;n}), d(C^{0,kt';n}))
    k = 8
    kt, ktp = ktilde(k), ktilde_prime(k)
    for s in range(30):
        fld = WeightField(trial_seed(31337, s))
        sink = (24, 24)
        grid = passage_grid_to_sink(fld, sink, Region((0, 0), sink))
        d_ok = coalescence_point(grid, (0, 0), kt).depth
        d_okp = coalescence_point(grid, (0, 0), ktp).depth
        d_kk = coalescence_point(grid, kt, ktp).depth
        assert d_kk == max(d_ok, d_okp)


def test_coalescence_record_fields():
    rec = CoalescenceRecord.at((3, 4))
    assert rec.depth == 7 and rec.first_coord == 3 and rec.point == (3, 4)
