from __future__ import annotations

import csv
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slowbond.errors import BandTooNarrow, NoAdmissiblePath, NotOrdered, OutOfRange, TruncationSuspect
from slowbond.lpp import (
    NO_CONSTRAINT,
    Geodesic,
    RegionConstraint,
    Staircase,
    brute_force_passage,
    coalescence_point,
    diagonal_passage_times,
    geodesic,
    last_diagonal_point,
    passage_grid,
    passage_time,
    path_weight,
    point_to_set_passage_time,
    transversal,
)
from slowbond.weights import ExplicitWeights, WeightField

from conftest import random_explicit

AVOID = RegionConstraint("avoid_strict_upper_diagonal")


@pytest.fixture
def two_by_two():
    # a=(0,0):1, b=(1,0):2, c=(0,1):3, d=(1,1):7
    return ExplicitWeights(np.array([[1.0, 3.0], [2.0, 7.0]]))


def test_two_by_two_value_and_path(two_by_two):
    assert passage_time(two_by_two, (0, 0), (1, 1)) == 4.0
    g = geodesic(two_by_two, (0, 0), (1, 1))
    assert g.as_tuples() == [(0, 0), (0, 1), (1, 1)]
    assert g.weight == 4.0
    val, path = brute_force_passage(two_by_two, (0, 0), (1, 1))
    assert val == 4.0
    assert [tuple(p) for p in path] == [(0, 0), (0, 1), (1, 1)]


def test_single_vertex():
    f = WeightField(1, 0.5)
    assert passage_time(f, (3, 4), (3, 4)) == 0.0
    g = geodesic(f, (3, 4), (3, 4))
    assert g.as_tuples() == [(3, 4)] and g.weight == 0.0
    grid = passage_grid(f, (2, 2), (2, 2))
    assert grid.values().shape == (1, 1) and grid.value((2, 2)) == 0.0


def test_unique_path_brute_force():
    w = ExplicitWeights(np.array([[2.0, 5.0]]))
    val, path = brute_force_passage(w, (0, 0), (0, 1))
    assert val == 2.0 and [tuple(p) for p in path] == [(0, 0), (0, 1)]


def test_not_ordered():
    f = WeightField(1, 0.5)
    with pytest.raises(NotOrdered):
        passage_time(f, (2, 0), (1, 5))
    with pytest.raises(NotOrdered):
        geodesic(f, (0, 3), (4, 2))


def test_tie_prefers_smaller_x_predecessor():
    w = ExplicitWeights(np.ones((3, 3)))
    g = geodesic(w, (0, 0), (2, 2))
    assert g.as_tuples()[-2] == (1, 2)
    val, path = brute_force_passage(w, (0, 0), (2, 2))
    assert [tuple(p) for p in path] == g.as_tuples()


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32), integer=st.booleans())
def test_four_by_four_matches_brute_force(seed, integer):
    w = random_explicit(seed, 4, 4, integer)
    val, path = brute_force_passage(w, (0, 0), (3, 3))
    assert passage_time(w, (0, 0), (3, 3)) == val
    assert geodesic(w, (0, 0), (3, 3)).as_tuples() == [tuple(p) for p in path]


@settings(max_examples=100, deadline=None)
@given(
    seed=st.integers(0, 2**32),
    nx=st.integers(2, 5),
    ny=st.integers(2, 5),
    lo=st.integers(-1, 4),
    span=st.integers(0, 4),
)
def test_constrained_matches_brute_force(seed, nx, ny, lo, span):
    w = random_explicit(seed, nx, ny, integer=seed % 2 == 0)
    c = RegionConstraint("avoid_strict_upper_diagonal", (lo, lo + span))
    v = (nx - 1, ny - 1)
    try:
        val, path = brute_force_passage(w, (0, 0), v, c)
    except NoAdmissiblePath:
        with pytest.raises(NoAdmissiblePath):
            passage_time(w, (0, 0), v, c)
        return
    assert passage_time(w, (0, 0), v, c) == val
    g = geodesic(w, (0, 0), v, c)
    assert g.weight == val
    assert g.as_tuples() == [tuple(p) for p in path]


def test_constraint_three_by_three_filters_paths():
    w = random_explicit(4, 3, 3)
    # only R,R,U,U keeps every interior vertex strictly below the diagonal
    expected = w.weight_at((0, 0)) + w.weight_at((1, 0)) + w.weight_at((2, 0)) + w.weight_at((2, 1))
    val, path = brute_force_passage(w, (0, 0), (2, 2), AVOID)
    assert val == expected
    assert passage_time(w, (0, 0), (2, 2), AVOID) == expected
    assert val <= passage_time(w, (0, 0), (2, 2))


def test_no_admissible_path():
    w = random_explicit(0, 3, 3)
    with pytest.raises(NoAdmissiblePath):
        passage_time(w, (0, 1), (1, 2), AVOID)
    with pytest.raises(NoAdmissiblePath):
        brute_force_passage(w, (0, 1), (1, 2), AVOID)


def test_grid_matches_pointwise_recomputation():
    f = WeightField(31, 0.5)
    grid = passage_grid(f, (0, 0), (49, 49))
    vals = grid.values()
    for x in range(50):
        for y in range(50):
            assert vals[x, y] == passage_time(f, (0, 0), (x, y))


def test_band_covering_everything_is_identical():
    f = WeightField(8, 0.5)
    full = passage_grid(f, (0, 0), (30, 30))
    banded = passage_grid(f, (0, 0), (30, 30), band_halfwidth=31)
    assert np.array_equal(full.values(), banded.values())


def test_band_too_narrow():
    f = WeightField(8, 0.5)
    grid = passage_grid(f, (0, 0), (20, 20), band_halfwidth=3)
    with pytest.raises(BandTooNarrow):
        grid.value((10, 0))
    vals = np.ones((8, 8))
    vals[:, 0] = 100.0
    w = ExplicitWeights(vals)
    grid = passage_grid(w, (0, 0), (7, 7), band_halfwidth=2)
    with pytest.raises(BandTooNarrow):
        grid.value((7, 7))
    assert grid.value((7, 7), strict=False) < passage_time(w, (0, 0), (7, 7))


def test_banded_interior_agrees_with_full():
    f = WeightField(12, 0.5)
    full = passage_grid(f, (0, 0), (200, 200))
    banded = passage_grid(f, (0, 0), (200, 200), band_halfwidth=60)
    assert banded.value((200, 200)) == full.value((200, 200))
    assert banded.geodesic((200, 200)).as_tuples() == full.geodesic((200, 200)).as_tuples()
    assert banded.cell_count < full.cell_count


def test_diagonal_passage_times_are_inclusive():
    f = WeightField(2, 0.5)
    grid = passage_grid(f, (0, 0), (40, 40))
    got = diagonal_passage_times(f, [0, 10, 40])
    assert list(got) == [grid.inclusive((n, n)) for n in (0, 10, 40)]


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32), data=st.data())
def test_superadditivity(seed, data):
    f = WeightField(seed, 0.5)
    u = (0, 0)
    w = (data.draw(st.integers(2, 12)), data.draw(st.integers(2, 12)))
    v = (data.draw(st.integers(0, w[0])), data.draw(st.integers(0, w[1])))
    total = passage_time(f, u, w)
    split = passage_time(f, u, v) + passage_time(f, v, w)
    on_path = v in geodesic(f, u, w).as_tuples()
    if on_path:
        assert total == pytest.approx(split, rel=1e-12)
    else:
        assert total > split


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32), x=st.integers(0, 5), y=st.integers(0, 5), bump=st.floats(0.0, 5.0))
def test_monotone_in_weights(seed, x, y, bump):
    w = random_explicit(seed, 6, 6)
    vals = w.values.copy()
    vals[x, y] += bump
    g0 = passage_grid(w, (0, 0), (5, 5)).values()
    g1 = passage_grid(ExplicitWeights(vals), (0, 0), (5, 5)).values()
    assert np.all(g1 >= g0)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**64 - 1), r1=st.floats(0.1, 1.0), r2=st.floats(0.1, 1.0))
def test_monotone_in_rate(seed, r1, r2):
    lo, hi = min(r1, r2), max(r1, r2)
    a = passage_grid(WeightField(seed, lo), (0, 0), (15, 15)).values()
    b = passage_grid(WeightField(seed, hi), (0, 0), (15, 15)).values()
    assert np.all(a >= b)


def test_polymer_ordering():
    rng = np.random.default_rng(77)
    for seed in range(200):
        f = WeightField(seed, 0.5)
        a1, b1 = 0, int(rng.integers(3, 15))
        a2, a3, b2, b3 = sorted(int(v) for v in rng.integers(0, 15, size=4))
        g = geodesic(f, (a1, a2), (b1, b2))
        gp = geodesic(f, (a1, a3), (b1, b3))
        for x in range(a1, b1 + 1):
            assert transversal(g, x)[0] <= transversal(gp, x)[0]


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32), nx=st.integers(1, 20), ny=st.integers(1, 20))
def test_geodesic_validity(seed, nx, ny):
    f = WeightField(seed, 0.5)
    g = geodesic(f, (0, 0), (nx, ny))
    assert g.is_valid_path()
    assert path_weight(f, g.vertices) == g.weight == passage_time(f, (0, 0), (nx, ny))


def test_transversal(two_by_two):
    g = geodesic(two_by_two, (0, 0), (1, 1))
    assert transversal(g, 0)[0] == 1
    assert transversal(g, 1)[1] == 1
    diag = Geodesic(np.array([[0, 0], [1, 0], [1, 1], [2, 1], [2, 2], [3, 2], [3, 3]]), 0.0)
    for ell in (1, 2):
        assert transversal(diag, ell)[0] == ell
    f = WeightField(5, 0.5)
    g = geodesic(f, (0, 0), (9, 6))
    assert transversal(g, 9)[0] == 6
    with pytest.raises(OutOfRange):
        transversal(g, 40)


def test_last_diagonal_point():
    f = WeightField(5, 0.5)
    assert last_diagonal_point(geodesic(f, (0, 0), (12, 3))) is not None
    assert tuple(last_diagonal_point(geodesic(f, (0, 0), (7, 7)))) == (7, 7)
    off = Geodesic(np.array([[0, 1], [0, 2], [0, 3]]), 0.0)
    assert last_diagonal_point(off) is None


def test_coalescence_point():
    f = WeightField(9, 0.5)
    g = geodesic(f, (0, 0), (10, 10))
    first = next(tuple(v) for v in g.as_tuples() if v[0] == v[1])
    assert tuple(coalescence_point([g], require_diagonal=True)) == first
    h = geodesic(f, (0, 0), (10, 10))
    assert coalescence_point([g, h]) is not None
    a = Geodesic(np.array([[0, 0], [1, 0]]), 0.0)
    b = Geodesic(np.array([[0, 1], [1, 1]]), 0.0)
    assert coalescence_point([a, b]) is None


def test_point_to_set_quadrant_equals_corner():
    f = WeightField(21, 0.5)
    for n in (1, 5, 30):
        res = point_to_set_passage_time(f, Staircase.quadrant(), (n, n))
        assert res.value == passage_time(f, (0, 0), (n, n))
        assert tuple(res.vertex) == (0, 0)


def test_point_to_set_vertical_line_matches_enumeration():
    w = random_explicit(13, 6, 6)
    line = Staircase.from_vertices([(0, 6 - i) for i in range(13)], anchor_index=6, right_step=(0, -1))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        res = point_to_set_passage_time(w, line, (5, 5), 3, center_index=-3)
    best = max(brute_force_passage(w, (0, y), (5, 5))[0] for y in range(6))
    assert res.value == best
    # the lowest in-window row wins and sits on the truncation boundary
    assert res.suspect and any(issubclass(c.category, TruncationSuspect) for c in caught)


def test_point_to_set_not_ordered():
    with pytest.raises(NotOrdered):
        point_to_set_passage_time(WeightField(1, 0.5), Staircase.quadrant(), (-1, -1))


def test_csv_exports(tmp_path):
    f = WeightField(3, 0.5)
    g = geodesic(f, (0, 0), (4, 3))
    g.to_csv(tmp_path / "g.csv", f)
    rows = list(csv.reader(open(tmp_path / "g.csv")))
    assert rows[0] == ["x", "y", "value"]
    assert len(rows) == 1 + len(g.vertices)
    grid = passage_grid(f, (0, 0), (3, 3))
    grid.to_csv(tmp_path / "grid.csv")
    assert len(list(csv.reader(open(tmp_path / "grid.csv")))) == 1 + 16


def test_no_constraint_is_inactive():
    assert not NO_CONSTRAINT.active
    assert AVOID.forbids((2, 3)) and not AVOID.forbids((3, 2))
    seg = RegionConstraint("avoid_strict_upper_diagonal", (0, 2))
    assert not seg.forbids((5, 5))
    with pytest.raises(ValueError):
        RegionConstraint("other")
