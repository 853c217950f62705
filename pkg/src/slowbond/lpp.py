"""Max-plus dynamic programming on the lattice.

Conventions used throughout:

* a path weight sums vertex weights along the path *excluding the final
  vertex*, so ``passage_time(u, u) == 0``;
* the sweep is row-major with ``G(z) = max(G(z - e1), G(z - e2)) + w(z)``, the
  inclusive passage time; the exclusive value at ``z`` is the predecessor max;
* on an exact tie the predecessor with smaller x, ``(x - 1, y)``, is taken.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field as dc_field
from itertools import combinations
from typing import NamedTuple, Optional, Sequence

import numpy as np

from . import _kernels
from .errors import BandTooNarrow, NoAdmissiblePath, NotOrdered, OutOfRange, TruncationSuspect
from .weights import ExplicitWeights, VertexId, WeightField, precedes

NEG_INF = -np.inf
_EMPTY_F = np.empty((0, 0), dtype=np.float64)
_EMPTY_I = np.empty((0, 0), dtype=np.int32)
_EMPTY_U8 = np.empty((0, 0), dtype=np.uint8)


@dataclass(frozen=True)
class RegionConstraint:
    """Optional forbidden region for paths.

    ``avoid_strict_upper_diagonal`` forbids vertices with ``y >= x`` whose x
    coordinate lies in ``segment`` (inclusive); path endpoints are exempt.
    ``segment=None`` means the whole x range.
    """

    kind: str = "none"
    segment: Optional[tuple] = None
    endpoint_exempt: bool = True

    def __post_init__(self):
        if self.kind not in ("none", "avoid_strict_upper_diagonal"):
            raise ValueError(f"unknown constraint kind {self.kind!r}")
        if self.segment is not None:
            lo, hi = self.segment
            if lo > hi:
                raise ValueError("constraint segment must satisfy lo <= hi")
            object.__setattr__(self, "segment", (int(lo), int(hi)))
        if not self.endpoint_exempt:
            raise ValueError("endpoint_exempt is fixed to True")

    @property
    def active(self) -> bool:
        return self.kind != "none"

    def bounds(self) -> tuple:
        if self.segment is None:
            return (-(2**62), 2**62)
        return self.segment

    def forbids(self, v) -> bool:
        if not self.active:
            return False
        lo, hi = self.bounds()
        return v[1] >= v[0] and lo <= v[0] <= hi


NO_CONSTRAINT = RegionConstraint()


def _vid(v) -> VertexId:
    return VertexId(int(v[0]), int(v[1]))


def _check_order(u, v):
    if not precedes(u, v):
        raise NotOrdered(f"{tuple(u)} is not below-left of {tuple(v)}")


def _sweep(
    field,
    low: VertexId,
    high: VertexId,
    hw: int = -1,
    constraint: RegionConstraint = NO_CONSTRAINT,
    srcmap: Optional[np.ndarray] = None,
    track_edge: bool = False,
    track_source: bool = False,
):
    """Run the compiled sweep over ``low..high``; returns (G, E, S) in [dy, dx]."""
    nx = high.x - low.x + 1
    ny = high.y - low.y + 1
    G = np.full((ny, nx), NEG_INF)
    E = np.zeros((ny, nx), dtype=np.uint8) if track_edge else _EMPTY_U8
    S = np.full((ny, nx), -1, dtype=np.int32) if track_source else _EMPTY_I
    if isinstance(field, ExplicitWeights):
        if not (field.contains(low) and field.contains(high)):
            raise OutOfRange("rectangle exceeds the explicit weight array")
        explicit = np.ascontiguousarray(field.values.T)
        ex0 = field.origin
        key, rate, mode = np.uint64(0), 1.0, _kernels.COUPLED
    else:
        explicit = _EMPTY_F
        ex0 = VertexId(0, 0)
        key, rate, mode = field.key, field.diagonal_rate, field.mode_code
    seg_lo, seg_hi = constraint.bounds()
    _kernels.sweep(
        key,
        rate,
        mode,
        explicit,
        ex0.x,
        ex0.y,
        low.x,
        low.y,
        nx,
        ny,
        hw,
        constraint.active,
        seg_lo,
        seg_hi,
        _EMPTY_I if srcmap is None else srcmap,
        G,
        E,
        S,
    )
    return G, E, S


def _pred_max(G: np.ndarray, dx: int, dy: int) -> float:
    left = G[dy, dx - 1] if dx > 0 else NEG_INF
    down = G[dy - 1, dx] if dy > 0 else NEG_INF
    return left if left >= down else down


def _exclusive_grid(G: np.ndarray) -> np.ndarray:
    P = np.full_like(G, NEG_INF)
    P[:, 1:] = G[:, :-1]
    np.maximum(P[1:, :], G[:-1, :], out=P[1:, :])
    P[0, 0] = 0.0
    return P


# ---------------------------------------------------------------- geodesics


@dataclass(frozen=True)
class Geodesic:
    """Monotone path with its weight (final vertex excluded)."""

    vertices: np.ndarray
    weight: float

    def __post_init__(self):
        arr = np.asarray(self.vertices, dtype=np.int64).reshape(-1, 2)
        object.__setattr__(self, "vertices", arr)

    def __len__(self):
        return len(self.vertices)

    @property
    def start(self) -> VertexId:
        return _vid(self.vertices[0])

    @property
    def end(self) -> VertexId:
        return _vid(self.vertices[-1])

    def as_tuples(self) -> list:
        return [VertexId(int(x), int(y)) for x, y in self.vertices]

    def is_valid_path(self) -> bool:
        if len(self.vertices) == 1:
            return True
        steps = np.diff(self.vertices, axis=0)
        ok = ((steps[:, 0] == 1) & (steps[:, 1] == 0)) | ((steps[:, 0] == 0) & (steps[:, 1] == 1))
        return bool(ok.all())

    def diagonal_points(self) -> np.ndarray:
        """x coordinates of the vertices with x == y, in path order."""
        v = self.vertices
        return v[v[:, 0] == v[:, 1], 0]

    def to_csv(self, path, field=None) -> None:
        """Write ``x, y, value``; value is the vertex weight when a field is given."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "y", "value"])
            for x, y in self.vertices:
                val = "" if field is None else repr(_weight(field, (x, y)))
                w.writerow([int(x), int(y), val])


def _weight(field, v) -> float:
    from .weights import weight_at

    return weight_at(field, v)


def path_weight(field, vertices) -> float:
    """Sum of vertex weights over ``vertices[:-1]`` in path order."""
    total = 0.0
    for v in list(vertices)[:-1]:
        total = total + _weight(field, v)
    return total


def _geodesic_from_grid(G, low: VertexId, dx: int, dy: int, weight: float) -> Geodesic:
    xs, ys = _kernels.backtrack(G, dx, dy)
    verts = np.stack([xs + low.x, ys + low.y], axis=1)
    return Geodesic(verts, float(weight))


# --------------------------------------------------------- point-to-point


def passage_time(field, u, v, constraint: RegionConstraint = NO_CONSTRAINT) -> float:
    """Heaviest admissible monotone path weight from ``u`` to ``v``."""
    u, v = _vid(u), _vid(v)
    _check_order(u, v)
    if u == v:
        return 0.0
    G, _, _ = _sweep(field, u, v, constraint=constraint)
    val = _pred_max(G, v.x - u.x, v.y - u.y)
    if val == NEG_INF:
        raise NoAdmissiblePath(f"no admissible path from {tuple(u)} to {tuple(v)}")
    return float(val)


def geodesic(field, u, v, constraint: RegionConstraint = NO_CONSTRAINT) -> Geodesic:
    u, v = _vid(u), _vid(v)
    _check_order(u, v)
    if u == v:
        return Geodesic(np.array([[u.x, u.y]]), 0.0)
    G, _, _ = _sweep(field, u, v, constraint=constraint)
    dx, dy = v.x - u.x, v.y - u.y
    val = _pred_max(G, dx, dy)
    if val == NEG_INF:
        raise NoAdmissiblePath(f"no admissible path from {tuple(u)} to {tuple(v)}")
    return _geodesic_from_grid(G, u, dx, dy, val)


# ------------------------------------------------------------------- grids


@dataclass
class PassageGrid:
    """Passage times from ``source`` over the rectangle ``source..corner``.

    ``inclusive_values`` holds the inclusive DP array indexed ``[dy, dx]``;
    cells outside the band hold -inf.
    """

    source: VertexId
    corner: VertexId
    inclusive_values: np.ndarray
    band_halfwidth: Optional[int] = None
    edge_flags: Optional[np.ndarray] = dc_field(default=None, repr=False)

    @property
    def rectangle(self) -> tuple:
        return (self.source, self.corner)

    @property
    def cell_count(self) -> int:
        nx = self.corner.x - self.source.x + 1
        ny = self.corner.y - self.source.y + 1
        if self.band_halfwidth is None:
            return nx * ny
        return int(np.isfinite(self.inclusive_values).sum())

    def _local(self, v):
        v = _vid(v)
        dx, dy = v.x - self.source.x, v.y - self.source.y
        if not (0 <= dx <= self.corner.x - self.source.x and 0 <= dy <= self.corner.y - self.source.y):
            raise OutOfRange(f"{tuple(v)} outside grid rectangle")
        if self.band_halfwidth is not None and abs(dx - dy) > self.band_halfwidth:
            raise BandTooNarrow(f"{tuple(v)} lies outside the band")
        return dx, dy

    def in_band(self, v) -> bool:
        dx, dy = v[0] - self.source.x, v[1] - self.source.y
        return self.band_halfwidth is None or abs(dx - dy) <= self.band_halfwidth

    def touches_edge(self, v) -> bool:
        """Whether the chosen path to ``v`` (including ``v``) meets the band edge."""
        if self.band_halfwidth is None:
            return False
        dx, dy = self._local(v)
        hw = self.band_halfwidth
        if abs(dx - dy) == hw:
            return True
        if dx == 0 and dy == 0:
            return False
        G, E = self.inclusive_values, self.edge_flags
        left = G[dy, dx - 1] if dx > 0 else NEG_INF
        down = G[dy - 1, dx] if dy > 0 else NEG_INF
        if left >= down:
            return bool(E[dy, dx - 1])
        return bool(E[dy - 1, dx])

    def _check_edge(self, v, strict: bool):
        if strict and self.touches_edge(v):
            raise BandTooNarrow(f"geodesic to {tuple(v)} touches the band edge")

    def value(self, v, strict: bool = True) -> float:
        """Exclusive passage time from the source to ``v``."""
        dx, dy = self._local(v)
        self._check_edge(v, strict)
        if dx == 0 and dy == 0:
            return 0.0
        return float(_pred_max(self.inclusive_values, dx, dy))

    def inclusive(self, v, strict: bool = True) -> float:
        dx, dy = self._local(v)
        self._check_edge(v, strict)
        return float(self.inclusive_values[dy, dx])

    def geodesic(self, v, strict: bool = True) -> Geodesic:
        dx, dy = self._local(v)
        self._check_edge(v, strict)
        val = 0.0 if dx == dy == 0 else _pred_max(self.inclusive_values, dx, dy)
        return _geodesic_from_grid(self.inclusive_values, self.source, dx, dy, val)

    def values(self) -> np.ndarray:
        """Exclusive passage times as an array indexed ``[x - sx, y - sy]``."""
        return _exclusive_grid(self.inclusive_values).T

    def to_csv(self, path) -> None:
        P = _exclusive_grid(self.inclusive_values)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "y", "value"])
            ny, nx = P.shape
            for dy in range(ny):
                for dx in range(nx):
                    if np.isfinite(P[dy, dx]):
                        w.writerow([self.source.x + dx, self.source.y + dy, repr(float(P[dy, dx]))])


def passage_grid(field, source, corner, band_halfwidth: Optional[int] = None) -> PassageGrid:
    source, corner = _vid(source), _vid(corner)
    _check_order(source, corner)
    if band_halfwidth is not None:
        band_halfwidth = int(band_halfwidth)
        if band_halfwidth < 1:
            raise ValueError("band_halfwidth must be >= 1")
    hw = -1 if band_halfwidth is None else band_halfwidth
    G, E, _ = _sweep(field, source, corner, hw=hw, track_edge=band_halfwidth is not None)
    return PassageGrid(source, corner, G, band_halfwidth, E if band_halfwidth is not None else None)


# ------------------------------------------------------------ path queries


def transversal(g: Geodesic, ell: int) -> tuple:
    """``(max y on column ell, max x on row ell)``.

    A component is ``None`` when ``ell`` lies outside the path's x range
    (respectively y range); OutOfRange when it lies outside both.
    """
    v = g.vertices
    on_col = v[v[:, 0] == ell]
    on_row = v[v[:, 1] == ell]
    if len(on_col) == 0 and len(on_row) == 0:
        raise OutOfRange(f"{ell} outside both coordinate ranges of the path")
    col = int(on_col[:, 1].max()) if len(on_col) else None
    row = int(on_row[:, 0].max()) if len(on_row) else None
    return (col, row)


def last_diagonal_point(g: Geodesic) -> Optional[VertexId]:
    d = g.diagonal_points()
    if len(d) == 0:
        return None
    u = int(d.max())
    return VertexId(u, u)


def coalescence_point(gs: Sequence[Geodesic], require_diagonal: bool = False) -> Optional[VertexId]:
    """Common vertex of all paths with minimal x (then minimal y)."""
    gs = list(gs)
    if not gs:
        raise ValueError("need at least one geodesic")
    common = None
    for g in gs:
        v = g.vertices
        if require_diagonal:
            v = v[v[:, 0] == v[:, 1]]
        s = set(map(tuple, v.tolist()))
        common = s if common is None else common & s
        if not common:
            return None
    return _vid(min(common))


# ---------------------------------------------------------------- staircase


@dataclass(frozen=True)
class Staircase:
    """Down-right lattice boundary indexed by integers with ``F(0) = (0, 0)``.

    ``xs, ys`` hold ``F(first_index), F(first_index + 1), ...``.  Outside the
    stored range the path continues with ``left_step`` (added when the index
    decreases) and ``right_step`` (added when it increases).
    """

    first_index: int
    xs: np.ndarray
    ys: np.ndarray
    left_step: tuple = (0, 1)
    right_step: tuple = (1, 0)

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=np.int64)
        ys = np.asarray(self.ys, dtype=np.int64)
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)
        if len(xs) != len(ys) or len(xs) == 0:
            raise ValueError("staircase needs matching non-empty coordinate arrays")
        if not (self.first_index <= 0 < self.first_index + len(xs)):
            raise ValueError("stored range must contain index 0")
        if (xs[-self.first_index], ys[-self.first_index]) != (0, 0):
            raise ValueError("staircase must be anchored with F(0) = (0, 0)")
        dx, dy = np.diff(xs), np.diff(ys)
        ok = ((dx == 1) & (dy == 0)) | ((dx == 0) & (dy == -1))
        if not ok.all():
            raise ValueError("staircase steps must be (1, 0) or (0, -1)")
        if tuple(self.left_step) not in ((0, 1), (-1, 0)):
            raise ValueError("left_step must be (0, 1) or (-1, 0)")
        if tuple(self.right_step) not in ((1, 0), (0, -1)):
            raise ValueError("right_step must be (1, 0) or (0, -1)")

    @classmethod
    def from_vertices(cls, vertices, anchor_index: int, left_step=(0, 1), right_step=(1, 0)):
        arr = np.asarray(vertices, dtype=np.int64).reshape(-1, 2)
        return cls(-anchor_index, arr[:, 0], arr[:, 1], tuple(left_step), tuple(right_step))

    @classmethod
    def quadrant(cls) -> "Staircase":
        """Boundary of the positive quadrant (the step configuration)."""
        return cls(0, np.array([0]), np.array([0]))

    @property
    def last_index(self) -> int:
        return self.first_index + len(self.xs) - 1

    def vertices_at(self, idx) -> tuple:
        """Vectorized ``F(idx)``; returns ``(x, y)`` arrays."""
        idx = np.asarray(idx, dtype=np.int64)
        lo, hi = self.first_index, self.last_index
        inner = np.clip(idx, lo, hi) - lo
        x = self.xs[inner].copy()
        y = self.ys[inner].copy()
        below = np.maximum(lo - idx, 0)
        above = np.maximum(idx - hi, 0)
        x += below * self.left_step[0] + above * self.right_step[0]
        y += below * self.left_step[1] + above * self.right_step[1]
        return x, y

    def vertex(self, i: int) -> VertexId:
        x, y = self.vertices_at(np.array([i]))
        return VertexId(int(x[0]), int(y[0]))

    def index_range_below(self, v) -> tuple:
        """Inclusive index range of vertices ``w`` with ``w <= v`` coordinate-wise.

        Returns ``None`` when no vertex precedes ``v``.
        """
        v = _vid(v)
        # x is non-decreasing and y non-increasing in the index; an unbounded
        # side is reported as -UNBOUNDED / +UNBOUNDED
        if self.vertex(0).y > v.y and self.right_step[1] == 0:
            return None
        if self.vertex(0).x > v.x and self.left_step[0] == 0:
            return None
        if self.left_step[1] == 0 and self.vertex(self.first_index).y <= v.y:
            lo = -UNBOUNDED
        else:
            lo = self._search(lambda i: self.vertex(i).y <= v.y, increasing=True)
        if self.right_step[0] == 0 and self.vertex(self.last_index).x <= v.x:
            hi = UNBOUNDED
        else:
            hi = self._search(lambda i: self.vertex(i).x <= v.x, increasing=False)
        if lo is None or hi is None or lo > hi:
            return None
        return (lo, hi)

    def _search(self, pred, increasing: bool):
        # find the first index (increasing) or last index (decreasing) where pred holds
        step = 1
        i0 = 0
        if increasing:
            if pred(i0):
                hi = i0
                lo = i0 - 1
                while pred(lo):
                    hi = lo
                    if lo - step < -(2**40):
                        return None
                    lo -= step
                    step *= 2
            else:
                lo = i0
                hi = i0 + 1
                while not pred(hi):
                    lo = hi
                    if step > 2**40:
                        return None
                    hi += step
                    step *= 2
            while hi - lo > 1:
                mid = (lo + hi) // 2
                if pred(mid):
                    hi = mid
                else:
                    lo = mid
            return hi
        neg = self._search(lambda i: pred(-i), increasing=True)
        return None if neg is None else -neg


UNBOUNDED = 2**40


class PointToSetResult(NamedTuple):
    value: float
    vertex: VertexId
    index: int
    suspect: bool


def default_truncation(n: int) -> int:
    return max(1, int(math.ceil(10.0 * max(n, 1) ** (2.0 / 3.0))))


def predicted_exit_index(s: Staircase, v, index_range: Optional[tuple] = None) -> int:
    """Staircase index maximizing the first-order weight ``(sqrt(dx) + sqrt(dy))^2``."""
    v = _vid(v)
    rng = index_range or s.index_range_below(v)
    if rng is None:
        raise NotOrdered(f"no staircase vertex precedes {tuple(v)}")
    if rng[1] - rng[0] > 10**7:
        raise ValueError("candidate range is unbounded; pass center_index explicitly")
    idx = np.arange(rng[0], rng[1] + 1)
    x, y = s.vertices_at(idx)
    score = (np.sqrt(v.x - x) + np.sqrt(v.y - y)) ** 2
    return int(idx[int(np.argmax(score))])


def point_to_set_passage_time(
    field,
    s: Staircase,
    v,
    truncation_halfwidth: Optional[int] = None,
    center_index: Optional[int] = None,
    warn: bool = True,
) -> PointToSetResult:
    """Max over staircase vertices ``w`` near the predicted exit of ``T(w, v)``.

    Candidates are the indices ``center +- truncation_halfwidth`` that precede
    ``v``.  ``suspect`` is set (and TruncationSuspect warned) when the
    maximizer sits on a truncation bound that actually cut candidates off.
    """
    v = _vid(v)
    rng = s.index_range_below(v)
    if rng is None:
        raise NotOrdered(f"no staircase vertex precedes {tuple(v)}")
    if truncation_halfwidth is None:
        truncation_halfwidth = default_truncation(max(v.x, v.y, 1))
    if truncation_halfwidth < 1:
        raise ValueError("truncation_halfwidth must be >= 1")
    c = predicted_exit_index(s, v, rng) if center_index is None else int(center_index)
    lo = max(rng[0], c - truncation_halfwidth)
    hi = min(rng[1], c + truncation_halfwidth)
    if lo > hi:
        raise NotOrdered("truncation window contains no vertex preceding the target")
    idx = np.arange(lo, hi + 1)
    xs, ys = s.vertices_at(idx)
    low = VertexId(int(xs.min()), int(ys.min()))
    srcmap = np.full((v.y - low.y + 1, v.x - low.x + 1), -1, dtype=np.int32)
    srcmap[ys - low.y, xs - low.x] = np.arange(len(idx), dtype=np.int32)
    G, _, S = _sweep(field, low, v, srcmap=srcmap, track_source=True)
    dx, dy = v.x - low.x, v.y - low.y
    val = _pred_max(G, dx, dy)
    if srcmap[dy, dx] >= 0 and val < 0.0:
        # v on the staircase itself: the trivial path has weight 0
        val, k = 0.0, int(srcmap[dy, dx])
    else:
        left = G[dy, dx - 1] if dx > 0 else NEG_INF
        down = G[dy - 1, dx] if dy > 0 else NEG_INF
        k = int(S[dy, dx - 1]) if left >= down else int(S[dy - 1, dx])
    best = int(idx[k])
    suspect = (best == lo and lo > rng[0]) or (best == hi and hi < rng[1])
    if suspect and warn:
        warnings.warn(
            f"maximizer index {best} sits on the truncation bound [{lo}, {hi}]",
            TruncationSuspect,
            stacklevel=2,
        )
    return PointToSetResult(float(val), VertexId(int(xs[k]), int(ys[k])), best, bool(suspect))


# --------------------------------------------------------------- oracle


def _enumerate_paths(u: VertexId, v: VertexId):
    dx, dy = v.x - u.x, v.y - u.y
    for rights in combinations(range(dx + dy), dx):
        moves = ["U"] * (dx + dy)
        for i in rights:
            moves[i] = "R"
        x, y = u.x, u.y
        verts = [VertexId(x, y)]
        for m in moves:
            if m == "R":
                x += 1
            else:
                y += 1
            verts.append(VertexId(x, y))
        yield moves, verts


def brute_force_passage(weights, u, v, constraint: RegionConstraint = NO_CONSTRAINT):
    """Exhaustive maximum over admissible paths; returns ``(weight, vertices)``.

    Among tied maxima the path chosen by backtracking is returned: compare move
    sequences from the end and prefer arriving from the left.
    """
    if not isinstance(weights, ExplicitWeights):
        weights = ExplicitWeights(np.asarray(weights, dtype=np.float64))
    u, v = _vid(u), _vid(v)
    _check_order(u, v)
    if v.x - u.x + 1 > 6 or v.y - u.y + 1 > 6:
        raise ValueError("brute force is limited to 6x6 rectangles")
    best = None
    for moves, verts in _enumerate_paths(u, v):
        if any(constraint.forbids(z) for z in verts[1:-1]):
            continue
        total = 0.0
        for z in verts[:-1]:
            total = total + weights.weight_at(z)
        key = (total, [m == "R" for m in reversed(moves)])
        if best is None or key > best[0]:
            best = (key, verts)
    if best is None:
        raise NoAdmissiblePath(f"no admissible path from {tuple(u)} to {tuple(v)}")
    return best[0][0], best[1]


def diagonal_passage_times(field, ns, band_halfwidth: Optional[int] = None) -> np.ndarray:
    """Inclusive passage times ``G(n, n)`` from the origin for every ``n`` in ``ns``.

    One sweep to ``max(ns)``; in banded mode any chosen path touching the band
    edge raises BandTooNarrow.
    """
    ns = [int(n) for n in ns]
    top = max(ns)
    grid = passage_grid(field, (0, 0), (top, top), band_halfwidth)
    return np.array([grid.inclusive((n, n)) for n in ns])
