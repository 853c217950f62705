"""Compiled inner loops: counter-based weights and the max-plus sweep.

Everything here works on local coordinates ``(dx, dy)`` relative to a grid
origin ``(x0, y0)``; arrays are laid out ``[dy, dx]``.  The Python wrappers in
:mod:`slowbond.weights` and :mod:`slowbond.lpp` own argument validation.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

NEG_INF = -np.inf

# splitmix64 constants (Steele, Lea & Flood 2014).  Changing any of these
# changes every weight, so they are frozen.
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_KX = np.uint64(0xD6E8FEB86659FD93)
_KY = np.uint64(0xA0761D6478BD642F)
_KS = np.uint64(0xE7037ED1A0B428DB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_TWO_M53 = 1.0 / 9007199254740992.0

COUPLED = 0
INDEPENDENT = 1


@njit(cache=True, inline="always")
def mix64(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(cache=True, inline="always")
def _as_u64(v):
    # two's-complement reinterpretation of a signed coordinate
    return np.uint64(np.int64(v))


@njit(cache=True)
def uniform_at(key, x, y, stream):
    """Uniform in (0, 1) addressed by (key, x, y, stream)."""
    h = mix64(key + np.uint64(stream) * _KS)
    h = mix64(h ^ (_as_u64(x) * _KX))
    h = mix64(h ^ (_as_u64(y) * _KY))
    u = np.float64(h >> _S11) * _TWO_M53
    if u == 0.0:
        u = _TWO_M53
    return u


@njit(cache=True)
def field_weight(key, rate, mode, x, y):
    if x == y:
        if mode == COUPLED:
            return -math.log(uniform_at(key, x, y, 0)) / rate
        return -math.log(uniform_at(key, x, y, 1)) / rate
    return -math.log(uniform_at(key, x, y, 0))


@njit(cache=True)
def fill_weights(key, rate, mode, x0, y0, nx, ny):
    out = np.empty((ny, nx), dtype=np.float64)
    for dy in range(ny):
        for dx in range(nx):
            out[dy, dx] = field_weight(key, rate, mode, x0 + dx, y0 + dy)
    return out


@njit(cache=True)
def sweep(
    key,
    rate,
    mode,
    explicit,
    ex_x0,
    ex_y0,
    x0,
    y0,
    nx,
    ny,
    hw,
    avoid,
    seg_lo,
    seg_hi,
    srcmap,
    G,
    E,
    S,
):
    """Fill ``G`` with inclusive passage times (final vertex counted).

    ``G[dy, dx]`` is the heaviest admissible path from a source to the cell,
    counting every vertex; cells that cannot be reached hold -inf.  The
    excluded-final-vertex value at a cell is the max over its predecessors.

    explicit: weight array ``[y - ex_y0, x - ex_x0]``; size 0 means hash.
    hw: band halfwidth about dx == dy, or -1 for the full rectangle.
    avoid: forbid cells with y >= x and seg_lo <= x <= seg_hi (sources exempt).
    srcmap: int32 ``[dy, dx]`` source index or -1; size 0 means the single
        source (0, 0).
    E: uint8 band-edge flag along the chosen path (size 0: not tracked).
    S: int32 index of the source the chosen path started from (size 0: not
        tracked).
    """
    use_explicit = explicit.size > 0
    multi = srcmap.size > 0
    track_e = E.size > 0 and hw >= 0
    track_s = S.size > 0
    for dy in range(ny):
        if hw >= 0:
            lo = dy - hw
            if lo < 0:
                lo = 0
            hi = dy + hw
            if hi > nx - 1:
                hi = nx - 1
        else:
            lo = 0
            hi = nx - 1
        y = y0 + dy
        for dx in range(lo, hi + 1):
            x = x0 + dx
            if multi:
                sidx = srcmap[dy, dx]
            elif dx == 0 and dy == 0:
                sidx = 0
            else:
                sidx = -1
            if avoid and sidx < 0 and y >= x and x >= seg_lo and x <= seg_hi:
                G[dy, dx] = NEG_INF
                continue
            left = G[dy, dx - 1] if dx > 0 else NEG_INF
            down = G[dy - 1, dx] if dy > 0 else NEG_INF
            # ties go to the left predecessor (smaller x)
            if left >= down:
                best = left
                from_left = True
            else:
                best = down
                from_left = False
            if best == NEG_INF:
                if sidx < 0:
                    G[dy, dx] = NEG_INF
                    continue
                base = 0.0
                fresh = True
            else:
                base = best
                fresh = False
            if use_explicit:
                w = explicit[y - ex_y0, x - ex_x0]
            else:
                w = field_weight(key, rate, mode, x, y)
            G[dy, dx] = base + w
            if track_e:
                d = dx - dy
                edge = 1 if (d == hw or d == -hw) else 0
                if not fresh:
                    if from_left:
                        edge |= E[dy, dx - 1]
                    else:
                        edge |= E[dy - 1, dx]
                E[dy, dx] = edge
            if track_s:
                if fresh:
                    S[dy, dx] = sidx
                elif from_left:
                    S[dy, dx] = S[dy, dx - 1]
                else:
                    S[dy, dx] = S[dy - 1, dx]


@njit(cache=True)
def backtrack(G, dx, dy):
    """Cells of the chosen path ending at (dx, dy), first cell first.

    The endpoint itself may hold -inf (exempt endpoint of a constrained
    query); its predecessor is chosen from the predecessors' values.
    """
    xs = np.empty(dx + dy + 1, dtype=np.int64)
    ys = np.empty(dx + dy + 1, dtype=np.int64)
    m = 0
    cx = dx
    cy = dy
    while True:
        xs[m] = cx
        ys[m] = cy
        m += 1
        left = G[cy, cx - 1] if cx > 0 else NEG_INF
        down = G[cy - 1, cx] if cy > 0 else NEG_INF
        if left == NEG_INF and down == NEG_INF:
            break
        if left >= down:
            cx -= 1
        else:
            cy -= 1
    out_x = np.empty(m, dtype=np.int64)
    out_y = np.empty(m, dtype=np.int64)
    for i in range(m):
        out_x[i] = xs[m - 1 - i]
        out_y[i] = ys[m - 1 - i]
    return out_x, out_y
