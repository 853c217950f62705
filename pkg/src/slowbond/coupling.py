"""Jump times as passage times, and occupation measures read off the lattice.

Particle ``j`` jumping from site ``p`` is vertex ``(p + j, j)``.  Its jump
time is the inclusive passage time ``max(G(left), G(down)) + w(v)``, i.e. the
exclusive passage time plus the vertex's own weight.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field as dc_field
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import IncompleteParallelogram, NotOrdered
from .lpp import PassageGrid, Staircase, passage_grid, passage_time, point_to_set_passage_time
from .tasep import (
    EmpiricalOccupationMeasure,
    InitialCondition,
    StopRule,
    accumulate_patterns,
    simulate,
)
from .weights import ExplicitWeights, WeightField, weight_at


def jump_time_lpp(field, n: int, k: int) -> float:
    """Time particle ``n`` (initially at ``-n``) jumps from site ``k`` to ``k + 1``."""
    if n < 0 or n + k < 0:
        raise NotOrdered(f"invalid (n, k) = ({n}, {k})")
    v = (n + k, n)
    return passage_time(field, (0, 0), v) + weight_at(field, v)


def jump_time_general(field, s: Staircase, ell: int, n: int, truncation: Optional[int] = None, **kw) -> float:
    """Time particle ``n`` jumps from site ``ell`` for the configuration encoded by ``s``."""
    v = (n + ell, n)
    res = point_to_set_passage_time(field, s, v, truncation, **kw)
    return res.value + weight_at(field, v)


# ------------------------------------------------------------ parallelogram


@dataclass(frozen=True)
class ParallelogramSpec:
    """Vertices whose passage times fix the occupation of ``interval`` over
    ``[T_s, T_{s + r_len}]`` under the step configuration.

    ``interval`` defaults to ``[-b, b]``.  Particle rows run from
    ``s - max(hi, 0) - 1`` to ``s + r_len + max(-lo, 0) + 1``; each row ``j``
    needs columns ``j + lo - 1 .. j + hi``.
    """

    s: int
    r_len: int
    b: int = 0
    interval: Optional[tuple] = None

    def __post_init__(self):
        iv = (-self.b, self.b) if self.interval is None else (int(self.interval[0]), int(self.interval[1]))
        object.__setattr__(self, "interval", iv)
        if iv[0] > iv[1]:
            raise ValueError("interval must satisfy lo <= hi")
        if self.b < 0 or self.r_len < 1:
            raise ValueError("need b >= 0 and r_len >= 1")
        if self.s <= max(iv[1], 0):
            raise ValueError("s must exceed the interval's right end")

    @property
    def rows(self) -> tuple:
        lo, hi = self.interval
        return (self.s - max(hi, 0) - 1, self.s + self.r_len + max(-lo, 0) + 1)

    def vertices(self) -> list:
        lo, hi = self.interval
        out = []
        for j in range(self.rows[0], self.rows[1] + 1):
            for x in range(max(j + lo - 1, 0), j + hi + 1):
                out.append((x, j))
        for d in (self.s, self.s + self.r_len):
            if (d, d) not in out:
                out.append((d, d))
        return out

    @property
    def corner(self) -> tuple:
        lo, hi = self.interval
        j1 = self.rows[1]
        return (max(j1 + hi, self.s + self.r_len), j1)


def parallelogram_times(grid: PassageGrid, spec: ParallelogramSpec, strict: bool = True) -> dict:
    """Inclusive passage times from a grid rooted at the origin, keyed by vertex."""
    return {v: grid.inclusive(v, strict=strict) for v in spec.vertices()}


def occupation_from_passage_times(times: Mapping, spec: ParallelogramSpec) -> EmpiricalOccupationMeasure:
    """Occupation measure of ``spec.interval`` over ``[T_s, T_{s + r_len}]``.

    Site ``i`` is occupied at ``t`` iff some particle ``j`` has
    ``G(j + i - 1, j) <= t < G(j + i, j)``; vertices with ``x < 0`` count as
    ``-inf`` (the particle starts there).
    """
    lo, hi = spec.interval

    def get(x, y):
        if x < 0:
            return -np.inf
        try:
            return float(times[(x, y)])
        except KeyError:
            raise IncompleteParallelogram(f"missing vertex {(x, y)}") from None

    t1 = get(spec.s, spec.s)
    t2 = get(spec.s + spec.r_len, spec.s + spec.r_len)
    state = np.zeros(hi - lo + 1, dtype=np.int64)
    ev_t, ev_s = [], []
    for j in range(spec.rows[0], spec.rows[1] + 1):
        for i in range(lo, hi + 1):
            if get(j + i - 1, j) <= t1 < get(j + i, j):
                state[i - lo] = 1
        for x in range(max(j + lo - 1, 0), j + hi + 1):
            t = get(x, j)
            if t1 < t < t2:
                ev_t.append(t)
                ev_s.append(x - j)
    ev_t = np.array(ev_t, dtype=np.float64)
    ev_s = np.array(ev_s, dtype=np.int64)
    order = np.argsort(ev_t, kind="stable")
    return accumulate_patterns((lo, hi), state, ev_t[order], ev_s[order], t1, t2)


# ------------------------------------------------------------------ checker


@dataclass
class CouplingReport:
    seeds: list = dc_field(default_factory=list)
    max_discrepancy: float = 0.0
    violations: list = dc_field(default_factory=list)
    compared: int = 0

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2)


def coupling_equivalence_report(
    seeds: Sequence[int],
    n_max: int = 40,
    k_max: int = 10,
    r: float = 0.5,
    perturb: Optional[tuple] = None,
) -> CouplingReport:
    """Run both engines on shared waiting times and compare every jump time.

    ``perturb = (vertex, factor)`` multiplies one weight on the lattice side
    only, to check that the comparison detects a broken coupling.
    """
    rep = CouplingReport()
    corner = (n_max + k_max, n_max)
    for seed in seeds:
        fld = WeightField(int(seed), r)
        log = simulate(InitialCondition.step(), r, StopRule.particle_at(n_max, k_max), field=fld)
        if not log.replay_check():
            rep.violations.append(f"seed {seed}: exclusion replay failed")
        lattice = fld
        if perturb is not None:
            block = fld.block((0, 0), corner).copy()
            (px, py), factor = perturb
            block[px, py] *= factor
            lattice = ExplicitWeights(block)
        grid = passage_grid(lattice, (0, 0), corner)
        for t, p, j in zip(log.times, log.from_sites, log.labels):
            x, y = int(p + j), int(j)
            if 0 <= y <= n_max and 0 <= x <= corner[0] and p <= k_max:
                d = abs(float(t) - grid.inclusive((x, y)))
                rep.compared += 1
                if d > rep.max_discrepancy:
                    rep.max_discrepancy = d
        rep.seeds.append(int(seed))
    if rep.max_discrepancy != 0.0:
        rep.violations.append(f"nonzero discrepancy {rep.max_discrepancy!r}")
    return rep
