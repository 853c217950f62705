"""Event-driven TASEP with a slow bond from site 0 to site 1.

Particles are labelled so that the rightmost particle at or left of the
origin is label 0, labels increase to the left, and particles initially to
the right of the origin get negative labels.  Particle ``j`` jumping from
site ``p`` is lattice vertex ``(p + j, j)``; in coupled mode its waiting time
is the field weight of that vertex.
"""

from __future__ import annotations

import csv
import heapq
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import HorizonExceeded, WindowNotTracked
from .lpp import Staircase
from .weights import WeightField, weight_at


@dataclass(frozen=True)
class InitialCondition:
    """Initial configuration: a finite window plus tails.

    Sites left of the window hold ``left_tail`` (0 or 1); sites right of it
    are empty.
    """

    kind: str
    occupancy: tuple = ()
    first_site: int = 0
    left_tail: int = 1
    p: Optional[float] = None
    config_seed: Optional[int] = None

    @classmethod
    def step(cls) -> "InitialCondition":
        return cls("step", (1,), 0, 1)

    @classmethod
    def bernoulli(cls, p: float, config_seed: int, half_width: int) -> "InitialCondition":
        if not 0.0 < p < 1.0:
            raise ValueError("p must lie in (0, 1)")
        if half_width < 1:
            raise ValueError("half_width must be >= 1")
        rng = np.random.default_rng(config_seed)
        occ = (rng.random(2 * half_width + 1) < p).astype(int)
        return cls("bernoulli", tuple(int(o) for o in occ), -half_width, 1, float(p), int(config_seed))

    @classmethod
    def explicit(cls, occupancy, first_site: int = 0, left_tail: int = 0) -> "InitialCondition":
        occ = tuple(int(o) for o in occupancy)
        if any(o not in (0, 1) for o in occ) or not occ:
            raise ValueError("explicit occupancy must be a non-empty 0/1 sequence")
        if left_tail not in (0, 1):
            raise ValueError("left_tail must be 0 or 1")
        return cls("explicit", occ, int(first_site), int(left_tail))

    @property
    def last_site(self) -> int:
        return self.first_site + len(self.occupancy) - 1

    def occupied(self, i: int) -> int:
        if i < self.first_site:
            return self.left_tail
        if i > self.last_site:
            return 0
        return self.occupancy[i - self.first_site]

    def staircase(self) -> Staircase:
        return staircase_from_config(self.occupancy, self.first_site, self.left_tail, 0)

    def particles(self, tail_particles: int) -> tuple:
        """``(min_label, positions)`` for the window particles plus ``tail_particles``
        extra left-tail particles; ``positions[j - min_label]`` is particle ``j``'s site.
        """
        sites = [i for i, o in enumerate(self.occupancy, start=self.first_site) if o]
        if self.left_tail:
            sites = list(range(self.first_site - tail_particles, self.first_site)) + sites
        sites.sort(reverse=True)
        n_right = sum(1 for s in sites if s > 0)
        return -n_right, np.array(sites, dtype=np.int64)


def staircase_from_config(occupancy, first_site: int = 0, left_tail: int = 1, right_tail: int = 0) -> Staircase:
    """Boundary path encoding a configuration, with ``F(0) = (0, 0)``.

    ``F(i) = F(i - 1) + (0, -1)`` if site ``i`` is occupied else ``+ (1, 0)``
    for ``i > 0``; ``F(i) = F(i + 1) + (0, 1)`` if site ``i + 1`` is occupied
    else ``+ (-1, 0)`` for ``i < 0``.
    """
    occ = [int(o) for o in occupancy]
    last = first_site + len(occ) - 1
    lo = min(first_site, 0)
    hi = max(last, 1)

    def eta(i):
        if i < first_site:
            return left_tail
        if i > last:
            return right_tail
        return occ[i - first_site]

    idx_lo = lo - 1
    n = hi - idx_lo + 1
    xs = np.zeros(n, dtype=np.int64)
    ys = np.zeros(n, dtype=np.int64)
    z = -idx_lo
    for i in range(1, hi + 1):
        k = i - idx_lo
        if eta(i):
            xs[k], ys[k] = xs[k - 1], ys[k - 1] - 1
        else:
            xs[k], ys[k] = xs[k - 1] + 1, ys[k - 1]
    for i in range(-1, idx_lo - 1, -1):
        k = i - idx_lo
        if eta(i + 1):
            xs[k], ys[k] = xs[k + 1], ys[k + 1] + 1
        else:
            xs[k], ys[k] = xs[k + 1] - 1, ys[k + 1]
    assert xs[z] == 0 and ys[z] == 0
    left_step = (0, 1) if left_tail else (-1, 0)
    right_step = (0, -1) if right_tail else (1, 0)
    return Staircase(idx_lo, xs, ys, left_step, right_step)


@dataclass(frozen=True)
class StopRule:
    """``time`` (run to ``t``), ``crossings`` (stop at the ``n``-th jump out of
    site 0) or ``site`` (stop when particle ``label`` jumps from ``site``)."""

    kind: str
    t: Optional[float] = None
    n: Optional[int] = None
    label: Optional[int] = None
    site: Optional[int] = None

    @classmethod
    def time(cls, t: float) -> "StopRule":
        if t < 0:
            raise ValueError("time horizon must be non-negative")
        return cls("time", t=float(t))

    @classmethod
    def crossings(cls, n: int) -> "StopRule":
        if n < 1:
            raise ValueError("crossing count must be >= 1")
        return cls("crossings", n=int(n))

    @classmethod
    def particle_at(cls, label: int, site: int) -> "StopRule":
        return cls("site", label=int(label), site=int(site))

    def scale(self) -> int:
        """Rough problem size used to size the default truncation."""
        if self.kind == "crossings":
            return self.n
        if self.kind == "site":
            return max(abs(self.label), 0) + abs(self.site) + 1
        return int(math.ceil(self.t))


def default_buffer(n: int) -> int:
    return max(50, n // 5)


@dataclass(frozen=True)
class EventLog:
    """Time-ordered jumps plus what is needed to replay the tracked window."""

    times: np.ndarray
    from_sites: np.ndarray
    labels: np.ndarray
    tracked_window: tuple
    initial_window: np.ndarray
    validity_horizon: float
    stop_time: float
    min_label: int
    initial_positions: np.ndarray
    rate: float

    def __post_init__(self):
        if len(self.times) > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("event times must be strictly increasing")

    def __len__(self):
        return len(self.times)

    def crossing_times(self) -> np.ndarray:
        return self.times[self.from_sites == 0]

    def jump_time(self, label: int, site: int) -> Optional[float]:
        hit = np.nonzero((self.labels == label) & (self.from_sites == site))[0]
        return float(self.times[hit[0]]) if len(hit) else None

    def replay_check(self) -> bool:
        """Replay every jump; verify exclusion and order preservation."""
        pos = self.initial_positions.copy()
        m = self.min_label
        for t, s, j in zip(self.times, self.from_sites, self.labels):
            k = j - m
            if pos[k] != s:
                return False
            if k > 0 and pos[k - 1] == s + 1:
                return False
            pos[k] = s + 1
        return bool(np.all(np.diff(pos) < 0))

    def window_conserved(self) -> bool:
        """Occupancy change on the window equals the net boundary flux."""
        a, b = self.tracked_window
        final = window_state(self, self.stop_time)
        inflow = int(np.sum(self.from_sites == a - 1))
        outflow = int(np.sum(self.from_sites == b))
        return int(final.sum()) - int(self.initial_window.sum()) == inflow - outflow

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time", "from_site", "particle_label"])
            for t, s, j in zip(self.times, self.from_sites, self.labels):
                w.writerow([repr(float(t)), int(s), int(j)])


def simulate(
    ic: InitialCondition,
    r: float,
    stop: StopRule,
    tracked_window: tuple = (0, 0),
    seed: Optional[int] = None,
    field: Optional[WeightField] = None,
    tail_particles: Optional[int] = None,
    max_events: int = 50_000_000,
) -> EventLog:
    """Exact continuous-time dynamics on a finite truncation.

    Coupled mode (``field`` given) takes each waiting time from the field;
    otherwise clocks are fresh exponentials from ``default_rng(seed)``.  A
    clock is drawn when a particle becomes able to jump and is kept until it
    rings, which is distributionally identical to resampling by
    memorylessness and makes the coupled mode exact.

    Only the leftmost ``tail_particles`` of the left tail are simulated.  The
    tracked window is exact until the last simulated particle jumps out of
    its left end site; HorizonExceeded is raised when the stop needs more.
    """
    if not 0.0 < r <= 1.0:
        raise ValueError("r must lie in (0, 1]")
    a, b = int(tracked_window[0]), int(tracked_window[1])
    if a > b:
        raise ValueError("tracked window must satisfy a <= b")
    if field is not None and field.diagonal_rate != r:
        raise ValueError("coupled field diagonal_rate must equal r")
    if tail_particles is None:
        tail_particles = stop.scale() + default_buffer(stop.scale()) if ic.left_tail else 0
    min_label, pos = ic.particles(tail_particles)
    n = len(pos)
    init_pos = pos.copy()
    initial_window = np.array([ic.occupied(i) for i in range(a, b + 1)], dtype=np.int8)
    truncated = bool(ic.left_tail)
    last_k = n - 1
    if truncated and n and pos[last_k] > a:
        raise HorizonExceeded("tracked window extends past the simulated particles")

    rng = None if field is not None else np.random.default_rng(seed)
    if field is not None:
        key, rate, mode = field.key, field.diagonal_rate, field.mode_code
        from ._kernels import field_weight

        def wait(j, p):
            return float(field_weight(key, rate, mode, p + j, j))

    else:

        def wait(j, p):
            return rng.exponential(1.0 / r) if p == 0 else rng.exponential(1.0)

    heap: list = []
    for k in range(n):
        if k == 0 or pos[k - 1] != pos[k] + 1:
            j = k + min_label
            heapq.heappush(heap, (0.0 + wait(j, int(pos[k])), k))

    times, sites, labs = [], [], []
    horizon = math.inf
    crossings = 0
    stop_time = None
    while heap:
        t, k = heapq.heappop(heap)
        if stop.kind == "time" and t > stop.t:
            break
        p = int(pos[k])
        j = k + min_label
        pos[k] = p + 1
        times.append(t)
        sites.append(p)
        labs.append(j)
        if len(times) > max_events:
            raise RuntimeError("event budget exhausted")
        if truncated and k == last_k and p == a and horizon == math.inf:
            horizon = t
        # the mover may continue; the follower may have been released
        if k == 0 or pos[k - 1] != p + 2:
            heapq.heappush(heap, (t + wait(j, p + 1), k))
        if k + 1 < n and pos[k + 1] == p - 1:
            heapq.heappush(heap, (t + wait(j + 1, p - 1), k + 1))
        if p == 0:
            crossings += 1
        if stop.kind == "crossings" and crossings == stop.n:
            stop_time = t
            break
        if stop.kind == "site" and j == stop.label and p == stop.site:
            stop_time = t
            break
        if horizon < math.inf:
            raise HorizonExceeded(f"tracked window contaminated at t={horizon:.6g} before the stop event")
    if stop_time is None:
        if stop.kind == "time":
            stop_time = stop.t
        else:
            raise HorizonExceeded("stop event never occurred among simulated particles")
    if horizon < stop_time:
        raise HorizonExceeded(
            f"tracked window contaminated at t={horizon:.6g} before stop at t={stop_time:.6g}"
        )
    return EventLog(
        times=np.array(times, dtype=np.float64),
        from_sites=np.array(sites, dtype=np.int64),
        labels=np.array(labs, dtype=np.int64),
        tracked_window=(a, b),
        initial_window=initial_window,
        validity_horizon=float(stop_time),
        stop_time=float(stop_time),
        min_label=int(min_label),
        initial_positions=init_pos,
        rate=float(r),
    )


# ------------------------------------------------------ occupation measures


@dataclass(frozen=True)
class EmpiricalOccupationMeasure:
    """Time fractions of each pattern on sites ``interval[0]..interval[1]``.

    ``fractions[code]`` is the fraction for the pattern whose bit ``i - a``
    is the occupancy of site ``i``.
    """

    interval: tuple
    fractions: np.ndarray

    @property
    def size(self) -> int:
        return self.interval[1] - self.interval[0] + 1

    def pattern(self, code: int) -> tuple:
        return tuple((code >> i) & 1 for i in range(self.size))

    def __getitem__(self, pattern) -> float:
        code = sum(int(bit) << i for i, bit in enumerate(pattern))
        return float(self.fractions[code])

    def as_dict(self) -> dict:
        return {"".join(map(str, self.pattern(c))): float(f) for c, f in enumerate(self.fractions)}

    def site_density(self, site: int) -> float:
        i = site - self.interval[0]
        codes = np.arange(len(self.fractions))
        return float(self.fractions[((codes >> i) & 1) == 1].sum())

    def marginal(self, sub: tuple) -> "EmpiricalOccupationMeasure":
        c, d = sub
        a = self.interval[0]
        if c < a or d > self.interval[1] or c > d:
            raise WindowNotTracked("sub-interval outside the measure's interval")
        out = np.zeros(1 << (d - c + 1))
        codes = np.arange(len(self.fractions))
        sub_codes = (codes >> (c - a)) & ((1 << (d - c + 1)) - 1)
        np.add.at(out, sub_codes, self.fractions)
        return EmpiricalOccupationMeasure((c, d), out)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["pattern", "fraction"])
            for c, f in enumerate(self.fractions):
                w.writerow(["".join(map(str, self.pattern(c))), repr(float(f))])


def pool_measures(measures) -> EmpiricalOccupationMeasure:
    """Average of measures on a common interval, folded in the given order."""
    measures = list(measures)
    if not measures:
        raise ValueError("nothing to pool")
    acc = np.zeros_like(measures[0].fractions)
    for m in measures:
        if m.interval != measures[0].interval:
            raise ValueError("measures must share an interval")
        acc = acc + m.fractions
    return EmpiricalOccupationMeasure(measures[0].interval, acc / len(measures))


def accumulate_patterns(interval, state0, ev_times, ev_sites, t1: float, t2: float) -> EmpiricalOccupationMeasure:
    """Pattern time-fractions on ``interval`` over ``[t1, t2]``.

    ``state0`` is the occupancy of the interval at time ``t1`` (events at
    times ``<= t1`` already applied); ``ev_times``/``ev_sites`` are the jumps
    in ``(t1, t2)`` touching the interval, sorted by time.
    """
    a, b = interval
    state = np.array(state0, dtype=np.int64)
    code = int(sum(int(state[i]) << i for i in range(len(state))))
    dur = np.zeros(1 << (b - a + 1))
    prev = t1
    for t, s in zip(ev_times, ev_sites):
        dur[code] += t - prev
        prev = t
        if a <= s <= b:
            code &= ~(1 << (s - a))
        if a <= s + 1 <= b:
            code |= 1 << (s + 1 - a)
    dur[code] += t2 - prev
    return EmpiricalOccupationMeasure((a, b), dur / (t2 - t1))


def _check_window(log: EventLog, interval, t1, t2):
    a, b = interval
    if a > b or a < log.tracked_window[0] or b > log.tracked_window[1]:
        raise WindowNotTracked(f"interval {interval} not inside tracked window {log.tracked_window}")
    if not t2 > t1:
        raise ValueError("need t2 > t1")
    if t1 < 0 or t2 > log.validity_horizon:
        raise HorizonExceeded(f"[{t1}, {t2}] not inside [0, {log.validity_horizon}]")


def window_state(log: EventLog, t: float, interval=None) -> np.ndarray:
    """Occupancy of ``interval`` (default: tracked window) at time ``t``."""
    a0, _ = log.tracked_window
    state = log.initial_window.astype(np.int64).copy()
    a, b = log.tracked_window
    upto = np.searchsorted(log.times, t, side="right")
    s = log.from_sites[:upto]
    for site in s[(s >= a - 1) & (s <= b)]:
        if a <= site <= b:
            state[site - a0] = 0
        if a <= site + 1 <= b:
            state[site + 1 - a0] = 1
    if interval is None:
        return state
    return state[interval[0] - a0 : interval[1] - a0 + 1]


def occupation_measure(log: EventLog, interval, t1: float, t2: float) -> EmpiricalOccupationMeasure:
    interval = (int(interval[0]), int(interval[1]))
    _check_window(log, interval, t1, t2)
    a, b = interval
    state0 = window_state(log, t1, interval)
    lo = np.searchsorted(log.times, t1, side="right")
    hi = np.searchsorted(log.times, t2, side="left")
    ts = log.times[lo:hi]
    ss = log.from_sites[lo:hi]
    sel = (ss >= a - 1) & (ss <= b)
    return accumulate_patterns(interval, state0, ts[sel], ss[sel], t1, t2)


def current(log: EventLog, site: int, t1: float, t2: float) -> float:
    """Jumps from ``site`` during ``[t1, t2]`` per unit time."""
    _check_window(log, (site, site), t1, t2)
    lo = np.searchsorted(log.times, t1, side="left")
    hi = np.searchsorted(log.times, t2, side="right")
    return float(np.sum(log.from_sites[lo:hi] == site)) / (t2 - t1)
