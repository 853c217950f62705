"""Per-experiment replica kernels and aggregations.

Each experiment provides ``replica(spec, index, seed, context) -> dict`` and
``aggregate(spec, records, context) -> (aggregates, checks)``.  ``context``
holds inputs shared by all replicas (for instance an epsilon estimate), is
computed once by ``prepare(spec)``, and is stored in the result next to the
records so every aggregate can be recomputed from the file.
"""

from __future__ import annotations

import math
from typing import Callable, Dict

import numpy as np

from ..coupling import ParallelogramSpec, coupling_equivalence_report, occupation_from_passage_times, parallelogram_times
from ..errors import TruncationSuspect
from ..estimators import (
    default_band,
    estimate_epsilon,
    exit_point_prediction,
    fit_epsilon,
    fluctuation_exponent,
    normality_test,
    profile_vs_product,
    rho_from_epsilon,
    slope_prediction,
    tv_distance,
    tw_standardize,
    x1_prediction,
)
from ..lpp import last_diagonal_point, passage_grid, point_to_set_passage_time, transversal
from ..tasep import InitialCondition, StopRule, occupation_measure, pool_measures, simulate, EmpiricalOccupationMeasure
from ..weights import WeightField, derive_replica_seed

EPSILON_STREAM = 2**32


def check(name: str, value, passed: bool, threshold=None) -> dict:
    return {"name": name, "value": value, "threshold": threshold, "passed": bool(passed)}


def _band(spec, top: int):
    if spec.band_halfwidth is not None:
        return spec.band_halfwidth
    return None if spec.r == 1.0 else default_band(top)


def _field(spec, seed: int) -> WeightField:
    return WeightField(seed, spec.r)


def _stack(records, key) -> np.ndarray:
    return np.array([rec[key] for rec in records], dtype=np.float64)


def _epsilon_context(spec) -> dict:
    if spec.epsilon is not None:
        return {"epsilon": float(spec.epsilon), "epsilon_source": "config"}
    sub_seed = derive_replica_seed(spec.master_seed, EPSILON_STREAM)
    est = estimate_epsilon(spec.r, spec.epsilon_n_grid, spec.epsilon_reps, sub_seed, band_halfwidth=spec.band_halfwidth or "auto")
    return {"epsilon": est.epsilon_hat, "epsilon_source": "estimated", "epsilon_fit": est.to_dict()}


# ----------------------------------------------------------- diagonal times


def _diag_replica(spec, index, seed, ctx):
    ns = list(spec.n_grid)
    extra = []
    if spec.experiment == "epsilon" and spec.r == 1.0:
        extra = [spec.rost_n - 1, spec.rost_n_small - 1]
    top = max(ns + extra)
    grid = passage_grid(_field(spec, seed), (0, 0), (top, top), _band(spec, top))
    rec = {
        "T": [grid.inclusive((n, n)) for n in ns],
        "T_excl": [grid.value((n, n)) for n in ns],
        "cells": grid.cell_count,
    }
    if extra:
        rec["T_rost"] = [grid.inclusive((n, n)) for n in extra]
    return rec


def _epsilon_aggregate(spec, records, ctx):
    y = _stack(records, "T")
    fit = fit_epsilon(spec.n_grid, y, spec.r, bootstrap_seed=spec.master_seed)
    eps = fit.epsilon_hat
    agg = {"fit": fit.to_dict(), "mean_T_over_n": [float(m / n) for m, n in zip(fit.means, spec.n_grid)]}
    ident = abs(fit.rho * fit.rho_prime * (4.0 + max(eps, 0.0)) - 1.0)
    checks = [check("rho_identity", ident, ident <= spec.threshold("identity_tol"), spec.threshold("identity_tol"))]
    if spec.r < 1.0:
        checks.append(check("epsilon_positive", eps, eps > spec.threshold("epsilon_min"), spec.threshold("epsilon_min")))
        checks.append(check("ci_excludes_zero", list(fit.epsilon_ci), fit.epsilon_ci[0] > 0.0, 0.0))
    else:
        lim = spec.threshold("null_epsilon_max")
        checks.append(check("epsilon_null", eps, abs(eps) <= lim, lim))
        rost = _stack(records, "T_rost").mean(axis=0)
        big = rost[0] / spec.rost_n
        small = rost[1] / spec.rost_n_small
        lo, hi = spec.threshold("rost_low"), spec.threshold("rost_high")
        agg["rost"] = {"n": spec.rost_n, "mean_T_over_n": big, "n_small": spec.rost_n_small, "mean_T_over_n_small": small}
        checks.append(check("rost_mean", big, lo <= big <= hi, [lo, hi]))
        ratio = (4.0 - small) / (4.0 - big) if big < 4.0 else float("inf")
        checks.append(check("rost_shrink", ratio, ratio >= spec.threshold("rost_shrink"), spec.threshold("rost_shrink")))
    return agg, checks


def _exponent_aggregate(spec, records, ctx):
    y = _stack(records, "T")
    fit = fluctuation_exponent({n: y[:, i] for i, n in enumerate(spec.n_grid)}, bootstrap_seed=spec.master_seed)
    lo = spec.threshold("exponent_low")
    hi = spec.threshold("exponent_high")
    if lo is None:
        lo = 0.25 if spec.r == 1.0 else 0.42
    if hi is None:
        hi = 0.42 if spec.r == 1.0 else 0.58
    agg = {"fit": fit.to_dict()}
    checks = [check("exponent_window", fit.exponent_hat, lo <= fit.exponent_hat <= hi, [lo, hi])]
    if spec.r == 1.0:
        top = int(np.argmax(spec.n_grid))
        z = tw_standardize(_stack(records, "T_excl")[:, top], spec.n_grid[top], 1.0)
        m = float(z.mean())
        agg["tw_mean"] = m
        tl, th = spec.threshold("tw_mean_low"), spec.threshold("tw_mean_high")
        checks.append(check("tw_mean_bracket", m, tl <= m <= th, [tl, th]))
    return agg, checks


def _clt_aggregate(spec, records, ctx):
    y = _stack(records, "T")
    vpn = [float(y[:, i].var(ddof=1) / n) for i, n in enumerate(spec.n_grid)]
    ratio = max(vpn) / min(vpn)
    top = int(np.argmax(spec.n_grid))
    a2, p = normality_test(y[:, top])
    lo, hi = spec.threshold("ratio_low"), spec.threshold("ratio_high")
    agg = {"variance_per_n": vpn, "max_over_min": ratio, "anderson_darling": a2, "ad_p_value": p}
    checks = [
        check("variance_ratio", ratio, lo <= 1.0 / ratio and ratio <= hi, [lo, hi]),
        check("normality", p, p > spec.threshold("ad_p_min"), spec.threshold("ad_p_min")),
    ]
    return agg, checks


# --------------------------------------------------------------- geodesics


def _pinning_replica(spec, index, seed, ctx):
    n = spec.n
    grid = passage_grid(_field(spec, seed), (0, 0), (n, n), _band(spec, n))
    g = grid.geodesic((n, n))
    d = g.diagonal_points()
    inner = d[(d > 0) & (d < n)]
    return {"touches": bool(len(inner) > 0), "diagonal_visits": int(len(inner)), "cells": grid.cell_count}


def _pinning_aggregate(spec, records, ctx):
    frac = float(np.mean([rec["touches"] for rec in records]))
    mv = float(np.mean([rec["diagonal_visits"] for rec in records]))
    t = spec.threshold("touch_fraction_min")
    return {"touch_fraction": frac, "mean_visits": mv}, [check("touch_fraction", frac, frac >= t, t)]


def _transversal_replica(spec, index, seed, ctx):
    top = max(spec.n_grid)
    grid = passage_grid(_field(spec, seed), (0, 0), (top, top), _band(spec, top))
    devs = []
    for n in spec.n_grid:
        g = grid.geodesic((n, n))
        col, _ = transversal(g, n // 2)
        devs.append(abs(col - n // 2))
    return {"deviation": devs, "cells": grid.cell_count}


def _transversal_aggregate(spec, records, ctx):
    d = _stack(records, "deviation")
    med = [float(np.median(d[:, i])) for i in range(d.shape[1])]
    i_small, i_big = int(np.argmin(spec.n_grid)), int(np.argmax(spec.n_grid))
    small, big = med[i_small], med[i_big]
    agg = {"median_deviation": med, "n_grid": list(spec.n_grid)}
    if spec.r < 1.0:
        bound = spec.threshold("pinned_factor") * small + spec.threshold("pinned_offset")
        checks = [check("pinned_median", big, big <= bound, bound)]
    else:
        ratio = big / small if small > 0 else float("inf")
        lo, hi = spec.threshold("ratio_low"), spec.threshold("ratio_high")
        agg["ratio"] = ratio
        checks = [check("wandering_ratio", ratio, lo <= ratio <= hi, [lo, hi])]
    return agg, checks


def _coalescence_replica(spec, index, seed, ctx):
    m = spec.m
    h = int(math.floor(m**spec.alpha))
    fld = _field(spec, seed)
    common = np.ones(m + 1, dtype=bool)
    cells = 0
    for ya in range(-h, h + 1):
        grid = passage_grid(fld, (0, ya), (m, m + h))
        cells += grid.cell_count
        for yb in range(-h, h + 1):
            d = grid.geodesic((m, m + yb)).diagonal_points()
            mask = np.zeros(m + 1, dtype=bool)
            mask[d[(d >= 0) & (d <= m)]] = True
            common &= mask
    hits = np.nonzero(common)[0]
    return {"event": bool(len(hits) > 0), "first_meeting": int(hits[0]) if len(hits) else -1, "paths": (2 * h + 1) ** 2, "cells": cells}


def _coalescence_aggregate(spec, records, ctx):
    freq = float(np.mean([rec["event"] for rec in records]))
    t = spec.threshold("frequency_min")
    return {"frequency": freq, "paths_per_replica": records[0]["paths"] if records else 0}, [check("meeting_frequency", freq, freq >= t, t)]


def _x1_replica(spec, index, seed, ctx):
    n, k = spec.n, spec.k
    hw = spec.band_halfwidth or default_band(n)
    grid = passage_grid(_field(spec, seed), (0, 0), (n + k, n), hw)
    g = grid.geodesic((n + k, n))
    u = last_diagonal_point(g)
    return {"last_diagonal": int(u.x), "cells": grid.cell_count}


def _x1_aggregate(spec, records, ctx):
    eps = ctx["epsilon"]
    pred = x1_prediction(spec.n, spec.k, eps)
    mean = float(np.mean([rec["last_diagonal"] for rec in records]))
    win = spec.k ** spec.threshold("window_exponent")
    agg = {"mean_last_diagonal": mean, "x1_prediction": pred, "epsilon": eps, "slope_prediction": slope_prediction(eps)}
    return agg, [check("x1_window", abs(mean - pred), abs(mean - pred) <= win, win)]


def _exit_replica(spec, index, seed, ctx):
    n = spec.n
    W = spec.half_width or 4 * n
    ic = InitialCondition.bernoulli(spec.rho, derive_replica_seed(seed, 1), W)
    res = point_to_set_passage_time(_field(spec, seed), ic.staircase(), (n, n), spec.truncation, warn=False)
    if res.suspect:
        raise TruncationSuspect(f"maximizer index {res.index} on the truncation bound")
    return {"exit_x": int(res.vertex.x), "exit_y": int(res.vertex.y), "index": int(res.index), "value": res.value}


def _exit_aggregate(spec, records, ctx):
    x0, y0 = exit_point_prediction(spec.rho)
    n = spec.n
    radius = spec.threshold("radius_factor") * n ** (2.0 / 3.0)
    xs = np.array([rec["exit_x"] for rec in records], dtype=np.float64)
    frac = float(np.mean(np.abs(xs - n * x0) <= radius)) if len(xs) else 0.0
    t = spec.threshold("frequency_min")
    agg = {"prediction": [n * x0, n * y0], "mean_exit_x": float(xs.mean()) if len(xs) else None, "within_fraction": frac, "radius": radius}
    return agg, [check("exit_frequency", frac, frac >= t, t)]


# ------------------------------------------------------- occupation measures


def _grid_for(spec, seed, specs):
    cx = max(p.corner[0] for p in specs)
    cy = max(p.corner[1] for p in specs)
    top = max(cx, cy)
    return passage_grid(_field(spec, seed), (0, 0), (top, top), _band(spec, top))


def _measure(grid, p: ParallelogramSpec) -> EmpiricalOccupationMeasure:
    return occupation_from_passage_times(parallelogram_times(grid, p), p)


def _profile_replica(spec, index, seed, ctx):
    a, b = spec.sites
    L = spec.window_lengths[0]
    site_specs = [ParallelogramSpec(spec.s, L, interval=(i, i)) for i in range(a, b + 1)]
    mirror = [ParallelogramSpec(spec.s, L, interval=(-i, -i)) for i in range(a, b + 1)]
    tv_spec = ParallelogramSpec(spec.s, L, interval=(spec.tv_k, spec.tv_k + 2))
    grid = _grid_for(spec, seed, site_specs + mirror + [tv_spec])
    right = [_measure(grid, p).site_density(p.interval[0]) for p in site_specs]
    left = [_measure(grid, p).site_density(p.interval[0]) for p in mirror]
    tv = _measure(grid, tv_spec)
    return {"right": right, "left": left, "cylinder": [float(f) for f in tv.fractions], "cells": grid.cell_count}


def _profile_aggregate(spec, records, ctx):
    rho, rho_p = rho_from_epsilon(max(ctx["epsilon"], 0.0))
    a, b = spec.sites
    right = _stack(records, "right").mean(axis=0)
    left = _stack(records, "left").mean(axis=0)
    cyl = EmpiricalOccupationMeasure((spec.tv_k, spec.tv_k + 2), _stack(records, "cylinder").mean(axis=0))
    tv = profile_vs_product(cyl, rho)
    tol = spec.threshold("density_tol")
    dr = float(np.max(np.abs(right - rho)))
    dl = float(np.max(np.abs(left - rho_p)))
    agg = {
        "rho_hat": rho,
        "rho_prime_hat": rho_p,
        "sites": list(range(a, b + 1)),
        "density_right": right.tolist(),
        "density_left": left.tolist(),
        "cylinder_tv": tv,
        "epsilon": ctx["epsilon"],
    }
    checks = [
        check("density_right", dr, dr <= tol, tol),
        check("density_left", dl, dl <= tol, tol),
        check("cylinder_tv", tv, tv <= spec.threshold("tv_max"), spec.threshold("tv_max")),
    ]
    return agg, checks


def _convergence_replica(spec, index, seed, ctx):
    iv = tuple(spec.sites)
    specs = [ParallelogramSpec(spec.s, L, interval=iv) for L in spec.window_lengths]
    grid = _grid_for(spec, seed, specs)
    return {"measures": [[float(f) for f in _measure(grid, p).fractions] for p in specs], "cells": grid.cell_count}


def _convergence_aggregate(spec, records, ctx):
    iv = tuple(spec.sites)
    pooled = []
    for w in range(len(spec.window_lengths)):
        pooled.append(pool_measures(EmpiricalOccupationMeasure(iv, np.array(rec["measures"][w])) for rec in records))
    tv = tv_distance(pooled[0], pooled[1])
    agg = {"pooled": [m.as_dict() for m in pooled], "tv": tv, "window_lengths": list(spec.window_lengths)}
    return agg, [check("window_tv", tv, tv <= spec.threshold("tv_max"), spec.threshold("tv_max"))]


# ------------------------------------------------------------ event-driven


def _coupling_replica(spec, index, seed, ctx):
    rep = coupling_equivalence_report([seed], spec.n, spec.k, spec.r)
    return {"max_discrepancy": rep.max_discrepancy, "compared": rep.compared, "violations": rep.violations}


def _coupling_aggregate(spec, records, ctx):
    worst = max((rec["max_discrepancy"] for rec in records), default=0.0)
    viol = sum(len(rec["violations"]) for rec in records)
    agg = {"max_discrepancy": worst, "compared": sum(rec["compared"] for rec in records), "violations": viol}
    t = spec.threshold("max_discrepancy")
    return agg, [check("max_discrepancy", worst, worst <= t and viol == 0, t)]


def _bernoulli_replica(spec, index, seed, ctx):
    k, T = spec.k, spec.t_max
    ic = InitialCondition.bernoulli(spec.p, derive_replica_seed(seed, 1), spec.half_width)
    log = simulate(ic, spec.r, StopRule.time(T), tracked_window=(-k, k), seed=derive_replica_seed(seed, 2), tail_particles=0)
    t1 = T / 2.0
    right = occupation_measure(log, (k, k), t1, T).site_density(k)
    left = occupation_measure(log, (-k, -k), t1, T).site_density(-k)
    return {"right": right, "left": left, "events": len(log)}


def _bernoulli_aggregate(spec, records, ctx):
    r = float(np.mean([rec["right"] for rec in records]))
    lft = float(np.mean([rec["left"] for rec in records]))
    tol = spec.threshold("density_tol")
    agg = {"density_right": r, "density_left": lft, "p": spec.p}
    return agg, [
        check("density_right", abs(r - spec.p), abs(r - spec.p) <= tol, tol),
        check("density_left", abs(lft - spec.p), abs(lft - spec.p) <= tol, tol),
    ]


def _no_context(spec) -> dict:
    return {}


REGISTRY: Dict[str, tuple] = {
    "epsilon": (_no_context, _diag_replica, _epsilon_aggregate),
    "exponent": (_no_context, _diag_replica, _exponent_aggregate),
    "clt": (_no_context, _diag_replica, _clt_aggregate),
    "pinning": (_no_context, _pinning_replica, _pinning_aggregate),
    "transversal": (_no_context, _transversal_replica, _transversal_aggregate),
    "coalescence": (_no_context, _coalescence_replica, _coalescence_aggregate),
    "x1": (_epsilon_context, _x1_replica, _x1_aggregate),
    "exit_point": (_no_context, _exit_replica, _exit_aggregate),
    "profile": (_epsilon_context, _profile_replica, _profile_aggregate),
    "occupation_convergence": (_no_context, _convergence_replica, _convergence_aggregate),
    "coupling_check": (_no_context, _coupling_replica, _coupling_aggregate),
    "bernoulli_start": (_no_context, _bernoulli_replica, _bernoulli_aggregate),
}
