"""Acceptance suite: one test per criterion, run at full desk scale from configs/.

Each test prints a single PASS/FAIL line; the lines are repeated in the
terminal summary.  Expect a few minutes of wall clock in total.
"""

from __future__ import annotations

import math
import random
import time

import numpy as np
import pytest

from slowbond.errors import NoAdmissiblePath
from slowbond.estimators import x1_prediction
from slowbond.harness import aggregate, dumps, load_spec, run
from slowbond.lpp import RegionConstraint, brute_force_passage, geodesic, passage_time
from slowbond.weights import ExplicitWeights

from conftest import ACCEPTANCE_LINES, CONFIGS

pytestmark = pytest.mark.slow

_CACHE: dict = {}


def _record(number: int, passed: bool, detail: str) -> None:
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)


def _run(config: str):
    if config not in _CACHE:
        spec = load_spec(CONFIGS / f"{config}.yaml")
        t0 = time.perf_counter()
        res = run(spec)
        _CACHE[config] = (spec, res, time.perf_counter() - t0)
    return _CACHE[config]


def _check(res: dict, name: str) -> dict:
    return next(c for c in res["checks"] if c["name"] == name)


def test_criterion_01_oracle_equivalence():
    t0 = time.perf_counter()
    mismatches, compared = 0, 0
    for seed in range(500):
        rng = np.random.default_rng(seed)
        nx, ny = (int(v) for v in rng.integers(1, 6, size=2))
        vals = rng.exponential(size=(nx, ny))
        w = ExplicitWeights(vals)
        for c in (None, RegionConstraint("avoid_strict_upper_diagonal", (int(rng.integers(-1, 3)), int(rng.integers(3, 6))))):
            c = c or RegionConstraint()
            v = (nx - 1, ny - 1)
            try:
                bval, bpath = brute_force_passage(w, (0, 0), v, c)
            except NoAdmissiblePath:
                try:
                    passage_time(w, (0, 0), v, c)
                    mismatches += 1
                except NoAdmissiblePath:
                    pass
                continue
            g = geodesic(w, (0, 0), v, c)
            compared += 1
            if passage_time(w, (0, 0), v, c) != bval or g.weight != bval or g.as_tuples() != [tuple(p) for p in bpath]:
                mismatches += 1
    dt = time.perf_counter() - t0
    ok = mismatches == 0 and dt < 5.0
    _record(1, ok, f"{compared} oracle comparisons, {mismatches} mismatches, {dt:.2f}s (< 5s)")
    assert mismatches == 0
    assert dt < 5.0


def test_criterion_02_coupling_exactness():
    spec, res, dt = _run("coupling_check")
    agg = res["aggregates"]
    ok = spec.reps == 100 and agg["max_discrepancy"] == 0.0 and agg["violations"] == 0 and dt < 30
    _record(2, ok, f"{spec.reps} seeds, {agg['compared']} jump times, max discrepancy {agg['max_discrepancy']}, {dt:.1f}s (< 30s)")
    assert spec.reps == 100 and spec.n == 40 and spec.k == 10
    assert agg["max_discrepancy"] == 0.0 and agg["violations"] == 0
    assert dt < 30


def test_criterion_03_rost_limit():
    spec, res, dt = _run("rost")
    rost = res["aggregates"]["rost"]
    big, small = rost["mean_T_over_n"], rost["mean_T_over_n_small"]
    shrink = (4.0 - small) / (4.0 - big)
    ok = 3.90 <= big <= 4.00 and shrink >= 1.4 and dt < 180
    _record(3, ok, f"mean T_1000/1000 = {big:.4f} in [3.90, 4.00], shrink {shrink:.2f} >= 1.4, {dt:.1f}s (< 180s)")
    assert spec.r == 1.0 and spec.reps == 200 and rost["n"] == 1000 and rost["n_small"] == 250
    assert 3.90 <= big <= 4.00
    assert shrink >= 1.4
    assert dt < 180


def test_criterion_04_fluctuation_exponents():
    s1, r1, dt1 = _run("exponent_r1")
    s5, r5, dt5 = _run("exponent_r05")
    e1 = r1["aggregates"]["fit"]["exponent_hat"]
    e5 = r5["aggregates"]["fit"]["exponent_hat"]
    dt = dt1 + dt5
    ok = 0.25 <= e1 <= 0.42 and 0.42 <= e5 <= 0.58 and dt < 600
    _record(4, ok, f"exponent r=1 {e1:.3f} in [0.25, 0.42], r=0.5 {e5:.3f} in [0.42, 0.58], {dt:.1f}s (< 600s)")
    for s in (s1, s5):
        assert list(s.n_grid) == [250, 500, 1000, 2000] and s.reps >= 300
    assert 0.25 <= e1 <= 0.42
    assert 0.42 <= e5 <= 0.58
    assert dt < 600


def test_criterion_05_slowdown():
    spec, res, dt = _run("epsilon")
    fit = res["aggregates"]["fit"]
    eps, ci = fit["epsilon_hat"], fit["epsilon_ci"]
    ident = abs(fit["rho"] * (1 - fit["rho"]) * (4 + eps) - 1.0)
    ok = eps > 0.05 and ci[0] > 0 and ident <= 1e-12 and dt < 300
    _record(5, ok, f"eps_hat {eps:.4f} > 0.05, CI [{ci[0]:.4f}, {ci[1]:.4f}] excludes 0, identity residual {ident:.1e}, {dt:.1f}s (< 300s)")
    assert spec.r == 0.5 and max(spec.n_grid) == 2000 and spec.reps == 100
    assert eps > 0.05
    assert ci[0] > 0
    assert ident <= 1e-12
    assert dt < 300


def test_criterion_06_pinning_and_coalescence():
    sp, rp, dtp = _run("pinning")
    sc, rc, dtc = _run("coalescence")
    frac = rp["aggregates"]["touch_fraction"]
    freq = rc["aggregates"]["frequency"]
    dt = dtp + dtc
    ok = frac >= 0.99 and freq >= 0.90 and dt < 240
    _record(6, ok, f"touch fraction {frac:.3f} >= 0.99, meeting frequency {freq:.3f} >= 0.90, {dt:.1f}s (< 240s)")
    assert sp.r == 0.5 and sp.n == 500
    assert sc.m == 500 and sc.alpha == 0.5 and sc.reps == 200
    assert frac >= 0.99
    assert freq >= 0.90
    assert dt < 240


def test_criterion_07_transversal():
    s5, r5, dt5 = _run("transversal_r05")
    s1, r1, dt1 = _run("transversal_r1")
    m5 = r5["aggregates"]["median_deviation"]
    m1 = r1["aggregates"]["median_deviation"]
    bound = 2 * m5[0] + 1
    ratio = m1[1] / m1[0]
    dt = dt5 + dt1
    ok = m5[1] <= bound and 2.5 <= ratio <= 6.5 and dt < 300
    _record(7, ok, f"r=0.5 median {m5[1]:g} <= {bound:g}; r=1 ratio {ratio:.2f} in [2.5, 6.5], {dt:.1f}s (< 300s)")
    assert list(s5.n_grid) == [200, 1600] and list(s1.n_grid) == [200, 1600]
    assert m5[1] <= bound
    assert 2.5 <= ratio <= 6.5
    assert dt < 300


def test_criterion_08_last_diagonal_departure():
    spec, res, dt = _run("x1")
    agg = res["aggregates"]
    pred = x1_prediction(spec.n, spec.k, res["context"]["epsilon"])
    diff = abs(agg["mean_last_diagonal"] - pred)
    win = spec.k ** 0.6
    ok = diff <= win and res["accounting"]["succeeded"] == spec.reps and dt < 360
    _record(8, ok, f"|mean X - x1| = {diff:.2f} <= {win:.1f} (eps_hat {res['context']['epsilon']:.4f}), {dt:.1f}s (< 360s)")
    assert spec.n == 4000 and spec.k == 300 and spec.reps == 100
    assert res["accounting"]["succeeded"] == spec.reps
    assert diff <= win
    assert dt < 360


def test_criterion_09_exit_point():
    spec, res, dt = _run("exit_point")
    xs = np.array([rec["exit_x"] for rec in res["records"] if "failure" not in rec], dtype=float)
    radius = 5 * spec.n ** (2 / 3)
    frac = float(np.sum(np.abs(xs + spec.n) <= radius)) / spec.reps
    ok = frac >= 0.90 and dt < 180
    _record(9, ok, f"{frac:.2f} of replicas within {radius:.0f} of n*x0 = -1000 (>= 0.90), {dt:.1f}s (< 180s)")
    assert spec.rho == pytest.approx(1 / 3) and spec.n == 1000 and spec.reps == 100
    assert frac >= 0.90
    assert dt < 180


def test_criterion_10_far_field_density():
    spec, res, dt = _run("profile")
    agg = res["aggregates"]
    rho, rho_p = agg["rho_hat"], agg["rho_prime_hat"]
    dr = max(abs(d - rho) for d in agg["density_right"])
    dl = max(abs(d - rho_p) for d in agg["density_left"])
    tv = agg["cylinder_tv"]
    ok = dr <= 0.03 and dl <= 0.03 and tv <= 0.1 and dt < 300
    _record(10, ok, f"rho_hat {rho:.4f}; max density error right {dr:.4f}, left {dl:.4f} (<= 0.03); cylinder TV {tv:.4f} (<= 0.1), {dt:.1f}s (< 300s)")
    assert spec.s == 1200 and spec.window_lengths == [300] and spec.sites == [60, 80] and spec.tv_k == 60
    assert dr <= 0.03
    assert dl <= 0.03
    assert tv <= 0.1
    assert dt < 300


def test_criterion_11_clt():
    spec, res, dt = _run("clt")
    agg = res["aggregates"]
    vpn = agg["variance_per_n"]
    ratio = max(vpn) / min(vpn)
    p = agg["ad_p_value"]
    ok = ratio <= 1.6 and 1 / ratio >= 0.6 and p > 0.01 and dt < 480
    _record(11, ok, f"Var/n {', '.join(f'{v:.3f}' for v in vpn)}; max/min {ratio:.3f} in [0.6, 1.6] both ways; AD p {p:.3f} > 0.01, {dt:.1f}s (< 480s)")
    assert list(spec.n_grid) == [500, 1000, 2000] and spec.reps == 400
    assert ratio <= 1.6 and 1 / ratio >= 0.6
    assert p > 0.01
    assert dt < 480


def test_criterion_12_occupation_convergence():
    spec, res, dt = _run("occupation_convergence")
    tv = res["aggregates"]["tv"]
    ok = tv <= 0.05 and dt < 180
    _record(12, ok, f"TV between windows of length 100 and 400 = {tv:.4f} (<= 0.05), {dt:.1f}s (< 180s)")
    assert spec.s == 1500 and spec.sites == [-1, 1] and spec.window_lengths == [100, 400]
    assert tv <= 0.05
    assert dt < 180


def test_criterion_13_determinism():
    names = ["coupling_check", "pinning", "exit_point", "occupation_convergence"]
    identical = True
    for name in names:
        spec, first, _ = _run(name)
        identical &= dumps(run(spec)) == dumps(first)
    permuted = True
    for name, (spec, res, _) in sorted(_CACHE.items()):
        recs = list(res["records"])
        random.Random(len(recs)).shuffle(recs)
        permuted &= aggregate(spec, recs, res["context"]) == aggregate(spec, res["records"], res["context"])
    ok = identical and permuted
    _record(13, ok, f"{len(names)} reruns byte-identical: {identical}; {len(_CACHE)} aggregates permutation-invariant: {permuted}")
    assert identical
    assert permuted
