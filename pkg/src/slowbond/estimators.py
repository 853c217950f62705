"""First-order predictions and the estimators that confront them with data."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field as dc_field
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy import stats

from .errors import InsufficientData, NegativeEpsilon, NonpositiveEpsilon
from .lpp import diagonal_passage_times
from .weights import WeightField, derive_replica_seed

BOOTSTRAP_RESAMPLES = 500


# ------------------------------------------------------------ closed forms


def rho_from_epsilon(eps: float) -> tuple:
    """Densities ``(rho, 1 - rho)`` with ``rho (1 - rho) = 1 / (4 + eps)``, ``rho <= 1/2``."""
    if eps < 0:
        raise NegativeEpsilon(f"epsilon must be >= 0, got {eps}")
    a, e = math.sqrt(4.0 + eps), math.sqrt(eps)
    rho = (a - e) / (2.0 * a)
    return rho, 1.0 - rho


def x1_prediction(n: int, k: int, eps: float) -> float:
    """Predicted last diagonal point of the geodesic to ``(n + k, n)``."""
    if eps <= 0:
        raise NonpositiveEpsilon(f"epsilon must be > 0, got {eps}")
    if not 0 < k < n:
        raise ValueError("need 0 < k < n")
    a, e = math.sqrt(4.0 + eps), math.sqrt(eps)
    return n - k * (a - e) ** 2 / (4.0 * math.sqrt(eps * (4.0 + eps)))


def slope_prediction(eps: float) -> float:
    """Slope of the unpinned part of the geodesic."""
    if eps < 0:
        raise NegativeEpsilon(f"epsilon must be >= 0, got {eps}")
    a, e = math.sqrt(4.0 + eps), math.sqrt(eps)
    return ((a - e) / (a + e)) ** 2


def stationary_slope(rho: float) -> float:
    return (rho / (1.0 - rho)) ** 2


def exit_point_prediction(rho: float) -> tuple:
    """Macroscopic maximizer ``(x0, y0)`` on the line ``y = -(rho / (1 - rho)) x``."""
    if not 0.0 < rho < 1.0:
        raise ValueError("rho must lie in (0, 1)")
    return (-(1.0 - 2.0 * rho) / rho, (1.0 - 2.0 * rho) / (1.0 - rho))


def tw_standardize(samples, n: int, h: float = 1.0) -> np.ndarray:
    """``(T - (1 + sqrt h)^2 n) / (h^(-1/6) (1 + sqrt h)^(4/3) n^(1/3))``."""
    if n < 1 or h <= 0:
        raise ValueError("need n >= 1 and h > 0")
    s = 1.0 + math.sqrt(h)
    centre = s * s * n
    scale = h ** (-1.0 / 6.0) * s ** (4.0 / 3.0) * n ** (1.0 / 3.0)
    return (np.asarray(samples, dtype=np.float64) - centre) / scale


# -------------------------------------------------------------- estimators


@dataclass
class SlowBondParams:
    r: float
    epsilon_hat: float
    epsilon_ci: tuple
    rho: float
    rho_prime: float
    intercept_hat: float
    intercept_ok: bool = True
    n_grid: list = dc_field(default_factory=list)
    means: list = dc_field(default_factory=list)
    reps: int = 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["epsilon_ci"] = list(self.epsilon_ci)
        return d


def _linfit(x: np.ndarray, y: np.ndarray) -> tuple:
    xm, ym = x.mean(), y.mean()
    slope = float(np.sum((x - xm) * (y - ym)) / np.sum((x - xm) ** 2))
    return slope, float(ym - slope * xm)


def fit_epsilon(
    n_grid: Sequence[int],
    samples: np.ndarray,
    r: float = float("nan"),
    bootstrap_seed: int = 0,
    intercept_tolerance: Optional[float] = None,
) -> SlowBondParams:
    """Least-squares slope of replica-mean ``T_n`` against ``n``.

    ``samples`` has shape ``(reps, len(n_grid))``; the bootstrap resamples
    whole replicas.  A negative estimate keeps its sign in ``epsilon_hat``
    while the densities use ``max(epsilon_hat, 0)``.
    """
    x = np.asarray(n_grid, dtype=np.float64)
    y = np.asarray(samples, dtype=np.float64)
    if y.ndim == 1:
        y = y[None, :]
    if len(np.unique(x)) < 3 or y.shape[1] != len(x):
        raise InsufficientData("need at least 3 distinct n values")
    means = y.mean(axis=0)
    slope, icpt = _linfit(x, means)
    eps = slope - 4.0
    reps = y.shape[0]
    if reps >= 2:
        rng = np.random.default_rng(bootstrap_seed)
        boots = np.empty(BOOTSTRAP_RESAMPLES)
        for b in range(BOOTSTRAP_RESAMPLES):
            idx = rng.integers(0, reps, reps)
            boots[b] = _linfit(x, y[idx].mean(axis=0))[0] - 4.0
        ci = (float(np.percentile(boots, 2.5)), float(np.percentile(boots, 97.5)))
    else:
        ci = (eps, eps)
    rho, rho_p = rho_from_epsilon(max(eps, 0.0))
    tol = 3.0 * math.sqrt(max(x)) if intercept_tolerance is None else intercept_tolerance
    return SlowBondParams(
        r=float(r),
        epsilon_hat=float(eps),
        epsilon_ci=ci,
        rho=rho,
        rho_prime=rho_p,
        intercept_hat=icpt,
        intercept_ok=bool(icpt <= tol),
        n_grid=[int(n) for n in n_grid],
        means=[float(m) for m in means],
        reps=int(reps),
    )


def default_band(n: int) -> int:
    return int(math.ceil(8.0 * math.sqrt(n)))


def diagonal_samples(r: float, n_grid, reps: int, master_seed: int, band_halfwidth="auto") -> np.ndarray:
    """``G(n, n)`` for each replica (rows) and ``n`` (columns).

    ``band_halfwidth="auto"`` bands reinforced fields at ``8 sqrt(max n)`` and
    uses the full grid when ``r == 1``.
    """
    top = max(n_grid)
    if band_halfwidth == "auto":
        band_halfwidth = None if r == 1.0 else default_band(top)
    out = np.empty((reps, len(n_grid)))
    for i in range(reps):
        fld = WeightField(derive_replica_seed(master_seed, i), r)
        out[i] = diagonal_passage_times(fld, n_grid, band_halfwidth)
    return out


def estimate_epsilon(r: float, n_grid: Sequence[int], reps: int, master_seed: int, **kw) -> SlowBondParams:
    if len(set(n_grid)) < 3 or reps < 30:
        raise InsufficientData("need >= 3 grid points and reps >= 30")
    y = diagonal_samples(r, n_grid, reps, master_seed, **kw)
    return fit_epsilon(n_grid, y, r, bootstrap_seed=master_seed)


@dataclass
class ScalingFitResult:
    exponent_hat: float
    exponent_ci: tuple
    n_values: list
    counts: list
    means: list
    stds: list
    variance_per_n: list

    def to_dict(self) -> dict:
        d = asdict(self)
        d["exponent_ci"] = list(self.exponent_ci)
        return d


def fluctuation_exponent(samples: Mapping[int, Sequence[float]], bootstrap_seed: int = 0, min_samples: int = 100) -> ScalingFitResult:
    """Log-log regression of the sample standard deviation on ``n``."""
    ns = sorted(samples)
    if len(ns) < 3:
        raise InsufficientData("need at least 3 values of n")
    arrs = [np.asarray(samples[n], dtype=np.float64) for n in ns]
    if min(len(a) for a in arrs) < min_samples:
        raise InsufficientData(f"need at least {min_samples} samples per n")
    logn = np.log(np.array(ns, dtype=np.float64))
    stds = np.array([a.std(ddof=1) for a in arrs])
    slope, _ = _linfit(logn, np.log(stds))
    rng = np.random.default_rng(bootstrap_seed)
    boots = np.empty(BOOTSTRAP_RESAMPLES)
    for b in range(BOOTSTRAP_RESAMPLES):
        bs = [a[rng.integers(0, len(a), len(a))].std(ddof=1) for a in arrs]
        boots[b] = _linfit(logn, np.log(bs))[0]
    return ScalingFitResult(
        exponent_hat=slope,
        exponent_ci=(float(np.percentile(boots, 2.5)), float(np.percentile(boots, 97.5))),
        n_values=[int(n) for n in ns],
        counts=[len(a) for a in arrs],
        means=[float(a.mean()) for a in arrs],
        stds=[float(s) for s in stds],
        variance_per_n=[float(s * s / n) for s, n in zip(stds, ns)],
    )


def _ad_pvalue(a2: float, n: int) -> float:
    # D'Agostino & Stephens (1986), case of estimated mean and variance
    a = a2 * (1.0 + 0.75 / n + 2.25 / n**2)
    if a >= 153.467:
        return 0.0
    if a >= 0.6:
        p = math.exp(1.2937 - 5.709 * a + 0.0186 * a * a)
    elif a >= 0.34:
        p = math.exp(0.9177 - 4.279 * a - 1.38 * a * a)
    elif a >= 0.2:
        p = 1.0 - math.exp(-8.318 + 42.796 * a - 59.938 * a * a)
    else:
        p = 1.0 - math.exp(-13.436 + 101.14 * a - 223.73 * a * a)
    return min(max(p, 0.0), 1.0)


def normality_test(samples) -> tuple:
    """Anderson-Darling statistic and p-value against a fitted normal law."""
    x = np.asarray(samples, dtype=np.float64)
    if len(x) < 100:
        raise InsufficientData("need at least 100 samples")
    a2 = float(stats.anderson(x, dist="norm").statistic)
    return a2, _ad_pvalue(a2, len(x))


def product_measure(size: int, rho: float) -> np.ndarray:
    """Bernoulli product weights indexed by pattern code (bit i = site i)."""
    codes = np.arange(1 << size)
    ones = np.array([bin(c).count("1") for c in codes])
    return rho**ones * (1.0 - rho) ** (size - ones)


def profile_vs_product(measure, rho: float) -> float:
    """Total variation distance between a cylinder measure and product(rho)."""
    if not 0.0 < rho < 1.0:
        raise ValueError("rho must lie in (0, 1)")
    prod = product_measure(measure.size, rho)
    return float(0.5 * np.abs(np.asarray(measure.fractions) - prod).sum())


def tv_distance(m1, m2) -> float:
    return float(0.5 * np.abs(np.asarray(m1.fractions) - np.asarray(m2.fractions)).sum())
