"""Experiment configuration: a YAML tree mirroring ExperimentSpec one-to-one."""

from __future__ import annotations

from pathlib import Path
from typing import Dict, List, Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, ValidationError, model_validator

from ..errors import ConfigError

EXPERIMENTS = (
    "epsilon",
    "exponent",
    "clt",
    "pinning",
    "transversal",
    "coalescence",
    "x1",
    "exit_point",
    "profile",
    "occupation_convergence",
    "coupling_check",
    "bernoulli_start",
)

COMMON = {"experiment", "r", "reps", "master_seed", "workers", "out_dir", "thresholds", "band_halfwidth"}

# experiment -> (defaults for its specific fields, names of its thresholds)
_EPS_SUB = {"epsilon": None, "epsilon_reps": 100, "epsilon_n_grid": [250, 500, 1000, 2000]}
DEFAULTS: Dict[str, dict] = {
    "epsilon": {"n_grid": [250, 500, 1000, 2000], "rost_n": 1000, "rost_n_small": 250},
    "exponent": {"n_grid": [250, 500, 1000, 2000]},
    "clt": {"n_grid": [500, 1000, 2000]},
    "pinning": {"n": 500},
    "transversal": {"n_grid": [200, 1600]},
    "coalescence": {"m": 500, "alpha": 0.5},
    "x1": {"n": 4000, "k": 300, **_EPS_SUB},
    "exit_point": {"r": 1.0, "rho": 1.0 / 3.0, "n": 1000, "truncation": None, "half_width": None},
    "profile": {"s": 1200, "window_lengths": [300], "sites": [60, 80], "tv_k": 60, **_EPS_SUB},
    "occupation_convergence": {"s": 1500, "window_lengths": [100, 400], "sites": [-1, 1]},
    "coupling_check": {"n": 40, "k": 10},
    "bernoulli_start": {"p": 0.2, "half_width": 400, "t_max": 200.0, "k": 30},
}

THRESHOLDS: Dict[str, dict] = {
    "epsilon": {
        "epsilon_min": 0.05,
        "identity_tol": 1e-12,
        "null_epsilon_max": 0.05,
        "rost_low": 3.90,
        "rost_high": 4.00,
        "rost_shrink": 1.4,
    },
    "exponent": {"exponent_low": None, "exponent_high": None, "tw_mean_low": -2.1, "tw_mean_high": -1.4},
    "clt": {"ratio_low": 0.6, "ratio_high": 1.6, "ad_p_min": 0.01},
    "pinning": {"touch_fraction_min": 0.99},
    "transversal": {"pinned_factor": 2.0, "pinned_offset": 1.0, "ratio_low": 2.5, "ratio_high": 6.5},
    "coalescence": {"frequency_min": 0.90},
    "x1": {"window_exponent": 0.6},
    "exit_point": {"radius_factor": 5.0, "frequency_min": 0.90},
    "profile": {"density_tol": 0.03, "tv_max": 0.1},
    "occupation_convergence": {"tv_max": 0.05},
    "coupling_check": {"max_discrepancy": 0.0},
    "bernoulli_start": {"density_tol": 0.05},
}

REPS_DEFAULT = {"bernoulli_start": 50, "coupling_check": 100, "clt": 400, "exponent": 300, "pinning": 200, "coalescence": 200, "transversal": 200}


class ExperimentSpec(BaseModel):
    """Validated experiment parameters.  Unknown keys are rejected."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    experiment: Literal[EXPERIMENTS]  # type: ignore[valid-type]
    r: float = 0.5
    reps: int = 100
    master_seed: int = 0
    workers: int = 1
    out_dir: Optional[str] = None
    band_halfwidth: Optional[int] = None
    thresholds: Dict[str, float] = {}

    n: Optional[int] = None
    n_grid: Optional[List[int]] = None
    k: Optional[int] = None
    m: Optional[int] = None
    alpha: Optional[float] = None
    rho: Optional[float] = None
    p: Optional[float] = None
    s: Optional[int] = None
    window_lengths: Optional[List[int]] = None
    sites: Optional[List[int]] = None
    tv_k: Optional[int] = None
    half_width: Optional[int] = None
    t_max: Optional[float] = None
    truncation: Optional[int] = None
    epsilon: Optional[float] = None
    epsilon_reps: Optional[int] = None
    epsilon_n_grid: Optional[List[int]] = None
    rost_n: Optional[int] = None
    rost_n_small: Optional[int] = None

    @model_validator(mode="before")
    @classmethod
    def _fill_defaults(cls, data):
        if not isinstance(data, dict):
            return data
        exp = data.get("experiment")
        if exp not in DEFAULTS:
            return data
        allowed = COMMON | set(DEFAULTS[exp])
        # unset (None) fields are what model_dump emits for unused parameters
        extra = [k for k in data if k not in allowed and k in cls.model_fields and data[k] is not None]
        if extra:
            raise ValueError(f"fields not used by experiment {exp!r}: {', '.join(sorted(extra))}")
        out = dict(DEFAULTS[exp])
        out.update({k: v for k, v in data.items() if k in allowed or k not in cls.model_fields})
        if "reps" not in data and exp in REPS_DEFAULT:
            out["reps"] = REPS_DEFAULT[exp]
        return out

    @model_validator(mode="after")
    def _check(self):
        errs = []

        def need(cond, field, msg):
            if not cond:
                errs.append((field, msg))

        need(0.0 < self.r <= 1.0, "r", "must lie in (0, 1]")
        need(self.reps >= 1, "reps", "must be >= 1")
        need(0 <= self.master_seed < 2**64, "master_seed", "must be a 64-bit unsigned integer")
        need(self.workers >= 1, "workers", "must be >= 1")
        need(self.band_halfwidth is None or self.band_halfwidth >= 1, "band_halfwidth", "must be >= 1")
        unknown = set(self.thresholds) - set(THRESHOLDS[self.experiment])
        need(not unknown, "thresholds", f"unknown threshold names {sorted(unknown)}")
        e = self.experiment
        if self.n_grid is not None:
            need(all(n >= 1 for n in self.n_grid), "n_grid", "entries must be >= 1")
            if e in ("epsilon", "exponent", "clt"):
                need(len(set(self.n_grid)) >= 3, "n_grid", "needs >= 3 distinct values")
            if e == "transversal":
                need(len(self.n_grid) == 2 and all(n % 2 == 0 for n in self.n_grid), "n_grid", "needs two even sizes")
        if self.n is not None:
            need(self.n >= 1, "n", "must be >= 1")
        if e == "epsilon":
            need(self.reps >= 30, "reps", "epsilon estimation needs reps >= 30")
        if e in ("exponent", "clt"):
            need(self.reps >= 100, "reps", "needs >= 100 replicas per n")
        if e == "coalescence":
            need(self.m >= 2, "m", "must be >= 2")
            need(0.0 < self.alpha < 1.0, "alpha", "must lie in (0, 1)")
        if e == "x1":
            need(self.k is not None and 0 < self.k < self.n, "k", "need 0 < k < n")
            need(self.r < 1.0, "r", "x1 needs a reinforced diagonal (r < 1)")
        if e in ("x1", "profile"):
            need(self.epsilon is None or self.epsilon > 0, "epsilon", "must be > 0")
            need(self.epsilon_reps >= 30, "epsilon_reps", "must be >= 30")
            need(len(set(self.epsilon_n_grid)) >= 3, "epsilon_n_grid", "needs >= 3 distinct values")
        if e == "exit_point":
            need(0.0 < self.rho < 1.0 and self.rho != 0.5, "rho", "must lie in (0, 1) and differ from 1/2")
            need(self.truncation is None or self.truncation >= 1, "truncation", "must be >= 1")
            need(self.half_width is None or self.half_width >= 1, "half_width", "must be >= 1")
        if e in ("profile", "occupation_convergence"):
            need(self.sites is not None and len(self.sites) == 2 and self.sites[0] <= self.sites[1], "sites", "must be [a, b] with a <= b")
            need(all(w >= 1 for w in self.window_lengths), "window_lengths", "entries must be >= 1")
            if self.sites is not None and len(self.sites) == 2:
                need(self.s > max(abs(self.sites[0]), abs(self.sites[1])), "s", "must exceed the largest |site|")
        if e == "occupation_convergence":
            need(len(self.window_lengths) == 2, "window_lengths", "needs exactly two window lengths")
            need(self.sites[1] - self.sites[0] < 12, "sites", "interval too wide for a full pattern measure")
        if e == "profile":
            need(len(self.window_lengths) == 1, "window_lengths", "needs exactly one window length")
            need(self.tv_k >= 1, "tv_k", "must be >= 1")
        if e == "coupling_check":
            need(self.k >= 0, "k", "must be >= 0")
        if e == "bernoulli_start":
            need(0.0 < self.p < 1.0, "p", "must lie in (0, 1)")
            need(self.t_max > 0, "t_max", "must be > 0")
            need(self.k >= 1, "k", "must be >= 1")
            need(self.half_width > self.k + self.t_max, "half_width", "must exceed k + t_max so the boundary cannot reach the window")
        if errs:
            raise ConfigError(errs)
        return self

    def threshold(self, name: str) -> Optional[float]:
        return self.thresholds.get(name, THRESHOLDS[self.experiment][name])


def _pydantic_errors(exc: ValidationError) -> list:
    out = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err.get("loc", ()))
        ctx = err.get("ctx") or {}
        inner = ctx.get("error")
        if isinstance(inner, ConfigError):
            out.extend(inner.errors)
        else:
            out.append((loc, err.get("msg", "invalid")))
    return out


def make_spec(data: dict) -> ExperimentSpec:
    try:
        return ExperimentSpec(**data)
    except ConfigError:
        raise
    except ValidationError as exc:
        raise ConfigError(_pydantic_errors(exc)) from None


def load_spec(path, experiment: Optional[str] = None, overrides: Optional[dict] = None) -> ExperimentSpec:
    """Read a YAML config; CLI ``overrides`` win over file values."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError([("config", f"cannot read {path}: {exc}")]) from None
    try:
        data = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise ConfigError([("config", f"invalid YAML: {exc}")]) from None
    if not isinstance(data, dict):
        raise ConfigError([("config", "top level must be a mapping")])
    if experiment is not None:
        if data.get("experiment", experiment) != experiment:
            raise ConfigError([("experiment", f"config names {data['experiment']!r}, command asked for {experiment!r}")])
        data["experiment"] = experiment
    for key, val in (overrides or {}).items():
        if val is not None:
            data[key] = val
    return make_spec(data)
