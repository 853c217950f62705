"""Replica execution, aggregation, and result files."""

from __future__ import annotations

import json
import multiprocessing
import time
import warnings
from pathlib import Path
from typing import Optional

from ..errors import SlowBondError, TruncationSuspect
from ..weights import derive_replica_seed
from .config import ExperimentSpec
from .experiments import REGISTRY

SCHEMA_VERSION = 1


def _to_plain(obj):
    """Convert numpy scalars and tuples so the JSON encoding is canonical."""
    if isinstance(obj, dict):
        return {str(k): _to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_plain(v) for v in obj]
    if hasattr(obj, "item") and not isinstance(obj, (str, bytes)):
        return obj.item()
    return obj


def run_replica(spec: ExperimentSpec, index: int, context: Optional[dict] = None) -> dict:
    """One replica; library failures are captured in the record, not raised."""
    seed = derive_replica_seed(spec.master_seed, index)
    _, replica, _ = REGISTRY[spec.experiment]
    rec = {"index": index, "seed": seed}
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", TruncationSuspect)
            rec.update(replica(spec, index, seed, context or {}))
    except (SlowBondError, TruncationSuspect) as exc:
        rec["failure"] = {"type": type(exc).__name__, "message": str(exc)}
    return _to_plain(rec)


def _worker(args):
    spec_dict, index, context = args
    return run_replica(ExperimentSpec(**spec_dict), index, context)


def aggregate(spec: ExperimentSpec, records: list, context: dict) -> dict:
    """Order-insensitive fold: records are sorted by index before use."""
    _, _, agg_fn = REGISTRY[spec.experiment]
    recs = sorted(records, key=lambda r: r["index"])
    ok = [r for r in recs if "failure" not in r]
    failures: dict = {}
    for r in recs:
        if "failure" in r:
            t = r["failure"]["type"]
            failures[t] = failures.get(t, 0) + 1
    if ok:
        aggregates, checks = agg_fn(spec, ok, context)
    else:
        aggregates, checks = {}, [{"name": "replicas", "value": 0, "threshold": 1, "passed": False}]
    return _to_plain(
        {
            "aggregates": aggregates,
            "checks": checks,
            "passed": all(c["passed"] for c in checks),
            "accounting": {
                "replicas": len(recs),
                "succeeded": len(ok),
                "failed": dict(sorted(failures.items())),
                "cells": int(sum(r.get("cells", 0) for r in ok)),
                "events": int(sum(r.get("events", 0) for r in ok)),
            },
        }
    )


def run(spec: ExperimentSpec) -> dict:
    """Execute every replica and return the result document."""
    prepare, _, _ = REGISTRY[spec.experiment]
    t0 = time.perf_counter()
    context = _to_plain(prepare(spec))
    if spec.workers > 1:
        args = [(spec.model_dump(), i, context) for i in range(spec.reps)]
        with multiprocessing.get_context("spawn").Pool(spec.workers) as pool:
            records = pool.map(_worker, args)
    else:
        records = [run_replica(spec, i, context) for i in range(spec.reps)]
    records.sort(key=lambda r: r["index"])
    result = {
        "schema_version": SCHEMA_VERSION,
        "experiment": spec.experiment,
        "spec": _to_plain(spec.model_dump()),
        "context": context,
        "records": records,
    }
    result.update(aggregate(spec, records, context))
    result["_wall_clock_seconds"] = time.perf_counter() - t0
    return result


def dumps(result: dict) -> str:
    body = {k: v for k, v in result.items() if not k.startswith("_")}
    return json.dumps(body, sort_keys=True, indent=1) + "\n"


def write_result(result: dict, out_dir, name: Optional[str] = None) -> Path:
    """Write ``<name>.json`` (deterministic) and ``<name>.timing.json`` (wall clock)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = name or f"{result['experiment']}_r{result['spec']['r']}_seed{result['spec']['master_seed']}"
    path = out / f"{stem}.json"
    path.write_text(dumps(result))
    timing = {"wall_clock_seconds": result.get("_wall_clock_seconds"), "replicas": result["accounting"]["replicas"]}
    (out / f"{stem}.timing.json").write_text(json.dumps(timing, sort_keys=True) + "\n")
    return path


def load_result(path) -> dict:
    return json.loads(Path(path).read_text())
