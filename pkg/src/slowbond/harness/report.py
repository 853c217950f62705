"""Summary tables and plot-data files from result documents."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from ..errors import SchemaMismatch
from ..estimators import fluctuation_exponent
from .runner import SCHEMA_VERSION

COLUMNS = ("experiment", "r", "check", "prediction", "estimate", "ci", "rho", "rho_prime", "passed")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.6g}"
    if isinstance(v, list):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


def summary_rows(results: Iterable[dict]) -> list:
    rows = []
    for res in results:
        exp, r = res["experiment"], res["spec"]["r"]
        agg = res.get("aggregates", {})
        if exp == "epsilon" and "fit" in agg:
            fit = agg["fit"]
            rows.append(
                {
                    "experiment": exp,
                    "r": r,
                    "check": "epsilon_hat",
                    "prediction": "> 0" if r < 1 else "0",
                    "estimate": fit["epsilon_hat"],
                    "ci": fit["epsilon_ci"],
                    "rho": fit["rho"],
                    "rho_prime": fit["rho_prime"],
                    "passed": res["passed"],
                }
            )
            continue
        for c in res.get("checks", []):
            ci = None
            if exp == "exponent" and "fit" in agg and c["name"] == "exponent_window":
                ci = agg["fit"]["exponent_ci"]
            rows.append(
                {
                    "experiment": exp,
                    "r": r,
                    "check": c["name"],
                    "prediction": c["threshold"],
                    "estimate": c["value"],
                    "ci": ci,
                    "passed": c["passed"],
                }
            )
    return rows


def format_table(rows: list) -> str:
    if not rows:
        return " | ".join(COLUMNS) + "\n"
    cells = [[_fmt(row.get(c)) for c in COLUMNS] for row in rows]
    widths = [max(len(c), *(len(r[i]) for r in cells)) for i, c in enumerate(COLUMNS)]
    lines = [" | ".join(c.ljust(w) for c, w in zip(COLUMNS, widths))]
    lines.append("-+-".join("-" * w for w in widths))
    for r in cells:
        lines.append(" | ".join(v.ljust(w) for v, w in zip(r, widths)))
    return "\n".join(lines) + "\n"


def _check_schema(results: list) -> None:
    for res in results:
        if res.get("schema_version") != SCHEMA_VERSION:
            raise SchemaMismatch(f"schema_version {res.get('schema_version')} != {SCHEMA_VERSION}")


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def plot_data(results: list, out_dir) -> list:
    """Write per-figure CSV files; returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    by_exp: dict = {}
    for res in results:
        by_exp.setdefault(res["experiment"], []).append(res)

    if "exponent" in by_exp:
        rows = []
        for res in by_exp["exponent"]:
            ns = res["spec"]["n_grid"]
            ok = [rec for rec in res["records"] if "failure" not in rec]
            y = np.array([rec["T"] for rec in ok])
            fit = fluctuation_exponent({n: y[:, i] for i, n in enumerate(ns)}, bootstrap_seed=res["spec"]["master_seed"])
            logn = np.log(fit.n_values)
            icpt = float(np.mean(np.log(fit.stds)) - fit.exponent_hat * logn.mean())
            for n, s, v in zip(fit.n_values, fit.stds, fit.variance_per_n):
                rows.append([res["spec"]["r"], n, repr(s), repr(v), repr(fit.exponent_hat), repr(float(np.exp(icpt) * n**fit.exponent_hat))])
        p = out / "exponent_std_vs_n.csv"
        _write_csv(p, ["r", "n", "std", "variance_per_n", "slope", "fitted_std"], rows)
        written.append(p)

    if "transversal" in by_exp:
        rows = []
        for res in by_exp["transversal"]:
            ns = res["spec"]["n_grid"]
            ok = [rec for rec in res["records"] if "failure" not in rec]
            for i, n in enumerate(ns):
                vals, counts = np.unique([rec["deviation"][i] for rec in ok], return_counts=True)
                rows.extend([res["spec"]["r"], n, int(v), int(c)] for v, c in zip(vals, counts))
        p = out / "transversal_histogram.csv"
        _write_csv(p, ["r", "n", "deviation", "count"], rows)
        written.append(p)

    if "profile" in by_exp:
        rows = []
        for res in by_exp["profile"]:
            agg = res["aggregates"]
            for site, d in zip(agg["sites"], agg["density_right"]):
                rows.append([res["spec"]["r"], site, repr(d), repr(agg["rho_hat"])])
            for site, d in zip(agg["sites"], agg["density_left"]):
                rows.append([res["spec"]["r"], -site, repr(d), repr(agg["rho_prime_hat"])])
        rows.sort(key=lambda r: (r[0], r[1]))
        p = out / "density_profile.csv"
        _write_csv(p, ["r", "site", "density", "prediction"], rows)
        written.append(p)

    if "epsilon" in by_exp:
        rows = []
        for res in by_exp["epsilon"]:
            fit = res["aggregates"]["fit"]
            for n, m in zip(fit["n_grid"], fit["means"]):
                rows.append([res["spec"]["r"], n, repr(m), repr((4.0 + fit["epsilon_hat"]) * n + fit["intercept_hat"])])
        p = out / "epsilon_mean_T.csv"
        _write_csv(p, ["r", "n", "mean_T", "fitted"], rows)
        written.append(p)
    return written


def report(results: list, out_dir: Optional[str] = None) -> str:
    """Summary table text; plot data go to ``out_dir`` when given."""
    results = list(results)
    _check_schema(results)
    if out_dir is not None and results:
        plot_data(results, out_dir)
    return format_table(summary_rows(results))
