"""Machine-readable reports with deterministic serialisation.

All floats are rounded to 12 significant digits when a report dict is
built, so ``json.loads(report.to_json())`` reproduces the dict exactly
and equal analyses serialise to byte-identical JSON (keys sorted).
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .engine import IcpResult

SCHEMA_VERSION = "1"

# Benchmark CSV layout; deliberately excludes wall-clock fields so equal
# seeds produce byte-identical files.
BENCHMARK_CSV_COLUMNS = (
    "scenario",
    "rep",
    "p",
    "k_avg",
    "n_obs",
    "n_int",
    "target_intervened",
    "n_parents",
    "status",
    "success",
    "error",
    "model_rejected",
    "tested_count",
    "best_p",
    "s_hat",
    "parents",
)


def _round(value):
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(f"{float(value):.12g}")
    if isinstance(value, dict):
        return {str(k): _round(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_round(v) for v in value]
    return value


def canonical_json(payload: dict) -> str:
    return json.dumps(_round(payload), sort_keys=True, indent=2)


def binomial_ci(hits: int, n: int, z: float = 1.96) -> tuple[float, float]:
    """Normal-approximation confidence interval for a proportion."""
    if n == 0:
        return (0.0, 1.0)
    phat = hits / n
    half = z * np.sqrt(max(phat * (1.0 - phat), 0.0) / n)
    return (max(0.0, phat - half), min(1.0, phat + half))


@dataclass(frozen=True)
class AnalysisReport:
    """One dataset analysis, ready for JSON output."""

    config: dict
    columns: tuple[str, ...]
    target: str
    n_rows: int
    n_env: int
    result: IcpResult
    runtime_seconds: float
    hidden: bool = False

    def to_dict(self) -> dict:
        res = self.result
        if res.intervals is None:
            intervals = None
        else:
            intervals = {
                self.columns[k]: {
                    "lo": iv.lo,
                    "hi": iv.hi,
                    "contains_zero": iv.contains_zero,
                    "degenerate": iv.degenerate,
                }
                for k, iv in enumerate(res.intervals)
            }
        alpha = self.config.get("alpha", 0.05)
        return _round(
            {
                "schema_version": SCHEMA_VERSION,
                "config": self.config,
                "columns": list(self.columns),
                "target": self.target,
                "n_rows": self.n_rows,
                "n_environments": self.n_env,
                "accepted_sets": [
                    {"set": sorted(self.columns[k] for k in s), "p_value": p}
                    for s, p in res.accepted
                ],
                "s_hat": sorted(self.columns[k] for k in res.s_hat),
                "intervals": intervals,
                "interval_joint_coverage": 1.0 - 2.0 * alpha,
                "intervals_from_grid": res.intervals_from_grid,
                "model_rejected": res.model_rejected,
                "best_p": res.best_p,
                "tested_count": res.tested_count,
                "runtime": {"seconds": self.runtime_seconds},
            }
        )

    def to_json(self) -> str:
        return canonical_json(self.to_dict())


@dataclass(frozen=True)
class BenchmarkReport:
    """A scenario sweep: per-run rows plus aggregate rates.

    ``rows`` holds one record per scenario x replicate; the aggregate
    success probability and family-wise error rate are computed over runs
    that completed (``status == "ok"``).
    """

    config: dict
    rows: list[dict] = field(default_factory=list)
    runtime_seconds: float = 0.0

    def _ok_rows(self) -> list[dict]:
        return [r for r in self.rows if r["status"] == "ok"]

    def aggregate(self) -> dict:
        ok = self._ok_rows()
        n = len(ok)
        successes = sum(r["success"] for r in ok)
        errors = sum(r["error"] for r in ok)
        s_ci = binomial_ci(successes, n)
        e_ci = binomial_ci(errors, n)
        return {
            "n_runs": len(self.rows),
            "n_completed": n,
            "success_rate": successes / n if n else 0.0,
            "success_ci": list(s_ci),
            "fwer": errors / n if n else 0.0,
            "fwer_ci": list(e_ci),
        }

    def to_dict(self) -> dict:
        return _round(
            {
                "schema_version": SCHEMA_VERSION,
                "config": self.config,
                "aggregate": self.aggregate(),
                "runtime": {"seconds": self.runtime_seconds},
            }
        )

    def to_json(self) -> str:
        return canonical_json(self.to_dict())

    def to_csv(self) -> str:
        rows = sorted(self.rows, key=lambda r: (r["scenario"], r["rep"]))
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=BENCHMARK_CSV_COLUMNS)
        writer.writeheader()
        for row in rows:
            out = dict(row)
            out["best_p"] = f"{row['best_p']:.12g}" if row["best_p"] is not None else ""
            writer.writerow(out)
        return buf.getvalue()


def make_analysis_report(
    d: Dataset, result: IcpResult, config: dict, runtime_seconds: float, hidden: bool = False
) -> AnalysisReport:
    return AnalysisReport(
        config=config,
        columns=d.names,
        target=d.target_name,
        n_rows=d.n,
        n_env=d.n_env,
        result=result,
        runtime_seconds=runtime_seconds,
        hidden=hidden,
    )
