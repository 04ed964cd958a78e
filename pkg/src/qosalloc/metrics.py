"""Metric computation over control logs: violations, tardiness, throughput,
power efficiency, drop-rate buckets, and the resource-constraint audit."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .runner import EVAL_LOG_COLUMNS
from .simenv import NodeConfig

BUCKET_LABELS = ("0-1K", "1K-10K", "10K-1M", ">1M")
BUCKET_EDGES = (0.0, 1e3, 1e4, 1e6, np.inf)

_COL = {name: i for i, name in enumerate(EVAL_LOG_COLUMNS)}
_GEOMEAN_FLOOR = 1e-9


def _col(rows, name, dtype=float):
    return np.array([dtype(r[_COL[name]]) for r in rows])


def geomean(values) -> float:
    v = np.maximum(np.asarray(values, dtype=float), _GEOMEAN_FLOOR)
    return float(np.exp(np.mean(np.log(v))))


@dataclass
class MetricsReport:
    n_intervals: int
    n_violations: int
    violation_pct: float  # fraction of control actions in [0, 1]
    tardiness: float | None  # mean measured/target over violating actions
    be_perf: float  # geometric mean of normalized BE throughput
    power_eff: float  # geometric mean of (1 - power_norm)

    def as_row(self):
        return [
            self.n_intervals,
            self.n_violations,
            f"{self.violation_pct:.10g}",
            "n/a" if self.tardiness is None else f"{self.tardiness:.10g}",
            f"{self.be_perf:.10g}",
            f"{self.power_eff:.10g}",
        ]


def compute_metrics(rows, target_dpps: float) -> MetricsReport:
    """Pure function of a control log; recomputation from CSV reproduces it."""
    if not rows:
        raise ValueError("empty control log")
    meas = _col(rows, "meas_dpps")
    violations = meas > target_dpps
    n_viol = int(violations.sum())
    tardiness = float(np.mean(meas[violations] / target_dpps)) if n_viol else None
    return MetricsReport(
        n_intervals=len(rows),
        n_violations=n_viol,
        violation_pct=n_viol / len(rows),
        tardiness=tardiness,
        be_perf=geomean(_col(rows, "be_ips_norm")),
        power_eff=geomean(1.0 - _col(rows, "power_norm")),
    )


def aggregate_reports(reports) -> MetricsReport:
    """Across BEs: arithmetic mean for violation share, geometric for the rest."""
    reports = list(reports)
    if not reports:
        raise ValueError("nothing to aggregate")
    total_intervals = sum(r.n_intervals for r in reports)
    total_viol = sum(r.n_violations for r in reports)
    with_viol = [r.tardiness for r in reports if r.tardiness is not None]
    return MetricsReport(
        n_intervals=total_intervals,
        n_violations=total_viol,
        violation_pct=float(np.mean([r.violation_pct for r in reports])),
        tardiness=float(np.mean(with_viol)) if with_viol else None,
        be_perf=geomean([r.be_perf for r in reports]),
        power_eff=geomean([r.power_eff for r in reports]),
    )


def bucket_counts(rows) -> dict:
    """Table-style drop-rate buckets: interval counts and mean dpps per bucket."""
    meas = _col(rows, "meas_dpps")
    sampling = _col(rows, "sampling_phase", dtype=int)
    out = {}
    for label, lo, hi in zip(BUCKET_LABELS, BUCKET_EDGES[:-1], BUCKET_EDGES[1:]):
        mask = (meas >= lo) & (meas < hi)
        out[label] = {
            "count": int(mask.sum()),
            "avg_dpps": float(meas[mask].mean()) if mask.any() else 0.0,
            "sampling_count": int((mask & (sampling == 1)).sum()),
        }
    return out


def audit_log(rows, node: NodeConfig) -> None:
    """Per-step resource-capacity audit; raises on the first violation."""
    sizes = node.branch_sizes
    for i, row in enumerate(rows):
        idx = [int(row[_COL[n]]) for n in ("llc", "mbw", "hpcf", "becf", "ucf")]
        for name, j, size in zip(("llc", "mbw", "hpcf", "becf", "ucf"), idx, sizes):
            if not 0 <= j < size:
                raise AssertionError(f"row {i}: {name} index {j} outside [0, {size})")
        hp_ways = idx[0]
        be_ways = node.total_llc_ways - hp_ways
        if hp_ways + be_ways != node.total_llc_ways or be_ways < 0:
            raise AssertionError(f"row {i}: LLC partition broken")
        hp_cap = node.mbw_levels[idx[1]]
        if not (0 < hp_cap <= 100) or not (0 < 110 - hp_cap <= 100):
            raise AssertionError(f"row {i}: MBW caps outside the allocatable range")


def write_metrics_csv(path, entries) -> None:
    """`entries` rows: (controller, be, seed, MetricsReport)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["controller", "be", "seed", "n_intervals", "n_violations", "violation_pct", "tardiness", "be_perf", "power_eff"])
        for controller, be, seed, report in entries:
            w.writerow([controller, be, seed, *report.as_row()])


def emit_plot_data(rows, path) -> None:
    """Time series of actions, demand, target, and measured QoS for plotting."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    keep = ("t_s", "demand_pps", "target_dpps", "meas_dpps", "llc", "mbw", "hpcf", "becf", "ucf")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(keep)
        for row in rows:
            w.writerow([row[_COL[k]] for k in keep])
