"""
Output files and markdown summaries: report.json, ledger.csv, sweep.csv and clusters.csv.
Every writer is deterministic so reruns produce byte-identical files.
"""
import json
import logging
import math
import os
from typing import Dict, List

import numpy as np
import pandas as pd

from src.job_classifier import CLUSTER_COLUMNS, ClusterTable
from src.simulator import RunReport, SweepTable

logger = logging.getLogger(__name__)

LEDGER_COLUMNS = ["slot", "datacenter", "energy", "migration"]
SWEEP_COLUMNS = ["deadline", "algorithm", "total_cost", "reduction_vs_greedy_pct"]
ERROR_MARKER = "error"


def _to_jsonable(x):
    """numpy scalars/arrays to plain Python; NaN and inf become None."""
    if isinstance(x, dict):
        return {str(k): _to_jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_to_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _to_jsonable(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        value = float(x)
        return value if math.isfinite(value) else None
    return x


def report_json(report: RunReport) -> str:
    return json.dumps(_to_jsonable(report.to_dict()), sort_keys=True, indent=2) + "\n"


def ledger_frame(report: RunReport) -> pd.DataFrame:
    """One row per (slot, data center); migration is billed to the data center work leaves."""
    energy = report.ledger.energy
    migration = report.ledger.migration
    names = list(report.locations) or [f"dc{i}" for i in range(energy.shape[0])]
    rows = [
        (t, names[i], float(energy[i, t]), float(migration[i, t]))
        for t in range(energy.shape[1]) for i in range(energy.shape[0])
    ]
    return pd.DataFrame(rows, columns=LEDGER_COLUMNS)


def ledger_csv(report: RunReport) -> str:
    return ledger_frame(report).to_csv(index=False, lineterminator="\n")


def sweep_frame(table: SweepTable) -> pd.DataFrame:
    """Failed cells keep their row with `error` in place of the cost."""
    rows = []
    for r in table.rows:
        if r.error is not None:
            rows.append((r.deadline, r.algorithm.value, ERROR_MARKER, ""))
        else:
            rows.append((r.deadline, r.algorithm.value, repr(float(r.total_cost)),
                         "" if r.reduction_vs_greedy_pct is None else repr(float(r.reduction_vs_greedy_pct))))
    return pd.DataFrame(rows, columns=SWEEP_COLUMNS)


def clusters_frame(table: ClusterTable) -> pd.DataFrame:
    return table.to_frame()[CLUSTER_COLUMNS]


def _write_text(path: str, text: str) -> str:
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(text)
    logger.info("✓ Wrote %s", path)
    return path


def write_report(report: RunReport, out_dir: str) -> Dict[str, str]:
    os.makedirs(out_dir, exist_ok=True)
    return {
        "report": _write_text(os.path.join(out_dir, "report.json"), report_json(report)),
        "ledger": _write_text(os.path.join(out_dir, "ledger.csv"), ledger_csv(report)),
    }


def write_sweep(table: SweepTable, out_dir: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    text = sweep_frame(table).to_csv(index=False, lineterminator="\n")
    return _write_text(os.path.join(out_dir, "sweep.csv"), text)


def write_clusters(table: ClusterTable, out_dir: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    text = clusters_frame(table).to_csv(index=False, lineterminator="\n")
    return _write_text(os.path.join(out_dir, "clusters.csv"), text)


def _fmt(value, digits: int = 4) -> str:
    if value is None:
        return "N/A"
    return f"{value:,.{digits}f}"


def render_markdown(report: RunReport) -> str:
    """Summary of one run for the dashboard and for --verbose output."""
    ledger = report.ledger
    heading = f"## {report.algorithm.value} (D = {report.horizon}, {report.deadline_mode.value})\n\n"
    if report.label:
        heading += f"**Scenario:** {report.label}\n\n"

    table = (
        "| Field | Value |\n"
        "|:------|:------|\n"
        f"| **Total cost** | {_fmt(ledger.total)} |\n"
        f"| **Energy cost** | {_fmt(ledger.energy_total)} |\n"
        f"| **Migration cost** | {_fmt(ledger.migration_total)} |\n"
        f"| **Released load** | {_fmt(report.released_total)} |\n"
        f"| **Executed load** | {_fmt(float(report.executed.sum()))} |\n"
        f"| **Migrated load** | {_fmt(float(report.migrated.sum()))} |\n"
    )
    if report.algorithm.is_online:
        table += f"| **Max prediction error** | {_fmt(report.max_prediction_error)} |\n"
        table += f"| **Chebyshev bound** | {_fmt(report.chebyshev)} |\n"
    table += "\n"

    names = list(report.locations) or [f"dc{i}" for i in range(ledger.energy.shape[0])]
    per_dc = "### Energy by data center\n" + "\n".join(
        f"- {name}: {_fmt(float(cost))}" for name, cost in zip(names, ledger.energy.sum(axis=1))
    ) + "\n\n"

    if report.violations:
        checks = "### Audit\n" + "\n".join(
            f"- **{v.kind}** at slot {v.slot}: {v.message or _fmt(v.amount)}" for v in report.violations
        ) + "\n"
    else:
        checks = "### Audit\nNo violations.\n"
    return heading + table + per_dc + checks


def render_sweep_markdown(table: SweepTable) -> str:
    if not table.rows:
        return "No sweep results."
    lines = ["| D | Algorithm | Total cost | Reduction vs greedy |", "|--:|:--|--:|--:|"]
    for r in table.rows:
        if r.error is not None:
            lines.append(f"| {r.deadline} | {r.algorithm.value} | error | {r.error} |")
        else:
            lines.append(f"| {r.deadline} | {r.algorithm.value} | {_fmt(r.total_cost)} | "
                         f"{_fmt(r.reduction_vs_greedy_pct, 2)}% |")
    return "\n".join(lines) + "\n"


def render_reports_markdown(reports: List[RunReport]) -> str:
    if not reports:
        return "No runs."
    return "\n---\n\n".join(render_markdown(r) for r in reports)
