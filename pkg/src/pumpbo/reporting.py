"""Aggregation of run traces into best-seen curves, summaries and figures.

Aggregates are recomputed from the trace CSV files on disk, never from
in-memory state, so `run` followed by `report` is exactly idempotent. The
best-seen series of one run is indexed by post-design evaluations: index 0 is
the best value inside the initial design, index k the best after k further
evaluations.
"""

from __future__ import annotations

import csv
import json
import re
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .loop import RunTrace, read_trace_csv

TRACE_NAME_RE = re.compile(r"trace_(?P<acq>[a-z]+)_rep(?P<rep>\d+)\.csv$")

_ACQ_COLORS = {"ei": "tab:red", "aei": "tab:green", "lcb": "tab:blue"}


def trace_filename(acq: str, rep: int) -> str:
    return f"trace_{acq}_rep{rep:02d}.csv"


def best_seen_series(trace: RunTrace) -> list[float | None]:
    """Best seen at design completion and after each later evaluation."""
    init_size = sum(1 for e in trace.entries if e.proposer == "init")
    if init_size == 0:
        raise ValueError("trace has no initial-design rows")
    return [trace.entries[i].best_seen for i in range(init_size - 1, len(trace.entries))]


def collect_traces(trace_dir) -> dict[str, list[tuple[int, RunTrace]]]:
    """Traces grouped by acquisition tag, ordered by replication index."""
    groups: dict[str, list[tuple[int, RunTrace]]] = {}
    for path in sorted(Path(trace_dir).glob("trace_*_rep*.csv")):
        m = TRACE_NAME_RE.search(path.name)
        if not m:
            continue
        try:
            trace = read_trace_csv(path)
        except (ValueError, IndexError) as exc:
            raise ValueError(f"{path.name}: malformed trace file ({exc})")
        groups.setdefault(m["acq"], []).append((int(m["rep"]), trace))
    for acq in groups:
        groups[acq].sort(key=lambda pair: pair[0])
    return groups


def _atomic_writer(path: Path):
    tmp = path.with_suffix(path.suffix + ".tmp")
    return tmp


def write_aggregate_csv(groups, path) -> None:
    """Mean and standard deviation of best seen per (acquisition, eval index)."""
    path = Path(path)
    tmp = _atomic_writer(path)
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["eval_index", "acquisition", "mean_best_seen", "std_best_seen"])
        for acq in sorted(groups):
            series = [best_seen_series(trace) for _, trace in groups[acq]]
            if not series:
                continue
            length = max(len(s) for s in series)
            for k in range(length):
                vals = [s[k] for s in series if k < len(s) and s[k] is not None]
                if vals:
                    arr = np.asarray(vals, dtype=np.float64)
                    writer.writerow(
                        [k, acq, f"{arr.mean():.6g}", f"{arr.std():.6g}"]
                    )
                else:
                    writer.writerow([k, acq, "", ""])
    tmp.replace(path)


def write_summary_csv(groups, path, baseline_cost: float | None) -> None:
    """Best final cost per acquisition and reduction against the baseline."""
    path = Path(path)
    tmp = _atomic_writer(path)
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["acquisition", "best_cost", "cost_reduction", "replications"])
        for acq in sorted(groups):
            finals = [
                trace.entries[-1].best_seen
                for _, trace in groups[acq]
                if trace.entries and trace.entries[-1].best_seen is not None
            ]
            if finals:
                best = min(finals)
                reduction = "" if baseline_cost is None else f"{baseline_cost - best:.6g}"
                writer.writerow([acq, f"{best:.6g}", reduction, len(groups[acq])])
            else:
                writer.writerow([acq, "", "", len(groups[acq])])
    tmp.replace(path)


def render_best_seen_figure(groups, path) -> None:
    """Mean best-seen curve per acquisition with a +/- std band."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for acq in sorted(groups):
        series = [best_seen_series(trace) for _, trace in groups[acq]]
        if not series:
            continue
        length = max(len(s) for s in series)
        xs, means, stds = [], [], []
        for k in range(length):
            vals = [s[k] for s in series if k < len(s) and s[k] is not None]
            if vals:
                arr = np.asarray(vals, dtype=np.float64)
                xs.append(k)
                means.append(arr.mean())
                stds.append(arr.std())
        if not xs:
            continue
        xs = np.asarray(xs)
        means = np.asarray(means)
        stds = np.asarray(stds)
        color = _ACQ_COLORS.get(acq)
        ax.plot(xs, means, label=acq.upper(), color=color)
        ax.fill_between(xs, means - stds, means + stds, alpha=0.25, color=color)
    ax.set_xlabel("function evaluations after the initial design")
    ax.set_ylabel("best seen energy cost per day")
    if ax.has_data():
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def regenerate_reports(trace_dir) -> dict[str, Path]:
    """Rebuild aggregate, summary and figure from the trace files in a directory."""
    trace_dir = Path(trace_dir)
    groups = collect_traces(trace_dir)
    baseline = None
    manifest_path = trace_dir / "manifest.json"
    if manifest_path.exists():
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        baseline = manifest.get("baseline_cost")
    out = {
        "aggregate": trace_dir / "aggregate_best_seen.csv",
        "summary": trace_dir / "summary.csv",
        "figure": trace_dir / "best_seen.png",
    }
    write_aggregate_csv(groups, out["aggregate"])
    write_summary_csv(groups, out["summary"], baseline)
    render_best_seen_figure(groups, out["figure"])
    return out
