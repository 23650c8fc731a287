"""Command line interface: run experiments, brute-force oracles, reports."""

from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import click
import numpy as np

from .config import ConfigError, ExperimentConfig
from .hydrosim import evaluate, load_network
from .loop import derive_seed, run as run_smbo, write_trace_csv
from .reporting import regenerate_reports, trace_filename
from .space import EnumerationCeilingError, enumerate_admissible, lhs_sample

# seed-stream tags for experiment-level derivations
_TAG_DESIGN = 7
_TAG_RUN = 8


def _design_seed(base: int, rep: int) -> tuple:
    return (base, _TAG_DESIGN, rep)


def _run_seed(base: int, rep: int, acq_index: int) -> int:
    return derive_seed(base, _TAG_RUN, rep, acq_index)


def _execute_one(doc: dict, acq_index: int, rep: int, out_dir: str) -> str:
    """Run one (acquisition, replication) cell and write its trace file."""
    cfg = ExperimentConfig.from_dict(doc)
    net = load_network(cfg.network)
    if net.n_pairs != cfg.space.tau:
        raise ConfigError(
            "space", f"network {net.name!r} needs tau={net.n_pairs}, config has {cfg.space.tau}"
        )
    acq_kind = cfg.acquisitions[acq_index]
    run_config = replace(
        cfg.run_template,
        acquisition=replace(cfg.run_template.acquisition, kind=acq_kind),
        seed=_run_seed(cfg.seed, rep, acq_index),
    )
    design = None
    if cfg.shared_initial_design:
        design = lhs_sample(cfg.space, run_config.init_design_size,
                            _design_seed(cfg.seed, rep))

    def evaluator(x):
        return evaluate(net, x, cfg.space)

    trace = run_smbo(cfg.space, evaluator, run_config, initial_design=design)
    path = Path(out_dir) / trace_filename(acq_kind, rep)
    write_trace_csv(trace, path, d=cfg.space.d)
    return str(path)


def run_experiment(cfg: ExperimentConfig, jobs: int = 1,
                   out_dir: Path | None = None) -> Path:
    """Run the full acquisition-by-replication grid and write all reports."""
    out = Path(out_dir) if out_dir is not None else cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)

    net = load_network(cfg.network)
    manifest = {
        "network": net.name,
        "mode": cfg.space.mode,
        "acquisitions": cfg.acquisitions,
        "replications": cfg.replications,
        "init_design_size": cfg.run_template.init_design_size,
        "budget": cfg.run_template.budget,
        "seed": cfg.seed,
        "baseline_cost": cfg.baseline_cost,
        "shared_initial_design": cfg.shared_initial_design,
    }
    manifest_path = out / "manifest.json"
    tmp = manifest_path.with_suffix(".json.tmp")
    tmp.write_text(json.dumps(manifest, indent=1), encoding="utf-8")
    tmp.replace(manifest_path)

    cells = [
        (cfg.raw, a, r, str(out))
        for r in range(cfg.replications)
        for a in range(len(cfg.acquisitions))
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            list(pool.map(_execute_one, *zip(*cells)))
    else:
        for cell in cells:
            _execute_one(*cell)

    regenerate_reports(out)
    return out


def run_oracle(cfg: ExperimentConfig, out_dir: Path | None = None) -> Path:
    """Evaluate every admissible vector; write the table and the optimum."""
    out = Path(out_dir) if out_dir is not None else cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    net = load_network(cfg.network)
    if net.n_pairs != cfg.space.tau:
        raise ConfigError(
            "space", f"network {net.name!r} needs tau={net.n_pairs}, config has {cfg.space.tau}"
        )
    grid = enumerate_admissible(cfg.space, ceiling=cfg.enumeration_ceiling)

    table_path = out / "oracle_table.csv"
    best_cost = None
    best_x = None
    tmp = table_path.with_suffix(".csv.tmp")
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x_{i}" for i in range(cfg.space.d)] + ["feasible", "cost"])
        for x in grid:
            obs = evaluate(net, x, cfg.space)
            row = [f"{v:.6g}" for v in x]
            row.append("true" if obs.feasible else "false")
            row.append("" if obs.y is None else f"{obs.y:.6g}")
            writer.writerow(row)
            if obs.feasible and (best_cost is None or obs.y < best_cost):
                best_cost = obs.y
                best_x = x
    tmp.replace(table_path)

    optimum_path = out / "oracle_optimum.csv"
    tmp = optimum_path.with_suffix(".csv.tmp")
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x_{i}" for i in range(cfg.space.d)] + ["cost"])
        if best_x is not None:
            writer.writerow([f"{v:.6g}" for v in best_x] + [f"{best_cost:.6g}"])
    tmp.replace(optimum_path)
    return out


@click.group()
def main():
    """Threshold-rule pump control optimization on simulated water networks."""


@main.command(name="run")
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True, dir_okay=False), help="experiment JSON file")
@click.option("--jobs", default=1, show_default=True, help="concurrent replications")
@click.option("--out", "out_dir", default=None, type=click.Path(file_okay=False),
              help="override the configured output directory")
def cmd_run(config_path, jobs, out_dir):
    """Run every (acquisition, replication) cell and emit traces plus reports."""
    try:
        cfg = ExperimentConfig.from_file(config_path)
        out = run_experiment(cfg, jobs=jobs, out_dir=None if out_dir is None else Path(out_dir))
    except ConfigError as exc:
        raise click.UsageError(str(exc))
    click.echo(f"experiment complete; outputs in {out}")


@main.command(name="oracle")
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True, dir_okay=False), help="experiment JSON file")
@click.option("--out", "out_dir", default=None, type=click.Path(file_okay=False),
              help="override the configured output directory")
def cmd_oracle(config_path, out_dir):
    """Exhaustively evaluate the admissible grid (small discrete spaces only)."""
    try:
        cfg = ExperimentConfig.from_file(config_path)
        out = run_oracle(cfg, out_dir=None if out_dir is None else Path(out_dir))
    except ConfigError as exc:
        raise click.UsageError(str(exc))
    except EnumerationCeilingError as exc:
        raise click.ClickException(str(exc))
    click.echo(f"oracle complete; outputs in {out}")


@main.command(name="report")
@click.option("--dir", "trace_dir", required=True,
              type=click.Path(exists=True, file_okay=False), help="directory of trace CSVs")
def cmd_report(trace_dir):
    """Recompute aggregates, summary and figures from existing trace files."""
    try:
        outputs = regenerate_reports(trace_dir)
    except ValueError as exc:
        raise click.ClickException(str(exc))
    click.echo("report written: " + ", ".join(str(p) for p in outputs.values()))


if __name__ == "__main__":
    main()
