import csv
import json
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from pumpbo.cli import main, run_experiment, run_oracle
from pumpbo.config import ConfigError, ExperimentConfig
from pumpbo.loop import read_trace_csv
from pumpbo.reporting import best_seen_series, collect_traces, regenerate_reports


def mini_doc(**overrides):
    doc = {
        "network": "tiny",
        "space": {
            "mode": "discrete",
            "tau": 2,
            "lower": {"min": 22.0, "max": 25.0, "step": 0.5},
            "upper": {"min": 24.0, "max": 28.0, "step": 0.5},
        },
        "smbo": {
            "init_design_size": 5,
            "budget": 6,
            "forest": {"n_trees": 20, "min_leaf": 2},
            "classifier_forest": {"n_trees": 20, "min_leaf": 1},
            "focus": {"points_per_iter": 100, "shrink_iters": 2, "restarts": 1},
        },
        "experiment": {
            "acquisitions": ["ei", "lcb"],
            "replications": 2,
            "shared_initial_design": True,
            "seed": 3,
            "baseline_cost": 332.30,
            "out_dir": "out",
        },
    }
    for key, value in overrides.items():
        section, _, name = key.partition(".")
        if name:
            doc[section][name] = value
        else:
            doc[section] = value
    return doc


def read_csv_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class TestConfigParsing:
    def test_full_roundtrip(self):
        cfg = ExperimentConfig.from_dict(mini_doc())
        assert cfg.space.tau == 2
        assert cfg.acquisitions == ["ei", "lcb"]
        assert cfg.baseline_cost == 332.30

    def test_count_alternative_to_max(self):
        doc = mini_doc()
        doc["space"]["lower"] = {"min": 21.0, "step": 0.5, "count": 23}
        cfg = ExperimentConfig.from_dict(doc)
        assert len(cfg.space.lower_sets[0]) == 23
        assert cfg.space.lower_sets[0].max == 32.0

    def test_count_max_conflict_names_key(self):
        doc = mini_doc()
        doc["space"]["lower"] = {"min": 21.0, "max": 32.0, "step": 0.5, "count": 99}
        with pytest.raises(ConfigError) as err:
            ExperimentConfig.from_dict(doc)
        assert "space.lower" in str(err.value)

    def test_unknown_acquisition_names_key(self):
        with pytest.raises(ConfigError) as err:
            ExperimentConfig.from_dict(mini_doc(**{"experiment.acquisitions": ["magic"]}))
        assert "experiment.acquisitions" in str(err.value)

    def test_per_pair_sets(self):
        doc = mini_doc()
        doc["space"] = {
            "mode": "discrete",
            "pairs": [
                {"lower": {"min": 22.0, "max": 25.0, "step": 0.5},
                 "upper": {"min": 24.0, "max": 28.0, "step": 0.5}},
                {"lower": {"min": 21.0, "max": 24.0, "step": 0.5},
                 "upper": {"min": 25.0, "max": 29.0, "step": 0.5}},
            ],
        }
        cfg = ExperimentConfig.from_dict(doc)
        assert cfg.space.tau == 2
        assert cfg.space.lower_sets[1].min == 21.0


class TestRunCommand:
    def test_trace_and_report_files(self, tmp_path):
        cfg = ExperimentConfig.from_dict(mini_doc())
        out = run_experiment(cfg, out_dir=tmp_path / "out")
        names = {p.name for p in out.iterdir()}
        assert {
            "trace_ei_rep00.csv", "trace_ei_rep01.csv",
            "trace_lcb_rep00.csv", "trace_lcb_rep01.csv",
            "aggregate_best_seen.csv", "summary.csv", "best_seen.png",
            "manifest.json",
        } <= names
        trace = read_trace_csv(out / "trace_ei_rep00.csv")
        assert len(trace) == 11

    def test_budget_zero_single_aggregate_point(self, tmp_path):
        doc = mini_doc(**{"smbo.budget": 0, "experiment.acquisitions": ["ei"],
                          "experiment.replications": 1})
        doc["smbo"]["init_design_size"] = 10
        cfg = ExperimentConfig.from_dict(doc)
        out = run_experiment(cfg, out_dir=tmp_path / "out")
        trace_rows = read_csv_rows(out / "trace_ei_rep00.csv")
        assert len(trace_rows) == 10
        agg = read_csv_rows(out / "aggregate_best_seen.csv")
        assert len(agg) == 1
        assert agg[0]["eval_index"] == "0"

    def test_summary_reduction_arithmetic(self, tmp_path):
        cfg = ExperimentConfig.from_dict(mini_doc())
        out = run_experiment(cfg, out_dir=tmp_path / "out")
        for row in read_csv_rows(out / "summary.csv"):
            if not row["best_cost"]:
                continue
            best = float(row["best_cost"])
            reduction = float(row["cost_reduction"])
            assert reduction == pytest.approx(332.30 - best, abs=1e-6)

    def test_aggregate_eval0_matches_independent_recompute(self, tmp_path):
        cfg = ExperimentConfig.from_dict(mini_doc())
        out = run_experiment(cfg, out_dir=tmp_path / "out")
        groups = collect_traces(out)
        agg = read_csv_rows(out / "aggregate_best_seen.csv")
        for acq, pairs in groups.items():
            init_bests = [best_seen_series(trace)[0] for _, trace in pairs]
            expected_mean = float(np.mean(init_bests))
            expected_std = float(np.std(init_bests))
            row = next(r for r in agg if r["acquisition"] == acq and r["eval_index"] == "0")
            assert float(row["mean_best_seen"]) == pytest.approx(expected_mean, rel=1e-5)
            assert float(row["std_best_seen"]) == pytest.approx(expected_std, rel=1e-5, abs=1e-5)

    def test_shared_initial_design_rows_identical(self, tmp_path):
        cfg = ExperimentConfig.from_dict(mini_doc())
        out = run_experiment(cfg, out_dir=tmp_path / "out")
        a = (out / "trace_ei_rep00.csv").read_text().splitlines()[1:6]
        b = (out / "trace_lcb_rep00.csv").read_text().splitlines()[1:6]
        assert a == b

    def test_independent_designs_differ(self, tmp_path):
        doc = mini_doc(**{"experiment.shared_initial_design": False})
        cfg = ExperimentConfig.from_dict(doc)
        out = run_experiment(cfg, out_dir=tmp_path / "out")
        a = (out / "trace_ei_rep00.csv").read_text().splitlines()[1:6]
        b = (out / "trace_lcb_rep00.csv").read_text().splitlines()[1:6]
        assert a != b

    def test_continuous_mode_traces_same_schema(self, tmp_path):
        doc = mini_doc()
        doc["space"]["mode"] = "continuous"
        cfg = ExperimentConfig.from_dict(doc)
        out = run_experiment(cfg, out_dir=tmp_path / "out")
        rows = read_csv_rows(out / "trace_ei_rep00.csv")
        assert set(rows[0]) == {
            "eval_index", "proposer", "x_0", "x_1", "x_2", "x_3",
            "feasible", "y", "best_seen",
        }

    def test_byte_identical_rerun(self, tmp_path):
        cfg = ExperimentConfig.from_dict(mini_doc())
        out1 = run_experiment(cfg, out_dir=tmp_path / "a")
        out2 = run_experiment(cfg, out_dir=tmp_path / "b")
        for name in ("trace_ei_rep00.csv", "trace_lcb_rep01.csv",
                     "aggregate_best_seen.csv", "summary.csv"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


class TestOracleCommand:
    def test_optimum_matches_table_minimum(self, tmp_path):
        cfg = ExperimentConfig.from_dict(mini_doc())
        out = run_oracle(cfg, out_dir=tmp_path / "oracle")
        rows = read_csv_rows(out / "oracle_table.csv")
        assert len(rows) == 3600
        feasible_costs = [float(r["cost"]) for r in rows if r["feasible"] == "true"]
        optimum = read_csv_rows(out / "oracle_optimum.csv")[0]
        assert float(optimum["cost"]) == pytest.approx(min(feasible_costs), abs=1e-9)

    def test_oracle_lower_bounds_smbo_traces(self, tmp_path):
        cfg = ExperimentConfig.from_dict(mini_doc())
        oracle_out = run_oracle(cfg, out_dir=tmp_path / "oracle")
        optimum = float(read_csv_rows(oracle_out / "oracle_optimum.csv")[0]["cost"])
        run_out = run_experiment(cfg, out_dir=tmp_path / "runs")
        for path in run_out.glob("trace_*.csv"):
            for row in read_csv_rows(path):
                if row["y"]:
                    assert float(row["y"]) >= optimum - 1e-9

    def test_rerun_byte_identical(self, tmp_path):
        cfg = ExperimentConfig.from_dict(mini_doc())
        a = run_oracle(cfg, out_dir=tmp_path / "a")
        b = run_oracle(cfg, out_dir=tmp_path / "b")
        assert (a / "oracle_table.csv").read_bytes() == (b / "oracle_table.csv").read_bytes()

    def test_ceiling_refusal(self, tmp_path):
        doc = mini_doc()
        doc["experiment"]["enumeration_ceiling"] = 10
        cfg = ExperimentConfig.from_dict(doc)
        from pumpbo.space import EnumerationCeilingError

        with pytest.raises(EnumerationCeilingError) as err:
            run_oracle(cfg, out_dir=tmp_path / "o")
        assert err.value.count == 3600


class TestReportCommand:
    def test_regeneration_is_exact(self, tmp_path):
        cfg = ExperimentConfig.from_dict(mini_doc())
        out = run_experiment(cfg, out_dir=tmp_path / "out")
        agg = (out / "aggregate_best_seen.csv").read_bytes()
        summary = (out / "summary.csv").read_bytes()
        regenerate_reports(out)
        assert (out / "aggregate_best_seen.csv").read_bytes() == agg
        assert (out / "summary.csv").read_bytes() == summary

    def test_empty_directory_header_only(self, tmp_path):
        empty = tmp_path / "empty"
        empty.mkdir()
        regenerate_reports(empty)
        lines = (empty / "aggregate_best_seen.csv").read_text().strip().splitlines()
        assert lines == ["eval_index,acquisition,mean_best_seen,std_best_seen"]

    def test_mixed_acquisitions_grouped_by_tag(self, tmp_path):
        cfg = ExperimentConfig.from_dict(mini_doc())
        out = run_experiment(cfg, out_dir=tmp_path / "out")
        agg = read_csv_rows(out / "aggregate_best_seen.csv")
        assert {r["acquisition"] for r in agg} == {"ei", "lcb"}

    def test_malformed_trace_named_in_error(self, tmp_path):
        bad = tmp_path / "bad"
        bad.mkdir()
        (bad / "trace_ei_rep00.csv").write_text("eval_index,proposer\nnot,a,trace\n")
        with pytest.raises(ValueError) as err:
            regenerate_reports(bad)
        assert "trace_ei_rep00.csv" in str(err.value)

    def test_figure_rendered(self, tmp_path):
        cfg = ExperimentConfig.from_dict(mini_doc())
        out = run_experiment(cfg, out_dir=tmp_path / "out")
        png = out / "best_seen.png"
        assert png.exists() and png.stat().st_size > 1000


class TestCommandLine:
    def test_run_command_exit_zero(self, tmp_path):
        config = tmp_path / "cfg.json"
        config.write_text(json.dumps(mini_doc()))
        runner = CliRunner()
        result = runner.invoke(main, ["run", "--config", str(config),
                                      "--out", str(tmp_path / "out")])
        assert result.exit_code == 0, result.output
        assert (tmp_path / "out" / "summary.csv").exists()

    def test_invalid_config_nonzero_with_key(self, tmp_path):
        doc = mini_doc(**{"experiment.acquisitions": ["bogus"]})
        config = tmp_path / "cfg.json"
        config.write_text(json.dumps(doc))
        runner = CliRunner()
        result = runner.invoke(main, ["run", "--config", str(config)])
        assert result.exit_code != 0
        assert "experiment.acquisitions" in result.output

    def test_missing_network_tau_mismatch(self, tmp_path):
        doc = mini_doc()
        doc["space"]["tau"] = 3
        config = tmp_path / "cfg.json"
        config.write_text(json.dumps(doc))
        runner = CliRunner()
        result = runner.invoke(main, ["run", "--config", str(config),
                                      "--out", str(tmp_path / "out")])
        assert result.exit_code != 0
        assert "tau" in result.output

    def test_oracle_and_report_commands(self, tmp_path):
        config = tmp_path / "cfg.json"
        config.write_text(json.dumps(mini_doc()))
        runner = CliRunner()
        out = tmp_path / "out"
        assert runner.invoke(main, ["run", "--config", str(config),
                                    "--out", str(out)]).exit_code == 0
        assert runner.invoke(main, ["oracle", "--config", str(config),
                                    "--out", str(tmp_path / "oracle")]).exit_code == 0
        assert runner.invoke(main, ["report", "--dir", str(out)]).exit_code == 0

    def test_report_on_empty_dir(self, tmp_path):
        empty = tmp_path / "none"
        empty.mkdir()
        runner = CliRunner()
        assert runner.invoke(main, ["report", "--dir", str(empty)]).exit_code == 0
