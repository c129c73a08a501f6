"""Config parsing, result-table contracts, and process exit codes."""

import csv
import json

import numpy as np
import pytest

from mmtl.cli import (RESULT_HEADER, composer_label, main, make_composer,
                      parse_config, run_experiment)
from mmtl.composition import default_alpha
from mmtl.core import ConfigError


def minimal_raw(**overrides):
    raw = {
        "experiment": "two_modes",
        "composers": ["l1", "minimax"],
        "capacity_grid": [10.0],
        "replicates": 1,
        "seed": 3,
        "solver": {"max_iters": 20},
        "data": {"d": 3, "n_type1": 6, "n_type2": 2, "m_train": 4,
                 "m_test": 6, "n_new_tasks": 4},
    }
    raw.update(overrides)
    return raw


class TestParseConfig:
    def test_defaults(self):
        cfg = parse_config(minimal_raw())
        assert cfg["model"] == "ep"
        assert cfg["mode"] == "constrained"
        assert cfg["loss"] == "squared"
        assert cfg["capacity_grid"] == [10.0]
        assert cfg["solve_cfg"].max_iters == 20
        assert cfg["solve_cfg"].seed == 3

    def test_mnist_defaults_to_aep(self):
        raw = minimal_raw(experiment="mnist",
                          data={"train_images": "a", "train_labels": "b",
                                "test_images": "c", "test_labels": "d"})
        assert parse_config(raw)["model"] == "aep"

    @pytest.mark.parametrize("overrides", [
        {"experiment": "nope"},
        {"composers": []},
        {"composers": ["l3"]},
        {"composers": [{"alpha_minimax": -1.0}]},
        {"capacity_grid": []},
        {"capacity_grid": [0.0]},
        {"replicates": 0},
        {"seed": -1},
        {"model": "linear"},
        {"mode": "both"},
        {"solver": {"bogus_option": 1}},
        {"experiment": "task_table", "data": {}},
        {"experiment": "mnist", "data": {}},
    ])
    def test_rejects_bad_fields(self, overrides):
        with pytest.raises(ConfigError):
            parse_config(minimal_raw(**overrides))


class TestComposerSpecs:
    def test_labels(self):
        cfg = parse_config(minimal_raw(
            composers=["l1", "l2", "minimax", {"alpha_minimax": 0.3}]))
        labels = [composer_label(s) for s in cfg["composer_specs"]]
        assert labels == ["l1", "l2", "minimax", "alpha_minimax(0.3)"]

    def test_make_composer(self):
        assert make_composer(("l1", None), 4).variant == "weighted_l1"
        assert make_composer(("l2", None), 4).variant == "l2"
        assert make_composer(("minimax", None), 4).variant == "max"
        amm = make_composer(("alpha_minimax", 0.3), 7)
        assert amm.variant == "alpha_minimax"
        assert amm.alpha == default_alpha(7, 0.3)


class TestRunExperiment:
    def test_two_modes_row_grid(self, tmp_path):
        raw = minimal_raw(replicates=3, output_dir=str(tmp_path))
        out = run_experiment(parse_config(raw), raw)
        with open(out, newline="") as fh:
            rows = list(csv.DictReader(fh))
        # 2 composers x 1 capacity x 3 replicates x {mtl, ltl} = 12 rows.
        assert len(rows) == 12
        assert tuple(rows[0]) == RESULT_HEADER
        kinds = {(r["composer"], r["replicate"], r["metric_kind"])
                 for r in rows}
        assert len(kinds) == 12
        assert {r["metric_kind"] for r in rows} == {"mtl_l2_risk",
                                                    "ltl_l2_risk"}
        for r in rows:
            assert r["experiment"] == "two_modes"
            assert float(r["max_value"]) >= float(r["mean_value"]) - 1e-12
        manifest = json.loads((out.parent / "manifest.json").read_text())
        assert manifest["config"]["seed"] == 3
        assert len(manifest["cells"]) == 6

    def test_rows_sorted(self, tmp_path):
        raw = minimal_raw(composers=["minimax", "l1"],
                          capacity_grid=[10.0, 2.0], replicates=2,
                          output_dir=str(tmp_path))
        out = run_experiment(parse_config(raw), raw)
        with open(out, newline="") as fh:
            rows = list(csv.DictReader(fh))
        keys = [(r["composer"], float(r["capacity"]), int(r["replicate"]),
                 r["metric_kind"]) for r in rows]
        assert keys == sorted(keys)


class TestMainExitCodes:
    def test_malformed_json_exits_2(self, tmp_path, capsys):
        bad = tmp_path / "cfg.json"
        bad.write_text("{not json")
        assert main(["run", str(bad)]) == 2
        assert "JSON" in capsys.readouterr().err

    def test_bad_config_exits_2(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps(minimal_raw(composers=["l3"])))
        assert main(["run", str(cfg)]) == 2
        assert "composers" in capsys.readouterr().err

    def test_missing_data_file_exits_3(self, tmp_path, capsys):
        raw = minimal_raw(
            experiment="task_table",
            data={"path": str(tmp_path / "absent.csv"),
                  "schema": {"task_column": "t", "feature_columns": ["x"],
                             "target_column": "y"}},
            output_dir=str(tmp_path))
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps(raw))
        assert main(["run", str(cfg)]) == 3

    def test_successful_run_exits_0(self, tmp_path):
        raw = minimal_raw(output_dir=str(tmp_path))
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps(raw))
        assert main(["run", str(cfg)]) == 0
        assert (tmp_path / "results.csv").exists()

    def test_verify_subcommand(self, capsys):
        assert main(["verify", "composition"]) == 0
        assert "pass" in capsys.readouterr().out.lower()
