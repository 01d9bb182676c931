import json
from pathlib import Path

import numpy as np
import pytest

from marlperf import cli, profiler
from marlperf.cli import (
    BREAKDOWN_HEADER,
    SWEEP_HEADER,
    read_summary_json,
    write_summary_json,
)
from marlperf.config import ExperimentConfig, config_from_dict, parse_config
from marlperf.errors import ConfigError


def write_config(tmp_path, payload, name="exp.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


MINIMAL_NEURCOMM = {
    "pipeline": "neurcomm",
    "environment": "networked",
    "n_agents": 4,
}


class TestParseConfig:
    def test_minimal_config_gets_defaults(self, tmp_path):
        cfg = parse_config(write_config(tmp_path, MINIMAL_NEURCOMM))
        assert cfg.rollout_threads == 1
        assert cfg.training_threads == 1
        assert cfg.iterations == 30
        assert cfg.warmup_iterations == 5
        assert cfg.hyperparameters.hidden == 64
        assert cfg.hyperparameters.belief_dim == 32

    def test_unknown_key_named_in_error(self, tmp_path):
        payload = dict(MINIMAL_NEURCOMM, rollout_treads=4)
        with pytest.raises(ConfigError) as err:
            parse_config(write_config(tmp_path, payload))
        assert "rollout_treads" in str(err.value)

    def test_unknown_hyperparameter_rejected(self, tmp_path):
        payload = dict(MINIMAL_NEURCOMM, hyperparameters={"learning_rate": 0.1})
        with pytest.raises(ConfigError) as err:
            parse_config(write_config(tmp_path, payload))
        assert "learning_rate" in str(err.value)

    def test_parse_error_reports_line_and_column(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text('{"pipeline": "neurcomm",\n  bad}')
        with pytest.raises(ConfigError) as err:
            parse_config(str(path))
        assert "line 2" in str(err.value)

    def test_pipeline_environment_pairing_enforced(self, tmp_path):
        payload = {"pipeline": "maddpg", "environment": "networked", "n_agents": 2}
        with pytest.raises(ConfigError):
            parse_config(write_config(tmp_path, payload))

    def test_sweep_validation(self):
        good = config_from_dict(
            dict(
                MINIMAL_NEURCOMM,
                sweep={"parameter": "n_agents", "values": [2, 4, 8]},
            )
        )
        assert good.sweep.values == [2, 4, 8]
        with pytest.raises(ConfigError):
            config_from_dict(
                dict(MINIMAL_NEURCOMM, sweep={"parameter": "n_agents", "values": [4, 2]})
            )
        with pytest.raises(ConfigError):
            config_from_dict(
                dict(MINIMAL_NEURCOMM, sweep={"parameter": "batch", "values": [1, 2]})
            )

    def test_gamma_range_enforced(self, tmp_path):
        payload = dict(MINIMAL_NEURCOMM, hyperparameters={"gamma": 1.0})
        with pytest.raises(ConfigError):
            parse_config(write_config(tmp_path, payload))

    def test_config_hash_stable(self):
        a = config_from_dict(dict(MINIMAL_NEURCOMM))
        b = config_from_dict(dict(MINIMAL_NEURCOMM))
        assert a.config_hash() == b.config_hash()
        c = config_from_dict(dict(MINIMAL_NEURCOMM, seed=3))
        assert c.config_hash() != a.config_hash()


def fast_config(tmp_path, **overrides):
    payload = {
        "pipeline": "neurcomm",
        "environment": "networked",
        "n_agents": 2,
        "iterations": 2,
        "warmup_iterations": 1,
        "seed": 3,
        "hyperparameters": {"horizon": 4, "hidden": 8, "belief_dim": 4},
        "output": {"directory": str(tmp_path / "out")},
    }
    payload.update(overrides)
    return write_config(tmp_path, payload)


class TestCliCommands:
    def test_validate_ok(self, tmp_path, capsys):
        code = cli.main(["validate", fast_config(tmp_path)])
        assert code == 0
        assert "1 plan(s)" in capsys.readouterr().out

    def test_validate_sweep_counts_plans(self, tmp_path, capsys):
        path = fast_config(
            tmp_path, sweep={"parameter": "n_agents", "values": [2, 4, 8]}
        )
        assert cli.main(["validate", path]) == 0
        assert "3 plan(s)" in capsys.readouterr().out

    def test_bad_config_is_exit_two(self, tmp_path):
        path = write_config(tmp_path, {"pipeline": "nope"})
        assert cli.main(["validate", path]) == 2

    def test_run_emits_documented_files(self, tmp_path):
        path = fast_config(tmp_path)
        assert cli.main(["run", path]) == 0
        out = tmp_path / "out"
        breakdown = (out / "breakdown.csv").read_text().splitlines()
        assert breakdown[0] == BREAKDOWN_HEADER
        assert len(breakdown) == 1 + 2  # header + one row per iteration
        summary = json.loads((out / "summary.json").read_text())
        assert 0.0 <= summary["comm_pct_execution"] <= 100.0
        assert 0.0 <= summary["comm_pct_training"] <= 100.0
        echo = json.loads((out / "effective_config.json").read_text())
        assert echo["hyperparameters"]["horizon"] == 4

    def test_single_iteration_run_single_row(self, tmp_path):
        path = fast_config(tmp_path, iterations=1, warmup_iterations=0)
        assert cli.main(["run", path]) == 0
        rows = (tmp_path / "out" / "breakdown.csv").read_text().splitlines()
        assert len(rows) == 2

    def test_refuses_overwrite_without_force(self, tmp_path):
        path = fast_config(tmp_path)
        assert cli.main(["run", path]) == 0
        assert cli.main(["run", path]) == 2
        assert cli.main(["run", path, "--force"]) == 0

    def test_no_profile_zeroes_categories(self, tmp_path):
        path = fast_config(tmp_path)
        assert cli.main(["run", path, "--no-profile"]) == 0
        rows = (tmp_path / "out" / "breakdown.csv").read_text().splitlines()[1:]
        for row in rows:
            cells = row.split(",")
            assert all(float(c) == 0.0 for c in cells[2:7])

    def test_sweep_emits_schema(self, tmp_path):
        path = fast_config(
            tmp_path, sweep={"parameter": "n_agents", "values": [2, 4]}
        )
        assert cli.main(["sweep", path]) == 0
        lines = (tmp_path / "out" / "sweep.csv").read_text().splitlines()
        assert lines[0] == SWEEP_HEADER
        assert len(lines) == 3
        first = lines[1].split(",")
        assert first[0] == "n_agents" and first[1] == "2"
        for cell in first[6:8]:
            assert 0.0 <= float(cell) <= 100.0

    def test_sweep_without_section_fails(self, tmp_path):
        assert cli.main(["sweep", fast_config(tmp_path)]) == 2

    def test_output_dir_and_seed_overrides(self, tmp_path):
        path = fast_config(tmp_path)
        alt = tmp_path / "alt"
        assert cli.main(["run", path, "--output-dir", str(alt), "--seed", "9"]) == 0
        echo = json.loads((alt / "effective_config.json").read_text())
        assert echo["seed"] == 9


class TestSummaryRoundTrip:
    def test_round_trips_exactly(self, tmp_path):
        report = profiler.IPSReport(
            t_sg=0.1234567890123,
            t_mu=0.9876543210987,
            t_iteration=1.111111,
            ips=1 / 1.111111,
            comm_pct_execution=72.2,
            comm_pct_training=21.1,
        )
        path = tmp_path / "summary.json"
        write_summary_json(path, report, "abc123")
        back, config_hash = read_summary_json(path)
        assert back == report
        assert config_hash == "abc123"


class TestDeterminism:
    def test_same_config_same_summary_modulo_timing(self, tmp_path):
        path = fast_config(tmp_path)
        assert cli.main(["run", path, "--output-dir", str(tmp_path / "a")]) == 0
        assert cli.main(["run", path, "--output-dir", str(tmp_path / "b")]) == 0
        sa = json.loads((tmp_path / "a" / "summary.json").read_text())
        sb = json.loads((tmp_path / "b" / "summary.json").read_text())
        assert sa["config_hash"] == sb["config_hash"]
        rows_a = (tmp_path / "a" / "breakdown.csv").read_text().splitlines()
        rows_b = (tmp_path / "b" / "breakdown.csv").read_text().splitlines()
        assert len(rows_a) == len(rows_b)
        bytes_a = [row.split(",")[-1] for row in rows_a[1:]]
        bytes_b = [row.split(",")[-1] for row in rows_b[1:]]
        assert bytes_a == bytes_b
