import csv
import json
import os

import pytest

from couriersim.cli import main
from couriersim.config import ExperimentConfig
from couriersim.harness import (AGENT_HEADER, SYSTEM_HEADER,
                                accounting_identity, order_conservation,
                                run_experiment, sweep)

TINY = dict(seed=5, n_agents=4, steps=720, width=150, height=150,
            learning="rule", memory_model="mmdm")


def tiny_config(**overrides):
    merged = dict(TINY)
    merged.update(overrides)
    return ExperimentConfig(**merged)


# -------------------------------------------------------------------- harness

def test_csv_headers_exact(tmp_path):
    result = run_experiment(tiny_config(), str(tmp_path))
    with open(result.agent_csv) as fh:
        assert next(csv.reader(fh)) == [
            "day", "agent_id", "learning", "memory_model", "profit",
            "orders_completed", "effective_steps", "decisions_memory",
            "decisions_learning"]
    with open(result.system_csv) as fh:
        assert next(csv.reader(fh)) == [
            "day", "orders_generated", "orders_delivered", "orders_expired",
            "completion_rate"]
    assert AGENT_HEADER[0] == "day" and SYSTEM_HEADER[-1] == "completion_rate"


def test_agent_rows_shape_and_types(tmp_path):
    result = run_experiment(tiny_config(), str(tmp_path))
    with open(result.agent_csv) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 2 * 4  # days x agents
    for row in rows:
        assert row["learning"] == "rule"
        assert row["memory_model"] == "mmdm"
        float(row["profit"])  # formatted numeric
        assert "." in row["profit"] and len(row["profit"].split(".")[1]) == 6
        assert int(row["effective_steps"]) <= 120


def test_reruns_are_byte_identical(tmp_path):
    a = run_experiment(tiny_config(), str(tmp_path / "a"))
    b = run_experiment(tiny_config(), str(tmp_path / "b"))
    for name in ("agent_daily.csv", "system_daily.csv", "config.json"):
        with open(os.path.join(a.out_dir, name), "rb") as fa, \
                open(os.path.join(b.out_dir, name), "rb") as fb:
            assert fa.read() == fb.read()


def test_run_invariants():
    result = run_experiment(tiny_config())
    assert order_conservation(result.sim)
    assert accounting_identity(result.sim)
    assert result.sim.gate_violations == 0


def test_config_json_written(tmp_path):
    run_experiment(tiny_config(), str(tmp_path))
    with open(tmp_path / "config.json") as fh:
        data = json.load(fh)
    assert data["seed"] == 5 and data["memory_model"] == "mmdm"


def test_sweep_layout(tmp_path):
    base = tiny_config(steps=360)
    summary = sweep(base, str(tmp_path), seeds=[0, 1],
                    memory_models=["none", "mmdm"])
    with open(summary) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 4
    names = {r["run"] for r in rows}
    assert names == {"run_rule_none_s0", "run_rule_none_s1",
                     "run_rule_mmdm_s0", "run_rule_mmdm_s1"}
    for r in rows:
        run_dir = tmp_path / r["run"]
        assert (run_dir / "agent_daily.csv").exists()
        assert (run_dir / "system_daily.csv").exists()
        assert (run_dir / "config.json").exists()


def test_decision_log_written(tmp_path):
    cfg = tiny_config(steps=360, decision_log=True)
    run_experiment(cfg, str(tmp_path))
    path = tmp_path / "decisions.jsonl"
    assert path.exists()
    for line in path.read_text().splitlines():
        rec = json.loads(line)
        assert rec["source"] in ("memory", "learning")


# ------------------------------------------------------------------------ CLI

def write_cfg(tmp_path, **overrides):
    cfg = dict(TINY)
    cfg.update(overrides)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return str(path)


def test_cli_run_ok(tmp_path):
    cfg = write_cfg(tmp_path, steps=360)
    out = str(tmp_path / "out")
    assert main(["run", "--config", cfg, "--out", out]) == 0
    assert os.path.exists(os.path.join(out, "agent_daily.csv"))


def test_cli_seed_override_changes_output(tmp_path):
    cfg = write_cfg(tmp_path, steps=360)
    a, b = str(tmp_path / "a"), str(tmp_path / "b")
    assert main(["run", "--config", cfg, "--out", a, "--seed", "11"]) == 0
    assert main(["run", "--config", cfg, "--out", b, "--seed", "12"]) == 0
    with open(os.path.join(a, "system_daily.csv")) as fa, \
            open(os.path.join(b, "system_daily.csv")) as fb:
        assert fa.read() != fb.read()


def test_cli_config_error_exit_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"n_agents": 0}))
    code = main(["run", "--config", str(bad), "--out", str(tmp_path / "o")])
    assert code == 2
    missing = main(["run", "--config", str(tmp_path / "nope.json"),
                    "--out", str(tmp_path / "o")])
    assert missing == 2


def test_cli_sweep(tmp_path):
    cfg = write_cfg(tmp_path, steps=360)
    out = str(tmp_path / "sweep")
    code = main(["sweep", "--config", cfg, "--out", out, "--seeds", "2",
                 "--memory-models", "none,mmdm"])
    assert code == 0
    assert os.path.exists(os.path.join(out, "summary.csv"))


def test_cli_sweep_bad_model_exit_2(tmp_path):
    cfg = write_cfg(tmp_path, steps=360)
    code = main(["sweep", "--config", cfg, "--out", str(tmp_path / "s"),
                 "--memory-models", "wishful"])
    assert code == 2


def test_cli_validate_exit_code():
    assert main(["validate"]) == 0
