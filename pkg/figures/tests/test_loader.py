import numpy as np
import pytest

from figpipe.loader import (AGENT_HEADER, SYSTEM_HEADER, HeaderMismatchError,
                            discover_runs, load_agent_daily, load_run,
                            load_system_daily)

AGENT_ROWS = [
    ["0", "0", "rule", "mmdm", "-12.500000", "3", "40", "5", "7"],
    ["0", "1", "rule", "mmdm", "4.000000", "1", "20", "2", "9"],
    ["1", "0", "rule", "mmdm", "-3.250000", "2", "30", "6", "6"],
    ["1", "1", "rule", "mmdm", "10.000000", "4", "50", "1", "8"],
]
SYSTEM_ROWS = [
    ["0", "100", "60", "10", "0.600000"],
    ["1", "90", "70", "5", "0.777778"],
]


def write_csv(path, header, rows):
    lines = [",".join(header)] + [",".join(r) for r in rows]
    path.write_text("\n".join(lines) + "\n")


def make_run_dir(root, name="run_rule_mmdm_s0"):
    d = root / name
    d.mkdir(parents=True)
    write_csv(d / "agent_daily.csv", AGENT_HEADER, AGENT_ROWS)
    write_csv(d / "system_daily.csv", SYSTEM_HEADER, SYSTEM_ROWS)
    return d


def test_load_agent_daily(tmp_path):
    path = tmp_path / "agent_daily.csv"
    write_csv(path, AGENT_HEADER, AGENT_ROWS)
    table = load_agent_daily(str(path))
    assert table.day.tolist() == [0, 0, 1, 1]
    assert table.profit.tolist() == [-12.5, 4.0, -3.25, 10.0]
    assert table.learning[0] == "rule"
    assert table.decisions_memory.sum() == 14


def test_load_system_daily(tmp_path):
    path = tmp_path / "system_daily.csv"
    write_csv(path, SYSTEM_HEADER, SYSTEM_ROWS)
    table = load_system_daily(str(path))
    assert table.orders_generated.tolist() == [100, 90]
    assert table.completion_rate[1] == pytest.approx(0.777778)


def test_header_drift_raises_named_error(tmp_path):
    path = tmp_path / "agent_daily.csv"
    bad = AGENT_HEADER[:4] + ["earnings"] + AGENT_HEADER[5:]
    write_csv(path, bad, AGENT_ROWS)
    with pytest.raises(HeaderMismatchError) as err:
        load_agent_daily(str(path))
    assert "earnings" in str(err.value)
    assert err.value.expected == AGENT_HEADER


def test_reordered_header_rejected(tmp_path):
    path = tmp_path / "system_daily.csv"
    write_csv(path, list(reversed(SYSTEM_HEADER)), [])
    with pytest.raises(HeaderMismatchError):
        load_system_daily(str(path))


def test_load_run_parses_directory_name(tmp_path):
    d = make_run_dir(tmp_path, "run_qlearning_episodic_s7")
    run = load_run(str(d))
    assert run.learning == "qlearning"
    assert run.memory_model == "episodic"
    assert run.seed == 7
    assert len(run.agents.profit) == 4


def test_load_run_rejects_foreign_name(tmp_path):
    d = tmp_path / "results"
    d.mkdir()
    with pytest.raises(ValueError, match="not a run directory"):
        load_run(str(d))


def test_discover_runs_sorted(tmp_path):
    make_run_dir(tmp_path, "run_rule_mmdm_s1")
    make_run_dir(tmp_path, "run_rule_mmdm_s0")
    (tmp_path / "not_a_run").mkdir()
    runs = discover_runs(str(tmp_path))
    assert [r.seed for r in runs] == [0, 1]


def test_discover_runs_empty_dir_raises(tmp_path):
    with pytest.raises(ValueError, match="no run directories"):
        discover_runs(str(tmp_path))


def test_empty_tables_load(tmp_path):
    path = tmp_path / "agent_daily.csv"
    write_csv(path, AGENT_HEADER, [])
    table = load_agent_daily(str(path))
    assert len(table.profit) == 0
    assert isinstance(table.profit, np.ndarray)
