import os
import statistics
import subprocess
import sys
import time

import numpy as np
import pytest

from figpipe import stats
from figpipe.cli import main
from figpipe.loader import discover_runs
from figpipe.plots import render_all

from test_loader import AGENT_HEADER, AGENT_ROWS, make_run_dir, write_csv


@pytest.fixture(scope="module")
def sweep_dir(tmp_path_factory):
    """A real sweep produced by the simulator CLI, consumed only as files."""
    root = tmp_path_factory.mktemp("sweep")
    cfg = root / "cfg.json"
    cfg.write_text('{"n_agents": 4, "steps": 720, "width": 150,'
                   ' "height": 150, "learning": "rule"}')
    proc = subprocess.run(
        [sys.executable, "-m", "couriersim.cli", "sweep",
         "--config", str(cfg), "--out", str(root / "out"),
         "--seeds", "2", "--memory-models", "none,mmdm"],
        capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    return str(root / "out")


def test_end_to_end_under_budget(sweep_dir, tmp_path):
    start = time.perf_counter()
    runs = discover_runs(sweep_dir)
    assert len(runs) == 4
    drawn = render_all(runs, str(tmp_path / "figs"))
    assert time.perf_counter() - start < 60.0
    for name in ("profit_box.png", "profit_daily.png",
                 "orders_worktime.png", "completion.png"):
        assert os.path.getsize(tmp_path / "figs" / name) > 0
    assert set(drawn) == {"profit_box", "profit_daily", "orders_worktime",
                          "completion"}


def test_drawn_stats_match_recomputation(sweep_dir, tmp_path):
    runs = discover_runs(sweep_dir)
    drawn = render_all(runs, str(tmp_path / "figs"))

    # boxplot distributions: exact per-seed medians per memory model
    for model, dist in drawn["profit_box"].items():
        expected = sorted(
            statistics.median(r.agents.profit.tolist())
            for r in runs if r.memory_model == model)
        assert dist.tolist() == expected

    # line charts: exact mean-across-seeds of the per-day series
    groups = stats.group_runs(runs, "memory_model")
    for model, (days, mean) in drawn["profit_daily"].items():
        series = [stats.daily_profit_series(r) for r in groups[model]]
        expected = sum(m for _, m in series) / len(series)
        assert np.array_equal(mean, expected)

    for model, data in drawn["orders_worktime"].items():
        order_series = [stats.daily_orders_series(r) for r in groups[model]]
        expected = sum(o for _, o in order_series) / len(order_series)
        assert np.array_equal(data["orders"], expected)

    for model, (days, mean) in drawn["completion"].items():
        series = [stats.completion_rate_series(r) for r in groups[model]]
        expected = sum(rate for _, rate in series) / len(series)
        assert np.array_equal(mean, expected)


def test_cli_renders(sweep_dir, tmp_path):
    out = str(tmp_path / "figs")
    assert main([sweep_dir, "--out", out, "--group-by", "memory_model"]) == 0
    assert os.path.exists(os.path.join(out, "profit_box.png"))


def test_cli_missing_runs_exit_2(tmp_path):
    empty = tmp_path / "empty"
    empty.mkdir()
    assert main([str(empty), "--out", str(tmp_path / "f")]) == 2


def test_cli_header_drift_exit_2(tmp_path):
    d = make_run_dir(tmp_path)
    bad = AGENT_HEADER[:4] + ["earnings"] + AGENT_HEADER[5:]
    write_csv(d / "agent_daily.csv", bad, AGENT_ROWS)
    code = main([str(tmp_path), "--out", str(tmp_path / "f")])
    assert code == 2
