"""Statistics recomputed from raw run CSVs.

Every number that ends up in a figure comes from one of these functions, so
the test suite can recompute them independently and require exact equality.
"""

from __future__ import annotations

from collections import defaultdict

import numpy as np

from .loader import Run


def median_daily_profit(run: Run) -> float:
    """Median of per-agent per-day profit over the whole run."""
    return float(np.median(run.agents.profit))


def daily_profit_series(run: Run) -> tuple[np.ndarray, np.ndarray]:
    """(days, median profit across agents for each day)."""
    days = np.unique(run.agents.day)
    med = np.array([
        float(np.median(run.agents.profit[run.agents.day == d])) for d in days
    ])
    return days, med


def daily_orders_series(run: Run) -> tuple[np.ndarray, np.ndarray]:
    """(days, total orders completed by all agents on each day)."""
    days = np.unique(run.agents.day)
    totals = np.array([
        int(run.agents.orders_completed[run.agents.day == d].sum())
        for d in days
    ])
    return days, totals


def daily_worktime_series(run: Run) -> tuple[np.ndarray, np.ndarray]:
    """(days, mean effective working steps per agent on each day)."""
    days = np.unique(run.agents.day)
    means = np.array([
        float(run.agents.effective_steps[run.agents.day == d].mean())
        for d in days
    ])
    return days, means


def completion_rate_series(run: Run) -> tuple[np.ndarray, np.ndarray]:
    return run.system.day, run.system.completion_rate


def memory_decision_share(run: Run) -> float:
    """Fraction of decisions answered from memory over the whole run."""
    mem = int(run.agents.decisions_memory.sum())
    learn = int(run.agents.decisions_learning.sum())
    total = mem + learn
    return mem / total if total else 0.0


def group_runs(runs: list[Run], key: str) -> dict[str, list[Run]]:
    """Group runs by "learning" or "memory_model"."""
    if key not in ("learning", "memory_model"):
        raise ValueError(f"unsupported grouping key: {key!r}")
    groups: dict[str, list[Run]] = defaultdict(list)
    for run in runs:
        groups[getattr(run, key)].append(run)
    return dict(groups)


def profit_distributions(runs: list[Run], key: str) -> dict[str, np.ndarray]:
    """Per-group arrays of median daily profit, one entry per run (seed)."""
    return {
        name: np.array(sorted(median_daily_profit(r) for r in members))
        for name, members in group_runs(runs, key).items()
    }
