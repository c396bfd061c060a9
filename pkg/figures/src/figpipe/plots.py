"""Figure rendering over loaded runs.

Each plot function returns the statistics it drew so callers (and tests) can
verify the rendered numbers against independent recomputation.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402 - backend must be set first

from .loader import Run
from . import stats

GROUP_ORDER = {
    "learning": ["rule", "imitation", "qlearning", "scripted"],
    "memory_model": ["none", "episodic", "replay", "mmdm"],
}


def _ordered(dists: dict, key: str) -> list[str]:
    known = [g for g in GROUP_ORDER[key] if g in dists]
    extra = sorted(set(dists) - set(known))
    return known + extra


def profit_boxplot(runs: list[Run], key: str, out_path: str) -> dict:
    """Boxplot of per-seed median daily profit grouped by learning type or
    memory model."""
    dists = stats.profit_distributions(runs, key)
    labels = _ordered(dists, key)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.boxplot([dists[name] for name in labels], tick_labels=labels)
    ax.set_ylabel("median daily profit")
    ax.set_xlabel(key.replace("_", " "))
    ax.set_title(f"profit by {key.replace('_', ' ')}")
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return {name: dists[name] for name in labels}


def daily_profit_lines(runs: list[Run], key: str, out_path: str) -> dict:
    """Per-day median profit, one line per group (averaged across seeds)."""
    groups = stats.group_runs(runs, key)
    drawn = {}
    fig, ax = plt.subplots(figsize=(6, 4))
    for name in _ordered(groups, key):
        series = [stats.daily_profit_series(r) for r in groups[name]]
        days = series[0][0]
        mean = sum(med for _, med in series) / len(series)
        ax.plot(days, mean, marker="o", label=name)
        drawn[name] = (days, mean)
    ax.set_xlabel("day")
    ax.set_ylabel("median daily profit")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return drawn


def orders_and_worktime(runs: list[Run], key: str, out_path: str) -> dict:
    """Completed orders and mean effective steps per day, per group."""
    groups = stats.group_runs(runs, key)
    drawn = {}
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    for name in _ordered(groups, key):
        order_series = [stats.daily_orders_series(r) for r in groups[name]]
        work_series = [stats.daily_worktime_series(r) for r in groups[name]]
        days = order_series[0][0]
        orders = sum(o for _, o in order_series) / len(order_series)
        work = sum(w for _, w in work_series) / len(work_series)
        ax1.plot(days, orders, marker="o", label=name)
        ax2.plot(days, work, marker="s", label=name)
        drawn[name] = {"days": days, "orders": orders, "worktime": work}
    ax1.set_xlabel("day")
    ax1.set_ylabel("orders completed")
    ax2.set_xlabel("day")
    ax2.set_ylabel("mean effective steps")
    for ax in (ax1, ax2):
        ax.legend()
        ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return drawn


def completion_rates(runs: list[Run], key: str, out_path: str) -> dict:
    """System completion rate per day, per group (averaged across seeds)."""
    groups = stats.group_runs(runs, key)
    drawn = {}
    fig, ax = plt.subplots(figsize=(6, 4))
    for name in _ordered(groups, key):
        series = [stats.completion_rate_series(r) for r in groups[name]]
        days = series[0][0]
        mean = sum(rate for _, rate in series) / len(series)
        ax.plot(days, mean, marker="o", label=name)
        drawn[name] = (days, mean)
    ax.set_xlabel("day")
    ax.set_ylabel("completion rate")
    ax.set_ylim(0, 1)
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return drawn


def render_all(runs: list[Run], out_dir: str, key: str = "memory_model") -> dict:
    """Render the full figure set into out_dir; returns drawn statistics."""
    os.makedirs(out_dir, exist_ok=True)
    return {
        "profit_box": profit_boxplot(
            runs, key, os.path.join(out_dir, "profit_box.png")),
        "profit_daily": daily_profit_lines(
            runs, key, os.path.join(out_dir, "profit_daily.png")),
        "orders_worktime": orders_and_worktime(
            runs, key, os.path.join(out_dir, "orders_worktime.png")),
        "completion": completion_rates(
            runs, key, os.path.join(out_dir, "completion.png")),
    }
