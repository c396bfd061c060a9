"""Sweep directory discovery and strict CSV loading.

The simulator's external interface is two CSV files per run directory.  The
headers are part of that contract: any drift raises HeaderMismatchError
instead of silently plotting wrong columns.
"""

from __future__ import annotations

import csv
import json
import os
import re
from dataclasses import dataclass, field

import numpy as np

AGENT_HEADER = ["day", "agent_id", "learning", "memory_model", "profit",
                "orders_completed", "effective_steps", "decisions_memory",
                "decisions_learning"]
SYSTEM_HEADER = ["day", "orders_generated", "orders_delivered",
                 "orders_expired", "completion_rate"]

_RUN_DIR = re.compile(r"run_(?P<learning>[a-z]+)_(?P<model>[a-z]+)_s(?P<seed>\d+)$")


class HeaderMismatchError(ValueError):
    """A CSV header does not match the documented interface."""

    def __init__(self, path: str, expected: list[str], got: list[str]):
        super().__init__(
            f"{path}: header drift\n  expected: {expected}\n  got:      {got}")
        self.path = path
        self.expected = expected
        self.got = got


@dataclass
class AgentDaily:
    day: np.ndarray
    agent_id: np.ndarray
    learning: np.ndarray
    memory_model: np.ndarray
    profit: np.ndarray
    orders_completed: np.ndarray
    effective_steps: np.ndarray
    decisions_memory: np.ndarray
    decisions_learning: np.ndarray


@dataclass
class SystemDaily:
    day: np.ndarray
    orders_generated: np.ndarray
    orders_delivered: np.ndarray
    orders_expired: np.ndarray
    completion_rate: np.ndarray


@dataclass
class Run:
    path: str
    learning: str
    memory_model: str
    seed: int
    agents: AgentDaily
    system: SystemDaily
    config: dict = field(default_factory=dict)


def _read_rows(path: str, expected_header: list[str]) -> list[list[str]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, [])
        if header != expected_header:
            raise HeaderMismatchError(path, expected_header, header)
        return [row for row in reader if row]


def load_agent_daily(path: str) -> AgentDaily:
    rows = _read_rows(path, AGENT_HEADER)
    cols = list(zip(*rows)) if rows else [[] for _ in AGENT_HEADER]
    return AgentDaily(
        day=np.array(cols[0], dtype=int),
        agent_id=np.array(cols[1], dtype=int),
        learning=np.array(cols[2], dtype=object),
        memory_model=np.array(cols[3], dtype=object),
        profit=np.array(cols[4], dtype=float),
        orders_completed=np.array(cols[5], dtype=int),
        effective_steps=np.array(cols[6], dtype=int),
        decisions_memory=np.array(cols[7], dtype=int),
        decisions_learning=np.array(cols[8], dtype=int),
    )


def load_system_daily(path: str) -> SystemDaily:
    rows = _read_rows(path, SYSTEM_HEADER)
    cols = list(zip(*rows)) if rows else [[] for _ in SYSTEM_HEADER]
    return SystemDaily(
        day=np.array(cols[0], dtype=int),
        orders_generated=np.array(cols[1], dtype=int),
        orders_delivered=np.array(cols[2], dtype=int),
        orders_expired=np.array(cols[3], dtype=int),
        completion_rate=np.array(cols[4], dtype=float),
    )


def load_run(path: str) -> Run:
    name = os.path.basename(os.path.normpath(path))
    m = _RUN_DIR.search(name)
    if m is None:
        raise ValueError(f"not a run directory name: {name!r}")
    config = {}
    cfg_path = os.path.join(path, "config.json")
    if os.path.exists(cfg_path):
        with open(cfg_path) as fh:
            config = json.load(fh)
    return Run(
        path=path,
        learning=m.group("learning"),
        memory_model=m.group("model"),
        seed=int(m.group("seed")),
        agents=load_agent_daily(os.path.join(path, "agent_daily.csv")),
        system=load_system_daily(os.path.join(path, "system_daily.csv")),
        config=config,
    )


def discover_runs(sweep_dir: str) -> list[Run]:
    """Load every run_* subdirectory of a sweep, sorted for determinism."""
    runs = []
    for name in sorted(os.listdir(sweep_dir)):
        path = os.path.join(sweep_dir, name)
        if os.path.isdir(path) and _RUN_DIR.search(name):
            runs.append(load_run(path))
    if not runs:
        raise ValueError(f"no run directories found under {sweep_dir}")
    return runs
