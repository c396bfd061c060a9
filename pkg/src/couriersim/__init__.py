"""Deterministic multi-agent courier delivery simulator.

Agents with hierarchical memory collaborate on an instant-delivery grid:
experiences are shared through a bounded collective store and replayed when
credible enough, otherwise a learning policy acts.
"""

from .config import ConfigError, ExperimentConfig, desk_config, load_config
from .harness import RunResult, run_experiment, sweep, validate
from .world import Simulation

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "RunResult",
    "Simulation",
    "desk_config",
    "load_config",
    "run_experiment",
    "sweep",
    "validate",
    "__version__",
]
