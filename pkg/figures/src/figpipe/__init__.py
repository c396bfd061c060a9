"""Figure pipeline over courier simulator sweep directories.

Consumes only the documented CSV interface (agent_daily.csv,
system_daily.csv per run directory); never imports the simulator.
"""

from .loader import (HeaderMismatchError, Run, discover_runs,
                     load_agent_daily, load_run, load_system_daily)
from .plots import render_all

__version__ = "0.1.0"

__all__ = [
    "HeaderMismatchError",
    "Run",
    "discover_runs",
    "load_agent_daily",
    "load_run",
    "load_system_daily",
    "render_all",
    "__version__",
]
