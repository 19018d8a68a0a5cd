"""Seeded discrete-event network simulation and Byzantine strategies."""

from .config import ConfigError, SimConfig, from_dict
from .sim import Simulation, run
from .trace import Trace

__all__ = ["ConfigError", "SimConfig", "Simulation", "Trace", "from_dict", "run"]
