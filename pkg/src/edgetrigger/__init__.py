"""Event-triggering detectors for drifting sensor noise, with a Monte Carlo harness."""

from .config import ConfigError, SimConfig, frame_time, load_config
from .signal import EventSchedule, NodeSignal, generate_frame, schedule_events
from .sim import RunReport, run_simulation, score_run

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "EventSchedule",
    "NodeSignal",
    "RunReport",
    "SimConfig",
    "frame_time",
    "generate_frame",
    "load_config",
    "run_simulation",
    "schedule_events",
    "score_run",
]
