"""Receding-horizon task manager, trace-following executor and 2D tabletop simulator."""

from .core import (
    Observation,
    ObjectView,
    PlanState,
    Primitive,
    Trace,
    Verb,
    Workspace,
    parse_memory,
    render_memory,
)
from .orchestrator import EpisodeConfig, EpisodeLog, Mode, Outcome, run_batch, run_episode
from .sim import Action, FailureConfig, GripperCommand, Scene, load_scene

__version__ = "0.1.0"
