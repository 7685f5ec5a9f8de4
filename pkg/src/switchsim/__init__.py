"""Discrete-time input-queued switch simulator with MaxWeight-like schedulers."""
from .core import ConfigurationError, Schedule, SlotOutcome, step, weight
from .geometry import Decomposition, ProjectionError, project_cone, project_subspace, ssc_metrics
from .metrics import Estimate, estimate_mean
from .schedulers import POLICIES, SchedulerState, make_scheduler, max_weight_matching
from .simulate import RunRecord, simulate
from .traffic import TrafficSpec, make_nonuniform, make_preset, make_uniform

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError", "Decomposition", "Estimate", "POLICIES", "ProjectionError", "RunRecord",
    "Schedule", "SchedulerState", "SlotOutcome", "TrafficSpec", "estimate_mean", "make_nonuniform",
    "make_preset", "make_scheduler", "make_uniform", "max_weight_matching", "project_cone",
    "project_subspace", "simulate", "ssc_metrics", "step", "weight",
]
