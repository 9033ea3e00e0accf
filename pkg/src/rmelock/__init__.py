"""Recoverable, abortable mutual exclusion toolkit.

An executable model of a CAS-based lock whose waiters can abort and whose
holders can crash and recover (volatile state lost, shared memory kept),
plus the machinery to check it: exhaustive and randomized interleaving
exploration under crash/abort injection, a 13-condition state invariant
checker, run-property monitors, remote-memory-reference accounting for
three machine models, and a real threaded implementation of the same
algorithm with crash-point instrumentation.
"""

from .invariant import Violation, check_invariant, invariant_ok, mutex_ok
from .explore import ExploreParams, Report, StateSpaceGuard, explore_exhaustive, explore_random
from .minarray import INF, FlatMinArray, TournamentMinArray, TreeGeometry, cmp
from .model import (
    Config, POISON, StepEffect, VarLayout,
    enabled_actions, initial_config, step, MUTATIONS,
)
from .monitors import Bounds, DOORWAY_STEPS, TraceMonitors, bounds, monitor_trace
from .nativelock import IN_CS, IN_REM, CRASHED, LockInstance, Session
from .rmr import DSM, RELAXED_CC, STRICT_CC, PassageStats, aggregate, classify, point_contention
from .stress import StressParams, StressResult, run_stress

__version__ = "0.1.0"

__all__ = [
    "Violation", "check_invariant", "invariant_ok", "mutex_ok",
    "ExploreParams", "Report", "StateSpaceGuard", "explore_exhaustive", "explore_random",
    "INF", "FlatMinArray", "TournamentMinArray", "TreeGeometry", "cmp",
    "Config", "POISON", "StepEffect", "VarLayout",
    "enabled_actions", "initial_config", "step", "MUTATIONS",
    "Bounds", "DOORWAY_STEPS", "TraceMonitors", "bounds", "monitor_trace",
    "IN_CS", "IN_REM", "CRASHED", "LockInstance", "Session",
    "DSM", "RELAXED_CC", "STRICT_CC", "PassageStats", "aggregate", "classify",
    "point_contention",
    "StressParams", "StressResult", "run_stress",
    "__version__",
]
