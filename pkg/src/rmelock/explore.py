"""Interleaving exploration with crash and abort injection.

Exhaustive mode walks every action interleaving to a depth bound with
visited-state pruning (a state is re-expanded only when reached with more
remaining depth than before).  Random modes walk many seeded schedules;
``fair_random`` additionally forces any process that owes a step (it is
outside the remainder, or still recovering) to be scheduled within a
bounded window, which realizes a fair run and arms the progress monitor.

Every newly visited configuration is checked against the state invariant,
and every explored edge feeds the trace monitors, so a reported clean run
covers both the per-state conditions and the run properties up to the
explored bound.  Budgets for crashes and abort signals are per process per
attempt.
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass, field

from .invariant import Violation, check_invariant, invariant_ok
from .lines import REM, GOOD
from .model import (
    CALL_NONE, CRASH, NORMAL, SET_ABORT,
    Config, VarLayout, enabled_actions, initial_config, step,
)
from .monitors import TraceMonitors

EXHAUSTIVE_MAX_N = 3
EXHAUSTIVE_MAX_DEPTH = 48


class StateSpaceGuard(RuntimeError):
    """Refusal to start or continue an exploration that cannot finish."""


@dataclass
class ExploreParams:
    n: int
    max_depth: int = 30
    crash_budget: int = 0
    abort_budget: int = 0
    scheduler: str = "exhaustive"
    seed: int = 0
    schedules: int = 1000
    max_steps: int = 200
    mutation: str | None = None
    progress_window: int | None = None      # fair_random default: 50*n*(crash_budget+1)
    fairness_window: int | None = None      # default 4*n
    max_states: int = 5_000_000
    max_violations: int = 16
    check_every: int = 1
    keep_violation_trace: bool = True


@dataclass
class Report:
    n: int
    scheduler: str
    states_visited: int = 0
    transitions: int = 0
    max_frontier: int = 0
    schedules_run: int = 0
    completed_attempts: int = 0
    violations: list = field(default_factory=list)
    wall_time: float = 0.0
    digest: str = ""
    truncated: bool = False

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_json(self):
        return {
            "n": self.n, "scheduler": self.scheduler,
            "states_visited": self.states_visited,
            "transitions": self.transitions,
            "max_frontier": self.max_frontier,
            "schedules_run": self.schedules_run,
            "completed_attempts": self.completed_attempts,
            "violations": [v.to_json() for v in self.violations],
            "wall_time": round(self.wall_time, 3),
            "digest": self.digest,
            "truncated": self.truncated,
        }


class _Stop(Exception):
    pass


def _all_enabled(cfg, params):
    acts = []
    for p in range(1, cfg.n + 1):
        acts.extend(enabled_actions(cfg, p, params.crash_budget, params.abort_budget))
    return acts


def _fnv(h: int, *vals: int) -> int:
    for v in vals:
        h = ((h ^ (v & 0xFFFFFFFF)) * 0x01000193) & 0xFFFFFFFFFFFFFFFF
    return h


def explore_exhaustive(params: ExploreParams) -> Report:
    """DFS over all interleavings of up to ``max_depth`` actions."""
    if params.n > EXHAUSTIVE_MAX_N or params.max_depth > EXHAUSTIVE_MAX_DEPTH:
        raise StateSpaceGuard(
            f"exhaustive exploration is limited to n <= {EXHAUSTIVE_MAX_N} and "
            f"depth <= {EXHAUSTIVE_MAX_DEPTH} (asked n={params.n}, depth={params.max_depth})")
    t0 = time.monotonic()
    layout = VarLayout(params.n)
    mon = TraceMonitors(params.n)
    rep = Report(params.n, "exhaustive")
    cfg0 = initial_config(params.n)
    rep.states_visited = 1
    for v in check_invariant(cfg0):
        rep.violations.append(v)
    visited = {cfg0.key(): params.max_depth}
    path: list = []

    def record(viols):
        for v in viols:
            v.step = len(path) - 1
            if params.keep_violation_trace and v.trace is None:
                v.trace = list(path)
            rep.violations.append(v)
            if len(rep.violations) >= params.max_violations:
                rep.truncated = True
                raise _Stop

    def dfs(cfg, remaining):
        depth = len(path)
        if depth > rep.max_frontier:
            rep.max_frontier = depth
        for a in _all_enabled(cfg, params):
            nxt, eff = step(cfg, a, params.mutation, layout)
            rep.transitions += 1
            path.append(a)
            tok = mon.mark()
            viols = mon.on_step(len(path) - 1, cfg, a, nxt, eff)
            try:
                if viols:
                    record(viols)
                if a[0] == NORMAL and nxt.procs[a[1]].pc == REM:
                    rep.completed_attempts += 1
                key = nxt.key()
                seen = visited.get(key)
                if seen is None:
                    rep.states_visited += 1
                    if rep.states_visited > params.max_states:
                        raise StateSpaceGuard(
                            f"state budget exceeded ({params.max_states} states)")
                    if invariant_ok(nxt):
                        record(check_invariant(nxt))
                if (seen is None or seen < remaining - 1):
                    visited[key] = remaining - 1
                    if remaining - 1 > 0:
                        dfs(nxt, remaining - 1)
            finally:
                mon.undo_to(tok)
                path.pop()

    try:
        dfs(cfg0, params.max_depth)
    except _Stop:
        pass
    rep.wall_time = time.monotonic() - t0
    rep.digest = f"{_fnv(0xCBF29CE484222325, rep.states_visited, rep.transitions):016x}"
    return rep


def _pick_action(rng, cfg, params, fair_due):
    if fair_due is not None:
        return (NORMAL, fair_due,
                enabled_actions(cfg, fair_due, 0, 0)[0][2])
    normals = []
    specials = []
    for p in range(1, cfg.n + 1):
        for a in enabled_actions(cfg, p, params.crash_budget, params.abort_budget):
            (specials if a[0] in (CRASH, SET_ABORT) else normals).append(a)
    if specials and (not normals or rng.random() < 0.15):
        return specials[rng.randrange(len(specials))]
    return normals[rng.randrange(len(normals))]


def explore_random(params: ExploreParams) -> Report:
    """Seeded random schedules; ``fair_random`` adds the fairness window."""
    if params.scheduler not in ("random", "fair_random"):
        raise ValueError(f"bad scheduler {params.scheduler!r} for explore_random")
    fair = params.scheduler == "fair_random"
    window = params.fairness_window or 4 * params.n
    progress = params.progress_window
    if progress is None and fair:
        progress = 50 * params.n * (params.crash_budget + 1)
    t0 = time.monotonic()
    layout = VarLayout(params.n)
    rep = Report(params.n, params.scheduler)
    digest = 0xCBF29CE484222325
    stop = False

    for sched in range(params.schedules):
        rng = random.Random(((params.seed + 1) * 0x9E3779B97F4A7C15 + sched) & 0xFFFFFFFFFFFFFFFF)
        cfg = initial_config(params.n)
        mon = TraceMonitors(params.n, progress if fair else None)
        last_act = [0] * (params.n + 1)
        actions: list = [] if params.keep_violation_trace else None
        for idx in range(params.max_steps):
            fair_due = None
            if fair:
                for p in range(1, params.n + 1):
                    st = cfg.procs[p]
                    if (st.pc != REM or st.status != GOOD) and idx - last_act[p] >= window:
                        fair_due = p
                        break
            a = _pick_action(rng, cfg, params, fair_due)
            nxt, eff = step(cfg, a, params.mutation, layout)
            if actions is not None:
                actions.append(a)
            rep.transitions += 1
            if a[0] in (NORMAL, CRASH):
                last_act[a[1]] = idx
            viols = mon.on_step(idx, cfg, a, nxt, eff)
            if a[0] == NORMAL and nxt.procs[a[1]].pc == REM:
                rep.completed_attempts += 1
            if not viols and idx % params.check_every == 0 and invariant_ok(nxt):
                viols = check_invariant(nxt)
            if viols:
                for v in viols:
                    v.step = idx
                    v.detail = f"[schedule {sched}] {v.detail}"
                    if params.keep_violation_trace and v.trace is None:
                        v.trace = list(actions)
                    rep.violations.append(v)
                if len(rep.violations) >= params.max_violations:
                    rep.truncated = True
                    stop = True
                    break
            digest = _fnv(digest, a[0], a[1], a[2], eff.line)
            cfg = nxt
        rep.schedules_run += 1
        if stop:
            break
    rep.states_visited = rep.transitions
    rep.max_frontier = 1
    rep.wall_time = time.monotonic() - t0
    rep.digest = f"{digest:016x}"
    return rep
