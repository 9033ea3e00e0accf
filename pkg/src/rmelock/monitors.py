"""Trace-level property monitors and the concrete step budgets.

The budgets count worst-case single-operation steps through each method,
with a registry write costed at its full node-op expansion (1 leaf store +
2 CASes per tree level) and findmin at one read.  The model's composite
registry step performs fewer steps than that expansion, so one budget
serves both the model trace (steps) and the instrumented lock (ops).

``TraceMonitors`` consumes steps one at a time and reports violations of
the run properties: mutual exclusion, CS reentry after a crash, FCFS,
bounded exit/recovery/abort, no trivial aborts, and (under a fair
scheduler) a progress budget per attempt.  All internal state changes go
through an undo log so a depth-first explorer can branch and backtrack.
"""

from __future__ import annotations

from dataclasses import dataclass

from .lines import *  # noqa: F401,F403
from .model import NORMAL, CRASH, SET_ABORT, CLEAR_ABORT, CALL_TRY, CALL_RECOVER, CALL_EXIT
from .invariant import Violation


@dataclass(frozen=True)
class Bounds:
    B_exit: int
    B_abort: int
    B_rec_cs: int
    B_rec_exit: int
    B_fast_rem: int
    B_rec_rem: int


#: steps in the try doorway: invocation, T1, T2, T3, T4.
DOORWAY_STEPS = 5


def bounds(n: int) -> Bounds:
    """Step budgets for n processes; only registry climbs depend on n."""
    if n < 1:
        raise ValueError("process count must be at least 1")
    lg = (n - 1).bit_length()
    return Bounds(
        B_exit=2 * lg + 13,
        B_abort=4 * lg + 26,
        B_rec_cs=2 * lg + 10,
        B_rec_exit=2 * lg + 14,
        B_fast_rem=2,
        B_rec_rem=2 * lg + 14,
    )


def _beta(cfg, p) -> bool:
    st = cfg.procs[p]
    if not st.abortsig:
        return False
    sec = section_of(st.pc, st.origin)
    return sec == SEC_TRY or (sec == SEC_RECOVER and st.status == REC_TRY)


class TraceMonitors:
    """Step-driven property checking with an undo log for backtracking."""

    def __init__(self, n: int, progress_window: int | None = None):
        self.n = n
        self.b = bounds(n)
        self.progress_window = progress_window
        rng = range(n + 1)
        self._undo = []
        # crashed in CS and not yet back in it
        self.csr_pending = [False for _ in rng]
        # bounded-method tracking: section being timed (0 = none), steps, entry status
        self.meth_sec = [0 for _ in rng]
        self.meth_steps = [0 for _ in rng]
        self.meth_entry_status = [0 for _ in rng]
        # bounded abort obligation
        self.ab_active = [False for _ in rng]
        self.ab_steps = [0 for _ in rng]
        # no-trivial-abort tracking of the current try execution
        self.nta_active = [False for _ in rng]
        self.nta_clean = [False for _ in rng]
        # FCFS per-attempt flags and precedence matrix
        self.fc_open = [False for _ in rng]
        self.fc_doorway = [False for _ in rng]
        self.fc_clean = [False for _ in rng]
        self.fc_in_cs = [False for _ in rng]
        self.fc_before = [[False for _ in rng] for _ in rng]
        # progress: global step index when the attempt opened (-1 = closed)
        self.att_start = [-1 for _ in rng]
        self.att_flagged = [False for _ in rng]

    # -- undo machinery ----------------------------------------------------
    def _set(self, arr, i, v):
        old = arr[i]
        if old is not v and old != v:
            self._undo.append((arr, i, old))
            arr[i] = v

    def mark(self) -> int:
        return len(self._undo)

    def undo_to(self, tok: int) -> None:
        u = self._undo
        while len(u) > tok:
            arr, i, old = u.pop()
            arr[i] = old

    # -- helpers -----------------------------------------------------------
    def _clear_before_row_col(self, p):
        row = self.fc_before[p]
        for q in range(1, self.n + 1):
            self._set(row, q, False)
            self._set(self.fc_before[q], p, False)

    def _void_fcfs(self, p):
        self._set(self.fc_clean, p, False)
        row = self.fc_before[p]
        for q in range(1, self.n + 1):
            self._set(row, q, False)

    # -- the step hook -------------------------------------------------------
    def on_step(self, idx, before, action, after, effect):
        """Advance over one step; returns any violations it triggers."""
        out = []
        kind, p, call = action
        stb = before.procs[p]
        sta = after.procs[p]
        sec_before = section_of(stb.pc, stb.origin)

        if kind == SET_ABORT:
            if self.nta_active[p]:
                self._set(self.nta_clean, p, False)
            if self.fc_open[p]:
                self._void_fcfs(p)
        elif kind == CRASH:
            if stb.pc == CS:
                self._set(self.csr_pending, p, True)
            if sec_before == SEC_TRY:
                self._set(self.nta_active, p, False)
                if self.fc_open[p]:
                    self._void_fcfs(p)
            self._set(self.meth_sec, p, 0)
            if self.ab_active[p]:
                self._set(self.ab_active, p, False)
        elif kind == NORMAL:
            entered_cs = sta.pc == CS and stb.pc != CS
            returned_rem = sta.pc == REM

            # method step accounting (exit and recover have budgets)
            if call == CALL_EXIT:
                self._set(self.meth_sec, p, SEC_EXIT)
                self._set(self.meth_steps, p, 1)
            elif call == CALL_RECOVER:
                self._set(self.meth_sec, p, SEC_RECOVER)
                self._set(self.meth_steps, p, 1)
                self._set(self.meth_entry_status, p, stb.status)
            elif call == CALL_TRY:
                self._set(self.nta_active, p, True)
                self._set(self.nta_clean, p, not stb.abortsig)
                # a fresh attempt for FCFS purposes
                self._set(self.fc_open, p, True)
                self._set(self.fc_doorway, p, False)
                self._set(self.fc_clean, p, not stb.abortsig)
                self._set(self.fc_in_cs, p, False)
                for q in range(1, self.n + 1):
                    if q != p and self.fc_open[q] and self.fc_doorway[q] \
                            and self.fc_clean[q] and not self.fc_in_cs[q]:
                        self._set(self.fc_before[q], p, True)
            elif self.meth_sec[p] and sec_before == self.meth_sec[p]:
                self._set(self.meth_steps, p, self.meth_steps[p] + 1)

            # doorway completion: T4 executed with no crash this attempt
            if effect.line == T4 and stb.crashes_in_attempt == 0 and self.fc_open[p]:
                self._set(self.fc_doorway, p, True)

            # method returns
            if self.meth_sec[p] == SEC_EXIT and returned_rem:
                if self.meth_steps[p] > self.b.B_exit:
                    out.append(Violation("BoundedExit", p,
                                         f"exit took {self.meth_steps[p]} steps > {self.b.B_exit}",
                                         idx))
                self._set(self.meth_sec, p, 0)
            elif self.meth_sec[p] == SEC_RECOVER and (returned_rem or entered_cs):
                steps, entry = self.meth_steps[p], self.meth_entry_status[p]
                if entry == REC_CS:
                    if not entered_cs:
                        out.append(Violation("BoundedRecCS", p,
                                             "recover after a CS crash did not return IN_CS", idx))
                    elif steps > self.b.B_rec_cs:
                        out.append(Violation("BoundedRecCS", p,
                                             f"recover took {steps} steps > {self.b.B_rec_cs}", idx))
                elif entry == REC_EXIT:
                    if steps > self.b.B_rec_exit:
                        out.append(Violation("BoundedRecExit", p,
                                             f"recover took {steps} steps > {self.b.B_rec_exit}", idx))
                elif entry in (GOOD, REC_REM):
                    if not returned_rem or steps > self.b.B_fast_rem:
                        out.append(Violation("FastRecRem", p,
                                             f"recover(status={STATUS_NAMES[entry]}) took {steps} steps "
                                             f"or left the remainder", idx))
                elif entry == REC_TRY and returned_rem and steps > self.b.B_rec_rem:
                    out.append(Violation("BoundedRecRem", p,
                                         f"recover took {steps} steps > {self.b.B_rec_rem}", idx))
                self._set(self.meth_sec, p, 0)

            # mutual exclusion and CS reentry, at entry steps
            if entered_cs:
                for q in range(1, self.n + 1):
                    if q != p and after.procs[q].pc == CS:
                        out.append(Violation("Mutex", p,
                                             f"{p} and {q} both in the CS", idx))
                    if q != p and self.csr_pending[q]:
                        out.append(Violation("CSR", p,
                                             f"{p} entered the CS while {q} held it across a crash",
                                             idx))
                if self.csr_pending[p]:
                    self._set(self.csr_pending, p, False)
                # FCFS: anyone with precedence over p must already be in/past the CS
                for q in range(1, self.n + 1):
                    if self.fc_before[q][p]:
                        out.append(Violation("FCFS", p,
                                             f"{p} entered the CS overtaking {q}", idx))
                if self.fc_open[p]:
                    self._set(self.fc_in_cs, p, True)
                    row = self.fc_before[p]
                    for q in range(1, self.n + 1):
                        self._set(row, q, False)

            # try returning to the remainder: no trivial aborts
            if sec_before == SEC_TRY and returned_rem and self.nta_active[p]:
                if self.nta_clean[p] and not stb.abortsig:
                    out.append(Violation("NoTrivialAbort", p,
                                         "try returned IN_REM without an abort signal or crash",
                                         idx))
                self._set(self.nta_active, p, False)
            if sec_before == SEC_TRY and entered_cs:
                self._set(self.nta_active, p, False)

        # abort signal observed while a try runs voids the NTA premise
        if sta.abortsig and self.nta_active[p] and self.nta_clean[p]:
            self._set(self.nta_clean, p, False)

        # bounded abort obligation
        if self.ab_active[p]:
            if kind == NORMAL:
                self._set(self.ab_steps, p, self.ab_steps[p] + 1)
            if sta.pc in (CS, REM) or not sta.abortsig:
                if self.ab_steps[p] > self.b.B_abort:
                    out.append(Violation("BoundedAbort", p,
                                         f"{self.ab_steps[p]} steps under an abort signal > "
                                         f"{self.b.B_abort}", idx))
                self._set(self.ab_active, p, False)
            elif self.ab_steps[p] > self.b.B_abort:
                out.append(Violation("BoundedAbort", p,
                                     f"{self.ab_steps[p]} steps under an abort signal without "
                                     f"reaching CS or REM", idx))
                self._set(self.ab_active, p, False)
        if not self.ab_active[p] and _beta(after, p):
            self._set(self.ab_active, p, True)
            self._set(self.ab_steps, p, 0)

        # attempt open/close bookkeeping (progress + FCFS attempt scope)
        if kind == NORMAL:
            if call in (CALL_TRY, CALL_RECOVER) and stb.status == GOOD:
                self._set(self.att_start, p, idx)
                self._set(self.att_flagged, p, False)
            if sta.pc == REM:
                self._set(self.att_start, p, -1)
                if self.fc_open[p]:
                    self._set(self.fc_open, p, False)
                    self._clear_before_row_col(p)

        if self.progress_window is not None:
            w = self.progress_window
            for q in range(1, self.n + 1):
                s = self.att_start[q]
                if s >= 0 and not self.att_flagged[q] and idx - s > w:
                    self._set(self.att_flagged, q, True)
                    out.append(Violation("Progress", q,
                                         f"attempt open for more than {w} steps", idx))
        return out


def monitor_trace(n, steps, progress_window=None, mutation=None):
    """Replay a recorded action list through the monitors; returns violations.

    ``steps`` is a sequence of (kind, pid, call) actions starting from the
    initial configuration.
    """
    from .model import initial_config, step as model_step, VarLayout

    mon = TraceMonitors(n, progress_window)
    layout = VarLayout(n)
    cfg = initial_config(n)
    out = []
    for idx, action in enumerate(steps):
        nxt, eff = model_step(cfg, action, mutation=mutation, layout=layout)
        out.extend(mon.on_step(idx, cfg, action, nxt, eff))
        cfg = nxt
    return out
