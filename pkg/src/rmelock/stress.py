"""Threaded stress harness for the native lock.

Every thread owns one session and loops through passages: acquire, do a
deliberately racy critical-section body (read-modify-write a plain counter,
stamp an owner flag), release.  Crash plans fire at random labeled points,
including inside the critical section; abort signals are raised both before
an acquire and mid-wait.  The harness checks, independently of the lock's
own machinery:

* the counter equals the number of IN_CS returns (no lost updates),
* the owner stamp never observes two concurrent holders,
* nobody enters the CS while another session sits crashed inside it, and
* a session that crashed in the CS is sent back there by recover.

A watchdog forces spinners out (as crashes) if the run wedges, so a
deadlock surfaces as a violation rather than a hang.
"""

from __future__ import annotations

import random
import threading
import time
from dataclasses import dataclass, field

from .lines import GOOD, REC_CS
from .nativelock import (
    CRASHED, IN_CS, IN_REM, CrashPoint, LockInstance, Session,
    crash_once_at, crash_point_labels,
)


@dataclass
class StressParams:
    threads: int = 8
    passages: int = 100_000          # total across all threads
    crash_rate: float = 0.01         # per-passage probability of an armed crash
    abort_rate: float = 0.01         # per-passage probability of an abort signal
    seed: int = 0
    timeout: float = 120.0
    cs_crash_share: float = 0.25     # armed crashes that fire inside the CS


@dataclass
class StressResult:
    passages_done: int = 0
    cs_returns: int = 0
    counter: int = 0
    crashes_fired: int = 0
    aborts_returned: int = 0
    recover_cs_returns: int = 0
    violations: list = field(default_factory=list)
    wall_time: float = 0.0
    timed_out: bool = False

    @property
    def ok(self) -> bool:
        return not self.violations and not self.timed_out

    def to_json(self):
        d = self.__dict__.copy()
        d["ok"] = self.ok
        return d


def run_stress(params: StressParams) -> StressResult:
    inst = LockInstance(params.threads)
    labels = [l for l in crash_point_labels(params.threads)
              if not l.startswith("REC")]
    res = StressResult()
    hlock = threading.Lock()
    stop = threading.Event()
    owner = [0]                      # harness stamp of the current CS holder
    counter = [0]                    # racy unless mutual exclusion holds
    csr_down = [0]                   # pid crashed inside the CS, else 0

    base = params.passages // params.threads
    extra = params.passages % params.threads
    quotas = [0] + [base + (1 if p <= extra else 0) for p in range(1, params.threads + 1)]

    def fail(msg):
        with hlock:
            res.violations.append(msg)
        stop.set()

    def enter_cs(pid):
        with hlock:
            res.cs_returns += 1
            if csr_down[0] not in (0, pid):
                fail(f"CSR: {pid} entered the CS while {csr_down[0]} was down in it")
            if owner[0] not in (0, pid):
                fail(f"mutex: {pid} entered the CS already held by {owner[0]}")
            owner[0] = pid
            if csr_down[0] == pid:
                csr_down[0] = 0

    def leave_cs(pid, crashed):
        with hlock:
            if owner[0] != pid:
                fail(f"mutex: {pid} leaving a CS stamped for {owner[0]}")
            if crashed:
                csr_down[0] = pid
            else:
                owner[0] = 0

    def cs_body(pid, rng, want_cs_crash, sess):
        enter_cs(pid)
        v = counter[0]
        counter[0] = v + 1
        if want_cs_crash:
            leave_cs(pid, crashed=True)
            sess.crash_in_cs()
            return True
        leave_cs(pid, crashed=False)
        return False

    def worker(pid):
        rng = random.Random(params.seed * 10_007 + pid)
        s = Session(inst, pid)

        def on_spin(spins):
            if stop.is_set():
                raise CrashPoint("watchdog")
            if s.abort_at and spins >= s.abort_at:
                inst.set_abort(pid, True)
                s.abort_at = 0

        s.on_spin = on_spin
        s.abort_at = 0
        done = 0
        while done < quotas[pid] and not stop.is_set():
            want_cs_crash = False
            if s.status == GOOD:
                inst.set_abort(pid, False)
                s.crash_plan = None
                if rng.random() < params.crash_rate:
                    if rng.random() < params.cs_crash_share:
                        want_cs_crash = True
                    else:
                        s.crash_plan = crash_once_at(labels[rng.randrange(len(labels))])
                s.abort_at = 0
                if rng.random() < params.abort_rate:
                    if rng.random() < 0.5:
                        inst.set_abort(pid, True)
                    else:
                        s.abort_at = 1 + rng.randrange(8)
                r = inst.try_acquire(s)
            else:
                was_cs = s.status == REC_CS
                s.crash_plan = None
                r = inst.recover(s)
                if r == IN_CS:
                    with hlock:
                        res.recover_cs_returns += 1
                if was_cs and r not in (CRASHED,) and r != IN_CS:
                    fail(f"recover after a CS crash returned {r} for {pid}")

            if r == CRASHED:
                with hlock:
                    res.crashes_fired += 1
                done += 1            # the crash ended a passage
                continue
            if r == IN_CS:
                crashed_in_cs = cs_body(pid, rng, want_cs_crash, s)
                if crashed_in_cs:
                    with hlock:
                        res.crashes_fired += 1
                    done += 1
                    continue
                rr = inst.release(s)
                if rr == CRASHED:
                    with hlock:
                        res.crashes_fired += 1
                done += 1
            else:  # IN_REM
                with hlock:
                    res.aborts_returned += 1
                done += 1
            inst.set_abort(pid, False)

        # Leave the lock clean: a session parked with pending recovery (or
        # holding the CS) would wedge every other thread's wait.
        s.crash_plan = None
        s.abort_at = 0
        while not stop.is_set():
            if s.where == "cs":
                leave_cs(pid, crashed=False)
                inst.release(s)
            elif s.status != GOOD:
                r = inst.recover(s)
                if r == IN_CS:
                    enter_cs(pid)
                    with hlock:
                        res.recover_cs_returns += 1
                        counter[0] += 1
            else:
                break

        with hlock:
            res.passages_done += done

    t0 = time.monotonic()
    threads = [threading.Thread(target=worker, args=(p,), daemon=True)
               for p in range(1, params.threads + 1)]
    old_interval = None
    try:
        import sys
        old_interval = sys.getswitchinterval()
        sys.setswitchinterval(0.0002)
    except Exception:
        pass
    for t in threads:
        t.start()
    deadline = time.monotonic() + params.timeout
    for t in threads:
        t.join(max(0.0, deadline - time.monotonic()))
    if any(t.is_alive() for t in threads):
        res.timed_out = True
        stop.set()
        for t in threads:
            t.join(10.0)
    if old_interval is not None:
        import sys
        sys.setswitchinterval(old_interval)
    res.wall_time = time.monotonic() - t0
    res.counter = counter[0]
    if res.counter != res.cs_returns:
        res.violations.append(
            f"counter {res.counter} != IN_CS returns {res.cs_returns} (lost updates)")
    return res
