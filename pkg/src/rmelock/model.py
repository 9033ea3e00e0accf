"""Executable model of the recoverable, abortable lock.

The model is a deterministic single-step interpreter: a ``Config`` is an
immutable snapshot (shared persistent variables plus every process's
volatile state), ``enabled_actions`` lists what a process may do next, and
``step`` produces the successor configuration together with a record of the
shared-variable operations the step performed.

Granularity follows the one-operation-per-instruction discipline: every
normal step touches at most one shared variable.  The busy-wait is split
into alternating single-read micro-steps (``spin`` phase: the go cell, then
the abort signal).  Registry operations are atomic composite steps here --
the real node-by-node structure lives in ``minarray``/``nativelock`` -- and
are flagged so cost accounting can expand them.

Crashes wipe a process's registers (to ``POISON``; the model treats any
later read of a poisoned register as a bug and raises), reset its pc to the
remainder, and leave all persistent variables untouched.  Registers are
also poisoned whenever a method returns, which canonicalizes states without
changing behaviour: no register is ever read again before being rewritten.
"""

from __future__ import annotations

from .lines import *  # noqa: F401,F403 -- line ids, statuses, pc sets
from .minarray import INF, TreeGeometry, pair_key


class ModelBug(Exception):
    """An internal contract of the model was broken (not a lock property)."""


class _Poison:
    """Post-crash register contents: compares unequal/unordered to everything."""

    __slots__ = ()
    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self):
        return "POISON"

    def __eq__(self, other):
        return other is self

    def __ne__(self, other):
        return other is not self

    def __lt__(self, other):
        return False

    def __le__(self, other):
        return False

    def __gt__(self, other):
        return False

    def __ge__(self, other):
        return False

    def __hash__(self):
        return 0x9B15

    def __reduce__(self):
        return (_Poison, ())


POISON = _Poison()


def _reg(value, what: str):
    """Guarded register read: reading a poisoned register is a model bug."""
    if value is POISON:
        raise ModelBug(f"read of poisoned register {what}")
    return value


# Action kinds.
NORMAL, CRASH, SET_ABORT, CLEAR_ABORT = range(4)
# Call choice for a NORMAL action taken at REM or CS (0 = execute current line).
CALL_NONE, CALL_TRY, CALL_RECOVER, CALL_EXIT = range(4)

ACTION_KIND_NAMES = ("normal", "crash", "set_abort", "clear_abort")
CALL_NAMES = (None, "try", "recover", "exit")

# Seeded faults for checker-effectiveness tests.  Each replaces one step's
# semantics; everything else is untouched.
MUTATIONS = ("blind_release", "abort_skips_promote", "exit_skips_seq_bump")


class VarLayout:
    """Integer ids for every shared variable, shared by traces and costing."""

    def __init__(self, n: int):
        self.n = n
        self.geo = TreeGeometry(n)
        self.TOKEN = 0
        self.SEQ = 1
        self.CSOWNER = 2
        self.GO = 3                      # go[p] = GO + p - 1
        self.SIG = 3 + n                 # abortsig[p] = SIG + p - 1
        self.NODE = 3 + 2 * n            # tree node i (1-based) = NODE + i - 1
        self.count = self.NODE + self.geo.size
        names = ["token", "seq", "csowner"]
        names += [f"go[{p}]" for p in range(1, n + 1)]
        names += [f"abortsig[{p}]" for p in range(1, n + 1)]
        names += [f"reg.node[{i}]" for i in range(1, self.geo.size + 1)]
        self.names = names

    def go(self, p: int) -> int:
        return self.GO + p - 1

    def sig(self, p: int) -> int:
        return self.SIG + p - 1

    def node(self, i: int) -> int:
        return self.NODE + i - 1

    def partition(self, var: int) -> int:
        """DSM home of a variable. Globals and the tree spine live with pid 1."""
        if var < self.GO:
            return 1
        if var < self.SIG:
            return var - self.GO + 1
        if var < self.NODE:
            return var - self.SIG + 1
        return self.geo.owner(var - self.NODE + 1)


class StepEffect:
    """What one step did: which line ran and the shared ops it performed.

    ``ops`` is a list of (kind, var, old, new) with kind 'r' (read, old==new
    is the value seen), 'w' (write), or 'c' (CAS; old==new means the value
    did not change).  A registry operation is carried symbolically in
    ``reg_write``/``reg_findmin`` and marked composite; ``expand_registry``
    in the rmr module turns it into node-level ops.
    """

    __slots__ = ("actor", "kind", "call", "line", "ops", "reg_write", "composite")

    def __init__(self, actor, kind, call, line, ops=(), reg_write=None, composite=False):
        self.actor = actor
        self.kind = kind
        self.call = call
        self.line = line
        self.ops = ops
        self.reg_write = reg_write      # (p, old_tok, new_tok) for write
        self.composite = composite


class ProcState:
    __slots__ = (
        "pc", "tok", "myseq", "peer", "mygo", "bit", "isaborting",
        "status", "abortsig", "spin", "latched", "origin",
        "passage", "attempt", "steps_in_attempt",
        "crashes_in_attempt", "aborts_in_attempt",
    )

    def __init__(self):
        self.pc = REM
        self.tok = self.myseq = self.peer = self.mygo = POISON
        self.bit = self.isaborting = POISON
        self.status = GOOD
        self.abortsig = False
        self.spin = 0           # 0: read go, 1: read abort signal
        self.latched = False    # abort signal observed at the spin this attempt
        self.origin = ORIGIN_NONE
        self.passage = 0
        self.attempt = 0
        self.steps_in_attempt = 0
        self.crashes_in_attempt = 0
        self.aborts_in_attempt = 0

    def clone(self) -> "ProcState":
        s = ProcState.__new__(ProcState)
        s.pc = self.pc
        s.tok = self.tok
        s.myseq = self.myseq
        s.peer = self.peer
        s.mygo = self.mygo
        s.bit = self.bit
        s.isaborting = self.isaborting
        s.status = self.status
        s.abortsig = self.abortsig
        s.spin = self.spin
        s.latched = self.latched
        s.origin = self.origin
        s.passage = self.passage
        s.attempt = self.attempt
        s.steps_in_attempt = self.steps_in_attempt
        s.crashes_in_attempt = self.crashes_in_attempt
        s.aborts_in_attempt = self.aborts_in_attempt
        return s

    def key(self):
        return (
            self.pc, self.tok, self.myseq, self.peer, self.mygo, self.bit,
            self.isaborting, self.status, self.abortsig, self.spin,
            self.latched, self.origin,
            self.crashes_in_attempt, self.aborts_in_attempt,
        )

    def in_attempt(self) -> bool:
        return self.pc != REM or self.status != GOOD


class Config:
    """Shared persistent memory plus all process states. Treated as immutable."""

    __slots__ = ("n", "token", "seq", "cs_bit", "cs_val", "go", "reg", "procs")

    def __init__(self, n):
        self.n = n
        self.token = 1
        self.seq = 1
        self.cs_bit = 0
        self.cs_val = 1
        self.go = [None] + [-1] * n
        self.reg = [None] + [INF] * n          # token component of cell p
        self.procs = [None] + [ProcState() for _ in range(n)]

    def clone_touching(self, p: int) -> "Config":
        c = Config.__new__(Config)
        c.n = self.n
        c.token = self.token
        c.seq = self.seq
        c.cs_bit = self.cs_bit
        c.cs_val = self.cs_val
        c.go = list(self.go)
        c.reg = list(self.reg)
        c.procs = list(self.procs)
        c.procs[p] = self.procs[p].clone()
        return c

    def csowner(self):
        return (self.cs_bit, self.cs_val)

    def registry_min(self):
        """Derived findmin over the registry cells ((pid, tok) order)."""
        best_t, best_p = INF, 1
        reg = self.reg
        for p in range(1, self.n + 1):
            t = reg[p]
            if t < best_t:
                best_t, best_p = t, p
        return (best_p, best_t)

    def key(self):
        return (
            self.token, self.seq, self.cs_bit, self.cs_val,
            tuple(self.go[1:]), tuple(self.reg[1:]),
            tuple(st.key() for st in self.procs[1:]),
        )


def initial_config(n: int) -> Config:
    """All processes in the remainder, token = seq = 1, CS free, cells empty."""
    if n < 1:
        raise ValueError("process count must be at least 1")
    return Config(n)


def beta_eligible(st: ProcState) -> bool:
    """May the environment raise the abort signal for this process now?"""
    sec = section_of(st.pc, st.origin)
    return sec == SEC_TRY or (sec == SEC_RECOVER and st.status == REC_TRY)


def enabled_actions(cfg: Config, p: int, crash_budget=None, abort_budget=0):
    """Actions process p (or its environment) can take from cfg.

    Budgets are per attempt: ``crash_budget=None`` leaves crashes always
    enabled outside the remainder; ``abort_budget`` counts how many times
    the abort signal may be raised per attempt (0 disables injection, None
    removes the limit).  Raising the signal is only offered while it is down
    and the process is in the try path or recovering from a crash in it.
    """
    st = cfg.procs[p]
    acts = []
    if st.pc == REM:
        if st.status == GOOD:
            acts.append((NORMAL, p, CALL_TRY))
        acts.append((NORMAL, p, CALL_RECOVER))
    elif st.pc == CS:
        acts.append((NORMAL, p, CALL_EXIT))
    else:
        acts.append((NORMAL, p, CALL_NONE))
    if st.pc != REM and (crash_budget is None or st.crashes_in_attempt < crash_budget):
        acts.append((CRASH, p, CALL_NONE))
    if (
        not st.abortsig
        and (abort_budget is None or st.aborts_in_attempt < abort_budget)
        and beta_eligible(st)
    ):
        acts.append((SET_ABORT, p, CALL_NONE))
    return acts


_PROM_CONT = (T6, E6, A3)       # resume point per caller block


def _start_attempt_or_passage(st: ProcState):
    st.passage += 1
    if st.status == GOOD:
        st.attempt += 1
        st.steps_in_attempt = 0
        st.crashes_in_attempt = 0
        st.aborts_in_attempt = 0


def _poison_registers(st: ProcState):
    st.tok = st.myseq = st.peer = st.mygo = POISON
    st.bit = st.isaborting = POISON
    st.spin = 0
    st.origin = ORIGIN_NONE


def _finish_to_rem(st: ProcState, auto_clear_abort: bool):
    """Normal return to the remainder: the attempt (if any) ends here."""
    st.pc = REM
    st.status = GOOD
    st.latched = False
    _poison_registers(st)
    if auto_clear_abort:
        st.abortsig = False


def _finish_to_cs(st: ProcState):
    st.pc = CS
    if st.origin == ORIGIN_RECOVER:
        st.status = GOOD
    _poison_registers(st)


def step(cfg: Config, action, mutation: str | None = None, layout: VarLayout | None = None,
         auto_clear_abort: bool = True):
    """Execute one action; returns (successor Config, StepEffect).

    ``mutation`` selects one of the seeded faults in ``MUTATIONS`` (or None
    for the faithful algorithm).  ``layout`` supplies variable ids for the
    effect record and is created on demand if omitted.
    """
    kind, p, call = action
    if layout is None:
        layout = VarLayout(cfg.n)
    st0 = cfg.procs[p]
    c = cfg.clone_touching(p)
    st = c.procs[p]
    line_at = st0.pc

    if kind == SET_ABORT:
        if st0.abortsig:
            raise ModelBug(f"set_abort({p}) while signal already up")
        st.abortsig = True
        st.aborts_in_attempt += 1
        eff = StepEffect(p, kind, CALL_NONE, line_at,
                         ops=[("w", layout.sig(p), False, True)])
        return c, eff

    if kind == CLEAR_ABORT:
        if not st0.abortsig:
            raise ModelBug(f"clear_abort({p}) while signal already down")
        st.abortsig = False
        eff = StepEffect(p, kind, CALL_NONE, line_at,
                         ops=[("w", layout.sig(p), True, False)])
        return c, eff

    if kind == CRASH:
        if st0.pc == REM:
            raise ModelBug(f"crash({p}) in the remainder")
        if st0.status == GOOD:
            st.status = CRASH_STATUS[section_of(st0.pc, st0.origin)]
        st.pc = REM
        _poison_registers(st)
        st.crashes_in_attempt += 1
        st.steps_in_attempt += 1
        return c, StepEffect(p, kind, CALL_NONE, line_at)

    if kind != NORMAL:
        raise ModelBug(f"unknown action kind {kind}")

    # Method invocation out of the remainder / critical section.
    if call == CALL_TRY:
        if st0.pc != REM or st0.status != GOOD:
            raise ModelBug(f"try invoked by {p} outside REM/GOOD")
        _start_attempt_or_passage(st)
        st.steps_in_attempt += 1
        st.pc = T1
        return c, StepEffect(p, kind, call, line_at)
    if call == CALL_RECOVER:
        if st0.pc != REM:
            raise ModelBug(f"recover invoked by {p} outside REM")
        _start_attempt_or_passage(st)
        st.steps_in_attempt += 1
        st.pc = REC1
        return c, StepEffect(p, kind, call, line_at)
    if call == CALL_EXIT:
        if st0.pc != CS:
            raise ModelBug(f"exit invoked by {p} outside CS")
        st.steps_in_attempt += 1
        st.pc = E1
        return c, StepEffect(p, kind, call, line_at)

    # Execute the instruction st0.pc points at.
    pc = st0.pc
    if pc in (REM, CS):
        raise ModelBug(f"process {p} has no plain step at {LINE_NAMES[pc]}")
    st.steps_in_attempt += 1
    ops = []
    eff = StepEffect(p, kind, CALL_NONE, pc, ops)

    if pc == T1:
        st.tok = c.token
        ops.append(("r", layout.TOKEN, c.token, c.token))
        st.pc = T2
    elif pc == T2:
        t = _reg(st0.tok, "tok")
        if c.token == t:
            c.token = t + 1
            ops.append(("c", layout.TOKEN, t, t + 1))
        else:
            ops.append(("c", layout.TOKEN, c.token, c.token))
        st.pc = T3
    elif pc == T3:
        t = _reg(st0.tok, "tok")
        ops.append(("w", layout.go(p), c.go[p], t))
        c.go[p] = t
        st.pc = T4
    elif pc == T4:
        t = _reg(st0.tok, "tok")
        eff.reg_write = (p, c.reg[p], t)
        eff.composite = True
        c.reg[p] = t
        st.pc = T5
    elif pc == T5:
        st.isaborting = False
        st.pc = T5P1
    elif pc == T6:
        if st0.spin == 0:
            v = c.go[p]
            ops.append(("r", layout.go(p), v, v))
            if v == 0:
                st.pc = T7
                st.spin = 0
            else:
                st.spin = 1
        else:
            v = st0.abortsig
            ops.append(("r", layout.sig(p), v, v))
            st.spin = 0
            if v:
                st.latched = True
                st.pc = T7
    elif pc == T7:
        v = c.go[p]
        ops.append(("r", layout.go(p), v, v))
        if v == 0:
            _finish_to_cs(st)
        else:
            st.pc = T8
    elif pc == T8:
        st.origin = ORIGIN_TRY
        st.pc = A1
    elif pc == E1:
        eff.reg_write = (p, c.reg[p], INF)
        eff.composite = True
        c.reg[p] = INF
        st.pc = E2
    elif pc == E2:
        st.myseq = c.seq
        ops.append(("r", layout.SEQ, c.seq, c.seq))
        st.pc = E3
    elif pc == E3:
        if mutation == "exit_skips_seq_bump":
            st.pc = E4
        else:
            s = _reg(st0.myseq, "myseq")
            ops.append(("w", layout.SEQ, c.seq, s + 1))
            c.seq = s + 1
            st.pc = E4
    elif pc == E4:
        s = _reg(st0.myseq, "myseq")
        newv = s if mutation == "exit_skips_seq_bump" else s + 1
        ops.append(("w", layout.CSOWNER, c.csowner(), (0, newv)))
        c.cs_bit, c.cs_val = 0, newv
        st.pc = E5
    elif pc == E5:
        st.isaborting = False
        st.pc = E5P1
    elif pc == E6:
        ops.append(("w", layout.go(p), c.go[p], -1))
        c.go[p] = -1
        _finish_to_rem(st, auto_clear_abort)
    elif pc == REC1:
        v = c.go[p]
        ops.append(("r", layout.go(p), v, v))
        if v == -1:
            _finish_to_rem(st, auto_clear_abort)
        else:
            st.pc = REC2
    elif pc == REC2:
        st.origin = ORIGIN_RECOVER
        st.pc = A1
    elif pc == A1:
        eff.reg_write = (p, c.reg[p], INF)
        eff.composite = True
        c.reg[p] = INF
        st.pc = A2
    elif pc == A2:
        if mutation == "abort_skips_promote":
            st.pc = A3
        else:
            st.isaborting = True
            st.pc = A2P1
    elif pc == A3:
        v = c.csowner()
        ops.append(("r", layout.CSOWNER, v, v))
        if v == (1, p):
            _finish_to_cs(st)
        else:
            st.pc = A4
    elif pc == A4:
        ops.append(("w", layout.go(p), c.go[p], -1))
        c.go[p] = -1
        st.pc = A5
    elif pc == A5:
        _finish_to_rem(st, auto_clear_abort)
    elif pc in PROM_ALL:
        _step_promote(c, st, st0, p, pc, ops, eff, layout, mutation)
    else:
        raise ModelBug(f"no semantics for pc {pc}")

    return c, eff


def _step_promote(c, st, st0, p, pc, ops, eff, layout, mutation):
    blk = (pc - T5P1) // 6          # 0: try, 1: exit, 2: abort caller
    k = (pc - T5P1) % 6 + 1
    base = T5P1 + 6 * blk
    cont = _PROM_CONT[blk]

    def ret():
        st.pc = cont
        if cont == T6:
            st.spin = 0

    if k == 1:
        v = c.csowner()
        ops.append(("r", layout.CSOWNER, v, v))
        st.bit, st.myseq = v
        if v[0] == 1:
            st.peer = v[1]
            st.pc = base + 3        # P4
        else:
            st.pc = base + 1        # P2
    elif k == 2:
        q, t = c.registry_min()
        ops.append(("r", layout.node(1), (q, t), (q, t)))
        st.peer, st.tok = q, t
        if t == INF and _reg(st0.isaborting, "isaborting"):
            st.peer = p
            st.pc = base + 2        # P3
        elif t == INF:
            ret()
        else:
            st.pc = base + 2        # P3
    elif k == 3:
        expect = (0, _reg(st0.myseq, "myseq"))
        target = (1, _reg(st0.peer, "peer"))
        have = c.csowner()
        if have == expect:
            ops.append(("c", layout.CSOWNER, have, target))
            c.cs_bit, c.cs_val = target
            st.pc = base + 3        # P4
        else:
            ops.append(("c", layout.CSOWNER, have, have))
            ret()
    elif k == 4:
        peer = _reg(st0.peer, "peer")
        v = c.go[peer]
        ops.append(("r", layout.go(peer), v, v))
        st.mygo = v
        if v in (-1, 0):
            ret()
        else:
            st.pc = base + 4        # P5
    elif k == 5:
        peer = _reg(st0.peer, "peer")
        v = c.csowner()
        ops.append(("r", layout.CSOWNER, v, v))
        if v != (1, peer):
            ret()
        else:
            st.pc = base + 5        # P6
    else:  # k == 6
        peer = _reg(st0.peer, "peer")
        mygo = _reg(st0.mygo, "mygo")
        have = c.go[peer]
        if mutation == "blind_release":
            ops.append(("w", layout.go(peer), have, 0))
            c.go[peer] = 0
        elif have == mygo:
            ops.append(("c", layout.go(peer), have, 0))
            c.go[peer] = 0
        else:
            ops.append(("c", layout.go(peer), have, have))
        ret()
