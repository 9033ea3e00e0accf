"""Thread-callable lock over word atomics, same algorithm as the model.

Shared state lives in a ``LockInstance``: token and sequence words, the CS
owner packed into one word (tag bit + payload), per-process go cells and
abort-signal flags, and the tournament-tree registry packed as (token, pid)
words with an all-ones token spelling infinity.  Every cell access is a
single atomic operation (a mutex serializes the compare-and-swap sequences;
plain loads and stores take the same mutex for uniformity).

A ``Session`` binds one pid to one thread at a time and carries the crash
instrumentation: a crash plan may fire at any labeled point (every line of
the algorithm, plus between registry node updates), which abandons the
method mid-flight exactly like a crash in the model -- locals vanish with
the unwound frame, the recovery status is recorded, and all instance state
survives.  The harness then calls ``recover`` on the session.

Word widths are checked, not wrapped: exhausting the token space raises.
"""

from __future__ import annotations

import threading
import time

from .lines import (
    CRASH_STATUS, GOOD, REC_CS, REC_EXIT, REC_REM, REC_TRY,
    SEC_EXIT, SEC_RECOVER, SEC_TRY, STATUS_NAMES,
)
from .minarray import INF, TournamentMinArray, pair_key
from .model import VarLayout

IN_CS = "IN_CS"
IN_REM = "IN_REM"
CRASHED = "CRASHED"

_WORD_BITS = 62


class LockOverflow(RuntimeError):
    """A counter outgrew its word packing; refusing to wrap."""


class ProtocolError(RuntimeError):
    """Method called out of protocol order for this session."""


class CrashPoint(Exception):
    """Internal signal: the armed crash plan fired at an injection point."""


class Session:
    """Per-pid handle; one live session per pid, one thread at a time."""

    def __init__(self, lock: "LockInstance", pid: int):
        if not 1 <= pid <= lock.n:
            raise ValueError(f"pid {pid} out of range 1..{lock.n}")
        self.lock = lock
        self.pid = pid
        self.status = GOOD
        self.where = "rem"
        self.crash_plan = None      # callable(label) -> bool
        self.on_spin = None         # callable(spin_count), may raise CrashPoint
        self.crash_points_hit = 0

    def _point(self, label: str):
        if self.crash_plan is not None and self.crash_plan(label):
            self.crash_points_hit += 1
            raise CrashPoint(label)

    def _crashed(self, section: int):
        if self.status == GOOD:
            self.status = CRASH_STATUS[section]
        self.where = "rem"
        return CRASHED

    def crash_in_cs(self):
        """Harness-injected crash while logically inside the critical section."""
        if self.where != "cs":
            raise ProtocolError("crash_in_cs outside the CS")
        if self.status == GOOD:
            self.status = REC_CS
        self.where = "rem"


def crash_once_at(label: str):
    """Crash plan firing at the first occurrence of one labeled point."""
    fired = [False]

    def plan(point):
        if not fired[0] and point == label:
            fired[0] = True
            return True
        return False

    return plan


class _AtomicTree(TournamentMinArray):
    """Registry tree over the instance's packed words."""

    def __init__(self, inst: "LockInstance"):
        self.geo = inst.layout.geo
        self.inst = inst
        self.cell_hook = None
        pairs = [None] * (self.geo.size + 1)
        for q in range(1, self.geo.m + 1):
            pairs[self.geo.m + q - 1] = (q, INF)
        for i in range(self.geo.m - 1, 0, -1):
            pairs[i] = min(pairs[2 * i], pairs[2 * i + 1], key=pair_key)
        self.words = [0] + [inst._pack_pair(v) for v in pairs[1:]]

    def _load(self, p, node):
        inst = self.inst
        with inst._lk:
            return inst._unpack_pair(self.words[node])

    def _store(self, p, node, v):
        inst = self.inst
        with inst._lk:
            old = inst._unpack_pair(self.words[node])
            self.words[node] = inst._pack_pair(v)
        inst._rec(p, "w", inst.layout.node(node), old, v)

    def _cas(self, p, node, expect, new):
        inst = self.inst
        with inst._lk:
            old = inst._unpack_pair(self.words[node])
            ok = old == expect
            if ok:
                self.words[node] = inst._pack_pair(new)
        inst._rec(p, "c", inst.layout.node(node), old, new if ok else old)
        return ok

    def findmin(self, pid=0):
        v = self._load(pid, 1)
        self.inst._rec(pid, "r", self.inst.layout.node(1), v, v)
        return v


class LockInstance:
    """One lock for a fixed set of pids 1..n."""

    def __init__(self, n: int, recorder=None):
        if n < 1:
            raise ValueError("capacity must be at least 1")
        if n >= (1 << 16):
            raise ValueError("pid packing supports at most 2^16 - 1 processes")
        self.n = n
        self.layout = VarLayout(n)
        self._pid_bits = 16
        self._inf_tok = (1 << (_WORD_BITS - self._pid_bits)) - 1
        self._lk = threading.Lock()
        self.recorder = recorder
        self._token = 1
        self._seq = 1
        self._csowner = self._pack_owner(0, 1)
        self._go = [0] + [-1] * n
        self._sig = [False] * (n + 1)
        self.tree = _AtomicTree(self)

    # -- packing -----------------------------------------------------------
    def _pack_owner(self, bit, val):
        if val >= (1 << _WORD_BITS):
            raise LockOverflow("csowner payload exhausted")
        return (bit << _WORD_BITS) | val

    def _unpack_owner(self, w):
        return (w >> _WORD_BITS, w & ((1 << _WORD_BITS) - 1))

    def _pack_pair(self, pair):
        pid, tok = pair
        t = self._inf_tok if tok == INF else tok
        if t >= self._inf_tok and tok != INF:
            raise LockOverflow("token too large for node packing")
        return (t << self._pid_bits) | pid

    def _unpack_pair(self, w):
        pid = w & ((1 << self._pid_bits) - 1)
        t = w >> self._pid_bits
        return (pid, INF if t == self._inf_tok else t)

    def _rec(self, pid, kind, var, old, new):
        if self.recorder is not None:
            self.recorder.append((pid, kind, var, old, new))

    # -- word atomics --------------------------------------------------------
    def _load_token(self, pid):
        with self._lk:
            v = self._token
        self._rec(pid, "r", self.layout.TOKEN, v, v)
        return v

    def _cas_token(self, pid, expect, new):
        if new >= self._inf_tok:
            raise LockOverflow("token space exhausted")
        with self._lk:
            old = self._token
            ok = old == expect
            if ok:
                self._token = new
        self._rec(pid, "c", self.layout.TOKEN, old, new if ok else old)
        return ok

    def _load_seq(self, pid):
        with self._lk:
            v = self._seq
        self._rec(pid, "r", self.layout.SEQ, v, v)
        return v

    def _store_seq(self, pid, v):
        if v >= (1 << _WORD_BITS):
            raise LockOverflow("seq space exhausted")
        with self._lk:
            old = self._seq
            self._seq = v
        self._rec(pid, "w", self.layout.SEQ, old, v)

    def _load_csowner(self, pid):
        with self._lk:
            w = self._csowner
        v = self._unpack_owner(w)
        self._rec(pid, "r", self.layout.CSOWNER, v, v)
        return v

    def _store_csowner(self, pid, pair):
        w = self._pack_owner(*pair)
        with self._lk:
            old = self._unpack_owner(self._csowner)
            self._csowner = w
        self._rec(pid, "w", self.layout.CSOWNER, old, pair)

    def _cas_csowner(self, pid, expect, new):
        we = self._pack_owner(*expect)
        wn = self._pack_owner(*new)
        with self._lk:
            old_w = self._csowner
            ok = old_w == we
            if ok:
                self._csowner = wn
        old = self._unpack_owner(old_w)
        self._rec(pid, "c", self.layout.CSOWNER, old, new if ok else old)
        return ok

    def _load_go(self, pid, q):
        with self._lk:
            v = self._go[q]
        self._rec(pid, "r", self.layout.go(q), v, v)
        return v

    def _store_go(self, pid, q, v):
        with self._lk:
            old = self._go[q]
            self._go[q] = v
        self._rec(pid, "w", self.layout.go(q), old, v)

    def _cas_go(self, pid, q, expect, new):
        with self._lk:
            old = self._go[q]
            ok = old == expect
            if ok:
                self._go[q] = new
        self._rec(pid, "c", self.layout.go(q), old, new if ok else old)
        return ok

    def _load_sig(self, pid, q):
        with self._lk:
            v = self._sig[q]
        self._rec(pid, "r", self.layout.sig(q), v, v)
        return v

    def set_abort(self, pid: int, value: bool = True):
        """Environment signal: ask pid to abort its wait."""
        with self._lk:
            old = self._sig[pid]
            self._sig[pid] = value
        self._rec(0, "w", self.layout.sig(pid), old, value)

    # -- registry ------------------------------------------------------------
    def _reg_write(self, s: Session, pair, label: str):
        cur = self.tree.write_cursor(s.pid, pair)
        k = 0
        while not cur.done:
            kind, _node = cur.peek()
            if kind in ("store", "cas"):
                s._point(f"{label}#{k}")
                k += 1
            cur.step()

    # -- the algorithm -------------------------------------------------------
    def _promote(self, s: Session, isaborting: bool, prefix: str):
        s._point(prefix + "P1")
        bit, ms = self._load_csowner(s.pid)
        if bit == 1:
            peer = ms
        else:
            s._point(prefix + "P2")
            peer, tok = self.tree.findmin(s.pid)
            if tok == INF:
                if not isaborting:
                    return
                peer = s.pid
            s._point(prefix + "P3")
            if not self._cas_csowner(s.pid, (0, ms), (1, peer)):
                return
        s._point(prefix + "P4")
        g = self._load_go(s.pid, peer)
        if g == -1 or g == 0:
            return
        s._point(prefix + "P5")
        if self._load_csowner(s.pid) != (1, peer):
            return
        s._point(prefix + "P6")
        self._cas_go(s.pid, peer, g, 0)

    def _abort(self, s: Session, prefix: str = ""):
        s._point("A1")
        self._reg_write(s, (s.pid, INF), "A1")
        s._point("A2")
        self._promote(s, True, "A2::")
        s._point("A3")
        if self._load_csowner(s.pid) == (1, s.pid):
            return IN_CS
        s._point("A4")
        self._store_go(s.pid, s.pid, -1)
        s._point("A5")
        return IN_REM

    def try_acquire(self, s: Session):
        """The try method: returns IN_CS, IN_REM (aborted), or CRASHED."""
        if s.where != "rem" or s.status != GOOD:
            raise ProtocolError(
                f"try_acquire from where={s.where} status={STATUS_NAMES[s.status]}")
        try:
            s._point("T1")
            tok = self._load_token(s.pid)
            s._point("T2")
            self._cas_token(s.pid, tok, tok + 1)
            s._point("T3")
            self._store_go(s.pid, s.pid, tok)
            self._reg_write(s, (s.pid, tok), "T4")
            s._point("T5")
            self._promote(s, False, "T5::")
            spins = 0
            while True:
                s._point("T6")
                if self._load_go(s.pid, s.pid) == 0:
                    break
                s._point("T6")
                if self._load_sig(s.pid, s.pid):
                    break
                spins += 1
                if s.on_spin is not None:
                    s.on_spin(spins)
                if spins & 0x3F == 0:
                    time.sleep(0)
            s._point("T7")
            if self._load_go(s.pid, s.pid) == 0:
                s.where = "cs"
                return IN_CS
            s._point("T8")
            res = self._abort(s)
            s.where = "cs" if res == IN_CS else "rem"
            return res
        except CrashPoint:
            return s._crashed(SEC_TRY)

    def release(self, s: Session):
        """The exit method; returns None normally, CRASHED if a plan fired."""
        if s.where != "cs":
            raise ProtocolError(f"release from where={s.where}")
        s.where = "rem"
        try:
            s._point("E1")
            self._reg_write(s, (s.pid, INF), "E1")
            s._point("E2")
            ms = self._load_seq(s.pid)
            s._point("E3")
            self._store_seq(s.pid, ms + 1)
            s._point("E4")
            self._store_csowner(s.pid, (0, ms + 1))
            s._point("E5")
            self._promote(s, False, "E5::")
            s._point("E6")
            self._store_go(s.pid, s.pid, -1)
            return None
        except CrashPoint:
            return s._crashed(SEC_EXIT)

    def recover(self, s: Session):
        """The recover method; returns IN_CS, IN_REM, or CRASHED."""
        if s.where != "rem":
            raise ProtocolError(f"recover from where={s.where}")
        try:
            s._point("REC1")
            if self._load_go(s.pid, s.pid) == -1:
                res = IN_REM
            else:
                s._point("REC2")
                res = self._abort(s)
            s.status = GOOD
            s.where = "cs" if res == IN_CS else "rem"
            return res
        except CrashPoint:
            return s._crashed(SEC_RECOVER)


def crash_point_labels(n: int):
    """Every injection point label for an n-process instance."""
    geo = VarLayout(n).geo
    regops = geo.write_op_count()
    labels = ["T1", "T2", "T3"]
    labels += [f"T4#{k}" for k in range(regops)]
    labels += [f"T5::P{i}" for i in range(1, 7)]
    labels += ["T6", "T7", "T8"]
    labels += ["A1"] + [f"A1#{k}" for k in range(regops)]
    labels += [f"A2::P{i}" for i in range(1, 7)] + ["A2", "A3", "A4", "A5"]
    labels += ["E1"] + [f"E1#{k}" for k in range(regops)]
    labels += ["E2", "E3", "E4", "E5", "E6"]
    labels += [f"E5::P{i}" for i in range(1, 7)]
    labels += ["REC1", "REC2"]
    return labels


def instrumented_solo_ops(n: int, pid: int | None = None):
    """Record one uncontended acquire+release; returns (ops, result)."""
    rec = []
    inst = LockInstance(n, recorder=rec)
    s = Session(inst, pid if pid is not None else n)
    res = inst.try_acquire(s)
    if res == IN_CS:
        inst.release(s)
    return rec, res
