"""The 13-condition state invariant of the lock, plus a fast checking path.

``check_invariant`` is the declarative reference: one small function per
condition, each returning the processes (and a human-readable reason) for
which the condition fails.  ``invariant_ok`` is a hand-flattened twin used
in exploration hot loops; it returns 0 when every condition holds or the
number of a failing condition.  The two are cross-checked against each
other in the test suite on both random and explored configurations.

A poisoned register compares unequal and unordered to everything, so any
condition that would need its value simply evaluates false and is reported;
reachable configurations never get there.

Range conventions: a pc interval over top-level lines includes the promote
block of any call site the interval covers (e.g. T5..T7 includes T5::P1-P6).
The sets in ``lines`` encode this once.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .lines import *  # noqa: F401,F403
from .minarray import INF


@dataclass
class Violation:
    kind: str
    pid: int | None = None
    detail: str = ""
    step: int | None = None
    trace: list | None = field(default=None, repr=False)

    def to_json(self):
        d = {"kind": self.kind, "pid": self.pid, "detail": self.detail,
             "step": self.step}
        if self.trace is not None:
            d["trace"] = self.trace
        return d


# Lines allowed to write each shared variable; tests assert explored traces
# never see writes outside these sets.
VAR_WRITERS = {
    "token": frozenset({T2}),
    "seq": frozenset({E3}),
    "csowner": frozenset({E4}) | PROM_K[3],
    "go": frozenset({T3, E6, A4}) | PROM_K[6],
    "registry": frozenset({T4, E1, A1}),
}

_P23 = PROM_K[2] | PROM_K[3]
_P56 = PROM_K[5] | PROM_K[6]


def _c1(cfg, out):
    if cfg.token < 1:
        out.append(Violation("Cond1", None, f"token={cfg.token} < 1"))


def _c2(cfg, out):
    bit, val = cfg.cs_bit, cfg.cs_val
    if not ((bit == 0 and val == cfg.seq) or (bit == 1 and 1 <= val <= cfg.n)):
        out.append(Violation("Cond2", None,
                             f"csowner=({bit},{val}) with seq={cfg.seq}"))


def _c5(cfg, out):
    token = cfg.token
    for p in range(1, cfg.n + 1):
        st, g = cfg.procs[p], cfg.go[p]
        pc = st.pc
        bad = None
        if not (-1 <= g < token):
            bad = f"go[{p}]={g} outside [-1, token)"
        elif pc == T4 and g != st.tok:
            bad = f"at T4 but go[{p}]={g} != tok={st.tok}"
        elif pc in R_T5_T7 and not (g == 0 or g == st.tok):
            bad = f"at {LINE_NAMES[pc]} but go[{p}]={g} not in {{0, tok={st.tok}}}"
        elif pc in C5_NONNEG and g == -1:
            bad = f"at {LINE_NAMES[pc]} but go[{p}]=-1"
        elif (pc in C5_MINUS1
              or (pc in (REM, REC1) and st.status in (GOOD, REC_REM))) and g != -1:
            bad = f"at {LINE_NAMES[pc]} (status {STATUS_NAMES[st.status]}) but go[{p}]={g}"
        if bad:
            out.append(Violation("Cond5", p, bad))


def _c6(cfg, out):
    token = cfg.token
    for p in range(1, cfg.n + 1):
        st, r = cfg.procs[p], cfg.reg[p]
        pc = st.pc
        bad = None
        if not (r == INF or 1 <= r <= token - 1):
            bad = f"registry[{p}]={r} outside [1, token-1] u {{inf}}"
        elif pc in R_T5_T7 and r != st.tok:
            bad = f"at {LINE_NAMES[pc]} but registry[{p}]={r} != tok={st.tok}"
        elif (pc in C6_INF or cfg.go[p] == -1) and r != INF:
            bad = f"at {LINE_NAMES[pc]} / go={cfg.go[p]} but registry[{p}]={r}"
        if bad:
            out.append(Violation("Cond6", p, bad))


def _c7(cfg, out):
    owner = cfg.cs_val if cfg.cs_bit == 1 else 0
    for p in range(1, cfg.n + 1):
        st, g = cfg.procs[p], cfg.go[p]
        pc = st.pc
        must_own = (pc in R_T5_T7 and g == 0) or pc in C7_OWNER or st.status == REC_CS
        if must_own and owner != p:
            out.append(Violation("Cond7", p,
                                 f"at {LINE_NAMES[pc]} go={g} status={STATUS_NAMES[st.status]} "
                                 f"but csowner={cfg.csowner()}"))
            continue
        if (pc in C7_NOT_OWNER or g == -1) and owner == p:
            out.append(Violation("Cond7", p,
                                 f"at {LINE_NAMES[pc]} go={g} but csowner=(1,{p})"))


def _c8(cfg, out):
    token, seq, n = cfg.token, cfg.seq, cfg.n
    for p in range(1, n + 1):
        st = cfg.procs[p]
        pc = st.pc
        bad = None
        if pc == T2 and not (1 <= st.tok <= token):
            bad = f"tok={st.tok} at T2 with token={token}"
        elif pc in C8_TOK and not (1 <= st.tok < token):
            bad = f"tok={st.tok} at {LINE_NAMES[pc]} with token={token}"
        elif pc == E3 and st.myseq != seq:
            bad = f"myseq={st.myseq} at E3 with seq={seq}"
        elif pc == E4 and st.myseq != seq - 1:
            bad = f"myseq={st.myseq} at E4 with seq={seq}"
        elif pc in PROM_T5 | PROM_E5 and st.isaborting is not False:
            bad = f"isaborting={st.isaborting} in a non-aborting promote"
        elif pc in PROM_A2 and st.isaborting is not True:
            bad = f"isaborting={st.isaborting} in the aborting promote"
        elif prom_index(pc) >= 3 and not (1 <= st.peer <= n):
            bad = f"peer={st.peer} at {LINE_NAMES[pc]}"
        elif pc in C8_GOOD and st.status != GOOD:
            bad = f"status={STATUS_NAMES[st.status]} at {LINE_NAMES[pc]}"
        if bad:
            out.append(Violation("Cond8", p, bad))


def _c9(cfg, out):
    for p in range(1, cfg.n + 1):
        st = cfg.procs[p]
        if st.pc == T7 and not (cfg.go[p] == 0 or st.latched):
            out.append(Violation("Cond9", p, f"at T7 with go={cfg.go[p]} and no abort latched"))
        elif st.pc == T8 and not st.latched:
            out.append(Violation("Cond9", p, "at T8 without a latched abort"))


def _c10(cfg, out):
    for p in range(1, cfg.n + 1):
        st = cfg.procs[p]
        if st.pc not in _P23:
            continue
        if not (st.myseq <= cfg.seq):
            out.append(Violation("Cond10", p, f"myseq={st.myseq} > seq={cfg.seq}"))
            continue
        for q in range(1, cfg.n + 1):
            sq = cfg.procs[q]
            if sq.pc in (E3, E4) and not (st.myseq <= sq.myseq):
                out.append(Violation("Cond10", p,
                                     f"myseq={st.myseq} > myseq[{q}]={sq.myseq} at {LINE_NAMES[sq.pc]}"))
                break


def _c11(cfg, out):
    bit, val = cfg.cs_bit, cfg.cs_val
    for p in range(1, cfg.n + 1):
        st = cfg.procs[p]
        k = prom_index(st.pc)
        if k not in (2, 3) or not (bit == 0 and val == st.myseq):
            continue
        if k == 2:
            for q in range(1, cfg.n + 1):
                if cfg.reg[q] == INF:
                    continue
                sq = cfg.procs[q]
                if not (sq.pc in C11_A or (sq.pc in (REM, REC1) and cfg.go[q] != -1)):
                    out.append(Violation("Cond11", p,
                                         f"{q} registered but at {LINE_NAMES[sq.pc]} go={cfg.go[q]}"))
                    break
        else:
            peer = st.peer
            if not (isinstance(peer, int) and 1 <= peer <= cfg.n):
                out.append(Violation("Cond11", p, f"peer={peer} invalid at P3"))
                continue
            sq = cfg.procs[peer]
            ok = (
                sq.pc in C11_B
                or (sq.pc in (A2P2, A2P3) and sq.myseq == st.myseq)
                or (sq.pc in (REM, REC1) and cfg.go[peer] != -1)
            )
            if not ok:
                out.append(Violation("Cond11", p,
                                     f"peer {peer} at {LINE_NAMES[sq.pc]} go={cfg.go[peer]} "
                                     f"myseq={sq.myseq} vs {st.myseq}"))


def _c12(cfg, out):
    for p in range(1, cfg.n + 1):
        st = cfg.procs[p]
        if st.pc in _P56 and not (1 <= st.mygo < cfg.token):
            out.append(Violation("Cond12", p,
                                 f"mygo={st.mygo} at {LINE_NAMES[st.pc]} with token={cfg.token}"))


def _c13(cfg, out):
    owner = cfg.cs_val if cfg.cs_bit == 1 else 0
    for p in range(1, cfg.n + 1):
        st = cfg.procs[p]
        if st.pc not in PROM_K[6]:
            continue
        peer = st.peer
        if not (isinstance(peer, int) and 1 <= peer <= cfg.n):
            out.append(Violation("Cond13", p, f"peer={peer} invalid at P6"))
            continue
        sq = cfg.procs[peer]
        bad = None
        if sq.pc in (T2, T3) and not (1 <= st.mygo < sq.tok):
            bad = f"mygo={st.mygo} vs tok[{peer}]={sq.tok} at {LINE_NAMES[sq.pc]}"
        elif sq.pc == T4 and not (1 <= st.mygo < cfg.go[peer]):
            bad = f"mygo={st.mygo} vs go[{peer}]={cfg.go[peer]} at T4"
        elif sq.pc in R_T5_T7 and st.mygo == cfg.go[peer] and owner != peer:
            bad = f"stale release armed: mygo==go[{peer}]=={st.mygo} but csowner={cfg.csowner()}"
        if bad:
            out.append(Violation("Cond13", p, bad))


def _c3(cfg, out):
    if all(cfg.reg[q] == INF for q in range(1, cfg.n + 1)):
        return
    if cfg.cs_bit == 1 and 1 <= cfg.cs_val <= cfg.n:
        return
    bit, val = cfg.cs_bit, cfg.cs_val
    for q in range(1, cfg.n + 1):
        sq = cfg.procs[q]
        if sq.pc in C3_HELPERS:
            return
        if sq.pc in (REM, REC1) and cfg.go[q] != -1:
            return
        if prom_index(sq.pc) in (2, 3) and bit == 0 and val == sq.myseq:
            return
    out.append(Violation("Cond3", None,
                         "registry nonempty but no owner and no process positioned to promote"))


def _c4(cfg, out):
    if cfg.cs_bit != 1:
        return
    p = cfg.cs_val
    if not (1 <= p <= cfg.n) or cfg.go[p] == 0:
        return
    gp = cfg.go[p]
    for q in range(1, cfg.n + 1):
        sq = cfg.procs[q]
        if sq.pc in C4_HELPERS:
            return
        k = prom_index(sq.pc)
        if k == 4 and sq.peer == p:
            return
        if k in (5, 6) and sq.peer == p and sq.mygo == gp:
            return
        if sq.pc in (REM, REC1) and cfg.go[q] != -1:
            return
    out.append(Violation("Cond4", p,
                         f"csowner=(1,{p}) with go[{p}]={gp} but nobody positioned to release"))


_CONDS = (_c1, _c2, _c3, _c4, _c5, _c6, _c7, _c8, _c9, _c10, _c11, _c12, _c13)


def check_invariant(cfg) -> list[Violation]:
    """Evaluate all 13 conditions; empty result means the invariant holds."""
    out = []
    for f in _CONDS:
        f(cfg, out)
    return out


def mutex_ok(cfg) -> bool:
    return sum(1 for p in range(1, cfg.n + 1) if cfg.procs[p].pc == CS) <= 1


def invariant_ok(cfg) -> int:
    """Fast path: 0 if the invariant holds, else the number of a failing condition."""
    n = cfg.n
    token = cfg.token
    seq = cfg.seq
    bit = cfg.cs_bit
    val = cfg.cs_val
    go = cfg.go
    reg = cfg.reg
    procs = cfg.procs

    if token < 1:
        return 1
    if bit == 0:
        if val != seq:
            return 2
        owner = 0
    else:
        if not (1 <= val <= n):
            return 2
        owner = val

    any_registered = False
    for p in range(1, n + 1):
        st = procs[p]
        pc = st.pc
        g = go[p]
        r = reg[p]
        if g < -1 or g >= token:
            return 5
        if r != INF:
            any_registered = True
            if not (1 <= r <= token - 1):
                return 6
        if st.status == REC_CS and owner != p:
            return 7
        if g == -1:
            if r != INF:
                return 6
            if owner == p:
                return 7
            if pc in C5_NONNEG:
                return 5

        if pc == REM or pc == REC1:
            if g != -1 and (st.status == GOOD or st.status == REC_REM):
                return 5
        elif pc <= T3:  # T1, T2, T3
            if g != -1:
                return 5
            if st.status != GOOD:
                return 8
            if pc == T2:
                if not (1 <= st.tok <= token):
                    return 8
            elif pc == T3 and not (1 <= st.tok < token):
                return 8
        elif pc == T4:
            if g != st.tok:
                return 5
            if r != INF:
                return 6
            if owner == p:
                return 7
            if st.status != GOOD or not (1 <= st.tok < token):
                return 8
        elif pc <= T8:  # T5, T6, T7, T8
            if pc == T8:
                if not st.latched:
                    return 9
            else:
                if g != 0 and g != st.tok:
                    return 5
                if r != st.tok:
                    return 6
                if g == 0 and owner != p:
                    return 7
                if not (1 <= st.tok < token):
                    return 8
                if pc == T7 and g != 0 and not st.latched:
                    return 9
            if st.status != GOOD:
                return 8
        elif pc <= E4:  # CS, E1..E4
            if owner != p:
                return 7
            if st.status != GOOD:
                return 8
            if pc == E3 and st.myseq != seq:
                return 8
            if pc == E4 and st.myseq != seq - 1:
                return 8
            if pc >= E2 and r != INF:
                return 6
        elif pc <= E6:  # E5, E6
            if owner == p:
                return 7
            if r != INF:
                return 6
            if st.status != GOOD:
                return 8
        elif pc <= A5:  # REC2, A1..A5
            if pc == A5:
                if g != -1:
                    return 5
            elif pc >= A2:
                if r != INF:
                    return 6
                if pc == A4 and owner == p:
                    return 7
        else:  # promote lines
            blk = (pc - T5P1) // 6
            k = (pc - T5P1) % 6 + 1
            if blk == 0:
                if g != 0 and g != st.tok:
                    return 5
                if r != st.tok:
                    return 6
                if g == 0 and owner != p:
                    return 7
                if not (1 <= st.tok < token) or st.status != GOOD:
                    return 8
                if st.isaborting is not False:
                    return 8
            elif blk == 1:
                if owner == p:
                    return 7
                if r != INF:
                    return 6
                if st.status != GOOD or st.isaborting is not False:
                    return 8
            else:
                if r != INF:
                    return 6
                if st.isaborting is not True:
                    return 8
            if k >= 3 and not (isinstance(st.peer, int) and 1 <= st.peer <= n):
                return 8
            if k == 2 or k == 3:
                ms = st.myseq
                if not (ms <= seq):
                    return 10
                own_free = bit == 0 and val == ms
                for q in range(1, n + 1):
                    sq = procs[q]
                    if (sq.pc == E3 or sq.pc == E4) and not (ms <= sq.myseq):
                        return 10
                if own_free:
                    if k == 2:
                        for q in range(1, n + 1):
                            if reg[q] == INF:
                                continue
                            sq = procs[q]
                            if sq.pc in C11_A:
                                continue
                            if (sq.pc == REM or sq.pc == REC1) and go[q] != -1:
                                continue
                            return 11
                    else:
                        sq = procs[st.peer]
                        if not (
                            sq.pc in C11_B
                            or (sq.pc in (A2P2, A2P3) and sq.myseq == ms)
                            or ((sq.pc == REM or sq.pc == REC1) and go[st.peer] != -1)
                        ):
                            return 11
            if k >= 5:
                if not (1 <= st.mygo < token):
                    return 12
                if k == 6:
                    peer = st.peer
                    sq = procs[peer]
                    spc = sq.pc
                    if spc == T2 or spc == T3:
                        if not (1 <= st.mygo < sq.tok):
                            return 13
                    elif spc == T4:
                        if not (1 <= st.mygo < go[peer]):
                            return 13
                    elif spc in R_T5_T7 and st.mygo == go[peer] and owner != peer:
                        return 13

    if any_registered and owner == 0:
        for q in range(1, n + 1):
            sq = procs[q]
            if sq.pc in C3_HELPERS:
                break
            if (sq.pc == REM or sq.pc == REC1) and go[q] != -1:
                break
            if prom_index(sq.pc) in (2, 3) and val == sq.myseq:
                break
        else:
            return 3

    if owner != 0 and go[owner] != 0:
        gp = go[owner]
        for q in range(1, n + 1):
            sq = procs[q]
            if sq.pc in C4_HELPERS:
                break
            if (sq.pc == REM or sq.pc == REC1) and go[q] != -1:
                break
            k = prom_index(sq.pc)
            if k == 4 and sq.peer == owner:
                break
            if k >= 5 and sq.peer == owner and sq.mygo == gp:
                break
        else:
            return 4

    return 0
