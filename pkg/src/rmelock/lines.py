"""Code locations of the lock algorithm and the pc-set algebra built on them.

Every location is a small int so that set membership tests in the hot paths
are frozenset-of-int lookups.  The promote helper runs inline in three
callers (the try path, the exit path, and the abort path), so each of its
six lines exists once per caller, written ``T5::P1`` etc. in traces.
"""

from __future__ import annotations

# Top-level locations, in program-text order.
REM = 0
T1, T2, T3, T4, T5, T6, T7, T8 = range(1, 9)
CS = 9
E1, E2, E3, E4, E5, E6 = range(10, 16)
REC1, REC2 = 16, 17
A1, A2, A3, A4, A5 = range(18, 23)

# Promote lines, one block per calling site.
T5P1, T5P2, T5P3, T5P4, T5P5, T5P6 = range(23, 29)
E5P1, E5P2, E5P3, E5P4, E5P5, E5P6 = range(29, 35)
A2P1, A2P2, A2P3, A2P4, A2P5, A2P6 = range(35, 41)

N_LINES = 41

LINE_NAMES = (
    ["REM"]
    + [f"T{i}" for i in range(1, 9)]
    + ["CS"]
    + [f"E{i}" for i in range(1, 7)]
    + ["REC1", "REC2"]
    + [f"A{i}" for i in range(1, 6)]
    + [f"T5::P{i}" for i in range(1, 7)]
    + [f"E5::P{i}" for i in range(1, 7)]
    + [f"A2::P{i}" for i in range(1, 7)]
)
LINE_IDS = {name: i for i, name in enumerate(LINE_NAMES)}

PROM_T5 = frozenset(range(T5P1, T5P6 + 1))
PROM_E5 = frozenset(range(E5P1, E5P6 + 1))
PROM_A2 = frozenset(range(A2P1, A2P6 + 1))
PROM_ALL = PROM_T5 | PROM_E5 | PROM_A2

# k-th promote line over all callers (k in 1..6).
PROM_K = {
    k: frozenset({T5P1 + k - 1, E5P1 + k - 1, A2P1 + k - 1}) for k in range(1, 7)
}

# Offset of a promote line within its caller block (1..6), else 0.
def prom_index(pc: int) -> int:
    if pc in PROM_ALL:
        return (pc - T5P1) % 6 + 1
    return 0


# Recovery status of a process.
GOOD, REC_TRY, REC_CS, REC_EXIT, REC_REM = range(5)
STATUS_NAMES = ("GOOD", "REC_TRY", "REC_CS", "REC_EXIT", "REC_REM")

# Which section a crash at a given pc charges to (abort lines inherit the
# section of whoever called the abort path: try via T8, recover via REC2).
SEC_REM, SEC_TRY, SEC_CS, SEC_EXIT, SEC_RECOVER = range(5)

ORIGIN_NONE, ORIGIN_TRY, ORIGIN_RECOVER = range(3)

_TRY_LINES = frozenset(range(T1, T8 + 1)) | PROM_T5
_EXIT_LINES = frozenset(range(E1, E6 + 1)) | PROM_E5
_REC_LINES = frozenset({REC1, REC2})
_ABORT_LINES = frozenset(range(A1, A5 + 1)) | PROM_A2


def section_of(pc: int, origin: int) -> int:
    """Section a process is executing in, for crash-status bookkeeping."""
    if pc == REM:
        return SEC_REM
    if pc == CS:
        return SEC_CS
    if pc in _TRY_LINES:
        return SEC_TRY
    if pc in _EXIT_LINES:
        return SEC_EXIT
    if pc in _REC_LINES:
        return SEC_RECOVER
    if pc in _ABORT_LINES:
        return SEC_RECOVER if origin == ORIGIN_RECOVER else SEC_TRY
    raise ValueError(f"unknown pc {pc}")


CRASH_STATUS = {
    SEC_TRY: REC_TRY,
    SEC_CS: REC_CS,
    SEC_EXIT: REC_EXIT,
    SEC_RECOVER: REC_REM,
}

# ---------------------------------------------------------------------------
# pc sets used by the invariant conditions.  A range over top-level lines
# drags in the promote block of any call site it covers (a process "at" a
# covered call can equally be partway through that inlined call).

# try lines 5..7, promote block included
R_T5_T7 = frozenset({T5, T6, T7}) | PROM_T5
# try 5..8
R_T5_T8 = R_T5_T7 | {T8}
# locations where go[p] must not be -1 (cond 5)
C5_NONNEG = (
    frozenset({T8, CS, E1, E2, E3, E4, E5, E6, REC2, A1, A2, A3, A4}) | PROM_ALL
)
# locations where go[p] must be -1 unconditionally (cond 5)
C5_MINUS1 = frozenset({T1, T2, T3, A5})
# locations where the registry cell must read (p, inf) (cond 6)
C6_INF = frozenset({T4, E2, E3, E4, E5, E6, A2, A3, A4}) | PROM_E5 | PROM_A2
# CS ownership forced (cond 7): CS..E4
C7_OWNER = frozenset({CS, E1, E2, E3, E4})
# CS ownership forbidden (cond 7): T4, A4, E5..E6
C7_NOT_OWNER = frozenset({T4, A4, E5, E6}) | PROM_E5
# tok_p bounded (cond 8): T3..T7
C8_TOK = frozenset({T3, T4, T5, T6, T7}) | PROM_T5
# status must be GOOD (cond 8): T1..E6
C8_GOOD = frozenset(range(T1, T8 + 1)) | {CS} | frozenset(range(E1, E6 + 1)) | PROM_T5 | PROM_E5
# helper set of cond 11, first clause: T5..T8, REC2, A1
C11_A = R_T5_T8 | {REC2, A1}
# helper set of cond 11, second clause: T5..T7, REC2..A2, A2::P1
C11_B = R_T5_T7 | {REC2, A1, A2, A2P1}
# cond 3 helper locations: T5, E5, REC2..A2, P1 (any caller)
C3_HELPERS = frozenset({T5, E5, REC2, A1, A2}) | PROM_K[1]
# cond 4 helper locations: REC2..A2, P1 (any caller)
C4_HELPERS = frozenset({REC2, A1, A2}) | PROM_K[1]
