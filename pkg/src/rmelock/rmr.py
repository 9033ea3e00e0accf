"""Remote-memory-reference accounting under three machine models.

DSM: every shared variable is homed in one process's memory partition; an
operation is remote iff the variable lives elsewhere.  Cache-coherent
models: every non-read costs a transfer; a read costs one iff the variable
is not cached, after which it is.  Any non-read evicts the variable from
all caches on the strict machine; the relaxed machine evicts only when the
operation actually changed the value, so a failed CAS leaves spinners
reading their caches.

Registry steps are composite in the model; ``expand_registry`` rebuilds the
node-level operations (leaf store plus two CASes per level, the same
sequence the tree implementation performs) so each constituent op is
classified on its own variable.
"""

from __future__ import annotations

from dataclasses import dataclass

from .lines import REM, GOOD
from .minarray import INF, pair_key
from .model import (
    CALL_NONE, CALL_RECOVER, CALL_TRY, CRASH, NORMAL, SET_ABORT, CLEAR_ABORT,
    VarLayout, initial_config, step,
)

DSM = "dsm"
STRICT_CC = "strict_cc"
RELAXED_CC = "relaxed_cc"
MODELS = (DSM, STRICT_CC, RELAXED_CC)


def subtree_min(cfg_reg, n, node, geo, override=None):
    """Quiescent minimum pair under a tree node, from the registry cells.

    ``override`` = (pid, tok) substitutes one cell, used to reconstruct the
    pre-write value of a node.
    """
    lo, hi = geo.leaf_pids(node)
    best = None
    for q in range(lo, hi + 1):
        if q <= n:
            t = cfg_reg[q]
            if override is not None and q == override[0]:
                t = override[1]
        else:
            t = INF
        cand = (q, t)
        if best is None or pair_key(cand) < pair_key(best):
            best = cand
    return best


def expand_registry(effect, cfg_after, layout: VarLayout):
    """Node-level ops for a composite registry write."""
    p, old_tok, new_tok = effect.reg_write
    geo = layout.geo
    reg = cfg_after.reg
    n = cfg_after.n
    ops = [("w", layout.node(geo.leaf(p)), (p, old_tok), (p, new_tok))]
    for a in geo.ancestors(p):
        old = subtree_min(reg, n, a, geo, override=(p, old_tok))
        new = subtree_min(reg, n, a, geo)
        ops.append(("c", layout.node(a), old, new))
        ops.append(("c", layout.node(a), new, new))
    return ops


def effect_ops(effect, cfg_after, layout: VarLayout):
    if effect.reg_write is not None:
        return expand_registry(effect, cfg_after, layout)
    return effect.ops


def classify(ops, p, model, layout: VarLayout, caches):
    """RMR count of a list of ops by process p; updates the caches in place."""
    rmr = 0
    if model == DSM:
        part = layout.partition
        for op in ops:
            if part(op[1]) != p:
                rmr += 1
        return rmr
    cache = caches[p]
    for kind, var, old, new in ops:
        if kind == "r":
            if var not in cache:
                rmr += 1
                cache[var] = new
        else:
            rmr += 1
            if model == STRICT_CC or old != new:
                for c in caches[1:]:
                    c.pop(var, None)
    return rmr


def invalidate_env(ops, model, caches):
    """Cache effect of an environment write (abort signal): no charge."""
    if model == DSM:
        return
    for kind, var, old, new in ops:
        if model == STRICT_CC or old != new:
            for c in caches[1:]:
                c.pop(var, None)


def point_contention(cfg) -> int:
    """Processes outside (remainder and fully recovered)."""
    k = 0
    for p in range(1, cfg.n + 1):
        st = cfg.procs[p]
        if st.pc != REM or st.status != GOOD:
            k += 1
    return k


@dataclass
class PassageStats:
    pid: int
    passage: int
    attempt: int
    rmr: int
    crashes: int
    max_contention: int
    ended_by_crash: bool

    def to_json(self):
        return self.__dict__.copy()


def aggregate(n, actions, model, mutation=None):
    """Replay a trace and fold per-passage RMR counts and point contention."""
    if model not in MODELS:
        raise ValueError(f"unknown memory model {model!r}")
    layout = VarLayout(n)
    caches = [dict() for _ in range(n + 1)]
    cfg = initial_config(n)
    open_p = {}
    out = []
    for action in actions:
        kind, p, call = action
        nxt, eff = step(cfg, action, mutation=mutation, layout=layout)
        if kind == NORMAL and call in (CALL_TRY, CALL_RECOVER):
            st = nxt.procs[p]
            open_p[p] = PassageStats(p, st.passage, st.attempt, 0,
                                     st.crashes_in_attempt, 0, False)
        if kind in (SET_ABORT, CLEAR_ABORT):
            invalidate_env(eff.ops, model, caches)
        elif kind == CRASH:
            caches[p].clear()
            rec = open_p.pop(p, None)
            if rec is not None:
                rec.crashes = nxt.procs[p].crashes_in_attempt
                rec.ended_by_crash = True
                out.append(rec)
        elif p in open_p or kind == NORMAL:
            cost = classify(effect_ops(eff, nxt, layout), p, model, layout, caches)
            rec = open_p.get(p)
            if rec is not None:
                rec.rmr += cost
        k = point_contention(nxt)
        for rec in open_p.values():
            if k > rec.max_contention:
                rec.max_contention = k
        if kind == NORMAL and nxt.procs[p].pc == REM:
            rec = open_p.pop(p, None)
            if rec is not None:
                rec.crashes = nxt.procs[p].crashes_in_attempt
                out.append(rec)
        cfg = nxt
    out.extend(open_p.values())
    return out


def attempt_totals(stats):
    """Group passage stats into per-attempt totals: rmr, crashes, contention."""
    agg = {}
    for s in stats:
        key = (s.pid, s.attempt)
        rec = agg.setdefault(key, {"pid": s.pid, "attempt": s.attempt,
                                   "rmr": 0, "crashes": 0, "max_contention": 0,
                                   "passages": 0})
        rec["rmr"] += s.rmr
        rec["passages"] += 1
        rec["crashes"] = max(rec["crashes"], s.crashes)
        rec["max_contention"] = max(rec["max_contention"], s.max_contention)
    return [agg[k] for k in sorted(agg)]
