"""Trace files: JSON-lines serialization, stable state hashing, and replay.

A trace file starts with a header object (process count, optional seeded
fault) followed by one object per step carrying the action, the line that
executed, the shared operations performed, and a hash of the successor
configuration.  Replaying a trace re-executes the actions from the initial
configuration and verifies that every recorded line and hash matches, so a
violation trace shipped in a report reproduces bit-for-bit.
"""

from __future__ import annotations

import hashlib
import json

from .lines import LINE_NAMES
from .minarray import INF
from .model import (
    ACTION_KIND_NAMES, CALL_NAMES, POISON, VarLayout, initial_config, step,
)
from .rmr import effect_ops


class ReplayError(Exception):
    pass


def config_hash(cfg) -> str:
    """Stable digest of a configuration (independent of interpreter hashing)."""
    return hashlib.sha1(repr(cfg.key()).encode()).hexdigest()[:16]


def _jval(v):
    if v is POISON:
        return "poison"
    if v == INF:
        return "inf"
    if isinstance(v, tuple):
        return [_jval(x) for x in v]
    return v


def step_record(idx, action, effect, cfg_after, layout):
    kind, p, call = action
    ops = effect_ops(effect, cfg_after, layout)
    reads = [layout.names[op[1]] for op in ops if op[0] == "r"]
    writes = [[layout.names[op[1]], _jval(op[2]), _jval(op[3])]
              for op in ops if op[0] != "r"]
    return {
        "idx": idx,
        "actor": p,
        "kind": ACTION_KIND_NAMES[kind],
        "call": CALL_NAMES[call],
        "line": LINE_NAMES[effect.line],
        "reads": reads,
        "writes": writes,
        "post_hash": config_hash(cfg_after),
    }


def action_from_record(rec):
    kind = ACTION_KIND_NAMES.index(rec["kind"])
    call = CALL_NAMES.index(rec["call"]) if rec["call"] else 0
    return (kind, rec["actor"], call)


def write_trace(fp, n, actions, mutation=None):
    """Run the actions from the initial configuration, streaming JSONL out."""
    layout = VarLayout(n)
    cfg = initial_config(n)
    fp.write(json.dumps({"type": "header", "n": n, "mutation": mutation}) + "\n")
    for idx, action in enumerate(actions):
        cfg, eff = step(cfg, action, mutation=mutation, layout=layout)
        fp.write(json.dumps(step_record(idx, action, eff, cfg, layout)) + "\n")
    return cfg


def read_trace(fp):
    header = None
    steps = []
    for line in fp:
        line = line.strip()
        if not line:
            continue
        rec = json.loads(line)
        if rec.get("type") == "header":
            header = rec
        else:
            steps.append(rec)
    if header is None:
        raise ReplayError("trace has no header line")
    return header, steps


def replay(header, steps):
    """Re-execute a parsed trace, verifying lines and post-state hashes."""
    n = header["n"]
    mutation = header.get("mutation")
    layout = VarLayout(n)
    cfg = initial_config(n)
    for rec in steps:
        action = action_from_record(rec)
        cfg, eff = step(cfg, action, mutation=mutation, layout=layout)
        if LINE_NAMES[eff.line] != rec["line"]:
            raise ReplayError(
                f"step {rec['idx']}: executed {LINE_NAMES[eff.line]}, trace says {rec['line']}")
        h = config_hash(cfg)
        if h != rec["post_hash"]:
            raise ReplayError(
                f"step {rec['idx']}: post hash {h} != recorded {rec['post_hash']}")
    return cfg
