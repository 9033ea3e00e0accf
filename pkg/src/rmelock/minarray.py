"""Min-array: per-process write cells plus a global findmin.

Two implementations share one contract:

* ``FlatMinArray`` -- the trivially correct reference: an array plus a scan.
* ``TournamentMinArray`` -- a perfect binary tree of single-word cells where
  every internal node caches the minimum of its subtree.  A write stores the
  leaf and then climbs to the root, refreshing each ancestor twice with a
  recompute-and-CAS.  The unconditional double refresh makes the climb
  wait-free (a concurrent writer whose both CASes fail has been covered by
  someone else's refresh), keeps re-execution after a crash idempotent, and
  fixes the op count at exactly 1 + 2*levels per write.  findmin is a single
  read of the root.

The order on pairs puts tokens first and breaks ties by pid; INF is larger
than any token.
"""

from __future__ import annotations

import math

INF = math.inf


def pair_key(pair):
    """Sort key realizing the pair order: token first, pid as tie-break."""
    pid, tok = pair
    return (tok, pid)


def cmp(a, b) -> int:
    """Three-way compare of (pid, tok) pairs; -1 if a < b, 0, or 1."""
    ka, kb = pair_key(a), pair_key(b)
    return -1 if ka < kb else (0 if ka == kb else 1)


class TreeGeometry:
    """Shape and placement of the tournament tree for n writers.

    Nodes live in a 1-based heap layout over m = 2^levels padded leaves;
    node 1 is the root, leaf p sits at index m + p - 1.  For distributed
    memory accounting each node is homed at the smallest pid under it, so
    the whole path of leaf 1 is local to process 1 and the root is always
    in partition 1.
    """

    def __init__(self, n: int):
        if n < 1:
            raise ValueError("need at least one process")
        self.n = n
        self.levels = max(0, (n - 1).bit_length())  # ceil(log2 n)
        self.m = 1 << self.levels
        self.size = 2 * self.m - 1  # nodes 1 .. size
        self._owner = [0] * (self.size + 1)
        for i in range(1, self.size + 1):
            j = i
            while j < self.m:
                j *= 2
            self._owner[i] = min(n, j - self.m + 1)

    def leaf(self, p: int) -> int:
        return self.m + p - 1

    def ancestors(self, p: int):
        """Internal nodes on the path from leaf p to the root, bottom-up."""
        i = self.leaf(p) // 2
        while i >= 1:
            yield i
            i //= 2

    def owner(self, node: int) -> int:
        """Partition (pid) a node is homed in."""
        return self._owner[node]

    def leaf_pids(self, node: int):
        """Inclusive pid range of the leaves under a node (may exceed n: padding)."""
        j = node
        while j < self.m:
            j *= 2
        lo = j - self.m + 1
        return lo, lo + j // node - 1

    def write_op_count(self) -> int:
        return 1 + 2 * self.levels


class FlatMinArray:
    """Reference implementation: plain cells, findmin scans."""

    def __init__(self, n: int):
        self.n = n
        self.cells = [None] + [(p, INF) for p in range(1, n + 1)]

    def write(self, p: int, pair) -> None:
        if pair[0] != p:
            raise ValueError(f"cell {p} only accepts pairs tagged {p}")
        self.cells[p] = pair

    def findmin(self):
        return min(self.cells[1:], key=pair_key)


class WriteCursor:
    """One write(p, v) broken into single-cell micro operations.

    Each ``step()`` performs exactly one cell access: the leaf store, or one
    of the reads/CAS of a refresh pass.  Abandoning a cursor mid-way models
    a crash inside the write; re-running a fresh cursor for the same (p, v)
    must leave the tree as if the write ran once (tested exhaustively).
    """

    __slots__ = ("tree", "p", "v", "_ops", "_i", "_seen", "_l", "_r")

    def __init__(self, tree: "TournamentMinArray", p: int, v):
        self.tree = tree
        self.p = p
        self.v = v
        geo = tree.geo
        ops = [("store", geo.leaf(p))]
        for a in geo.ancestors(p):
            for _ in range(2):
                ops += [("read_self", a), ("read_l", a), ("read_r", a), ("cas", a)]
        self._ops = ops
        self._i = 0
        self._seen = self._l = self._r = None

    @property
    def done(self) -> bool:
        return self._i >= len(self._ops)

    def state(self):
        return (self._i, self._seen, self._l, self._r)

    def step(self) -> bool:
        """Execute one cell access; returns False once the write is done."""
        if self.done:
            return False
        kind, node = self._ops[self._i]
        t = self.tree
        if kind == "store":
            t._store(self.p, node, self.v)
        elif kind == "read_self":
            self._seen = t._load(self.p, node)
        elif kind == "read_l":
            self._l = t._load(self.p, 2 * node)
        elif kind == "read_r":
            self._r = t._load(self.p, 2 * node + 1)
        else:  # cas
            new = min(self._l, self._r, key=pair_key)
            t._cas(self.p, node, self._seen, new)
        self._i += 1
        return not self.done

    def run(self) -> None:
        while self.step():
            pass


class TournamentMinArray:
    """Tournament-tree min-array over n single-word cells.

    ``cell_hook``, when set, is called as hook(pid, op, node, old, new) for
    every accounted operation (the leaf store and the internal CASes), which
    is what the cost accounting counts; refresh reads are bookkeeping.
    """

    def __init__(self, n: int, cell_hook=None):
        self.geo = TreeGeometry(n)
        pad = [(q, INF) for q in range(1, self.geo.m + 1)]
        # Build bottom-up so internal nodes start coherent.
        self.nodes = [None] * (self.geo.size + 1)
        for q, leafpair in enumerate(pad, start=self.geo.m):
            self.nodes[q] = leafpair
        for i in range(self.geo.m - 1, 0, -1):
            self.nodes[i] = min(self.nodes[2 * i], self.nodes[2 * i + 1], key=pair_key)
        self.cell_hook = cell_hook

    # Single-cell primitives; subclasses may add locking or crash hooks.
    def _load(self, p, node):
        return self.nodes[node]

    def _store(self, p, node, v):
        old = self.nodes[node]
        self.nodes[node] = v
        if self.cell_hook:
            self.cell_hook(p, "store", node, old, v)

    def _cas(self, p, node, expect, new) -> bool:
        old = self.nodes[node]
        ok = old == expect
        if ok:
            self.nodes[node] = new
        if self.cell_hook:
            self.cell_hook(p, "cas", node, old, new if ok else old)
        return ok

    def write(self, p: int, pair) -> None:
        if pair[0] != p:
            raise ValueError(f"cell {p} only accepts pairs tagged {p}")
        WriteCursor(self, p, pair).run()

    def write_cursor(self, p: int, pair) -> WriteCursor:
        if pair[0] != p:
            raise ValueError(f"cell {p} only accepts pairs tagged {p}")
        return WriteCursor(self, p, pair)

    def findmin(self):
        return self._load(0, 1)

    def leaves(self):
        m, n = self.geo.m, self.geo.n
        return self.nodes[m : m + n]

    def snapshot(self):
        return tuple(self.nodes[1:])
