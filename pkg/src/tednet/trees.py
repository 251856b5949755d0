"""Rooted ordered trees with vertex labels and their Euler string encoding.

A tree on n edges has n+1 vertices numbered 0..n in depth-first (preorder)
order, root first.  The root carries the reserved label 0; every other vertex
carries a label in [1, m].  The Euler string E(T) walks the tree depth-first
and records, for every non-root vertex with label b, the value b when its
edge is first traversed (inward) and b+m when it is traversed again on the
way back (outward).  E(T) has exactly 2n entries and determines the tree.
"""

from __future__ import annotations

import random
from dataclasses import dataclass


@dataclass(frozen=True)
class Tree:
    """Immutable rooted ordered labeled tree in preorder numbering.

    Attributes
    ----------
    labels : tuple of int
        labels[v] is the label of vertex v; labels[0] == 0 for the root,
        all others are >= 1.
    parents : tuple of int
        parents[v] is the parent of vertex v; parents[0] == -1.
    """

    labels: tuple[int, ...]
    parents: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.labels) != len(self.parents) or not self.labels:
            raise ValueError("labels and parents must be equally sized and nonempty")
        if self.labels[0] != 0 or self.parents[0] != -1:
            raise ValueError("vertex 0 must be the root: label 0, parent -1")
        if any(b < 1 for b in self.labels[1:]):
            raise ValueError("non-root labels must be >= 1")
        # Preorder check: each vertex attaches to a vertex on the current
        # rightmost path, otherwise the numbering is not depth-first.
        stack = [0]
        for v in range(1, len(self.parents)):
            p = self.parents[v]
            if not 0 <= p < v:
                raise ValueError(f"vertex {v}: parent {p} out of range")
            while stack and stack[-1] != p:
                stack.pop()
            if not stack:
                raise ValueError(f"vertex {v}: numbering is not preorder")
            stack.append(v)

    @property
    def n(self) -> int:
        """Number of edges (= number of non-root vertices)."""
        return len(self.labels) - 1

    def children(self, v: int) -> list[int]:
        return [u for u in range(1, len(self.parents)) if self.parents[u] == v]

    def child_count(self, v: int) -> int:
        return sum(1 for p in self.parents[1:] if p == v)

    def max_label(self) -> int:
        return max(self.labels[1:], default=0)


def euler_string(tree: Tree, m: int) -> tuple[int, ...]:
    """Encode a tree as its Euler string over the alphabet {1..2m}."""
    if m < tree.max_label():
        raise ValueError(f"alphabet size {m} below max label {tree.max_label()}")
    out: list[int] = []
    kids: dict[int, list[int]] = {v: [] for v in range(len(tree.labels))}
    for v in range(1, len(tree.labels)):
        kids[tree.parents[v]].append(v)
    # Entry/exit emission; the root itself emits nothing.
    stack: list[tuple[int, bool]] = [(0, False)]
    while stack:
        v, done = stack.pop()
        if done:
            if v != 0:
                out.append(tree.labels[v] + m)
            continue
        if v != 0:
            out.append(tree.labels[v])
        stack.append((v, True))
        for u in reversed(kids[v]):
            stack.append((u, False))
    return tuple(out)


def entry_positions(tree: Tree) -> tuple[list[int], list[int]]:
    """1-based inward/outward positions of every vertex in the Euler string.

    The root is assigned the virtual positions (0, 2n+1) bracketing the
    whole string.
    """
    n = tree.n
    pos_in = [0] * (n + 1)
    pos_out = [0] * (n + 1)
    pos_out[0] = 2 * n + 1
    kids: dict[int, list[int]] = {v: [] for v in range(n + 1)}
    for v in range(1, n + 1):
        kids[tree.parents[v]].append(v)
    i = 0
    stack: list[tuple[int, bool]] = [(0, False)]
    while stack:
        v, done = stack.pop()
        if done:
            if v != 0:
                i += 1
                pos_out[v] = i
            continue
        if v != 0:
            i += 1
            pos_in[v] = i
        stack.append((v, True))
        for u in reversed(kids[v]):
            stack.append((u, False))
    return pos_in, pos_out


def decode_euler(seq: tuple[int, ...] | list[int], m: int) -> Tree:
    """Rebuild the tree encoded by an Euler string.

    Raises ValueError if the sequence is not a valid encoding: odd length,
    symbols outside [1, 2m], or mismatched inward/outward nesting.
    """
    if m < 1:
        raise ValueError("alphabet size must be >= 1")
    if len(seq) % 2 != 0:
        raise ValueError("Euler string length must be even")
    labels = [0]
    parents = [-1]
    current = 0
    for t in seq:
        if 1 <= t <= m:
            labels.append(t)
            parents.append(current)
            current = len(labels) - 1
        elif m < t <= 2 * m:
            if current == 0 or labels[current] + m != t:
                raise ValueError(f"unmatched outward symbol {t}")
            current = parents[current]
        else:
            raise ValueError(f"symbol {t} outside alphabet of size {m}")
    if current != 0:
        raise ValueError("string ends inside an open edge")
    return Tree(tuple(labels), tuple(parents))


def is_valid_euler(seq: tuple[int, ...] | list[int], m: int) -> bool:
    try:
        decode_euler(seq, m)
    except ValueError:
        return False
    return True


def pad_sentinels(seq: tuple[int, ...], count: int, sentinel: int) -> tuple[int, ...]:
    return tuple(seq) + (sentinel,) * count


def strip_sentinels(seq: tuple[int, ...] | list[int], sentinel: int) -> tuple[int, ...]:
    """Drop leading and trailing sentinel entries, keep the interior intact.

    Interior sentinels are deliberately preserved so that a malformed
    sequence keeps failing Euler validation instead of being repaired.
    """
    lo = 0
    hi = len(seq)
    while lo < hi and seq[lo] == sentinel:
        lo += 1
    while hi > lo and seq[hi - 1] == sentinel:
        hi -= 1
    return tuple(seq[lo:hi])


def parse_tree_text(text: str) -> Tree:
    """Parse the 3-line tree format.

    Line 1: vertex count (n+1).  Line 2: labels in preorder, root's 0 first.
    Line 3: parent indices, -1 for the root.
    """
    lines = [ln for ln in (s.strip() for s in text.splitlines()) if ln]
    if len(lines) != 3:
        raise ValueError(f"expected 3 nonempty lines, got {len(lines)}")
    try:
        count = int(lines[0])
        labels = tuple(int(tok) for tok in lines[1].split())
        parents = tuple(int(tok) for tok in lines[2].split())
    except ValueError as exc:
        raise ValueError(f"malformed tree file: {exc}") from None
    if count != len(labels):
        raise ValueError(f"declared {count} vertices, found {len(labels)} labels")
    return Tree(labels, parents)


def format_tree_text(tree: Tree) -> str:
    head = str(len(tree.labels))
    labels = " ".join(str(b) for b in tree.labels)
    parents = " ".join(str(p) for p in tree.parents)
    return f"{head}\n{labels}\n{parents}\n"


def random_tree(n: int, m: int, rng: random.Random | None = None) -> Tree:
    """Uniform-ish random tree: random attachment, then preorder renumbering."""
    rng = rng or random.Random()
    if n < 0 or m < 1:
        raise ValueError("need n >= 0 and m >= 1")
    raw_parent = [-1] + [rng.randrange(0, v) for v in range(1, n + 1)]
    kids: dict[int, list[int]] = {v: [] for v in range(n + 1)}
    for v in range(1, n + 1):
        kids[raw_parent[v]].append(v)
    order: list[int] = []
    stack = [0]
    while stack:
        v = stack.pop()
        order.append(v)
        for u in reversed(kids[v]):
            stack.append(u)
    rank = {v: i for i, v in enumerate(order)}
    labels = [0] * (n + 1)
    parents = [-1] * (n + 1)
    for v in range(1, n + 1):
        labels[rank[v]] = rng.randint(1, m)
        parents[rank[v]] = rank[raw_parent[v]]
    return Tree(tuple(labels), tuple(parents))
