"""Edge-locating subnetworks over Euler-encoded strings.

Everything here operates on a string group of wires t[0..L-1] (values in
[1, 2m] plus the sentinel B) and emits, under a namespace prefix, the wire
groups that locate edges by DFS vertex index:

* the position chain p/p'/p'': p marks inward entries, p' numbers them by
  DFS index (zero elsewhere), and p'' replaces those zeros by the string
  length so that position-0 queries can never match;
* match gates q[j, i]: indicator that query j names the vertex whose inward
  entry sits at string position i;
* the outward machinery r/s/v'/w: w[l, i] marks the unique outward partner
  i of the inward entry at l, found by requiring equal labels, balanced
  inward/outward counts strictly between, and l maximal;
* anchored outward matches w'[a, i]: outward partners of the inward entries
  selected by a per-slot anchor value (used to rewrite both entries of a
  located edge).

Positions are 0-based in code; wire values that represent positions are
1-based string positions, matching the Euler string convention where
position 0 denotes "no position".
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from tednet import gadgets
from tednet.network import Builder, Expr, atom, esum

__all__ = [
    "PairSpace",
    "emit_string_constants",
    "emit_position_chain",
    "emit_match_gates",
    "emit_outward_core",
    "emit_anchor_match",
    "scope_constants",
    "build_inward_locator",
    "build_outward_locator",
]


@dataclass(frozen=True)
class ScopeConstants:
    """Size constants shared by every construction on one problem instance."""

    n: int
    m: int
    d: int

    @property
    def sentinel(self) -> int:
        return 8 * (max(2 * self.m, 2 * self.n + 2 * self.d) + 1)

    @property
    def mask(self) -> int:
        return 8 * self.sentinel * (2 * self.n + 2 * self.d + 1)


def scope_constants(n: int, m: int, d: int) -> ScopeConstants:
    if n < 1:
        raise ValueError("need at least one edge (n >= 1)")
    if m < 1:
        raise ValueError("alphabet size must be >= 1")
    if d < 1:
        raise ValueError("edit budget must be >= 1")
    return ScopeConstants(n, m, d)


class PairSpace:
    """Flat indexing of ordered position pairs (l, i) with l < i."""

    def __init__(self, L: int):
        self.L = L
        self.pairs: list[tuple[int, int]] = [(l, i) for i in range(L) for l in range(i)]
        self.index = {p: k for k, p in enumerate(self.pairs)}

    def __len__(self) -> int:
        return len(self.pairs)

    def left_of(self, i: int) -> list[int]:
        return [self.index[(l, i)] for l in range(i)]


def emit_string_constants(b: Builder, ns: str, values: list[int]) -> str:
    name = f"{ns}t"
    b.constants(name, values)
    return name


def emit_position_chain(b: Builder, ns: str, t: str, L: int, m: int, C: int) -> None:
    """p, p', p'': inward flags, DFS numbering, and the no-match rewrite."""
    # p[i] = [t_i <= m]
    gadgets.ge0(b, f"{ns}p", L, [Expr({}, m) - atom(t, i) for i in range(L)])
    # p'[i] = running inward count, masked to zero on non-inward positions
    rows = []
    for i in range(L):
        run = esum(atom(f"{ns}p", k) for k in range(i + 1))
        rows.append(run + atom(f"{ns}p", i) * C - C)
    gadgets.linear(b, f"{ns}p'", L, rows)
    gadgets.iszero(b, f"{ns}pz", L, [atom(f"{ns}p'", i) for i in range(L)])
    # p''[i] = p'[i] or, where p' is zero, the string length (matches no query)
    gadgets.gate_value(b, f"{ns}pr", L,
                       [(Expr({}, L), atom(f"{ns}pz", i)) for i in range(L)], cap=C)
    gadgets.linear(b, f"{ns}p''", L,
                   [atom(f"{ns}p'", i) + atom(f"{ns}pr", i) for i in range(L)],
                   drop=(f"{ns}p'", f"{ns}pz", f"{ns}pr"))


def emit_match_gates(b: Builder, ns: str, name: str, x: str, x_idx: list[int], L: int) -> None:
    """q[j, i] = [position chain value at i equals query x[x_idx[j]]]."""
    pairs = [(atom(f"{ns}p''", i), atom(x, xj)) for xj in x_idx for i in range(L)]
    gadgets.delta(b, name, (len(x_idx), L), pairs)


def emit_outward_core(b: Builder, ns: str, t: str, L: int, m: int, C: int,
                      want_partner_positions: bool = False) -> PairSpace:
    """r, s and the outward-partner flags w over the pair space.

    w[l, i] = 1 exactly when the outward entry at position i closes the
    inward entry at position l.  Optionally also emits bw[l] = the 1-based
    position of l's partner (bw[0] is the virtual root closing at L+1).
    """
    ps = PairSpace(L)
    # r keeps inward labels, s keeps outward ones; one of them is always 0.
    gadgets.gate_value(b, f"{ns}r", L,
                       [(atom(t, i), atom(f"{ns}p", i)) for i in range(L)], cap=C)
    gadgets.linear(b, f"{ns}s", L, [atom(t, i) - atom(f"{ns}r", i) for i in range(L)])
    # vd[k] = [s_i == r_l + m] for pair k = (l, i)
    gadgets.delta(b, f"{ns}vd", len(ps),
                  [(atom(f"{ns}s", i), atom(f"{ns}r", l) + m) for l, i in ps.pairs])
    # v subtracts C per unmatched outward entry strictly between l and i;
    # only a label match with balanced counts survives as exactly 1.
    rows = []
    for k, (l, i) in enumerate(ps.pairs):
        between = esum(Expr({}, 1) - atom(f"{ns}p", j) * 2 for j in range(l + 1, i))
        rows.append(atom(f"{ns}vd", k) - between * C)
    gadgets.linear(b, f"{ns}v", len(ps), rows, drop=(f"{ns}vd",))
    gadgets.delta(b, f"{ns}v'", len(ps),
                  [(atom(f"{ns}v", k), Expr({}, 1)) for k in range(len(ps))],
                  drop=(f"{ns}v",))
    # Among candidate inward entries for outward i, the nearest (largest l)
    # wins: subtract every inner candidate.
    rows = []
    for k, (l, i) in enumerate(ps.pairs):
        inner = esum(atom(f"{ns}v'", ps.index[(kk, i)]) for kk in range(l + 1, i))
        rows.append(atom(f"{ns}v'", k) - inner)
    gadgets.linear(b, f"{ns}w", len(ps), rows, drop=(f"{ns}v'",))
    b.clamp_bounds(f"{ns}w", 0, 1)
    # Per-position totals: at most one partner per outward entry.
    gadgets.linear(b, f"{ns}W", L,
                   [esum(atom(f"{ns}w", k) for k in ps.left_of(i)) for i in range(L)])
    b.clamp_bounds(f"{ns}W", 0, 1)
    if want_partner_positions:
        rows: list[Expr] = [Expr({}, L + 1)]
        for l in range(L):
            rows.append(esum(atom(f"{ns}w", ps.index[(l, i)]) * (i + 1)
                             for i in range(l + 1, L)))
        gadgets.linear(b, f"{ns}bw", L + 1, rows)
    return ps


def emit_anchor_match(b: Builder, ns: str, name: str, ps: PairSpace,
                      anchors: list[list[Expr]], m: int,
                      want_positions: bool = False) -> None:
    """Outward partners of anchor-selected inward entries.

    anchors[a][l] is the slot-a inward label value at position l (zero when
    slot a does not select l).  Emits:
      {name}[a, k]  pairwise partner flags over the pair space
      {name}g[a, i] = 1 iff slot a's selected edge leaves at position i
      {name}v[a]    = 1-based partner position (when want_positions)
    """
    A = len(anchors)
    L = ps.L
    # [s_i == anchor_a_l + m] for pair k = (l, i); a zero anchor can never
    # match because outward labels exceed m.
    gadgets.delta(b, f"{name}~m", (A, len(ps)),
                  [(atom(f"{ns}s", i), anchors[a][l] + m)
                   for a in range(A) for l, i in ps.pairs])
    # Subtract the true-partner flags of every other inward entry: only the
    # anchored entry's own partner survives.
    rows = []
    for a in range(A):
        for k, (l, i) in enumerate(ps.pairs):
            others = atom(f"{ns}W", i) - atom(f"{ns}w", k)
            rows.append(atom(f"{name}~m", a * len(ps) + k) - others)
    gadgets.linear(b, name, (A, len(ps)), rows, drop=(f"{name}~m",))
    b.clamp_bounds(name, 0, 1)
    gadgets.linear(b, f"{name}g", (A, L),
                   [esum(atom(name, a * len(ps) + k) for k in ps.left_of(i))
                    for a in range(A) for i in range(L)])
    b.clamp_bounds(f"{name}g", 0, 1)
    if want_positions:
        gadgets.linear(b, f"{name}v", A,
                       [esum(atom(name, a * len(ps) + k) * (i + 1)
                             for k, (l, i) in enumerate(ps.pairs))
                        for a in range(A)])


def _input_positions(b: Builder, d: int, n: int) -> None:
    b.input_group("x", d, 0, n)


def build_inward_locator(tree, m: int, d: int, fold: bool = True):
    """Network mapping d DFS-index queries to located inward labels.

    Outputs r'[j, i]: the label at string position i when query j names the
    vertex entering there, else 0.
    """
    from tednet.trees import euler_string

    sc = scope_constants(tree.n, m, d)
    L = 2 * tree.n
    C = sc.mask
    b = Builder(meta={"kind": "inward", "n": tree.n, "m": m, "d": d, "input_den": 1},
                fold_constants=fold)
    _input_positions(b, d, tree.n)
    t = emit_string_constants(b, "", list(euler_string(tree, m)))
    emit_position_chain(b, "", t, L, m, C)
    emit_match_gates(b, "", "q", "x", list(range(d)), L)
    gadgets.gate_value(b, "r'", (d, L),
                       [(atom(t, i), atom("q", j * L + i)) for j in range(d) for i in range(L)],
                       cap=C)
    return b.finalize("r'")


def build_outward_locator(tree, m: int, d: int, fold: bool = True):
    """Network mapping d DFS-index queries to located outward labels.

    Outputs z'[j, i]: the outward label at position i when query j names the
    vertex leaving there, else 0.  The trace also exposes z[j], the 1-based
    outward position itself.
    """
    from tednet.trees import euler_string

    sc = scope_constants(tree.n, m, d)
    L = 2 * tree.n
    C = sc.mask
    b = Builder(meta={"kind": "outward", "n": tree.n, "m": m, "d": d, "input_den": 1},
                fold_constants=fold)
    _input_positions(b, d, tree.n)
    t = emit_string_constants(b, "", list(euler_string(tree, m)))
    emit_position_chain(b, "", t, L, m, C)
    emit_match_gates(b, "", "q", "x", list(range(d)), L)
    gadgets.gate_value(b, "r'", (d, L),
                       [(atom(t, i), atom("q", j * L + i)) for j in range(d) for i in range(L)],
                       cap=C)
    ps = emit_outward_core(b, "", t, L, m, C)
    anchors = [[atom("r'", j * L + l) for l in range(L)] for j in range(d)]
    emit_anchor_match(b, "", "w'", ps, anchors, m, want_positions=True)
    b.rename("w'v", "z")
    gadgets.gate_value(b, "z'", (d, L),
                       [(atom(t, i), atom("w'g", j * L + i)) for j in range(d) for i in range(L)],
                       cap=C, drop=("w'",))
    return b.finalize("z'")
