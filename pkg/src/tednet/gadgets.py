"""Exact ReLU gadget emitters.

Each helper adds one small named construction to a Builder: equality tests,
threshold tests, boolean combinations, and products of a bounded value with
a binary gate.  All of them are exact on their stated input grids, not
approximations; the grid (default 1, i.e. integers) is the minimum nonzero
gap between the compared quantities.

The value-by-gate products follow the masked-max pattern
ReLU(value - C*(1 - gate)), which requires the masking constant C to
dominate the masked magnitude; emitters assert that against the builder's
tracked bounds, so a too-small C is a build-time error rather than a silent
wrong network.
"""

from __future__ import annotations

from fractions import Fraction

from tednet.network import Builder, BuildError, Expr, Rat, atom

Shape = int | tuple[int, ...]


def _inv_grid(grid: Rat) -> int:
    inv = Fraction(1, 1) / Fraction(grid)
    if inv.denominator != 1 or inv <= 0:
        raise BuildError(f"grid must be a positive unit fraction, got {grid}")
    return int(inv)


def _size(shape: Shape) -> int:
    if isinstance(shape, int):
        return shape
    size = 1
    for s in shape:
        size *= s
    return size


def linear(b: Builder, name: str, shape: Shape, rows: list[Expr],
           drop: tuple[str, ...] = ()) -> None:
    """One ReLU layer computing the given affine rows."""
    b.layer([(name, shape, rows)], drop=drop)


def delta(b: Builder, name: str, shape: Shape, pairs: list[tuple[Expr, Expr]],
          grid: Rat = 1, drop: tuple[str, ...] = ()) -> None:
    """Equality indicators: 1 when the two sides agree, 0 when they differ
    by at least one grid step.  Two layers (tent construction)."""
    inv = _inv_grid(grid)
    ia, ib = f"{name}~a", f"{name}~b"
    b.layer([
        (ia, shape, [(p - q) * inv for p, q in pairs]),
        (ib, shape, [(q - p) * inv for p, q in pairs]),
    ])
    n = _size(shape)
    b.layer([(name, shape, [1 - atom(ia, i) - atom(ib, i) for i in range(n)])],
            drop=(ia, ib) + tuple(drop))


def iszero(b: Builder, name: str, shape: Shape, exprs: list[Expr],
           grid: Rat = 1, drop: tuple[str, ...] = ()) -> None:
    """Zero test for provably nonnegative quantities; single layer."""
    inv = _inv_grid(grid)
    for e in exprs:
        lo, _ = b.bound(e)
        if lo < 0:
            raise BuildError(f"{name}: iszero needs nonnegative input, lo={lo}")
    b.layer([(name, shape, [1 - e * inv for e in exprs])], drop=drop)


def ge0(b: Builder, name: str, shape: Shape, exprs: list[Expr],
        grid: Rat = 1, drop: tuple[str, ...] = ()) -> None:
    """Threshold indicators [e >= 0] for e on the given grid; two layers."""
    inv = _inv_grid(grid)
    iu, iv = f"{name}~u", f"{name}~v"
    b.layer([
        (iu, shape, [e * inv + 1 for e in exprs]),
        (iv, shape, [e * inv for e in exprs]),
    ])
    n = _size(shape)
    b.layer([(name, shape, [atom(iu, i) - atom(iv, i) for i in range(n)])],
            drop=(iu, iv) + tuple(drop))
    # ReLU(e+1) - ReLU(e) lies in [0, 1] for every real e (1-Lipschitz).
    b.clamp_bounds(name, 0, 1)


def interval(b: Builder, name: str, shape: Shape,
             items: list[tuple[Expr, Rat, Rat]], grid: Rat = 1,
             drop: tuple[str, ...] = ()) -> None:
    """Closed-interval indicators [lo <= e <= hi]; two layers."""
    inv = _inv_grid(grid)
    ga, gb, la, lb = f"{name}~ga", f"{name}~gb", f"{name}~la", f"{name}~lb"
    b.layer([
        (ga, shape, [(e - lo) * inv + 1 for e, lo, _ in items]),
        (gb, shape, [(e - lo) * inv for e, lo, _ in items]),
        (la, shape, [(hi - e) * inv + 1 for e, _, hi in items]),
        (lb, shape, [(hi - e) * inv for e, _, hi in items]),
    ])
    n = _size(shape)
    rows = [atom(ga, i) - atom(gb, i) + atom(la, i) - atom(lb, i) - 1 for i in range(n)]
    b.layer([(name, shape, rows)], drop=(ga, gb, la, lb) + tuple(drop))
    # Each Lipschitz pair contributes [0, 1]; their sum minus 1 caps at 1.
    b.clamp_bounds(name, 0, 1)


def _check_binary(b: Builder, name: str, gates: list[Expr]) -> None:
    for g in gates:
        lo, hi = b.bound(g)
        if lo < 0 or hi > 1:
            raise BuildError(f"{name}: gate bounds [{lo}, {hi}] not within [0, 1]")


def and_all(b: Builder, name: str, shape: Shape, items: list[list[Expr]],
            drop: tuple[str, ...] = ()) -> None:
    """Conjunction of binary gates; single layer."""
    rows = []
    for gates in items:
        _check_binary(b, name, gates)
        acc = Expr({}, 1 - len(gates))
        for g in gates:
            acc = acc + g
        rows.append(acc)
    b.layer([(name, shape, rows)], drop=drop)


def or_all(b: Builder, name: str, shape: Shape, items: list[list[Expr]],
           drop: tuple[str, ...] = ()) -> None:
    """Disjunction of binary gates, min(1, sum); two layers."""
    ix = f"{name}~x"
    sums = []
    for gates in items:
        _check_binary(b, name, gates)
        acc = Expr({}, -1)
        for g in gates:
            acc = acc + g
        sums.append(acc)
    b.layer([(ix, shape, sums)])
    n = _size(shape)
    rows = [sums[i] + 1 - atom(ix, i) for i in range(n)]
    b.layer([(name, shape, rows)], drop=(ix,) + tuple(drop))
    # min(1, gate sum): bounded by 1 regardless of how many gates fire.
    b.clamp_bounds(name, 0, 1)


def gate_value(b: Builder, name: str, shape: Shape,
               items: list[tuple[Expr, Expr]], cap: Rat,
               drop: tuple[str, ...] = ()) -> None:
    """Products value*gate for a nonnegative bounded value and a binary gate.

    Wire route: ReLU(value - cap*(1 - gate)).  When constant folding is on
    and the value is a known constant, the row becomes the plain affine
    product value*gate instead; both routes yield identical wire values.
    """
    rows = []
    for value, gate in items:
        lo, _ = b.bound(value)
        if lo < 0:
            raise BuildError(f"{name}: gated value may be negative (lo={lo})")
        _check_binary(b, name, [gate])
        b.assert_masked_magnitude(value, cap, f"{name} gated value")
        vk = b.known_value(value) if b.fold else None
        if vk is not None:
            rows.append(gate * vk)
        else:
            rows.append(value + gate * cap - cap)
    b.layer([(name, shape, rows)], drop=drop)


def masked_keep(b: Builder, name: str, shape: Shape,
                items: list[tuple[Expr, Expr]], cap: Rat,
                drop: tuple[str, ...] = ()) -> None:
    """Keep value when mask == 0, zero it when mask >= 1.

    The mask is any provably nonnegative integer-valued expression, not
    necessarily binary: ReLU(value - cap*mask).
    """
    rows = []
    for value, mask in items:
        lo, _ = b.bound(value)
        if lo < 0:
            raise BuildError(f"{name}: masked value may be negative (lo={lo})")
        mlo, _ = b.bound(mask)
        if mlo < 0:
            raise BuildError(f"{name}: mask may be negative (lo={mlo})")
        b.assert_masked_magnitude(value, cap, f"{name} masked value")
        mk = b.known_value(mask) if b.fold else None
        if mk is not None:
            rows.append(value if mk == 0 else Expr({}, 0))
        else:
            rows.append(value - mask * cap)
    b.layer([(name, shape, rows)], drop=drop)
