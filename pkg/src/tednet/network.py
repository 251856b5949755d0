"""Sparse layered ReLU networks with exact rational weights.

Networks here are never trained: they are constructed layer by layer so that
every wire carries a provably meaningful value (a count, an indicator, a
label, a position).  Construction therefore revolves around three ideas:

* exactness: weights and biases are ints or Fractions, evaluation in
  `eval_exact` uses exact arithmetic, and there is no epsilon anywhere;
* named wire groups: every intermediate quantity of interest is a named
  group of wires whose values can be read back from a forward pass, which
  is what makes the worked-example tests and the CLI trace mode possible;
* interval bounds: the builder tracks exact [lo, hi] bounds for every wire
  from the declared input domains, so masking constants can be audited at
  build time (a masked term must stay below half the masking constant) and
  integer overflow in the compiled kernels can be ruled out, not hoped for.

Layers always apply ReLU.  Since every row is emitted behind a ReLU, all
wire values are nonnegative, which is what lets groups be carried forward
("passthrough") by identity rows without changing their values.
"""

from __future__ import annotations

import json
from array import array
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable, Iterator, Mapping, Sequence

Rat = int | Fraction

__all__ = [
    "Expr",
    "atom",
    "esum",
    "Builder",
    "Network",
    "NetStats",
    "BuildError",
    "compose",
    "parallel",
    "passthrough",
]


class BuildError(ValueError):
    """A structural mistake caught while assembling a network."""


def _norm(x: Rat) -> Rat:
    # Collapse integral Fractions to int so fast paths stay fast.
    if isinstance(x, Fraction) and x.denominator == 1:
        return int(x)
    return x


class Expr:
    """Affine combination of named wires plus a constant."""

    __slots__ = ("terms", "const")

    def __init__(self, terms: dict[tuple[str, int], Rat] | None = None, const: Rat = 0):
        self.terms = terms if terms is not None else {}
        self.const = const

    def __add__(self, other: "Expr | Rat") -> "Expr":
        if isinstance(other, (int, Fraction)):
            return Expr(dict(self.terms), self.const + other)
        t = dict(self.terms)
        for k, c in other.terms.items():
            nc = t.get(k, 0) + c
            if nc == 0:
                t.pop(k, None)
            else:
                t[k] = nc
        return Expr(t, self.const + other.const)

    __radd__ = __add__

    def __sub__(self, other: "Expr | Rat") -> "Expr":
        return self + (other * -1 if isinstance(other, Expr) else -other)

    def __rsub__(self, other: Rat) -> "Expr":
        return (self * -1) + other

    def __mul__(self, k: Rat) -> "Expr":
        if k == 0:
            return Expr({}, 0)
        return Expr({key: c * k for key, c in self.terms.items()}, self.const * k)

    __rmul__ = __mul__

    def __repr__(self) -> str:  # debug aid only
        parts = [f"{c}*{n}[{i}]" for (n, i), c in self.terms.items()]
        parts.append(str(self.const))
        return " + ".join(parts)


def atom(name: str, idx: int, coef: Rat = 1) -> Expr:
    return Expr({(name, idx): coef}, 0)


def esum(exprs: Iterable[Expr | Rat]) -> Expr:
    terms: dict[tuple[str, int], Rat] = {}
    const: Rat = 0
    for e in exprs:
        if isinstance(e, (int, Fraction)):
            const += e
            continue
        const += e.const
        for k, c in e.terms.items():
            nc = terms.get(k, 0) + c
            if nc == 0:
                terms.pop(k, None)
            else:
                terms[k] = nc
    return Expr(terms, const)


class _PackedLayer:
    """One ReLU layer in CSR-like packed form, exact coefficients."""

    __slots__ = ("rowptr", "cols", "nums", "dens", "bias", "width_in", "width_out")

    def __init__(self, rowptr: array, cols: array, nums: array, dens: array,
                 bias: list[Rat], width_in: int):
        self.rowptr = rowptr
        self.cols = cols
        self.nums = nums
        self.dens = dens
        self.bias = bias
        self.width_in = width_in
        self.width_out = len(bias)

    @property
    def nnz(self) -> int:
        return len(self.cols)

    def forward(self, x: Sequence[Rat]) -> list[Rat]:
        rowptr, cols, nums, dens, bias = self.rowptr, self.cols, self.nums, self.dens, self.bias
        out: list[Rat] = []
        for i in range(self.width_out):
            acc = bias[i]
            for p in range(rowptr[i], rowptr[i + 1]):
                d = dens[p]
                if d == 1:
                    acc += nums[p] * x[cols[p]]
                else:
                    acc += Fraction(nums[p], d) * x[cols[p]]
            out.append(acc if acc > 0 else 0)
        return out

    def iter_rows(self) -> Iterator[tuple[list[tuple[int, Rat]], Rat]]:
        for i in range(self.width_out):
            row = []
            for p in range(self.rowptr[i], self.rowptr[i + 1]):
                c: Rat = self.nums[p] if self.dens[p] == 1 else Fraction(self.nums[p], self.dens[p])
                row.append((self.cols[p], c))
            yield row, self.bias[i]


@dataclass
class NetStats:
    depth: int
    widths: list[int]
    units: int
    connections: int

    @property
    def min_width(self) -> int:
        return min(self.widths)

    @property
    def max_width(self) -> int:
        return max(self.widths)

    @property
    def avg_width(self) -> float:
        return self.units / len(self.widths)

    def as_dict(self) -> dict[str, Any]:
        return {
            "depth": self.depth,
            "units": self.units,
            "connections": self.connections,
            "min_width": self.min_width,
            "avg_width": round(self.avg_width, 2),
            "max_width": self.max_width,
            "widths": self.widths,
        }


@dataclass
class Network:
    """A finished network: packed layers plus the wire-name trace."""

    input_width: int
    layers: list[_PackedLayer]
    trace: dict[str, tuple[int, int, tuple[int, ...]]]  # name -> (layer, start, shape)
    meta: dict[str, Any] = field(default_factory=dict)

    @property
    def output_width(self) -> int:
        return self.layers[-1].width_out if self.layers else self.input_width

    def eval_exact(self, inputs: Sequence[Rat]) -> list[Rat]:
        if len(inputs) != self.input_width:
            raise ValueError(f"expected {self.input_width} inputs, got {len(inputs)}")
        x: list[Rat] = [_norm(v) for v in inputs]
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def eval_traced(self, inputs: Sequence[Rat]) -> tuple[list[Rat], dict[str, list[Rat]]]:
        """Forward pass that also returns every named wire group's values."""
        if len(inputs) != self.input_width:
            raise ValueError(f"expected {self.input_width} inputs, got {len(inputs)}")
        vectors: list[list[Rat]] = [[_norm(v) for v in inputs]]
        for layer in self.layers:
            vectors.append(layer.forward(vectors[-1]))
        named = {}
        for name, (layer_idx, start, shape) in self.trace.items():
            size = 1
            for s in shape:
                size *= s
            named[name] = vectors[layer_idx + 1][start:start + size]
        return vectors[-1], named

    def wire_shape(self, name: str) -> tuple[int, ...]:
        return self.trace[name][2]

    def stats(self) -> NetStats:
        widths = [self.input_width] + [ly.width_out for ly in self.layers]
        return NetStats(
            depth=len(self.layers),
            widths=widths,
            units=sum(widths),
            connections=sum(ly.nnz for ly in self.layers),
        )

    # -- serialization ----------------------------------------------------

    def to_json_dict(self) -> dict[str, Any]:
        def ratstr(v: Rat) -> str:
            return str(v)

        layers = []
        for ly in self.layers:
            rows = []
            for row, bias in ly.iter_rows():
                rows.append([[c, ratstr(w)] for c, w in row])
            layers.append({
                "rows": rows,
                "bias": [ratstr(b) for b in ly.bias],
            })
        return {
            "format": "tednet-net/1",
            "input_width": self.input_width,
            "meta": self.meta,
            "layers": layers,
            "trace": {k: [v[0], v[1], list(v[2])] for k, v in self.trace.items()},
        }

    def save(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh)

    @classmethod
    def from_json_dict(cls, obj: Mapping[str, Any]) -> "Network":
        if obj.get("format") != "tednet-net/1":
            raise ValueError("not a tednet network file")
        width_in = obj["input_width"]
        layers = []
        prev = width_in
        for spec in obj["layers"]:
            rowptr = array("q", [0])
            cols = array("q")
            nums = array("q")
            dens = array("q")
            bias: list[Rat] = []
            for row, b in zip(spec["rows"], spec["bias"]):
                for c, w in row:
                    f = Fraction(w)
                    cols.append(c)
                    nums.append(f.numerator)
                    dens.append(f.denominator)
                rowptr.append(len(cols))
                bias.append(_norm(Fraction(b)))
            layers.append(_PackedLayer(rowptr, cols, nums, dens, bias, prev))
            prev = len(bias)
        trace = {k: (v[0], v[1], tuple(v[2])) for k, v in obj["trace"].items()}
        return cls(width_in, layers, trace, dict(obj.get("meta", {})))

    @classmethod
    def load(cls, path: str) -> "Network":
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))


class _Group:
    __slots__ = ("name", "shape", "size", "offset", "known", "lo", "hi")

    def __init__(self, name: str, shape: tuple[int, ...], offset: int):
        self.name = name
        self.shape = shape
        size = 1
        for s in shape:
            size *= s
        self.size = size
        self.offset = offset
        self.known: list[Rat | None] = [None] * size
        self.lo: list[Rat] = [0] * size
        self.hi: list[Rat] = [0] * size


class Builder:
    """Assembles a Network one ReLU layer at a time.

    Each `layer` call creates the named output groups from affine
    expressions over currently live groups, and silently carries every
    other live group forward through identity rows.  Groups are dropped
    explicitly once no longer needed to keep widths honest.

    With `fold_constants=True`, rows whose inputs all have known constant
    values collapse to bias-only rows and products of a known value with a
    gate stay affine; the emitted layer/group structure is identical either
    way, only row contents differ.  Builders for concrete networks use this
    to provide two independently wired routes to the same values.
    """

    def __init__(self, meta: dict[str, Any] | None = None, fold_constants: bool = False):
        self.meta = meta or {}
        self.fold = fold_constants
        self.groups: dict[str, _Group] = {}   # live groups, insertion ordered
        self.order: list[str] = []
        self.width = 0
        self.packed: list[_PackedLayer] = []
        self.trace: dict[str, tuple[int, int, tuple[int, ...]]] = {}
        self.input_width: int | None = None
        self._input_bounds: list[tuple[Rat, Rat]] = []
        self._finalized = False

    # -- declaration ------------------------------------------------------

    def input_group(self, name: str, shape: int | tuple[int, ...],
                    lo: Rat = 0, hi: Rat = 0,
                    bounds: Sequence[tuple[Rat, Rat]] | None = None) -> None:
        if self.packed or self._finalized:
            raise BuildError("inputs must be declared before any layer")
        g = self._new_group(name, shape)
        if bounds is not None:
            if len(bounds) != g.size:
                raise BuildError(f"{name}: need {g.size} bounds, got {len(bounds)}")
            g.lo = [_norm(b[0]) for b in bounds]
            g.hi = [_norm(b[1]) for b in bounds]
        else:
            g.lo = [_norm(lo)] * g.size
            g.hi = [_norm(hi)] * g.size
        for i in range(g.size):
            if g.lo[i] > g.hi[i]:
                raise BuildError(f"{name}[{i}]: lo > hi")
        self._input_bounds.extend(zip(g.lo, g.hi))
        self.trace[name] = (-1, g.offset, g.shape)
        self.input_width = self.width

    def constants(self, name: str, values: Sequence[Rat], shape: int | tuple[int, ...] | None = None) -> None:
        """Queue a group whose wires carry fixed values (bias-only rows)."""
        vals = [_norm(v) for v in values]
        if any(v < 0 for v in vals):
            raise BuildError(f"{name}: constant wires must be nonnegative")
        shp = shape if shape is not None else len(vals)
        self.layer([(name, shp, [Expr({}, v) for v in vals])])

    # -- internals ---------------------------------------------------------

    def _new_group(self, name: str, shape: int | tuple[int, ...]) -> _Group:
        if name in self.groups:
            raise BuildError(f"group {name!r} already live")
        shp = (shape,) if isinstance(shape, int) else tuple(shape)
        g = _Group(name, shp, self.width)
        self.groups[name] = g
        self.order.append(name)
        self.width += g.size
        return g

    def ref(self, name: str, *idx: int) -> Expr:
        return atom(name, self._flat(name, idx))

    def _flat(self, name: str, idx: tuple[int, ...]) -> int:
        g = self.groups.get(name)
        if g is None:
            raise BuildError(f"group {name!r} not live (dropped or never created)")
        if len(idx) != len(g.shape):
            raise BuildError(f"{name}: index {idx} does not match shape {g.shape}")
        flat = 0
        for i, (v, s) in enumerate(zip(idx, g.shape)):
            if not 0 <= v < s:
                raise BuildError(f"{name}: index {idx} out of bounds for {g.shape}")
            flat = flat * s + v
        return flat

    def known_value(self, expr: Expr) -> Rat | None:
        acc = expr.const
        for (name, i), c in expr.terms.items():
            g = self.groups.get(name)
            if g is None:
                raise BuildError(f"expression references dead group {name!r}")
            v = g.known[i]
            if v is None:
                return None
            acc += c * v
        return _norm(acc)

    def bound(self, expr: Expr) -> tuple[Rat, Rat]:
        lo = expr.const
        hi = expr.const
        for (name, i), c in expr.terms.items():
            g = self.groups.get(name)
            if g is None:
                raise BuildError(f"expression references dead group {name!r}")
            if c >= 0:
                lo += c * g.lo[i]
                hi += c * g.hi[i]
            else:
                lo += c * g.hi[i]
                hi += c * g.lo[i]
        return _norm(lo), _norm(hi)

    def clamp_bounds(self, name: str, lo: Rat, hi: Rat) -> None:
        """Narrow a live group's tracked bounds with caller-proven limits.

        Interval arithmetic cannot see facts like "a difference of two
        1-Lipschitz ReLU terms stays in [0, 1]" or "these indicator wires
        are mutually exclusive"; callers that can prove such a limit record
        it here so downstream audits work with it.  Only narrowing is done,
        never widening, and known constant values are left untouched.
        """
        g = self.groups.get(name)
        if g is None:
            raise BuildError(f"cannot clamp unknown group {name!r}")
        nlo, nhi = _norm(lo), _norm(hi)
        for i in range(g.size):
            g.lo[i] = max(g.lo[i], nlo)
            g.hi[i] = min(g.hi[i], nhi)
            if g.lo[i] > g.hi[i]:
                raise BuildError(f"{name}[{i}]: clamp to [{nlo}, {nhi}] is contradictory")

    def assert_masked_magnitude(self, expr: Expr, cap: Rat, what: str = "masked term") -> None:
        """Build-time audit: |expr| must stay under cap/2 wherever it is masked."""
        lo, hi = self.bound(expr)
        half = Fraction(cap, 2)
        if not (-half < lo and hi < half):
            raise BuildError(f"{what}: bounds [{lo}, {hi}] exceed +-{cap}/2")

    # -- emission ----------------------------------------------------------

    def layer(self, outputs: list[tuple[str, int | tuple[int, ...], list[Expr]]],
              drop: Iterable[str] = ()) -> None:
        """Emit one ReLU layer: new groups plus passthrough of live groups."""
        if self._finalized:
            raise BuildError("builder already finalized")
        if self.input_width is None:
            self.input_width = self.width
        dropset = set(drop)
        for name in dropset:
            if name not in self.groups:
                raise BuildError(f"cannot drop unknown group {name!r}")

        width_in = self.width
        old_groups = self.groups
        keep = [n for n in self.order if n not in dropset]

        rowptr = array("q", [0])
        cols = array("q")
        nums = array("q")
        dens = array("q")
        bias: list[Rat] = []

        new_groups: dict[str, _Group] = {}
        new_order: list[str] = []
        offset = 0

        def push_row(terms: list[tuple[int, Rat]], b: Rat) -> None:
            for c, w in terms:
                f = Fraction(w) if not isinstance(w, int) else None
                cols.append(c)
                if f is None:
                    nums.append(w)
                    dens.append(1)
                else:
                    nums.append(f.numerator)
                    dens.append(f.denominator)
            rowptr.append(len(cols))
            bias.append(_norm(b))

        # Passthrough rows first, in stable order.
        for name in keep:
            g = old_groups[name]
            ng = _Group(name, g.shape, offset)
            ng.known = list(g.known)
            ng.lo = list(g.lo)
            ng.hi = list(g.hi)
            for i in range(g.size):
                if g.lo[i] < 0:
                    raise BuildError(f"{name}[{i}]: negative wire cannot pass a ReLU intact")
                push_row([(g.offset + i, 1)], 0)
            new_groups[name] = ng
            new_order.append(name)
            offset += g.size

        # Then the freshly computed groups.
        for name, shape, rows in outputs:
            if name in new_groups or name in old_groups:
                raise BuildError(f"group {name!r} already exists")
            shp = (shape,) if isinstance(shape, int) else tuple(shape)
            size = 1
            for s in shp:
                size *= s
            if len(rows) != size:
                raise BuildError(f"{name}: shape {shp} needs {size} rows, got {len(rows)}")
            ng = _Group(name, shp, offset)
            for i, expr in enumerate(rows):
                lo, hi = self.bound(expr)
                kv = self.known_value(expr)
                if kv is not None and self.fold:
                    push_row([], kv)
                else:
                    terms = []
                    for (gname, j), c in expr.terms.items():
                        if c == 0:
                            continue
                        src = old_groups.get(gname)
                        if src is None:
                            raise BuildError(f"{name}: row references dead group {gname!r}")
                        terms.append((src.offset + j, c))
                    terms.sort()
                    push_row(terms, expr.const)
                ng.known[i] = None if kv is None else _norm(max(0, kv))
                ng.lo[i] = max(0, lo)
                ng.hi[i] = max(0, hi)
            new_groups[name] = ng
            new_order.append(name)
            self.trace[name] = (len(self.packed), offset, shp)
            offset += ng.size

        self.packed.append(_PackedLayer(rowptr, cols, nums, dens, bias, width_in))
        self.groups = new_groups
        self.order = new_order
        self.width = offset

    def rename(self, old: str, new: str) -> None:
        """Alias a live group under a new trace name (no layer emitted)."""
        if new in self.groups:
            raise BuildError(f"group {new!r} already live")
        g = self.groups.pop(old)
        g.name = new
        self.groups[new] = g
        self.order[self.order.index(old)] = new
        entry = self.trace.get(old)
        if entry is not None and entry[0] == len(self.packed) - 1:
            self.trace[new] = entry
        else:
            self.trace[new] = (len(self.packed) - 1, g.offset, g.shape)

    def finalize(self, output: str) -> Network:
        """Emit a last layer holding only `output` and freeze the network."""
        if output not in self.groups:
            raise BuildError(f"unknown output group {output!r}")
        g = self.groups[output]
        rows = [atom(output, i) for i in range(g.size)]
        self.layer([("__out__", g.shape, rows)], drop=[n for n in self.order])
        self.trace["__out__"] = self.trace.pop("__out__")
        self._finalized = True
        meta = dict(self.meta)
        meta.setdefault("output_group", output)
        meta.setdefault("input_bounds", [[str(lo), str(hi)] for lo, hi in self._input_bounds])
        return Network(self.input_width or 0, self.packed, dict(self.trace), meta)


# -- structural combinators ------------------------------------------------


def compose(outer: Network, inner: Network, prefix: str = "outer.") -> Network:
    """Feed inner's outputs into outer: result(x) = outer(inner(x))."""
    if inner.output_width != outer.input_width:
        raise ValueError(
            f"width mismatch: inner yields {inner.output_width}, outer takes {outer.input_width}")
    layers = list(inner.layers) + list(outer.layers)
    trace = dict(inner.trace)
    shift = len(inner.layers)
    for name, (li, st, shp) in outer.trace.items():
        trace[prefix + name] = (li + shift, st, shp)
    meta = {"composed": [inner.meta, outer.meta]}
    return Network(inner.input_width, layers, trace, meta)


def passthrough(width: int, depth: int = 1) -> Network:
    """Identity network for nonnegative inputs (ReLU leaves them intact)."""
    layers = []
    for _ in range(max(1, depth)):
        rowptr = array("q", range(0, width + 1))
        cols = array("q", range(width))
        nums = array("q", [1] * width)
        dens = array("q", [1] * width)
        layers.append(_PackedLayer(rowptr, cols, nums, dens, [0] * width, width))
    return Network(width, layers, {"__out__": (len(layers) - 1, 0, (width,))}, {})


def parallel(nets: Sequence[Network]) -> Network:
    """Run networks side by side on a concatenated input vector.

    Shallower networks are padded with identity layers at the end; all wire
    values are nonnegative so the padding is exact.
    """
    if not nets:
        raise ValueError("need at least one network")
    depth = max(len(nt.layers) for nt in nets)
    padded: list[list[_PackedLayer]] = []
    for nt in nets:
        ls = list(nt.layers)
        while len(ls) < depth:
            w = ls[-1].width_out if ls else nt.input_width
            ls.append(next(iter(passthrough(w, 1).layers)))
        padded.append(ls)
    layers = []
    for k in range(depth):
        rowptr = array("q", [0])
        cols = array("q")
        nums = array("q")
        dens = array("q")
        bias: list[Rat] = []
        in_off = 0
        for ls in padded:
            ly = ls[k]
            for row, b in ly.iter_rows():
                for c, w in row:
                    f = Fraction(w) if not isinstance(w, int) else None
                    cols.append(c + in_off)
                    if f is None:
                        nums.append(w)
                        dens.append(1)
                    else:
                        nums.append(f.numerator)
                        dens.append(f.denominator)
                rowptr.append(len(cols))
                bias.append(b)
            in_off += ly.width_in
        layers.append(_PackedLayer(rowptr, cols, nums, dens, bias, in_off))
    trace = {}
    out_off = 0
    in_off = 0
    for i, nt in enumerate(nets):
        for name, (li, st, shp) in nt.trace.items():
            if li == -1:
                trace[f"net{i}.{name}"] = (-1, st + in_off, shp)
            elif li == len(nt.layers) - 1:
                trace[f"net{i}.{name}"] = (depth - 1, st + out_off, shp)
        in_off += nt.input_width
        out_off += nt.output_width
    return Network(sum(nt.input_width for nt in nets), layers, trace, {})
