from __future__ import annotations

import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tednet import backends, gadgets
from tednet.network import (
    Builder,
    BuildError,
    Expr,
    atom,
    compose,
    esum,
    parallel,
    passthrough,
)


def build_toy(fold: bool = False):
    """Network over integer inputs a, b in [0, 9] computing
    [delta(a,b), [a >= b], [a == 0], a if b == 0 else 0, a + 2b]."""
    b = Builder(meta={"input_den": 1}, fold_constants=fold)
    b.input_group("x", 2, 0, 9)
    a_e, b_e = b.ref("x", 0), b.ref("x", 1)
    gadgets.delta(b, "eq", 1, [(a_e, b_e)])
    gadgets.ge0(b, "ge", 1, [b.ref("x", 0) - b.ref("x", 1)])
    gadgets.iszero(b, "az", 1, [b.ref("x", 0)])
    gadgets.iszero(b, "bz", 1, [b.ref("x", 1)])
    gadgets.gate_value(b, "gated", 1, [(b.ref("x", 0), b.ref("bz", 0))], cap=1000)
    gadgets.linear(b, "lin", 1, [b.ref("x", 0) + b.ref("x", 1) * 2])
    gadgets.linear(
        b,
        "out",
        5,
        [b.ref("eq", 0), b.ref("ge", 0), b.ref("az", 0), b.ref("gated", 0), b.ref("lin", 0)],
    )
    return b.finalize("out")


def expected_toy(a: int, bb: int) -> list[int]:
    return [int(a == bb), int(a >= bb), int(a == 0), a if bb == 0 else 0, a + 2 * bb]


@given(st.integers(0, 9), st.integers(0, 9))
def test_toy_network_exact(a, bb):
    net = build_toy()
    assert net.eval_exact([a, bb]) == expected_toy(a, bb)


def test_traced_values():
    net = build_toy()
    out, named = net.eval_traced([3, 3])
    assert named["eq"] == [1]
    assert named["ge"] == [1]
    assert named["x"] == [3, 3]
    assert out == expected_toy(3, 3)


def test_fold_parity():
    plain = build_toy(fold=False)
    folded = build_toy(fold=True)
    s1, s2 = plain.stats(), folded.stats()
    assert s1.depth == s2.depth
    assert s1.widths == s2.widths
    for a in range(10):
        for bb in range(10):
            assert plain.eval_exact([a, bb]) == folded.eval_exact([a, bb])


def test_constant_folding_with_constants():
    b = Builder(fold_constants=True)
    b.input_group("x", 1, 0, 5)
    b.constants("c", [7, 2])
    gadgets.delta(b, "eq", 1, [(b.ref("c", 0) - b.ref("c", 1), Expr({}, 5))])
    gadgets.gate_value(b, "g", 1, [(b.ref("c", 0), b.ref("eq", 0))], cap=100)
    net = b.finalize("g")
    assert net.eval_exact([0]) == [7]
    # The folded delta must be a bias-only row: no connection references.
    eq_layer = net.trace["eq"][0]
    rows = list(net.layers[eq_layer].iter_rows())
    start = net.trace["eq"][1]
    assert rows[start][0] == []


def test_grid_delta_on_half_integers():
    b = Builder()
    b.input_group("x", 1, 0, 4, bounds=[(0, 4)])
    gadgets.delta(b, "eq", 1, [(b.ref("x", 0), Expr({}, Fraction(3, 2)))], grid=Fraction(1, 2))
    net = b.finalize("eq")
    assert net.eval_exact([Fraction(3, 2)]) == [1]
    assert net.eval_exact([1]) == [0]
    assert net.eval_exact([2]) == [0]


def test_interval_gadget():
    b = Builder()
    b.input_group("x", 1, 0, 10)
    gadgets.interval(b, "in", 1, [(b.ref("x", 0), 3, 5)])
    net = b.finalize("in")
    got = [net.eval_exact([v])[0] for v in range(8)]
    assert got == [0, 0, 0, 1, 1, 1, 0, 0]


def test_or_and_gadgets():
    b = Builder()
    b.input_group("x", 3, 0, 1)
    gadgets.or_all(b, "any", 1, [[b.ref("x", 0), b.ref("x", 1), b.ref("x", 2)]])
    gadgets.and_all(b, "all", 1, [[b.ref("x", 0), b.ref("x", 1), b.ref("x", 2)]])
    gadgets.linear(b, "out", 2, [b.ref("any", 0), b.ref("all", 0)])
    net = b.finalize("out")
    for bits in range(8):
        v = [(bits >> k) & 1 for k in range(3)]
        assert net.eval_exact(v) == [int(any(v)), int(all(v))]


def test_masked_keep_counts():
    b = Builder()
    b.input_group("x", 2, 0, 6)
    gadgets.masked_keep(b, "kept", 1, [(b.ref("x", 0), b.ref("x", 1))], cap=1000)
    net = b.finalize("kept")
    assert net.eval_exact([5, 0]) == [5]
    assert net.eval_exact([5, 1]) == [0]
    assert net.eval_exact([5, 3]) == [0]


def test_masking_audit_rejects_small_cap():
    b = Builder()
    b.input_group("x", 2, 0, 600)
    with pytest.raises(BuildError):
        gadgets.gate_value(b, "g", 1, [(b.ref("x", 0), b.ref("x", 1) * 0)], cap=1000)


def test_negative_passthrough_rejected():
    b = Builder()
    b.input_group("x", 1, -2, 2)
    with pytest.raises(BuildError):
        b.layer([("y", 1, [b.ref("x", 0)])])


def test_dropped_group_unreachable():
    b = Builder()
    b.input_group("x", 1, 0, 5)
    gadgets.linear(b, "y", 1, [b.ref("x", 0) * 2])
    b.layer([("z", 1, [b.ref("y", 0)])], drop=("y",))
    with pytest.raises(BuildError):
        b.ref("y", 0)


def test_serialization_roundtrip(tmp_path):
    net = build_toy()
    path = tmp_path / "net.json"
    net.save(str(path))
    loaded = net.load(str(path))
    assert loaded.input_width == net.input_width
    assert loaded.trace == net.trace
    for a in (0, 4, 9):
        for bb in (0, 5):
            assert loaded.eval_exact([a, bb]) == net.eval_exact([a, bb])
    # File is valid JSON with the expected format tag.
    obj = json.loads(path.read_text())
    assert obj["format"] == "tednet-net/1"


def test_compile_and_backends_agree():
    net = build_toy()
    cnet = backends.compile_network(net)
    ins = [[a, bb] for a in range(10) for bb in range(10)]
    exact = [net.eval_exact(row) for row in ins]
    got_np = backends.eval_batch_rational(net, cnet, ins, backend="numpy")
    assert got_np == exact
    if backends.HAS_NUMBA:
        got_nb = backends.eval_batch_rational(net, cnet, ins, backend="numba")
        assert got_nb == exact


def test_compile_fractional_grid():
    b = Builder(meta={"input_den": 4})
    b.input_group("x", 1, 0, 1, bounds=[(0, Fraction(3, 4))])
    gadgets.ge0(b, "ge", 1, [b.ref("x", 0) - Fraction(1, 2)], grid=Fraction(1, 4))
    net = b.finalize("ge")
    cnet = backends.compile_network(net)
    ins = [[Fraction(k, 4)] for k in range(4)]
    got = backends.eval_batch_rational(net, cnet, ins, backend="numpy")
    assert [r[0] for r in got] == [0, 0, 1, 1]
    with pytest.raises(ValueError):
        cnet.scale_inputs([[Fraction(1, 3)]])


def test_backend_selection(monkeypatch):
    monkeypatch.setenv("TEDNET_BACKEND", "numpy")
    assert backends.backend_name() == "numpy"
    monkeypatch.setenv("TEDNET_BACKEND", "exact")
    assert backends.backend_name() == "exact"
    monkeypatch.setenv("TEDNET_BACKEND", "bogus")
    with pytest.raises(ValueError):
        backends.backend_name()
    monkeypatch.delenv("TEDNET_BACKEND")
    assert backends.backend_name() in ("numba", "numpy")


def test_overflow_guard():
    b = Builder()
    b.input_group("x", 1, 0, 2**40)
    gadgets.linear(b, "y", 1, [b.ref("x", 0) * (2**40)])
    net = b.finalize("y")
    with pytest.raises(backends.OverflowRisk):
        backends.compile_network(net)


def test_stats_shape():
    net = build_toy()
    s = net.stats()
    assert s.depth == len(net.layers)
    assert s.widths[0] == 2
    assert s.units == sum(s.widths)
    assert s.min_width >= 1
    d = s.as_dict()
    assert d["depth"] == s.depth


def test_compose_and_passthrough():
    ident = passthrough(2, depth=3)
    toy = build_toy()
    whole = compose(toy, ident)
    assert whole.eval_exact([4, 2]) == toy.eval_exact([4, 2])
    assert len(whole.layers) == len(toy.layers) + 3


def test_parallel_blocks():
    a = build_toy()
    bnet = passthrough(3, depth=1)
    par = parallel([a, bnet])
    got = par.eval_exact([2, 2, 7, 8, 9])
    assert got == expected_toy(2, 2) + [7, 8, 9]


@settings(max_examples=30)
@given(st.lists(st.integers(0, 50), min_size=2, max_size=2))
def test_esum_and_expr_algebra(vals):
    e = esum([atom("x", 0), atom("x", 1) * 2, 5])
    b = Builder()
    b.input_group("x", 2, 0, 50)
    gadgets.linear(b, "y", 1, [e])
    net = b.finalize("y")
    assert net.eval_exact(vals) == [vals[0] + 2 * vals[1] + 5]
