"""Integer compilation and fast forward kernels.

A finished network has exact rational weights.  Evaluating with Fractions is
the reference path, but sweeps need millions of forward passes, so networks
are compiled to per-layer int64 CSR matrices: each layer's wires are uniformly
rescaled by the least common denominator of its scaled weights.  Positive
rescaling commutes with ReLU, so integer evaluation is still bit-exact; the
compiler propagates worst-case magnitudes and refuses to produce kernels that
could overflow 2^62.

Two kernels are provided: numba @njit CSR loops (parallel over the batch) and
a pure numpy/scipy fallback.  `TEDNET_BACKEND` selects one of
("numba", "numpy", "exact"); the default is numba when importable.
"""

from __future__ import annotations

import os
import warnings
from dataclasses import dataclass
from fractions import Fraction
from math import gcd, lcm

import numpy as np
import scipy.sparse as sp

from tednet.network import Network, Rat

try:
    from numba import njit, prange

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba installed
    HAS_NUMBA = False

    def njit(*args, **kwargs):  # type: ignore[misc]
        def wrap(fn):
            return fn
        return wrap

    prange = range  # type: ignore[assignment]

INT_LIMIT = 2**62


class OverflowRisk(RuntimeError):
    """Compiled magnitudes could exceed the int64 safety margin."""


@dataclass
class _IntLayer:
    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray
    bias: np.ndarray
    matrix: sp.csr_matrix
    width_in: int
    width_out: int


@dataclass
class CompiledNetwork:
    """int64 CSR form of a network, exact under per-layer rescaling."""

    layers: list[_IntLayer]
    input_width: int
    output_width: int
    input_scale: int       # integer inputs = rational inputs * input_scale
    output_scale: int      # rational outputs = integer outputs / output_scale

    def scale_inputs(self, rows: list[list[Rat]]) -> np.ndarray:
        out = np.empty((len(rows), self.input_width), dtype=np.int64)
        for r, row in enumerate(rows):
            for c, v in enumerate(row):
                scaled = v * self.input_scale
                f = Fraction(scaled)
                if f.denominator != 1:
                    raise ValueError(f"input {v} not on the 1/{self.input_scale} grid")
                out[r, c] = int(f)
        return out

    def unscale_outputs(self, y: np.ndarray) -> list[list[Rat]]:
        s = self.output_scale
        res: list[list[Rat]] = []
        for row in y:
            if s == 1:
                res.append([int(v) for v in row])
            else:
                res.append([Fraction(int(v), s) for v in row])
        return res


def compile_network(net: Network) -> CompiledNetwork:
    """Rescale a rational network into exact int64 layers, or refuse."""
    den_prev = int(net.meta.get("input_den", 1))
    # Worst-case magnitude per wire, in current scaled units.  All wires are
    # post-ReLU hence nonnegative, so the upper bound is the whole story.
    hi_bounds = _scaled_input_bounds(net, den_prev)
    layers: list[_IntLayer] = []
    for li, ly in enumerate(net.layers):
        nums = np.asarray(ly.nums, dtype=object)
        dens = np.asarray(ly.dens, dtype=object)
        # Denominator of every w * s_prev, fully reduced.
        full_den = []
        for p in range(len(nums)):
            d = int(dens[p]) * den_prev
            g = gcd(int(nums[p]), d)
            full_den.append(d // g)
        den_next = 1
        for d in set(full_den):
            den_next = lcm(den_next, d)
        for b in ly.bias:
            den_next = lcm(den_next, Fraction(b).denominator)

        data = np.empty(len(nums), dtype=np.int64)
        for p in range(len(nums)):
            val = int(nums[p]) * den_next
            d = int(dens[p]) * den_prev
            assert val % d == 0
            q = val // d
            if abs(q) >= INT_LIMIT:
                raise OverflowRisk(f"layer {li}: weight magnitude {q}")
            data[p] = q
        bias = np.empty(ly.width_out, dtype=np.int64)
        new_hi: list[int] = []
        rowptr = ly.rowptr
        cols = ly.cols
        for i in range(ly.width_out):
            bv = Fraction(ly.bias[i]) * den_next
            assert bv.denominator == 1
            bint = int(bv)
            if abs(bint) >= INT_LIMIT:
                raise OverflowRisk(f"layer {li}: bias magnitude {bint}")
            bias[i] = bint
            # audit: sum of absolute contributions must stay under 2^62 no
            # matter the accumulation order.
            worst = abs(bint)
            acc_hi = bint
            for p in range(rowptr[i], rowptr[i + 1]):
                w = int(data[p])
                h = hi_bounds[cols[p]]
                worst += abs(w) * h
                if w > 0:
                    acc_hi += w * h
            if worst >= INT_LIMIT:
                raise OverflowRisk(f"layer {li} wire {i}: magnitude bound {worst}")
            new_hi.append(max(0, acc_hi))
        indptr = np.asarray(ly.rowptr, dtype=np.int64)
        indices = np.asarray(ly.cols, dtype=np.int64)
        matrix = sp.csr_matrix((data, indices, indptr), shape=(ly.width_out, ly.width_in))
        layers.append(_IntLayer(indptr, indices, data, bias, matrix, ly.width_in, ly.width_out))
        hi_bounds = new_hi
        den_prev = den_next
    return CompiledNetwork(
        layers=layers,
        input_width=net.input_width,
        output_width=net.output_width,
        input_scale=int(net.meta.get("input_den", 1)),
        output_scale=den_prev,
    )


def _scaled_input_bounds(net: Network, den: int) -> list[int]:
    raw = net.meta.get("input_bounds")
    if raw is None:
        # No declared bounds: assume binary inputs, which is never weaker
        # than reality for the networks built here but may reject compiles.
        return [den] * net.input_width
    his = []
    for _, hi in raw:
        v = Fraction(hi) * den
        his.append(int(v) if v.denominator == 1 else int(v) + 1)
    return his


# -- kernels -----------------------------------------------------------------


@njit(cache=True, parallel=True)
def _csr_forward_numba(indptr, indices, data, bias, x, y):  # pragma: no cover - jit
    nb = x.shape[0]
    nout = bias.shape[0]
    for r in prange(nb):
        for i in range(nout):
            acc = bias[i]
            for p in range(indptr[i], indptr[i + 1]):
                acc += data[p] * x[r, indices[p]]
            y[r, i] = acc if acc > 0 else 0


def _forward_numba(cnet: CompiledNetwork, x: np.ndarray) -> np.ndarray:
    cur = x
    for ly in cnet.layers:
        out = np.empty((cur.shape[0], ly.width_out), dtype=np.int64)
        _csr_forward_numba(ly.indptr, ly.indices, ly.data, ly.bias, cur, out)
        cur = out
    return cur


def _forward_numpy(cnet: CompiledNetwork, x: np.ndarray) -> np.ndarray:
    cur = x
    for ly in cnet.layers:
        out = ly.matrix.dot(cur.T).T + ly.bias
        if out.dtype != np.int64:
            out = out.astype(np.int64)
        np.maximum(out, 0, out=out)
        cur = np.ascontiguousarray(out)
    return cur


def available_backends() -> list[str]:
    names = ["numpy", "exact"]
    if HAS_NUMBA:
        names.insert(0, "numba")
    return names


def backend_name(requested: str | None = None) -> str:
    name = requested or os.environ.get("TEDNET_BACKEND", "").strip().lower()
    if not name:
        return "numba" if HAS_NUMBA else "numpy"
    if name not in ("numba", "numpy", "exact"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAS_NUMBA:
        warnings.warn("numba not importable, falling back to numpy")
        return "numpy"
    return name


def forward_batch(cnet: CompiledNetwork, x: np.ndarray, backend: str | None = None) -> np.ndarray:
    """Run a batch of already-scaled int64 inputs through the kernels."""
    if x.ndim != 2 or x.shape[1] != cnet.input_width:
        raise ValueError(f"batch shape {x.shape} does not match input width {cnet.input_width}")
    name = backend_name(backend)
    if name == "numba":
        return _forward_numba(cnet, np.ascontiguousarray(x, dtype=np.int64))
    return _forward_numpy(cnet, np.ascontiguousarray(x, dtype=np.int64))


def eval_batch_rational(net: Network, cnet: CompiledNetwork,
                        inputs: list[list[Rat]], backend: str | None = None) -> list[list[Rat]]:
    """Evaluate rational inputs, dispatching to the selected backend.

    The "exact" backend walks the Fraction reference path; the integer
    backends scale, run int64 kernels, and unscale.
    """
    name = backend_name(backend)
    if name == "exact":
        return [net.eval_exact(row) for row in inputs]
    y = forward_batch(cnet, cnet.scale_inputs(inputs), backend=name)
    return cnet.unscale_outputs(y)
