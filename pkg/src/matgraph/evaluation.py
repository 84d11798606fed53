"""Evaluate the function underlying a graph.

Supported argument kinds, selected by the type of ``x``:

* scalars (``float``/``complex``/``mpf``/``mpc``): the three node
  operations act as scalar +, *, and /;
* 1-d numpy arrays: N independent scalar evaluations in one pass
  (object-dtype arrays carry extended-precision scalars);
* 2-d numpy arrays: binary64 dense matrices, with the linear solve done
  by LU with partial pivoting;
* ``mpmath.matrix``: extended-precision dense matrices;
* :class:`~matgraph.series.TruncSeries`: truncated-series semantics, the
  route by which a graph's series expansion is extracted (a linear solve
  becomes series division and needs a nonzero denominator constant term).

The identity input ``"I"`` binds to the multiplicative identity of the
matching kind and is materialized lazily.
"""

from __future__ import annotations

import numbers

import mpmath
import numpy as np
from mpmath import mp

from .graph import ComputationGraph, GraphError, OpKind, get_topo_order
from .numerics import (
    SingularMatrixError,
    is_mp_matrix,
    is_scalar,
    mat_lu_solve,
    working_precision,
)
from .series import TruncSeries


class EvalError(ArithmeticError):
    pass


def _precision_context(g: ComputationGraph, prec: int | None):
    """Precision to evaluate under.

    An explicit ``prec`` wins; otherwise an already-raised ambient mpmath
    precision is inherited, and failing that the graph's own coefficient
    precision is used.
    """
    if prec is not None:
        return working_precision(prec)
    if mp.prec > 53:
        return working_precision(None)
    return working_precision(g.coeff_type.prec)


class _ScalarOps:
    @staticmethod
    def identity(x):
        return 1 if not isinstance(x, (mpmath.mpf, mpmath.mpc)) else mp.mpf(1)

    @staticmethod
    def lincomb(c1, v1, c2, v2):
        return c1 * v1 + c2 * v2

    @staticmethod
    def mult(v1, v2):
        return v1 * v2

    @staticmethod
    def ldiv(v1, v2):
        if v1 == 0:
            raise SingularMatrixError("scalar left-division by zero")
        return v2 / v1


class _VectorOps:
    """Element-wise scalar semantics over a 1-d array of points."""

    @staticmethod
    def identity(x):
        if x.dtype == object:
            return np.array([mp.mpf(1)] * len(x), dtype=object)
        return np.ones(len(x), dtype=x.dtype)

    @staticmethod
    def lincomb(c1, v1, c2, v2):
        return c1 * v1 + c2 * v2

    @staticmethod
    def mult(v1, v2):
        return v1 * v2

    @staticmethod
    def ldiv(v1, v2):
        if v1.dtype == object:
            out = np.empty(len(v1), dtype=object)
            for i in range(len(v1)):
                if v1[i] == 0:
                    raise SingularMatrixError(f"left-division by zero at point index {i}")
                out[i] = v2[i] / v1[i]
            return out
        zero = np.flatnonzero(v1 == 0)
        if zero.size:
            raise SingularMatrixError(f"left-division by zero at point index {int(zero[0])}")
        return v2 / v1


class _NpMatrixOps:
    @staticmethod
    def identity(x):
        return np.eye(x.shape[0], dtype=x.dtype)

    @staticmethod
    def lincomb(c1, v1, c2, v2):
        return c1 * v1 + c2 * v2

    @staticmethod
    def mult(v1, v2):
        return v1 @ v2

    @staticmethod
    def ldiv(v1, v2):
        return mat_lu_solve(v1, v2)


class _MpMatrixOps:
    @staticmethod
    def identity(x):
        return mp.eye(x.rows)

    @staticmethod
    def lincomb(c1, v1, c2, v2):
        return v1 * c1 + v2 * c2

    @staticmethod
    def mult(v1, v2):
        return v1 * v2

    @staticmethod
    def ldiv(v1, v2):
        return mat_lu_solve(v1, v2)


class _SeriesOps:
    @staticmethod
    def identity(x):
        return TruncSeries.constant(1, x.nterms)

    @staticmethod
    def lincomb(c1, v1, c2, v2):
        return v1.scale(c1) + v2.scale(c2)

    @staticmethod
    def mult(v1, v2):
        return v1 * v2

    @staticmethod
    def ldiv(v1, v2):
        return v2.divide(v1)


def _ops_for(x):
    if is_scalar(x) or isinstance(x, numbers.Number):
        return _ScalarOps
    if isinstance(x, np.ndarray):
        if x.ndim == 1:
            return _VectorOps
        if x.ndim == 2:
            if x.shape[0] != x.shape[1]:
                raise EvalError("matrix argument must be square")
            return _NpMatrixOps
        raise EvalError(f"unsupported array rank {x.ndim}")
    if is_mp_matrix(x):
        if x.rows != x.cols:
            raise EvalError("matrix argument must be square")
        return _MpMatrixOps
    if isinstance(x, TruncSeries):
        return _SeriesOps
    raise EvalError(f"cannot evaluate a graph at a {type(x).__name__}")


def _eval_nodes(g, x, input_id, order, keep_all=False):
    """Run the forward pass, returning the slot map.

    With ``keep_all`` false, slots are freed after their last use (the
    outputs are always retained); results are unaffected.
    """
    ops = _ops_for(x)
    slots = {input_id: x}
    last_use: dict[str, int] = {}
    if not keep_all:
        for idx, nid in enumerate(order):
            for p in g.parents[nid]:
                last_use[p] = idx
    needed = set(g.outputs) | {input_id}
    for idx, nid in enumerate(order):
        p1, p2 = g.parents[nid]
        vals = []
        for p in (p1, p2):
            if p not in slots:
                if p == "I":
                    slots[p] = ops.identity(x)
                elif p == input_id:
                    slots[p] = x
                else:
                    raise GraphError(f"unresolved parent {p!r} during evaluation")
            vals.append(slots[p])
        v1, v2 = vals
        kind = g.operations[nid]
        try:
            if kind == OpKind.LINCOMB:
                c1, c2 = g.coeffs[nid]
                slots[nid] = ops.lincomb(c1, v1, c2, v2)
            elif kind == OpKind.MULT:
                slots[nid] = ops.mult(v1, v2)
            else:
                slots[nid] = ops.ldiv(v1, v2)
        except ZeroDivisionError as exc:
            raise SingularMatrixError(str(exc)) from exc
        if not keep_all:
            for p in (p1, p2):
                if last_use.get(p) == idx and p not in needed and p != "I":
                    slots.pop(p, None)
    return slots


def eval_graph(g: ComputationGraph, x, input: str | None = None, prec: int | None = None,
               keep_all: bool = False):
    """Evaluate the graph at ``x``; returns one value per output node.

    A single output is returned bare, several as a list.  ``input``
    overrides the id the argument binds to (default: the graph's input id).
    """
    if not g.outputs:
        raise GraphError("graph has no output nodes")
    input_id = input if input is not None else g.input_id
    with _precision_context(g, prec):
        order = get_topo_order(g)
        ops = _ops_for(x)
        slots = _eval_nodes(g, x, input_id, order, keep_all=keep_all)
        results = []
        for o in g.outputs:
            if o in slots:
                results.append(slots[o])
            elif o == "I":
                results.append(ops.identity(x))
            elif o == input_id:
                results.append(x)
            else:
                raise GraphError(f"output {o!r} was not computed")
    return results[0] if len(results) == 1 else results


def graph_degree_bound(g: ComputationGraph) -> int:
    """Upper bound on the polynomial degree of each output (no solves allowed)."""
    deg = {"I": 0, g.input_id: 1}
    for nid in get_topo_order(g):
        p1, p2 = g.parents[nid]
        kind = g.operations[nid]
        if kind == OpKind.LDIV:
            raise EvalError("degree bound undefined for graphs with linear solves")
        d1, d2 = deg.get(p1, 1), deg.get(p2, 1)
        deg[nid] = max(d1, d2) if kind == OpKind.LINCOMB else d1 + d2
    return max(deg.get(o, 0) for o in g.outputs) if g.outputs else 0


def eval_graph_poly(g: ComputationGraph, input: str | None = None,
                    prec: int | None = None) -> list:
    """Monomial coefficients of the polynomial the graph evaluates.

    Exact up to arithmetic rounding at the working precision: the graph is
    run on a truncated series long enough to hold the full polynomial.
    Graphs containing a linear solve are rejected.
    """
    if any(op == OpKind.LDIV for op in g.operations.values()):
        raise EvalError("symbolic polynomial evaluation requires a solve-free graph")
    if len(g.outputs) != 1:
        raise GraphError("polynomial extraction expects a single output")
    with _precision_context(g, prec):
        n = max(graph_degree_bound(g), 1)
        s = eval_graph(g, TruncSeries.identity(n), input=input)
        coeffs = list(s.coeffs)
    while len(coeffs) > 1 and coeffs[-1] == 0:
        coeffs.pop()
    return coeffs
