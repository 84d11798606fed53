"""Emit standalone MATLAB or C source evaluating a graph at a dense matrix.

The emission order comes from a greedy list scheduler that tries to keep
the number of simultaneously live n-by-n temporaries small: among ready
nodes it prefers one whose scheduling frees the most dead buffers, with
lexicographic tie-breaks for determinism.  Buffers are reused out of
place; in-place updates are not exploited.

The C target binds to four shim kernels (multiply, two-term scaled add,
solve, copy) declared in an emitted header, so the file links against any
BLAS/LAPACK wrapper the user provides.  Fused multi-term linear
combinations are emitted as plain loops.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from enum import Enum

from .graph import ComputationGraph, GraphError, OpKind, get_topo_order
from .numerics import scalar_to_float


class Dialect(str, Enum):
    MATLAB = "matlab"
    C_BLAS = "c"


@dataclass
class EmitTarget:
    dialect: Dialect = Dialect.MATLAB
    function_name: str = "evalgraph"
    fuse_lincomb: bool = True

    def __post_init__(self):
        self.dialect = Dialect(self.dialect)
        if not self.function_name.isidentifier():
            raise GraphError(f"invalid function name {self.function_name!r}")


@dataclass
class Schedule:
    order: list[str]
    slot_assignment: dict[str, int]
    peak_buffers: int


def _schedule_kary(node_parents: dict[str, tuple], inputs: set[str],
                   outputs: list[str]) -> Schedule:
    """Greedy list scheduling over nodes with arbitrary parent arity."""
    remaining_uses: dict[str, int] = {}
    for nid, ps in node_parents.items():
        for p in set(ps):
            if p in node_parents:
                remaining_uses[p] = remaining_uses.get(p, 0) + 1
    ready = {nid for nid, ps in node_parents.items()
             if all(p not in node_parents for p in ps)}
    scheduled: set[str] = set()
    live: dict[str, int] = {}
    free: list[int] = []
    next_slot = 0
    order: list[str] = []
    slots: dict[str, int] = {}
    keep = set(outputs)

    def frees(nid):
        # buffers that die once nid is scheduled (a repeated parent is one buffer)
        return sum(
            1
            for p in set(node_parents[nid])
            if p in live and p not in keep and remaining_uses.get(p, 0) == 1
        )

    peak = 0
    while ready:
        nid = max(sorted(ready), key=frees)
        ready.discard(nid)
        if free:
            slot = free.pop()
        else:
            slot = next_slot
            next_slot += 1
        slots[nid] = slot
        live[nid] = slot
        scheduled.add(nid)
        order.append(nid)
        peak = max(peak, len(live))
        for p in set(node_parents[nid]):
            if p in node_parents:
                remaining_uses[p] -= 1
                if remaining_uses[p] == 0 and p not in keep:
                    free.append(live.pop(p))
        for other, ps in node_parents.items():
            if other not in scheduled and other not in ready:
                if all(p not in node_parents or p in scheduled for p in ps):
                    ready.add(other)
    if len(order) != len(node_parents):
        raise GraphError("cycle detected while scheduling")
    return Schedule(order, slots, peak)


def plan_schedule(g: ComputationGraph) -> Schedule:
    """Memory-aware topological schedule of the nodes the outputs need."""
    wanted = set(get_topo_order(g))
    node_parents = {nid: g.parents[nid] for nid in wanted}
    return _schedule_kary(node_parents, g.input_ids, g.outputs)


def _min_peak_exhaustive(g: ComputationGraph) -> int:
    """Exhaustive minimum peak-buffer count over all topological orders.

    Exponential; intended as a test oracle for small graphs.
    """
    wanted = set(get_topo_order(g))
    parents = {nid: [p for p in g.parents[nid]] for nid in wanted}
    uses: dict[str, int] = {}
    for nid, ps in parents.items():
        for p in set(ps):
            if p in parents:
                uses[p] = uses.get(p, 0) + 1
    keep = set(g.outputs)
    best = [len(wanted) + 1]

    def rec(scheduled: frozenset, live: frozenset, remaining: dict, peak: int):
        if peak >= best[0]:
            return
        if len(scheduled) == len(wanted):
            best[0] = peak
            return
        for nid in wanted:
            if nid in scheduled:
                continue
            if any(p in parents and p not in scheduled for p in parents[nid]):
                continue
            new_live = set(live)
            new_live.add(nid)
            new_peak = max(peak, len(new_live))
            new_rem = dict(remaining)
            for p in set(parents[nid]):
                if p in parents:
                    new_rem[p] -= 1
                    if new_rem[p] == 0 and p not in keep:
                        new_live.discard(p)
            rec(scheduled | {nid}, frozenset(new_live), new_rem, new_peak)

    rec(frozenset(), frozenset(), uses, 0)
    return best[0]


# ---------------------------------------------------------------------------
# fusion planning


def _emission_plan(g: ComputationGraph, fuse: bool):
    """Terms to emit per materialized node.

    Returns (node_terms, node_parents) where node_terms maps a
    linear-combination node to its flattened [(coeff, operand), ...] list;
    chains of single-use linear combinations are inlined when fusing.
    """
    wanted = set(get_topo_order(g))
    children: dict[str, list[str]] = {}
    for nid in wanted:
        for p in g.parents[nid]:
            if p in wanted:
                children.setdefault(p, []).append(nid)
    inlined: set[str] = set()
    if fuse:
        for nid in wanted:
            if (
                g.operations[nid] == OpKind.LINCOMB
                and nid not in g.outputs
                and len(children.get(nid, [])) == 1
                and g.operations[children[nid][0]] == OpKind.LINCOMB
            ):
                inlined.add(nid)

    def expand(nid, scale):
        c1, c2 = g.coeffs[nid]
        out = []
        for c, p in ((scale * c1, g.parents[nid][0]), (scale * c2, g.parents[nid][1])):
            if p in inlined:
                out.extend(expand(p, c))
            else:
                out.append((c, p))
        return out

    node_terms = {}
    node_parents = {}
    for nid in wanted:
        if nid in inlined:
            continue
        if g.operations[nid] == OpKind.LINCOMB:
            terms = expand(nid, 1.0) if fuse else \
                [(g.coeffs[nid][0], g.parents[nid][0]), (g.coeffs[nid][1], g.parents[nid][1])]
            node_terms[nid] = terms
            node_parents[nid] = tuple(p for _, p in terms)
        else:
            node_parents[nid] = g.parents[nid]
    return node_terms, node_parents


def _fmt(c) -> str:
    c = scalar_to_float(c)
    if isinstance(c, complex):
        re, im = repr(c.real), repr(c.imag)
        return f"({re} + {im}i)" if im[0] != "-" else f"({re} - {im[1:]}i)"
    return repr(c)


_C_KEYWORDS = {
    "auto", "break", "case", "char", "const", "continue", "default", "do", "double",
    "else", "enum", "extern", "float", "for", "goto", "if", "int", "long", "register",
    "return", "short", "signed", "sizeof", "static", "struct", "switch", "typedef",
    "union", "unsigned", "void", "volatile", "while",
}


def _namer(g: ComputationGraph, target: EmitTarget, extra: set[str]):
    """Map node ids to emission-safe variable names."""
    reserved = {"n", "output", "work", "Ieye", "nn", "k", "i", target.function_name}
    reserved |= _C_KEYWORDS | extra | g.input_ids

    def name(nid):
        if nid == g.input_id:
            return "A"
        if nid == "I":
            return "I" if target.dialect == Dialect.MATLAB else "Ieye"
        return "v_" + nid if nid in reserved else nid

    return name


# ---------------------------------------------------------------------------
# MATLAB


def _gen_matlab(g: ComputationGraph, target: EmitTarget) -> str:
    node_terms, node_parents = _emission_plan(g, target.fuse_lincomb)
    sched = _schedule_kary(node_parents, g.input_ids, g.outputs)
    outs = [f"out{i + 1}" for i in range(len(g.outputs))] if len(g.outputs) > 1 else ["output"]
    name = _namer(g, target, set(outs) | {f"coeff{i}" for i in range(1, 10)})
    head = outs[0] if len(outs) == 1 else "[" + ", ".join(outs) + "]"
    lines = [f"function {head} = {target.function_name}(A)", "    n = size(A,1);"]
    uses_identity = any("I" in ps for ps in node_parents.values()) or "I" in g.outputs
    if uses_identity:
        lines.append("    I = eye(n,n);")
    lines.append("")
    for nid in sched.order:
        kind = g.operations[nid]
        p = node_parents[nid]
        if kind == OpKind.LINCOMB:
            terms = node_terms[nid]
            for i, (c, _) in enumerate(terms):
                lines.append(f"    coeff{i + 1} = {_fmt(c)};")
            expr = " + ".join(f"coeff{i + 1}*{name(pi)}" for i, (_, pi) in enumerate(terms))
            lines.append(f"    {name(nid)} = {expr};")
        elif kind == OpKind.MULT:
            lines.append(f"    {name(nid)} = {name(p[0])} * {name(p[1])};")
        else:
            lines.append(f"    {name(nid)} = {name(p[0])} \\ {name(p[1])};")
        lines.append("")
    for var, o in zip(outs, g.outputs):
        lines.append(f"    {var} = {name(o)};")
    lines.append("end")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# C


_C_HEADER = """\
#ifndef {guard}
#define {guard}

/* Kernel shims: bind these to any BLAS/LAPACK at link time.
 * All matrices are dense n-by-n, column order irrelevant as long as it is
 * consistent, out must not alias the inputs. */
void mgk_mult(int n, const double *x, const double *y, double *out);    /* out = x*y  */
void mgk_lincomb(int n, double a, const double *x, double b, const double *y,
                 double *out);                                          /* out = a*x + b*y */
void mgk_solve(int n, const double *x, const double *y, double *out);   /* out = x \\ y */
void mgk_copy(int n, const double *x, double *out);

void {fn}(int n, const double *A, double *output);

#endif
"""


def _gen_c(g: ComputationGraph, target: EmitTarget) -> tuple[str, str]:
    if len(g.outputs) != 1:
        raise GraphError("the C target supports a single output")
    if g.coeff_type.is_complex:
        raise GraphError("the C target emits real binary64 code only")
    node_terms, node_parents = _emission_plan(g, target.fuse_lincomb)
    sched = _schedule_kary(node_parents, g.input_ids, g.outputs)
    uses_identity = any("I" in ps for ps in node_parents.values()) or "I" in g.outputs
    fn = target.function_name
    name = _namer(g, target, set())
    guard = f"{fn.upper()}_H"
    header = _C_HEADER.format(guard=guard, fn=fn)
    nbuf = max(sched.peak_buffers, 1)
    lines = [
        f'#include "{fn}.h"',
        "#include <stdlib.h>",
        "",
        f"void {fn}(int n, const double *A, double *output)",
        "{",
        "    const long nn = (long) n * n;",
        f"    double *work = (double *) calloc((size_t) nn * {nbuf}, sizeof(double));",
    ]
    if uses_identity:
        lines += [
            "    double *Ieye = (double *) calloc((size_t) nn, sizeof(double));",
            "    for (int i = 0; i < n; i++) Ieye[(long) i * n + i] = 1.0;",
        ]
    lines.append("")
    for nid in sched.order:
        slot = sched.slot_assignment[nid]
        lines.append(f"    double *{name(nid)} = work + nn * {slot};")
        kind = g.operations[nid]
        p = node_parents[nid]
        if kind == OpKind.MULT:
            lines.append(f"    mgk_mult(n, {name(p[0])}, {name(p[1])}, {name(nid)});")
        elif kind == OpKind.LDIV:
            lines.append(f"    mgk_solve(n, {name(p[0])}, {name(p[1])}, {name(nid)});")
        else:
            terms = node_terms[nid]
            if len(terms) == 2:
                (c1, p1), (c2, p2) = terms
                lines.append(
                    f"    mgk_lincomb(n, {_fmt(c1)}, {name(p1)}, {_fmt(c2)}, {name(p2)}, {name(nid)});"
                )
            else:
                expr = " + ".join(f"{_fmt(c)}*{name(pi)}[k]" for c, pi in terms)
                lines.append(f"    for (long k = 0; k < nn; k++) {name(nid)}[k] = {expr};")
        lines.append("")
    out = g.outputs[0]
    lines.append(f"    mgk_copy(n, {name(out)}, output);")
    lines.append("    free(work);")
    if uses_identity:
        lines.append("    free(Ieye);")
    lines.append("}")
    return "\n".join(lines) + "\n", header


def gen_code(g: ComputationGraph, target: EmitTarget, path: str | None = None) -> str:
    """Emit source for the graph; writes ``path`` (plus a header for C).

    Returns the main source text.  The MATLAB dialect mirrors the node
    structure directly; the C dialect allocates a workspace of
    peak-buffer n-by-n arrays and calls the shim kernels.
    """
    if not g.outputs:
        raise GraphError("graph has no output nodes")
    if target.dialect == Dialect.MATLAB:
        src = _gen_matlab(g, target)
        if path:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(src)
        return src
    src, header = _gen_c(g, target)
    if path:
        base, ext = os.path.splitext(path)
        cpath = path if ext == ".c" else base + ".c"
        with open(cpath, "w", encoding="utf-8") as fh:
            fh.write(src)
        with open(base + ".h", "w", encoding="utf-8") as fh:
            fh.write(header)
    return src
