"""Read/write graphs in the CGR text format.

A CGR file is a sequence of scalar-shaped assignments that doubles as an
executable script: a header states the coefficient type, products appear
as ``X=P1*P2;``, solves as ``X=P1\\P2;``, and linear combinations bind the
pseudo-variables ``coeff1``/``coeff2`` immediately before use:

    graph_coeff_type="Float64";

    A2tmp=A*A;
    coeff1=1.0;
    coeff2=-0.5;
    B_0_1=coeff1*I+coeff2*A2tmp;
    ...
    # outputs: P0

Binary64 coefficients are written as shortest round-trip decimals,
extended-precision ones as exact hex-float literals, so parsing an
exported file reproduces the graph coefficient-exactly.  Comment lines of
the form ``# key: value`` are preserved as opaque metadata; the
``outputs`` (and, for non-standard graphs, ``input``) keys are written by
the exporter and honored on import, defaulting to the last assigned node
when absent.
"""

from __future__ import annotations

import re

import mpmath
from mpmath import mp

from .graph import ComputationGraph, get_topo_order, OpKind
from .numerics import CoeffType, working_precision


class CgrError(ValueError):
    def __init__(self, message, line: int | None = None):
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line


# -- number formatting -------------------------------------------------------


def _mpf_to_hex(x) -> str:
    if not isinstance(x, mpmath.mpf):
        x = mp.mpf(x)  # exact for binary64 inputs
    sign, man, exp, _ = x._mpf_
    if man == 0:
        return "0x0p0"
    return f"{'-' if sign else ''}0x{man:x}p{exp}"


_HEX_RE = re.compile(r"^(-?)0x([0-9a-fA-F]+)p(-?\d+)$")


def _hex_to_mpf(text: str, prec: int):
    mobj = _HEX_RE.match(text)
    if not mobj:
        raise ValueError(f"bad hex float {text!r}")
    sign, man, exp = mobj.groups()
    man = int(man, 16)
    with mp.workprec(max(prec, man.bit_length() + 4)):
        v = mp.ldexp(mp.mpf(man), int(exp))
    with mp.workprec(prec):
        return +v if not sign else -v


def _format_number(v, ct: CoeffType) -> str:
    if ct.is_complex:
        if ct.prec is None:
            v = complex(v)
            re_s, im_s = repr(v.real), repr(v.imag)
        else:
            if not isinstance(v, mpmath.mpc):
                with mp.workprec(ct.prec):
                    v = mp.mpc(v)
            re_s, im_s = _mpf_to_hex(v.real), _mpf_to_hex(v.imag)
        return f"{re_s}{'+' if not im_s.startswith('-') else ''}{im_s}i"
    if ct.prec is None:
        return repr(float(v))
    return _mpf_to_hex(v)


def _parse_number(text: str, ct: CoeffType, line: int):
    text = text.strip()
    try:
        if ct.is_complex:
            if not text.endswith("i"):
                raise ValueError("complex literal must end in 'i'")
            body = text[:-1]
            # split at the sign separating real and imaginary parts
            idx = None
            for i in range(len(body) - 1, 0, -1):
                if body[i] in "+-" and body[i - 1] not in "eEpx+-":
                    idx = i
                    break
            if idx is None:
                raise ValueError("missing real/imaginary separator")
            re_s, im_s = body[:idx], body[idx:]
            if im_s[0] == "+":
                im_s = im_s[1:]
            if ct.prec is None:
                return complex(float(re_s), float(im_s))
            with mp.workprec(ct.prec):
                return mp.mpc(_hex_to_mpf(re_s, ct.prec), _hex_to_mpf(im_s, ct.prec))
        if ct.prec is None:
            return float(text)
        return _hex_to_mpf(text, ct.prec)
    except ValueError as exc:
        raise CgrError(f"cannot parse number {text!r}: {exc}", line) from exc


# -- rendering ---------------------------------------------------------------


_RESERVED_WORDS_RE = re.compile(r"^(coeff\d+|graph_coeff_type)$")


def render_cgr(g: ComputationGraph) -> str:
    ct = g.coeff_type
    for nid in g.operations:
        if _RESERVED_WORDS_RE.match(nid):
            raise CgrError(f"node id {nid!r} collides with a format keyword")
        for p in g.parents[nid]:
            if p not in g.operations and p not in g.input_ids:
                raise CgrError(f"cannot export: dangling parent reference {p!r} of {nid!r}")
    lines = [f'graph_coeff_type="{ct.tag}";', ""]
    for key in sorted(g.metadata):
        lines.append(f"# {key}: {g.metadata[key]}")
    if g.metadata:
        lines.append("")
    if g.input_id != "A":
        lines.append(f"# input: {g.input_id}")
    for nid in get_topo_order(g, all_nodes=True):
        p1, p2 = g.parents[nid]
        op = g.operations[nid]
        if op == OpKind.MULT:
            lines.append(f"{nid}={p1}*{p2};")
        elif op == OpKind.LDIV:
            lines.append(f"{nid}={p1}\\{p2};")
        else:
            c1, c2 = g.coeffs[nid]
            lines.append(f"coeff1={_format_number(c1, ct)};")
            lines.append(f"coeff2={_format_number(c2, ct)};")
            lines.append(f"{nid}=coeff1*{p1}+coeff2*{p2};")
    lines.append(f"# outputs: {','.join(g.outputs)}")
    return "\n".join(lines) + "\n"


def export_compgraph(g: ComputationGraph, path: str):
    """Write the graph to ``path`` in CGR format (UTF-8, LF line endings)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(render_cgr(g))


# -- parsing -----------------------------------------------------------------


_HEADER_RE = re.compile(r'^graph_coeff_type\s*=\s*"([^"]+)"\s*;$')
_COEFF_RE = re.compile(r"^coeff([12])\s*=\s*([^;]+?)\s*;$")
_MULT_RE = re.compile(r"^(\w+)\s*=\s*(\w+)\s*\*\s*(\w+)\s*;$")
_LDIV_RE = re.compile(r"^(\w+)\s*=\s*(\w+)\s*\\\s*(\w+)\s*;$")
_LINCOMB_RE = re.compile(
    r"^(\w+)\s*=\s*coeff1\s*\*\s*(\w+)\s*\+\s*coeff2\s*\*\s*(\w+)\s*;$"
)


def parse_cgr(text: str) -> ComputationGraph:
    ct = None
    g = None
    declared: set[str] = set()
    pending: dict[int, object] = {}
    metadata: dict[str, str] = {}
    outputs: list[str] | None = None
    input_id = "A"
    last_assigned = None
    statements = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if ":" in body:
                key, _, value = body.partition(":")
                key, value = key.strip(), value.strip()
                if key == "outputs":
                    outputs = [o.strip() for o in value.split(",") if o.strip()]
                elif key == "input":
                    input_id = value
                else:
                    metadata[key] = value
            continue
        statements.append((lineno, line))
    if not statements:
        raise CgrError("empty file: missing graph_coeff_type header")
    lineno, header = statements[0]
    mobj = _HEADER_RE.match(header)
    if not mobj:
        raise CgrError("first statement must declare graph_coeff_type", lineno)
    try:
        ct = CoeffType.from_tag(mobj.group(1))
    except ValueError as exc:
        raise CgrError(str(exc), lineno) from exc
    g = ComputationGraph(ct, input_id)
    declared |= g.input_ids

    def check_operand(name, lineno):
        if name not in declared:
            raise CgrError(f"undeclared identifier {name!r}", lineno)

    def check_target(name, lineno):
        if name in declared:
            raise CgrError(f"duplicate assignment to {name!r}", lineno)

    with working_precision(ct.prec):
        for lineno, line in statements[1:]:
            mobj = _COEFF_RE.match(line)
            if mobj:
                slot = int(mobj.group(1))
                if slot in pending:
                    raise CgrError(f"coeff{slot} bound twice before use", lineno)
                pending[slot] = _parse_number(mobj.group(2), ct, lineno)
                continue
            mobj = _LINCOMB_RE.match(line)
            if mobj:
                target, p1, p2 = mobj.groups()
                check_target(target, lineno)
                check_operand(p1, lineno)
                check_operand(p2, lineno)
                if 1 not in pending or 2 not in pending:
                    raise CgrError(
                        "linear combination without preceding coeff1/coeff2 bindings", lineno
                    )
                g.add_lincomb(target, pending.pop(1), p1, pending.pop(2), p2)
                declared.add(target)
                last_assigned = target
                continue
            if pending:
                raise CgrError("dangling coeff bindings before a non-lincomb statement", lineno)
            mobj = _MULT_RE.match(line)
            if mobj:
                target, p1, p2 = mobj.groups()
                check_target(target, lineno)
                check_operand(p1, lineno)
                check_operand(p2, lineno)
                g.add_mult(target, p1, p2)
                declared.add(target)
                last_assigned = target
                continue
            mobj = _LDIV_RE.match(line)
            if mobj:
                target, p1, p2 = mobj.groups()
                check_target(target, lineno)
                check_operand(p1, lineno)
                check_operand(p2, lineno)
                g.add_ldiv(target, p1, p2)
                declared.add(target)
                last_assigned = target
                continue
            raise CgrError(f"unrecognized statement {line!r}", lineno)
    if pending:
        raise CgrError("file ends with dangling coeff bindings")
    g.metadata = metadata
    if outputs is None:
        outputs = [last_assigned] if last_assigned else []
    g.set_outputs(outputs)
    return g


def import_compgraph(path: str) -> ComputationGraph:
    """Parse a CGR file into a graph."""
    with open(path, "r", encoding="utf-8") as fh:
        return parse_cgr(fh.read())
