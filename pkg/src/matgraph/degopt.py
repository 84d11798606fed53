"""Degree-optimal polynomial form and classical evaluation schemes.

A :class:`Degopt` captures the recursion that reaches degree 2^m with m
non-scalar products: starting from B1 = I and B2 = A, each step multiplies
two linear combinations of everything computed so far,

    B_{k+2} = (sum_j HA[k][j] * B_j) op (sum_j HB[k][j] * B_j),

and the result is p(A) = sum_j y[j] * B_j.  ``op`` is multiplication in the
polynomial variant and left division in the rational variant; mixed rows
are supported internally so that solve-based schemes embed too.

The row-k coefficient vectors use only their first k+1 entries; with the
final combination vector y of length m+2 this gives (m+2)^2 - 2 free
parameters.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Sequence

from .evaluation import eval_graph_poly
from .graph import CoeffRef, ComputationGraph, OpKind
from .numerics import CoeffType, is_scalar


class DegoptError(ValueError):
    pass


def _pad_rows(rows, m):
    out = []
    for k, row in enumerate(rows, start=1):
        row = list(row)
        if len(row) > m + 1:
            raise DegoptError(f"row {k} longer than {m + 1}")
        if len(row) < k + 1:
            raise DegoptError(f"row {k} must provide at least {k + 1} entries")
        for j, v in enumerate(row):
            if j > k and v != 0:
                raise DegoptError(f"row {k} entry {j + 1} must be zero")
        out.append(row + [0] * (m + 1 - len(row)))
    return out


class Degopt:
    """Compact (HA, HB, y) coefficient container for the degree-optimal form."""

    def __init__(self, HA: Sequence[Sequence], HB: Sequence[Sequence], y: Sequence,
                 variant: str = "mult", row_ops: Sequence[OpKind] | None = None):
        m = len(HA)
        if m < 1:
            raise DegoptError("need at least one product row")
        if len(HB) != m:
            raise DegoptError("HA and HB must have the same number of rows")
        self.HA = _pad_rows(HA, m)
        self.HB = _pad_rows(HB, m)
        self.y = list(y)
        if len(self.y) != m + 2:
            raise DegoptError(f"y must have length {m + 2}")
        if row_ops is not None:
            row_ops = [OpKind(o) for o in row_ops]
            if len(row_ops) != m:
                raise DegoptError("row_ops must have one entry per row")
            if any(o == OpKind.LINCOMB for o in row_ops):
                raise DegoptError("row operations must be mult or ldiv")
            self.row_ops = row_ops
        else:
            if variant not in ("mult", "ldiv"):
                raise DegoptError(f"unknown variant {variant!r}")
            self.row_ops = [OpKind.MULT if variant == "mult" else OpKind.LDIV] * m

    @property
    def m(self) -> int:
        return len(self.HA)

    @property
    def variant(self) -> str:
        kinds = set(self.row_ops)
        if kinds == {OpKind.MULT}:
            return "mult"
        if kinds == {OpKind.LDIV}:
            return "ldiv"
        return "mixed"

    @property
    def n_free(self) -> int:
        return (self.m + 2) ** 2 - 2

    def __eq__(self, other):
        return (
            isinstance(other, Degopt)
            and self.HA == other.HA
            and self.HB == other.HB
            and self.y == other.y
            and self.row_ops == other.row_ops
        )


def graph_degopt(d: Degopt, coeff_type: CoeffType = CoeffType(),
                 input_id: str = "A") -> tuple[ComputationGraph, list[CoeffRef]]:
    """Build the graph of a degree-optimal form.

    Returns the graph together with refs for all (m+2)^2 - 2 tunable
    coefficients, ordered HA row-major, then HB row-major, then y.
    """
    g = ComputationGraph(coeff_type, input_id)
    m = d.m
    B = ["I", input_id]
    refs_a: list[CoeffRef] = []
    refs_b: list[CoeffRef] = []
    for k in range(1, m + 1):
        ra = g.add_sum(f"Ba{k}", [(d.HA[k - 1][j], B[j]) for j in range(k + 1)])
        rb = g.add_sum(f"Bb{k}", [(d.HB[k - 1][j], B[j]) for j in range(k + 1)])
        refs_a.extend(ra)
        refs_b.extend(rb)
        prod = f"B{k + 2}"
        if d.row_ops[k - 1] == OpKind.MULT:
            g.add_mult(prod, f"Ba{k}", f"Bb{k}")
        else:
            g.add_ldiv(prod, f"Ba{k}", f"Bb{k}")
        B.append(prod)
    refs_y = g.add_sum("P", [(d.y[j], B[j]) for j in range(m + 2)])
    g.set_outputs(["P"])
    return g, refs_a + refs_b + refs_y


def degopt_coeffs(g: ComputationGraph, refs: list[CoeffRef], m: int) -> Degopt:
    """Read a Degopt back out of a graph built by :func:`graph_degopt`."""
    vals = g.get_coeffs(refs)
    HA, HB = [], []
    i = 0
    for k in range(1, m + 1):
        HA.append(vals[i:i + k + 1])
        i += k + 1
    for k in range(1, m + 1):
        HB.append(vals[i:i + k + 1])
        i += k + 1
    y = vals[i:]
    row_ops = [g.operations[f"B{k + 2}"] for k in range(1, m + 1)]
    return Degopt(HA, HB, y, row_ops=row_ops)


def degopt_degree(d: Degopt, prec: int = 256) -> int:
    """Exact degree of the represented polynomial (mult variant only).

    The polynomial is expanded at ``prec`` bits and coefficients smaller
    than 2^(-prec/2) in magnitude are treated as zero.
    """
    if d.variant != "mult":
        raise DegoptError("degree is defined for the polynomial (mult) variant only")
    g, _ = graph_degopt(d)
    coeffs = eval_graph_poly(g, prec=prec)
    tol = 2.0 ** (-prec // 2)
    deg = 0
    for j, c in enumerate(coeffs):
        if abs(c) > tol:
            deg = j
    return deg


# ---------------------------------------------------------------------------
# classical schemes as graphs


def _as_coeff_list(coeffs):
    coeffs = list(coeffs)
    if not coeffs:
        raise DegoptError("need at least one coefficient")
    if not all(is_scalar(c) for c in coeffs):
        raise DegoptError("coefficients must be scalars")
    return coeffs


def _constant_graph(c0, coeff_type, input_id):
    g = ComputationGraph(coeff_type, input_id)
    g.add_lincomb("P0", c0, "I", 0.0, input_id)
    g.set_outputs(["P0"])
    return g, [CoeffRef("P0", 1)]


def graph_monomial(coeffs, coeff_type: CoeffType = CoeffType(),
                   input_id: str = "A") -> tuple[ComputationGraph, list[CoeffRef]]:
    """Evaluate sum c_i x^i with explicitly computed powers.

    Powers are the nodes A2..Ad; partial sums are P2..P{d+1}, so the refs
    for the polynomial coefficients are (P2,1), (P2,2), (P3,2), ...
    """
    c = _as_coeff_list(coeffs)
    d = len(c) - 1
    if d == 0:
        return _constant_graph(c[0], coeff_type, input_id)
    g = ComputationGraph(coeff_type, input_id)
    powers = {1: input_id}
    for j in range(2, d + 1):
        pid = f"A{j}"
        g.add_mult(pid, powers[j - 1], input_id)
        powers[j] = pid
    g.add_lincomb("P2", c[0], "I", c[1], input_id)
    refs = [CoeffRef("P2", 1), CoeffRef("P2", 2)]
    prev = "P2"
    for j in range(2, d + 1):
        nid = f"P{j + 1}"
        g.add_lincomb(nid, 1.0, prev, c[j], powers[j])
        refs.append(CoeffRef(nid, 2))
        prev = nid
    g.set_outputs([prev])
    return g, refs


def graph_horner(coeffs, coeff_type: CoeffType = CoeffType(),
                 input_id: str = "A") -> tuple[ComputationGraph, list[CoeffRef]]:
    """Evaluate sum c_i x^i by the Horner scheme."""
    c = _as_coeff_list(coeffs)
    d = len(c) - 1
    if d == 0:
        return _constant_graph(c[0], coeff_type, input_id)
    g = ComputationGraph(coeff_type, input_id)
    g.add_lincomb(f"H{d - 1}", c[d - 1], "I", c[d], input_id)
    refs = [CoeffRef(f"H{d - 1}", 1), CoeffRef(f"H{d - 1}", 2)]
    prev = f"H{d - 1}"
    for j in range(d - 2, -1, -1):
        g.add_mult(f"HM{j}", prev, input_id)
        g.add_lincomb(f"H{j}", c[j], "I", 1.0, f"HM{j}")
        refs.insert(0, CoeffRef(f"H{j}", 1))
        prev = f"H{j}"
    g.set_outputs([prev])
    return g, refs


def ps_block_size(degree: int) -> int:
    """Block size for Paterson-Stockmeyer evaluation of the given degree.

    ceil(sqrt(degree+1)) unless a strictly cheaper size exists, in which
    case the smallest size attaining the minimum multiplication count.
    """
    if degree < 1:
        return 1

    def cost(s):
        return (s - 1) + (degree - 1) // s

    s0 = math.isqrt(degree)
    if s0 * s0 < degree + 1:
        s0 += 1
    best = min(range(1, degree + 1), key=lambda s: (cost(s), s))
    return best if cost(best) < cost(s0) else s0


def _ps_blocks(c, s):
    """Split coefficients into blocks; the top block may reach degree s."""
    d = len(c) - 1
    K = (d - 1) // s
    blocks = []
    for k in range(K + 1):
        hi = d if k == K else k * s + s - 1
        blocks.append(c[k * s: hi + 1])
    return blocks


def graph_ps(coeffs, coeff_type: CoeffType = CoeffType(),
             input_id: str = "A") -> tuple[ComputationGraph, list[CoeffRef]]:
    """Paterson-Stockmeyer evaluation of sum c_i x^i.

    Block k is accumulated through nodes B_k_1, B_k_2, ...; the outer
    Horner recursion alternates products C_k with the stride power and
    combinations P_k.
    """
    c = _as_coeff_list(coeffs)
    d = len(c) - 1
    if d == 0:
        return _constant_graph(c[0], coeff_type, input_id)
    s = ps_block_size(d)
    blocks = _ps_blocks(c, s)
    K = len(blocks) - 1
    g = ComputationGraph(coeff_type, input_id)
    max_power = s if K >= 1 else d
    powers = {1: input_id}
    for j in range(2, max_power + 1):
        g.add_mult(f"A{j}", powers[j - 1], input_id)
        powers[j] = f"A{j}"
    refs: list[CoeffRef] = []
    block_tail = {}
    for k, blk in enumerate(blocks):
        nid = f"B_{k}_1"
        if len(blk) == 1:
            g.add_lincomb(nid, blk[0], "I", 0.0, input_id)
            refs.append(CoeffRef(nid, 1))
        else:
            g.add_lincomb(nid, blk[0], "I", blk[1], input_id)
            refs.append(CoeffRef(nid, 1))
            refs.append(CoeffRef(nid, 2))
        prev = nid
        for j in range(2, len(blk)):
            nid = f"B_{k}_{j}"
            g.add_lincomb(nid, 1.0, prev, blk[j], powers[j])
            refs.append(CoeffRef(nid, 2))
            prev = nid
        block_tail[k] = prev
    acc = block_tail[K]
    for k in range(K - 1, -1, -1):
        g.add_mult(f"C{k}", acc, powers[s])
        g.add_lincomb(f"P{k}", 1.0, f"C{k}", 1.0, block_tail[k])
        acc = f"P{k}"
    g.set_outputs([acc])
    return g, refs


# ---------------------------------------------------------------------------
# embeddings into degree-optimal form


def _zeros(n):
    return [0.0] * n


def _embed_monomial(c):
    d = len(c) - 1
    m = max(d - 1, 1)
    HA, HB = [], []
    for k in range(1, m + 1):
        ra = _zeros(k + 1)
        ra[k] = 1.0
        rb = _zeros(k + 1)
        rb[1] = 1.0
        HA.append(ra)
        HB.append(rb)
    y = list(c) + _zeros(m + 2 - len(c))
    return Degopt(HA, HB, y)


def _embed_horner(c):
    d = len(c) - 1
    if d < 2:
        return _embed_monomial(c)
    m = d - 1
    HA, HB = [], []
    for k in range(1, m + 1):
        ra = _zeros(k + 1)
        ra[0] = c[d - k]
        if k == 1:
            ra[1] = c[d]
        else:
            ra[k] = 1.0
        rb = _zeros(k + 1)
        rb[1] = 1.0
        HA.append(ra)
        HB.append(rb)
    y = _zeros(m + 2)
    y[0] = c[0]
    y[m + 1] = 1.0
    return Degopt(HA, HB, y)


def _embed_ps(c):
    d = len(c) - 1
    if d < 2:
        return _embed_monomial(c)
    s = ps_block_size(d)
    blocks = _ps_blocks(c, s)
    K = len(blocks) - 1
    if K == 0:
        return _embed_monomial(c)
    m = (s - 1) + K
    HA, HB = [], []
    for k in range(1, s):
        ra = _zeros(k + 1)
        ra[k] = 1.0
        rb = _zeros(k + 1)
        rb[1] = 1.0
        HA.append(ra)
        HB.append(rb)
    # product rows, top block first; B_{s+1} holds x^s
    for i, k in enumerate(range(K, 0, -1)):
        row = s + i
        ra = _zeros(row + 1)
        ra[s] = 1.0
        rb = _zeros(row + 1)
        blk = blocks[k]
        for j, cj in enumerate(blk):
            rb[j] = cj
        if i > 0:
            rb[row] = 1.0  # accumulated tail from the previous product
        HA.append(ra)
        HB.append(rb)
    y = _zeros(m + 2)
    for j, cj in enumerate(blocks[0]):
        y[j] = cj
    y[m + 1] = 1.0
    return Degopt(HA, HB, y)


def _embed_newton_schulz(iters):
    if iters < 1:
        raise DegoptError("need at least one iteration")
    m = 2 * iters
    HA, HB = [], []
    # A*X0 with X0 = A
    HA.append([0.0, 1.0])
    HB.append([0.0, 1.0])
    HA.append([0.0, 1.0, 0.0])
    HB.append([2.0, 0.0, -1.0])
    for i in range(2, iters + 1):
        k = 2 * i - 1  # row computing A*X_{i-1}; X_{i-1} sits in B_{2i}
        ra = _zeros(k + 1)
        ra[1] = 1.0
        rb = _zeros(k + 1)
        rb[k] = 1.0
        HA.append(ra)
        HB.append(rb)
        ra = _zeros(k + 2)
        ra[k] = 1.0
        rb = _zeros(k + 2)
        rb[0] = 2.0
        rb[k + 1] = -1.0
        HA.append(ra)
        HB.append(rb)
    y = _zeros(m + 2)
    y[m + 1] = 1.0
    return Degopt(HA, HB, y)


def pade_exp_coeffs(degree: int, exact: bool = False):
    """Numerator coefficients of the diagonal Pade approximant to exp.

    b_j = (2m-j)! m! / ((2m)! j! (m-j)!); the denominator has the same
    coefficients with alternating signs.
    """
    from fractions import Fraction

    mdeg = degree
    out = []
    for j in range(mdeg + 1):
        v = Fraction(
            math.factorial(2 * mdeg - j) * math.factorial(mdeg),
            math.factorial(2 * mdeg) * math.factorial(j) * math.factorial(mdeg - j),
        )
        out.append(v if exact else float(v))
    return out


_PADE_POWER_PLAN = {
    # degree -> (power rows, U row composition); powers are x^2, x^4, ...
    3: 1,
    5: 2,
    7: 3,
    9: 4,
    13: 3,
}


def _embed_exp_pade(degree: int, squarings: int):
    if degree not in _PADE_POWER_PLAN:
        raise DegoptError(f"unsupported diagonal degree {degree}; pick one of 3, 5, 7, 9, 13")
    if squarings < 0:
        raise DegoptError("squarings must be nonnegative")
    b = pade_exp_coeffs(degree, exact=True)
    HA, HB = [], []
    rows_ops = []

    def add_row(ra, rb, op=OpKind.MULT):
        HA.append(ra)
        HB.append(rb)
        rows_ops.append(op)

    npow = _PADE_POWER_PLAN[degree]
    # B3 = x^2, B4 = x^4, ..., even powers by repeated multiplication with B3
    add_row([0.0, 1.0], [0.0, 1.0])
    for k in range(2, npow + 1):
        ra = _zeros(k + 1)
        ra[2] = 1.0
        rb = _zeros(k + 1)
        rb[k] = 1.0
        add_row(ra, rb)
    # power j lives in B_{j+2}: x^{2j} = B_{j+2}
    pw = {2 * j: j + 1 for j in range(1, npow + 1)}  # power -> B index (0-based in B list)
    if degree != 13:
        row = npow + 1
        rb = _zeros(row + 1)
        rb[0] = b[1]
        for j in range(1, (degree - 1) // 2 + 1):
            rb[pw[2 * j]] = b[2 * j + 1]
        ra = _zeros(row + 1)
        ra[1] = 1.0
        add_row(ra, rb)  # U = x * (odd part)
        u_idx = row + 1
        vvec = _zeros(row + 2)
        vvec[0] = b[0]
        for j in range(1, degree // 2 + 1):
            vvec[pw[2 * j]] = b[2 * j]
        ra = list(vvec)
        ra[u_idx] = -1.0
        rb = list(vvec)
        rb[u_idx] = 1.0
        add_row(ra, rb, OpKind.LDIV)  # (V-U) \ (V+U)
        m_core = row + 1
    else:
        # W1 = x^6*(b9 x^2 + b11 x^4 + b13 x^6), U = x*(b1 + b3 x^2 + b5 x^4 + b7 x^6 + W1)
        ra = _zeros(5)
        ra[4] = 1.0
        rb = _zeros(5)
        rb[2], rb[3], rb[4] = b[9], b[11], b[13]
        add_row(ra, rb)
        ra = _zeros(6)
        ra[1] = 1.0
        rb = _zeros(6)
        rb[0], rb[2], rb[3], rb[4], rb[5] = b[1], b[3], b[5], b[7], 1.0
        add_row(ra, rb)
        ra = _zeros(7)
        ra[4] = 1.0
        rb = _zeros(7)
        rb[2], rb[3], rb[4] = b[8], b[10], b[12]
        add_row(ra, rb)  # W2
        vvec = _zeros(8)
        vvec[0], vvec[2], vvec[3], vvec[4], vvec[7] = b[0], b[2], b[4], b[6], 1.0
        ra = list(vvec)
        ra[6] = -1.0
        rb = list(vvec)
        rb[6] = 1.0
        add_row(ra, rb, OpKind.LDIV)
        m_core = 7
    for k in range(squarings):
        row = m_core + k
        ra = _zeros(row + 2)
        ra[row + 1] = 1.0
        add_row(ra, list(ra))
    m = m_core + squarings
    y = _zeros(m + 2)
    y[m + 1] = 1.0
    if squarings:
        # the recursion starts from B2 = A, so r(A/2^s) enters through the
        # input-column coefficients
        scale = Fraction(1, 2 ** squarings)
        for row in HA:
            row[1] = row[1] * scale
        for row in HB:
            row[1] = row[1] * scale
    d = Degopt(HA, HB, y, row_ops=rows_ops)
    return d


def embed_degopt(scheme: str, coeffs=None, **params) -> Degopt:
    """Express a named evaluation scheme in degree-optimal form.

    Schemes: ``monomial``, ``horner``, ``ps`` (each takes the monomial
    coefficient list), ``newton_schulz`` (``iters=``), and ``native_exp``
    (``degree=``, ``squarings=``; uses left-division rows).
    """
    if scheme in ("monomial", "horner", "ps"):
        c = _as_coeff_list(coeffs)
        return {"monomial": _embed_monomial, "horner": _embed_horner, "ps": _embed_ps}[scheme](c)
    if scheme == "newton_schulz":
        iters = params.get("iters", coeffs)
        return _embed_newton_schulz(int(iters))
    if scheme == "native_exp":
        degree = params.get("degree", 13 if coeffs is None else coeffs)
        return _embed_exp_pade(int(degree), int(params.get("squarings", 0)))
    raise DegoptError(f"unknown scheme {scheme!r}")


def graph_monomial_degopt(coeffs, coeff_type: CoeffType = CoeffType()):
    return graph_degopt(embed_degopt("monomial", coeffs), coeff_type)


def graph_horner_degopt(coeffs, coeff_type: CoeffType = CoeffType()):
    return graph_degopt(embed_degopt("horner", coeffs), coeff_type)


def graph_ps_degopt(coeffs, coeff_type: CoeffType = CoeffType()):
    return graph_degopt(embed_degopt("ps", coeffs), coeff_type)


# ---------------------------------------------------------------------------
# y_ks-form conversion


class YksCoeffs:
    """Coefficient bundle of the multiplication-efficient y_ks scheme (k=1).

    With s the highest computed plain power, the scheme is

        w(x)  = x^s * (c[0] x + c[1] x^2 + ... + c[s-1] x^s)
        p(x)  = (d[0] x + ... + d[s-1] x^s + w) * (e[0] x^2 + ... + e[s-2] x^s + w)
                + e0 * w + f[0] + f[1] x + ... + f[s] x^s
    """

    def __init__(self, s: int, c, d, e, e0, f):
        if s < 2:
            raise DegoptError("the scheme needs s >= 2")
        self.s = s
        self.c = _as_coeff_list(c)
        self.d = _as_coeff_list(d)
        self.e = list(e)
        self.e0 = e0
        self.f = _as_coeff_list(f)
        if len(self.c) != s or len(self.d) != s:
            raise DegoptError(f"c and d must have length s = {s}")
        if len(self.e) != s - 1:
            raise DegoptError(f"e must have length s-1 = {s - 1}")
        if len(self.f) != s + 1:
            raise DegoptError(f"f must have length s+1 = {s + 1}")

    def eval_direct(self, x):
        """Reference evaluation of the recursion, for oracle checks."""
        w = x ** self.s * sum(self.c[j] * x ** (j + 1) for j in range(self.s))
        left = sum(self.d[j] * x ** (j + 1) for j in range(self.s)) + w
        right = sum(self.e[j] * x ** (j + 2) for j in range(self.s - 1)) + w
        return left * right + self.e0 * w + sum(self.f[j] * x ** j for j in range(self.s + 1))


def yks_to_degopt(spec: YksCoeffs) -> Degopt:
    """Convert a y_ks coefficient bundle to degree-optimal form."""
    s = spec.s
    HA, HB = [], []
    for k in range(1, s):
        ra = _zeros(k + 1)
        ra[k] = 1.0
        rb = _zeros(k + 1)
        rb[1] = 1.0
        HA.append(ra)
        HB.append(rb)
    # row s: w = x^s * (c[0] x + ... + c[s-1] x^s); B_{j+1} holds x^j
    ra = _zeros(s + 1)
    ra[s] = 1.0
    rb = _zeros(s + 1)
    for j in range(s):
        rb[j + 1] = spec.c[j]
    HA.append(ra)
    HB.append(rb)
    # row s+1: (d-part + w) * (e-part + w)
    ra = _zeros(s + 2)
    for j in range(s):
        ra[j + 1] = spec.d[j]
    ra[s + 1] = 1.0
    rb = _zeros(s + 2)
    for j in range(s - 1):
        rb[j + 2] = spec.e[j]
    rb[s + 1] = 1.0
    HA.append(ra)
    HB.append(rb)
    m = s + 1
    y = _zeros(m + 2)
    for j in range(s + 1):
        y[j] = spec.f[j]
    y[s + 1] = spec.e0
    y[s + 2] = 1.0
    return Degopt(HA, HB, y)
