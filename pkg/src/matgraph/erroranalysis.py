"""Accuracy certification: domain-radius bounds and running round-off bounds.

Two a priori certificates for a graph g approximating a target f:

* forward: E(z) = sum |gamma_j| z^j with gamma the coefficients of g - f;
  theta^F is the largest radius with E(theta) <= u.
* backward (exponential targets): with phi(z) = log(e^{-z} g(z)) the
  relative backward error on |z| <= theta is bounded by
  F(theta) = sum |delta_j| theta^{j-1}; theta^B is the largest radius
  keeping that below u.

Both use truncated series arithmetic at high precision and certify the
result by a bracketing pair (theta passes, theta*(1+1e-6) fails).

The a posteriori running error propagates per-node first-order round-off
through a scalar evaluation, either as a worst-case bound or as a
stochastic estimate with uniformly distributed rounding terms.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np
from mpmath import mp

from .evaluation import _eval_nodes, graph_degree_bound
from .graph import ComputationGraph, GraphError, OpKind, get_topo_order
from .numerics import EPS64, is_scalar, working_precision
from .series import TruncSeries


class ThetaKind(str, Enum):
    FORWARD = "forward"
    BACKWARD = "backward"


class RunErrMode(str, Enum):
    BOUND = "bound"
    RAND = "rand"


class CertificationError(ArithmeticError):
    pass


@dataclass
class ThetaResult:
    theta: object
    kind: ThetaKind
    nterms: int
    u: object
    saturated: bool = False
    bracket: tuple | None = None

    def __float__(self):
        return float(self.theta)


_SEARCH_CAP = mp.mpf(2) ** 60
_BRACKET_LO = mp.mpf(2) ** -20


def _bisect_max_below(bound, u, lo, hi, prec):
    """Largest theta in [lo, hi] with bound(theta) <= u; bound is increasing."""
    with mp.workprec(prec):
        for _ in range(prec):
            mid = (lo + hi) / 2
            if bound(mid) <= u:
                lo = mid
            else:
                hi = mid
            if hi - lo <= lo * mp.mpf("1e-30"):
                break
    return lo


def _certify(bound, theta, u):
    margin = theta * (1 + mp.mpf("1e-6"))
    if not (bound(theta) <= u and bound(margin) > u):
        raise CertificationError("bracketing certificate failed to verify")
    return (theta, margin)


def _graph_series(g: ComputationGraph, nterms: int, input: str | None = None):
    from .evaluation import eval_graph

    s = eval_graph(g, TruncSeries.identity(nterms), input=input)
    if isinstance(s, list):
        raise GraphError("certification expects a single-output graph")
    return s


def compute_fwd_theta(g: ComputationGraph, f_series: TruncSeries, u=2.0 ** -53,
                      prec: int = 1024, input: str | None = None) -> ThetaResult:
    """Largest radius at which the absolute forward-error series stays below u.

    The graph must be solve-free and the target series must dominate the
    graph's polynomial degree, so the coefficient differences are exact.
    """
    if any(op == OpKind.LDIV for op in g.operations.values()):
        raise CertificationError("forward certification requires a solve-free graph")
    with working_precision(prec):
        u = mp.mpf(u)
        if f_series.nterms < graph_degree_bound(g):
            raise CertificationError("target series truncated below the graph degree")
        gs = _graph_series(g, f_series.nterms, input=input)
        E = (gs - f_series).abs_coeffs()
        nterms = E.nterms

        def bound(t):
            return E(t)

        if E.coeffs[0] > u:
            return ThetaResult(mp.mpf(0), ThetaKind.FORWARD, nterms, u, saturated=False,
                               bracket=None)
        hi = mp.mpf(1)
        while bound(hi) <= u:
            hi *= 2
            if hi > _SEARCH_CAP:
                return ThetaResult(hi, ThetaKind.FORWARD, nterms, u, saturated=True,
                                   bracket=None)
        theta = _bisect_max_below(bound, u, hi / 2 if bound(hi / 2) <= u else mp.mpf(0),
                                  hi, prec)
        bracket = _certify(bound, theta, u)
        return ThetaResult(theta, ThetaKind.FORWARD, nterms, u, bracket=bracket)


def compute_bwd_theta_exp(g: ComputationGraph, u=2.0 ** -53, nterms: int = 100,
                          prec: int = 1024, input: str | None = None) -> ThetaResult:
    """Largest radius with certified relative backward error below u, target exp.

    Builds the truncated series of log(e^{-z} g(z)), takes coefficient
    magnitudes, and bisects sum |delta_j| theta^{j-1} = u at ``prec`` bits.
    Graphs with linear solves are fine as long as every denominator series
    has a nonzero constant term.
    """
    with working_precision(prec):
        u = mp.mpf(u)
        gs = _graph_series(g, nterms, input=input)
        R = TruncSeries.exp_neg(nterms) * gs - 1
        if abs(R.coeffs[0]) > u * nterms:
            raise CertificationError(
                "graph does not match exp at the origin; backward-error series undefined"
            )
        R.coeffs[0] = mp.mpf(0)
        phi = TruncSeries.log1p(nterms).compose(R)
        F = phi.abs_coeffs()

        def bound(t):
            # sum_j |delta_j| t^(j-1); the j=0 coefficient is exactly zero
            acc = mp.mpf(0)
            tp = 1 / t
            for c in F.coeffs:
                acc += c * tp
                tp *= t
            return acc

        if all(c == 0 for c in F.coeffs):
            return ThetaResult(_SEARCH_CAP, ThetaKind.BACKWARD, nterms, u, saturated=True)
        lo = _BRACKET_LO
        while bound(lo) > u:
            lo /= 2
            if lo < mp.mpf(2) ** -(prec - 8):
                raise CertificationError("no sign change: bound above u on the whole bracket")
        hi = lo
        while bound(hi) <= u:
            hi *= 2
            if hi > _SEARCH_CAP:
                return ThetaResult(hi, ThetaKind.BACKWARD, nterms, u, saturated=True)
        theta = _bisect_max_below(bound, u, hi / 2, hi, prec)
        bracket = _certify(bound, theta, u)
        return ThetaResult(theta, ThetaKind.BACKWARD, nterms, u, bracket=bracket)


def theta_table_csv(rows) -> str:
    """CSV rows (graph name, multiplication count, theta, u, nterms)."""
    lines = ["graph,multiplications,theta,u,nterms"]
    for name, m, theta, u, nterms in rows:
        lines.append(f"{name},{m},{float(theta)!r},{float(u)!r},{nterms}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# running round-off error


def eval_runerr(g: ComputationGraph, x, input: str | None = None,
                mode: RunErrMode = RunErrMode.BOUND, u: float = EPS64,
                seed: int | None = None):
    """First-order round-off estimate for a scalar evaluation of the graph.

    BOUND accumulates the worst-case relative bound: a product or solve
    adds one rounding (u), a linear combination adds two (its scalar
    products and the addition) plus the magnitude-weighted parent errors
    over the computed value.  RAND instead draws each rounding uniformly
    from [-u/2, u/2] and propagates the signed first-order recurrences,
    giving a stochastic estimate of the same quantity.

    ``u`` is the machine epsilon of the arithmetic being modeled
    (binary64 by default).  A vanishing computed value at a linear
    combination makes the relative error undefined; infinity is returned
    with a warning.
    """
    if not is_scalar(x):
        raise CertificationError("running error analysis is defined for scalar arguments")
    if len(g.outputs) != 1:
        raise GraphError("running error analysis expects a single-output graph")
    mode = RunErrMode(mode)
    input_id = input if input is not None else g.input_id
    order = get_topo_order(g)
    slots = _eval_nodes(g, x, input_id, order, keep_all=True)
    out = g.outputs[0]
    rng = np.random.default_rng(seed)

    def eta():
        return rng.uniform(-u / 2, u / 2)

    acc: dict[str, object] = {}
    inf_hit = False
    for nid in order:
        p1, p2 = g.parents[nid]
        e1 = acc.get(p1, 0.0)
        e2 = acc.get(p2, 0.0)
        kind = g.operations[nid]
        if kind == OpKind.LINCOMB:
            c1, c2 = g.coeffs[nid]
            z1 = slots.get(p1, 1 if p1 == "I" else x)
            z2 = slots.get(p2, 1 if p2 == "I" else x)
            zi = slots[nid]
            if zi == 0:
                acc[nid] = math.inf
                inf_hit = True
                continue
            if mode == RunErrMode.BOUND:
                if math.isinf(e1) or math.isinf(e2):
                    acc[nid] = math.inf
                    continue
                acc[nid] = (abs(c1) * abs(z1) * e1 + abs(c2) * abs(z2) * e2) / abs(zi) + 2 * u
            else:
                acc[nid] = (c1 * z1 * (e1 + eta()) + c2 * z2 * (e2 + eta())) / zi + eta()
        else:
            if mode == RunErrMode.BOUND:
                acc[nid] = e1 + e2 + u
            elif kind == OpKind.MULT:
                acc[nid] = e1 + e2 + eta()
            else:
                acc[nid] = e2 - e1 + eta()
    if inf_hit:
        warnings.warn("relative running error undefined at a vanishing linear combination")
    result = acc.get(out, 0.0)
    return result if mode == RunErrMode.BOUND else abs(result)
