"""Shared test helpers: oracles, random graphs, and replay interpreters."""

from __future__ import annotations

import os
import re
import subprocess
import tempfile

import numpy as np
from mpmath import mp

from matgraph import CoeffType, ComputationGraph
from matgraph.numerics import as_mp_matrix


def taylor_exp_mp(A: np.ndarray, prec: int = 512) -> np.ndarray:
    """exp(A) by Taylor summation to convergence at ``prec`` bits."""
    with mp.workprec(prec):
        n = A.shape[0]
        M = as_mp_matrix(A, prec)
        acc = mp.eye(n)
        term = mp.eye(n)
        k = 0
        while True:
            k += 1
            term = term * M * (mp.mpf(1) / k)
            acc2 = acc + term
            if max(abs(term[i, j]) for i in range(n) for j in range(n)) < mp.mpf(2) ** (-prec - 8):
                acc = acc2
                break
            acc = acc2
        if np.iscomplexobj(A):
            return np.array([[complex(acc[i, j]) for j in range(n)] for i in range(n)])
        return np.array([[float(acc[i, j]) for j in range(n)] for i in range(n)])


def taylor_exp_scalar(z, prec: int = 256):
    with mp.workprec(prec):
        return mp.exp(mp.mpc(z) if isinstance(z, complex) else mp.mpf(z))


def random_graph(rng: np.random.Generator, n_nodes: int = 8, allow_ldiv: bool = True,
                 coeff_type: CoeffType = CoeffType()) -> ComputationGraph:
    """Random DAG whose evaluation stays tame for |z| <= 1.

    Node value magnitudes are tracked so linear combinations are rescaled
    before they can blow up and solve denominators stay bounded away from
    zero on the closed unit disk.
    """
    g = ComputationGraph(coeff_type)
    avail = ["I", "A"]
    bound = {"I": 1.0, "A": 1.0}
    for i in range(n_nodes):
        nid = f"N{i}"
        kinds = ["lincomb", "mult"] + (["ldiv"] if allow_ldiv else [])
        kind = kinds[rng.integers(len(kinds))]
        p1 = avail[rng.integers(len(avail))]
        p2 = avail[rng.integers(len(avail))]
        if kind == "lincomb":
            c1, c2 = rng.uniform(-1, 1, 2)
            b = abs(c1) * bound[p1] + abs(c2) * bound[p2]
            if b > 4.0:
                c1, c2 = c1 * 2 / b, c2 * 2 / b
                b = 2.0
            g.add_lincomb(nid, c1, p1, c2, p2)
            bound[nid] = max(b, 1e-2)
        elif kind == "mult":
            g.add_mult(nid, p1, p2)
            b = bound[p1] * bound[p2]
            if b > 8.0:
                g.del_node(nid)
                c = 2.0 / b
                g.add_lincomb(nid + "s", c, p1, 0.0, "I")
                g.add_mult(nid, nid + "s", p2)
                b = 2.0
            bound[nid] = b
        else:
            # denominator 2 + small*p1 keeps the solve well conditioned
            den = f"{nid}d"
            small = float(rng.uniform(-0.5, 0.5)) / (1.0 + bound[p1])
            g.add_lincomb(den, 2.0, "I", small, p1)
            g.add_ldiv(nid, den, p2)
            bound[nid] = bound[p2] / 1.5
        avail.append(nid)
    g.set_outputs([avail[-1]])
    return g


# ---------------------------------------------------------------------------
# replay interpreter for emitted MATLAB sources


_ML_ASSIGN = re.compile(r"^\s*([A-Za-z_]\w*)\s*=\s*(.+);$")


def _ml_factor(tok: str, env):
    tok = tok.strip()
    if tok in env:
        return env[tok]
    if tok.startswith("(") and tok.endswith(")"):
        return complex(tok[1:-1].replace(" ", "").replace("i", "j"))
    return float(tok)


def run_matlab_like(src: str, A: np.ndarray):
    """Execute an emitted MATLAB function on a numpy matrix.

    Supports exactly the statement shapes the generator emits.
    """
    env = {"A": A}
    out_vars = None
    for raw in src.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("function"):
            head = line[len("function"):].split("=")[0].strip()
            out_vars = [v.strip() for v in head.strip("[]").split(",")]
            continue
        if line == "end":
            break
        m = _ML_ASSIGN.match(line)
        if not m:
            raise AssertionError(f"unrecognized line {line!r}")
        target, expr = m.groups()
        expr = expr.strip()
        if expr == "size(A,1)":
            env[target] = A.shape[0]
        elif expr == "eye(n,n)":
            env[target] = np.eye(A.shape[0], dtype=A.dtype)
        elif " \\ " in expr:
            lhs, rhs = expr.split(" \\ ")
            env[target] = np.linalg.solve(env[lhs.strip()], env[rhs.strip()])
        elif " * " in expr and "+" not in expr:
            lhs, rhs = expr.split(" * ")
            env[target] = env[lhs.strip()] @ env[rhs.strip()]
        else:
            acc = None
            for term in expr.split(" + "):
                term = term.strip()
                if "*" in term:
                    c, _, ident = term.partition("*")
                    val = _ml_factor(c, env) * env[ident.strip()]
                else:
                    val = _ml_factor(term, env)
                acc = val if acc is None else acc + val
            env[target] = acc
    assert out_vars is not None, "no function header found"
    results = [env[v] for v in out_vars]
    return results[0] if len(results) == 1 else results


def replay_cgr_scalar(text: str, x):
    """Execute a CGR file as a sequential scalar script (independent of the parser)."""
    env = {"A": x, "I": 1.0}
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#") or line.startswith("graph_coeff_type"):
            continue
        target, _, expr = line.rstrip(";").partition("=")
        target, expr = target.strip(), expr.strip()
        if "*" in expr and "+" in expr:
            t1, t2 = expr.split("+", 1) if not expr.startswith("-") else expr.split("+", 1)
            c1, _, p1 = t1.partition("*")
            c2, _, p2 = t2.partition("*")
            env[target] = env[c1.strip()] * env[p1.strip()] + env[c2.strip()] * env[p2.strip()]
        elif "*" in expr:
            p1, _, p2 = expr.partition("*")
            env[target] = env[p1.strip()] * env[p2.strip()]
        elif "\\" in expr:
            p1, _, p2 = expr.partition("\\")
            env[target] = env[p2.strip()] / env[p1.strip()]
        else:
            env[target] = float(expr)
    return env


# ---------------------------------------------------------------------------
# C compile-and-run harness


_SHIMS_C = r"""
#include <stdlib.h>
#include <math.h>

void mgk_mult(int n, const double *x, const double *y, double *out) {
    for (int i = 0; i < n; i++)
        for (int j = 0; j < n; j++) {
            double s = 0.0;
            for (int k = 0; k < n; k++) s += x[(long) i * n + k] * y[(long) k * n + j];
            out[(long) i * n + j] = s;
        }
}

void mgk_lincomb(int n, double a, const double *x, double b, const double *y, double *out) {
    long nn = (long) n * n;
    for (long k = 0; k < nn; k++) out[k] = a * x[k] + b * y[k];
}

void mgk_copy(int n, const double *x, double *out) {
    long nn = (long) n * n;
    for (long k = 0; k < nn; k++) out[k] = x[k];
}

/* out = x \ y by Gaussian elimination with partial pivoting */
void mgk_solve(int n, const double *x, const double *y, double *out) {
    double *M = (double *) malloc(sizeof(double) * (size_t) n * n);
    mgk_copy(n, x, M);
    mgk_copy(n, y, out);
    for (int col = 0; col < n; col++) {
        int piv = col;
        for (int r = col + 1; r < n; r++)
            if (fabs(M[(long) r * n + col]) > fabs(M[(long) piv * n + col])) piv = r;
        if (piv != col) {
            for (int j = 0; j < n; j++) {
                double t = M[(long) col * n + j];
                M[(long) col * n + j] = M[(long) piv * n + j];
                M[(long) piv * n + j] = t;
                t = out[(long) col * n + j];
                out[(long) col * n + j] = out[(long) piv * n + j];
                out[(long) piv * n + j] = t;
            }
        }
        double d = M[(long) col * n + col];
        for (int r = col + 1; r < n; r++) {
            double f = M[(long) r * n + col] / d;
            for (int j = col; j < n; j++) M[(long) r * n + j] -= f * M[(long) col * n + j];
            for (int j = 0; j < n; j++) out[(long) r * n + j] -= f * out[(long) col * n + j];
        }
    }
    for (int col = n - 1; col >= 0; col--) {
        double d = M[(long) col * n + col];
        for (int j = 0; j < n; j++) {
            double s = out[(long) col * n + j];
            for (int k = col + 1; k < n; k++) s -= M[(long) col * n + k] * out[(long) k * n + j];
            out[(long) col * n + j] = s / d;
        }
    }
    free(M);
}
"""

_MAIN_C = r"""
#include <stdio.h>
#include <stdlib.h>
#include "{fn}.h"

int main(void) {{
    int n;
    if (scanf("%d", &n) != 1) return 1;
    double *A = (double *) malloc(sizeof(double) * (size_t) n * n);
    double *out = (double *) malloc(sizeof(double) * (size_t) n * n);
    for (long k = 0; k < (long) n * n; k++)
        if (scanf("%lf", &A[k]) != 1) return 1;
    {fn}(n, A, out);
    for (long k = 0; k < (long) n * n; k++) printf("%.17e\n", out[k]);
    return 0;
}}
"""


def compile_and_run_c(src: str, header: str, fn: str, A: np.ndarray) -> np.ndarray:
    """Compile emitted C against the reference shims and run it on A (row-major)."""
    n = A.shape[0]
    with tempfile.TemporaryDirectory() as tmp:
        with open(os.path.join(tmp, f"{fn}.c"), "w") as fh:
            fh.write(src)
        with open(os.path.join(tmp, f"{fn}.h"), "w") as fh:
            fh.write(header)
        with open(os.path.join(tmp, "shims.c"), "w") as fh:
            fh.write(_SHIMS_C)
        with open(os.path.join(tmp, "main.c"), "w") as fh:
            fh.write(_MAIN_C.format(fn=fn))
        exe = os.path.join(tmp, "prog")
        subprocess.run(
            ["cc", "-O1", "-o", exe, os.path.join(tmp, "main.c"),
             os.path.join(tmp, f"{fn}.c"), os.path.join(tmp, "shims.c"), "-lm"],
            check=True, capture_output=True,
        )
        feed = f"{n}\n" + "\n".join(repr(float(v)) for v in A.reshape(-1))
        proc = subprocess.run([exe], input=feed, capture_output=True, text=True, check=True)
        vals = [float(tok) for tok in proc.stdout.split()]
    return np.array(vals).reshape(n, n)
