"""Command-line front end.

    matgraph generate  --scheme ps --coeffs 1,1,0.5 --out g.cgr
    matgraph eval      g.cgr --matrix A.csv
    matgraph optimize  g.cgr --target exp --radius 0.45 --out opt.cgr
    matgraph certify   g.cgr
    matgraph compress  g.cgr --out small.cgr
    matgraph codegen   g.cgr --lang c --funname expm13 --out expm13.c
    matgraph convert   g.cgr --type BigFloat256 --out big.cgr

Exit codes: 0 success, 2 usage error, 3 numerical failure, 4 I/O or
format error.  A ``--config`` file of ``key=value`` lines overrides the
corresponding flags; the MATGRAPH_PRECISION environment variable sets the
default precision in bits.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .cgr import CgrError, export_compgraph, import_compgraph
from .codegen import EmitTarget, gen_code
from .degopt import (
    graph_horner,
    graph_horner_degopt,
    graph_monomial,
    graph_monomial_degopt,
    graph_ps,
    graph_ps_degopt,
)
from .erroranalysis import CertificationError, compute_bwd_theta_exp, theta_table_csv
from .evaluation import eval_graph
from .generators import (
    graph_denman_beavers,
    graph_exp_pade_ss,
    graph_newton_schulz,
)
from .graph import ComputationGraph, GraphError, OpKind, compress_graph, convert_precision
from .numerics import CoeffType, SingularMatrixError
from .optimizer import (
    Discretization,
    ErrType,
    GNConfig,
    LinLsqr,
    OptimizeError,
    opt_gauss_newton,
)
from .targets import get_target

USAGE_ERROR = 2
NUMERICAL_ERROR = 3
IO_ERROR = 4


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _parse_complex(text: str) -> complex:
    return complex(text.strip().replace(" ", "").replace("i", "j"))


def _format_entry(v) -> str:
    v = complex(v)
    if v.imag == 0:
        return repr(v.real)
    return f"{v.real!r}{'+' if v.imag >= 0 else '-'}{abs(v.imag)!r}i"


def read_matrix_csv(path: str) -> np.ndarray:
    """CSV matrix, one row per line; complex entries as a+bi."""
    rows = []
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for raw in fh:
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                rows.append([_parse_complex(tok) for tok in line.split(",")])
    except OSError as exc:
        raise CliError(str(exc), IO_ERROR) from exc
    except ValueError as exc:
        raise CliError(f"bad matrix entry in {path}: {exc}", IO_ERROR) from exc
    if not rows or any(len(r) != len(rows[0]) for r in rows):
        raise CliError(f"{path}: ragged or empty matrix", IO_ERROR)
    arr = np.array(rows, dtype=complex)
    if np.all(arr.imag == 0):
        return arr.real
    return arr


def write_matrix_csv(M: np.ndarray, fh):
    M = np.atleast_2d(M)
    for row in M:
        fh.write(",".join(_format_entry(v) for v in row) + "\n")


def _load_graph(path: str) -> ComputationGraph:
    try:
        return import_compgraph(path)
    except OSError as exc:
        raise CliError(str(exc), IO_ERROR) from exc
    except (CgrError, GraphError) as exc:
        raise CliError(f"{path}: {exc}", IO_ERROR) from exc


def _save_graph(g: ComputationGraph, path: str):
    try:
        export_compgraph(g, path)
    except OSError as exc:
        raise CliError(str(exc), IO_ERROR) from exc


def _default_prec() -> int | None:
    env = os.environ.get("MATGRAPH_PRECISION")
    if env:
        try:
            return int(env)
        except ValueError as exc:
            raise CliError(f"bad MATGRAPH_PRECISION {env!r}", USAGE_ERROR) from exc
    return None


def _coeff_type(bits: int | None) -> CoeffType:
    if bits is None or bits == 53:
        return CoeffType()
    return CoeffType(bits)


# -- commands -----------------------------------------------------------------


def cmd_generate(args) -> int:
    scheme = args.scheme
    ct = _coeff_type(args.precision)
    needs_coeffs = {
        "monomial": graph_monomial,
        "horner": graph_horner,
        "ps": graph_ps,
        "monomial-degopt": graph_monomial_degopt,
        "horner-degopt": graph_horner_degopt,
        "ps-degopt": graph_ps_degopt,
    }
    if scheme in needs_coeffs:
        if not args.coeffs:
            raise CliError(f"--coeffs is required for scheme {scheme}", USAGE_ERROR)
        coeffs = [float(c) for c in args.coeffs.split(",")]
        g, _ = needs_coeffs[scheme](coeffs, ct)
    elif scheme == "denman-beavers":
        g, _ = graph_denman_beavers(args.iters, ct)
    elif scheme == "newton-schulz":
        g, _ = graph_newton_schulz(args.iters, ct)
    elif scheme == "exp-pade":
        g, _ = graph_exp_pade_ss(args.degree, args.squarings, ct)
    else:
        raise CliError(f"unknown scheme {scheme!r}", USAGE_ERROR)
    if args.compress:
        compress_graph(g)
    _save_graph(g, args.out)
    print(f"wrote {args.out}")
    return 0


def cmd_eval(args) -> int:
    g = _load_graph(args.graph)
    if args.point is not None:
        z = _parse_complex(args.point)
        value = eval_graph(g, z, input=args.input)
        values = value if isinstance(value, list) else [value]
        for v in values:
            print(_format_entry(v))
        return 0
    if not args.matrix:
        raise CliError("provide --matrix FILE or --point VALUE", USAGE_ERROR)
    A = read_matrix_csv(args.matrix)
    try:
        value = eval_graph(g, A, input=args.input)
    except (SingularMatrixError, ArithmeticError) as exc:
        raise CliError(str(exc), NUMERICAL_ERROR) from exc
    values = value if isinstance(value, list) else [value]
    out = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        for i, v in enumerate(values):
            if len(values) > 1:
                out.write(f"# output {g.outputs[i]}\n")
            write_matrix_csv(np.asarray(v), out)
    finally:
        if args.out:
            out.close()
    return 0


def cmd_optimize(args) -> int:
    g = _load_graph(args.graph)
    # default: optimize in 256-bit arithmetic (override via flag or env)
    prec = args.precision or _default_prec() or 256
    if prec > 53:
        g = convert_precision(g, CoeffType(prec, g.coeff_type.is_complex))
    try:
        f, _ = get_target(args.target)
    except (ValueError, OSError) as exc:
        raise CliError(str(exc), USAGE_ERROR) from exc
    if args.target == "sqrt1p" and args.errtype == "rel" and abs(args.center + 1.0) <= args.radius:
        raise CliError(
            "sqrt1p has a root at -1 inside the requested disk; the relative "
            "error is unusable there (use --errtype abs)",
            NUMERICAL_ERROR,
        )
    discr = Discretization.disk(args.center, args.radius, args.points,
                                prec=g.coeff_type.prec)
    config = GNConfig(
        errtype=ErrType.REL if args.errtype == "rel" else ErrType.ABS,
        stoptol=args.stoptol,
        maxiter=args.maxiter,
        gamma=args.gamma,
        droptol=args.droptol,
        linlsqr=LinLsqr.REAL_SVD if args.linlsqr == "real" else LinLsqr.COMPLEX_SVD,
        logger=1 if args.verbose else 0,
        perturbation=args.perturb,
        seed=args.seed,
        adaptive_gamma=args.adaptive_gamma,
    )
    refs = g.all_coeff_refs()
    if not refs:
        raise CliError("graph has no tunable coefficients", NUMERICAL_ERROR)
    try:
        report = opt_gauss_newton(g, f, discr, refs, config)
    except (OptimizeError, SingularMatrixError, ArithmeticError) as exc:
        raise CliError(str(exc), NUMERICAL_ERROR) from exc
    _save_graph(g, args.out)
    if args.report:
        payload = {
            "iterations": report.iterations,
            "converged": report.converged,
            "best_residual": report.best_residual,
            "residual_history": report.residual_history,
        }
        try:
            with open(args.report, "w", encoding="utf-8") as fh:
                if args.report.endswith(".json"):
                    json.dump(payload, fh, indent=2)
                    fh.write("\n")
                else:
                    fh.write("iteration,max_residual\n")
                    for i, rv in enumerate(report.residual_history):
                        fh.write(f"{i},{rv!r}\n")
        except OSError as exc:
            raise CliError(str(exc), IO_ERROR) from exc
    status = "converged" if report.converged else "not converged"
    best = report.best_residual
    print(f"wrote {args.out} ({status}, {report.iterations} iterations"
          + (f", residual of saved graph {best:.3e}" if best is not None else "") + ")")
    return 0


def cmd_certify(args) -> int:
    g = _load_graph(args.graph)
    flag = None
    try:
        result = compute_bwd_theta_exp(g, u=args.u, nterms=args.nterms, prec=args.precision)
        theta = result.theta
        if result.saturated:
            flag = "bound never crossed u inside the search interval"
    except CertificationError as exc:
        # no certifiable radius: report zero and say why
        theta = 0.0
        flag = str(exc)
    except ArithmeticError as exc:
        raise CliError(str(exc), NUMERICAL_ERROR) from exc
    mults = sum(1 for op in g.operations.values() if op != OpKind.LINCOMB)
    name = os.path.splitext(os.path.basename(args.graph))[0]
    csv = theta_table_csv([(name, mults, theta, args.u, args.nterms)])
    if args.out:
        try:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(csv)
        except OSError as exc:
            raise CliError(str(exc), IO_ERROR) from exc
    sys.stdout.write(csv)
    if flag:
        print(f"# warning: {flag}", file=sys.stderr)
    return 0


def cmd_compress(args) -> int:
    g = _load_graph(args.graph)
    before = len(g.operations)
    compress_graph(g)
    _save_graph(g, args.out)
    print(f"wrote {args.out} ({before} -> {len(g.operations)} nodes)")
    return 0


def cmd_codegen(args) -> int:
    g = _load_graph(args.graph)
    target = EmitTarget(
        dialect="matlab" if args.lang == "matlab" else "c",
        function_name=args.funname,
        fuse_lincomb=not args.no_fuse,
    )
    try:
        gen_code(g, target, args.out)
    except GraphError as exc:
        raise CliError(str(exc), USAGE_ERROR) from exc
    except OSError as exc:
        raise CliError(str(exc), IO_ERROR) from exc
    print(f"wrote {args.out}")
    return 0


def cmd_convert(args) -> int:
    g = _load_graph(args.graph)
    try:
        ct = CoeffType.from_tag(args.type)
        g2 = convert_precision(g, ct)
    except ValueError as exc:
        raise CliError(str(exc), NUMERICAL_ERROR) from exc
    _save_graph(g2, args.out)
    print(f"wrote {args.out}")
    return 0


# -- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="matgraph", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"matgraph {__version__}")
    p.add_argument("--config", help="key=value file overriding flags", default=None)
    sub = p.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="construct a named graph and save it")
    gen.add_argument("--scheme", required=True,
                     choices=["monomial", "horner", "ps", "monomial-degopt",
                              "horner-degopt", "ps-degopt", "denman-beavers",
                              "newton-schulz", "exp-pade"])
    gen.add_argument("--coeffs", help="comma-separated polynomial coefficients")
    gen.add_argument("--iters", type=int, default=4)
    gen.add_argument("--degree", type=int, default=13)
    gen.add_argument("--squarings", type=int, default=0)
    gen.add_argument("--precision", type=int, default=None, help="coefficient bits")
    gen.add_argument("--compress", action="store_true")
    gen.add_argument("--out", required=True)
    gen.set_defaults(func=cmd_generate)

    ev = sub.add_parser("eval", help="evaluate a graph at a matrix or scalar")
    ev.add_argument("graph")
    ev.add_argument("--matrix", help="CSV file, complex entries as a+bi")
    ev.add_argument("--point", help="scalar evaluation point")
    ev.add_argument("--input", default=None, help="input node id override")
    ev.add_argument("--out", default=None)
    ev.set_defaults(func=cmd_eval)

    opt = sub.add_parser("optimize", help="fit coefficients to a target function")
    opt.add_argument("graph")
    opt.add_argument("--target", required=True, help="exp, sqrt1p, or series:<file>")
    opt.add_argument("--center", type=float, default=0.0)
    opt.add_argument("--radius", type=float, required=True)
    opt.add_argument("--points", type=int, default=200)
    opt.add_argument("--precision", type=int, default=None)
    opt.add_argument("--stoptol", type=float, default=4e-15)
    opt.add_argument("--droptol", type=float, default=1e-15)
    opt.add_argument("--gamma", type=float, default=1.0)
    opt.add_argument("--maxiter", type=int, default=200)
    opt.add_argument("--errtype", choices=["abs", "rel"], default="rel")
    opt.add_argument("--linlsqr", choices=["real", "complex"], default="real")
    opt.add_argument("--perturb", type=float, default=None)
    opt.add_argument("--seed", type=int, default=0)
    opt.add_argument("--adaptive-gamma", action="store_true")
    opt.add_argument("--verbose", action="store_true")
    opt.add_argument("--report", default=None, help="JSON or CSV residual history")
    opt.add_argument("--out", required=True)
    opt.set_defaults(func=cmd_optimize)

    cert = sub.add_parser("certify", help="backward-error radius for exp approximants")
    cert.add_argument("graph")
    cert.add_argument("--u", type=float, default=2.0 ** -53)
    cert.add_argument("--nterms", type=int, default=100)
    cert.add_argument("--precision", type=int, default=1024)
    cert.add_argument("--out", default=None)
    cert.set_defaults(func=cmd_certify)

    comp = sub.add_parser("compress", help="remove redundant operations")
    comp.add_argument("graph")
    comp.add_argument("--out", required=True)
    comp.set_defaults(func=cmd_compress)

    cg = sub.add_parser("codegen", help="emit MATLAB or C source")
    cg.add_argument("graph")
    cg.add_argument("--lang", choices=["matlab", "c"], required=True)
    cg.add_argument("--funname", default="evalgraph")
    cg.add_argument("--no-fuse", action="store_true")
    cg.add_argument("--out", required=True)
    cg.set_defaults(func=cmd_codegen)

    cv = sub.add_parser("convert", help="change the coefficient type")
    cv.add_argument("graph")
    cv.add_argument("--type", required=True, help="Float64, ComplexF64, BigFloat<bits>, ...")
    cv.add_argument("--out", required=True)
    cv.set_defaults(func=cmd_convert)
    return p


def _apply_config(args, parser):
    if not args.config:
        return args
    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            pairs = {}
            for raw in fh:
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise CliError(f"bad config line {line!r}", USAGE_ERROR)
                key, _, value = line.partition("=")
                pairs[key.strip().replace("-", "_")] = value.strip()
    except OSError as exc:
        raise CliError(str(exc), IO_ERROR) from exc
    for key, value in pairs.items():
        if not hasattr(args, key):
            raise CliError(f"unknown config key {key!r}", USAGE_ERROR)
        current = getattr(args, key)
        if isinstance(current, bool):
            setattr(args, key, value.lower() in ("1", "true", "yes", "on"))
        elif isinstance(current, int) and not isinstance(current, bool):
            setattr(args, key, int(value))
        elif isinstance(current, float):
            setattr(args, key, float(value))
        else:
            setattr(args, key, value)
    return args


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args = _apply_config(args, parser)
        return args.func(args)
    except CliError as exc:
        print(f"matgraph: {exc}", file=sys.stderr)
        return exc.code
    except (GraphError, CgrError) as exc:
        print(f"matgraph: {exc}", file=sys.stderr)
        return IO_ERROR
    except (SingularMatrixError, OptimizeError, CertificationError, ArithmeticError) as exc:
        print(f"matgraph: {exc}", file=sys.stderr)
        return NUMERICAL_ERROR


if __name__ == "__main__":
    sys.exit(main())
