"""Gauss-Newton fitting of graph coefficients to a target scalar function.

The surrogate problem is least squares over a discretized domain boundary:
minimize sum_i |g(z_i; c) - f(z_i)|^2 (optionally scaled by 1/f(z_i) for
relative error).  Each step solves the linearized problem with an SVD
pseudoinverse whose small singular values are dropped; the coefficient
parameterizations in use here are redundant, so the Jacobian is typically
rank-deficient and the drop tolerance is what keeps the steps sane.

Extended-precision least squares goes through the Gram matrix and a
symmetric eigendecomposition (the squared conditioning is harmless at 256
bits, and it is far cheaper than a dense bidiagonalization at that
precision).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from mpmath import mp

from .autodiff import as_point_array, eval_jac
from .evaluation import eval_graph, _precision_context
from .graph import CoeffRef, ComputationGraph, GraphError


class ErrType(str, Enum):
    ABS = "abs"
    REL = "rel"


class LinLsqr(str, Enum):
    COMPLEX_SVD = "complex_svd"
    REAL_SVD = "real_svd"


class OptimizeError(ArithmeticError):
    pass


@dataclass
class Discretization:
    """Ordered complex sample points on a domain boundary."""

    points: np.ndarray
    descriptor: dict | None = None

    @classmethod
    def disk(cls, center, radius, count: int = 200, prec: int | None = None):
        """Closed uniform sampling of a circle: center + r*exp(2*pi*i*k/(count-1)).

        The first and last points coincide, matching the reference
        discretizations used for the frozen fixtures.
        """
        if count < 2:
            raise ValueError("need at least two points")
        if prec is None:
            k = np.arange(count)
            pts = center + radius * np.exp(2j * np.pi * k / (count - 1))
        else:
            with mp.workprec(prec):
                pts = np.array(
                    [center + radius * mp.exp(mp.mpc(0, 2) * mp.pi * k / (count - 1))
                     for k in range(count)],
                    dtype=object,
                )
        return cls(as_point_array(pts), {"center": center, "radius": radius, "count": count})

    @classmethod
    def from_points(cls, pts):
        return cls(as_point_array(pts), None)

    def __len__(self):
        return len(self.points)


@dataclass
class GNConfig:
    errtype: ErrType = ErrType.ABS
    stoptol: float = 1e-12
    maxiter: int = 200
    gamma: float = 1.0
    droptol: float = 0.0
    linlsqr: LinLsqr = LinLsqr.COMPLEX_SVD
    logger: int = 0
    perturbation: float | None = None
    seed: int = 0
    adaptive_gamma: bool = False
    gamma_min: float = 2.0 ** -30
    divergence_factor: float = 10.0
    divergence_patience: int = 30

    def __post_init__(self):
        if not (0 <= self.gamma <= 1):
            raise ValueError("step length must lie in [0, 1]")
        if self.droptol < 0:
            raise ValueError("drop tolerance must be nonnegative")


@dataclass
class GNReport:
    iterations: int
    residual_history: list = field(default_factory=list)
    converged: bool = False
    best_residual: float | None = None

    @property
    def final_residual(self):
        return self.residual_history[-1] if self.residual_history else None


def _target_values(f, pts: np.ndarray) -> np.ndarray:
    vals = [f(z) for z in pts]
    if pts.dtype == object:
        return np.array(vals, dtype=object)
    return np.asarray(vals, dtype=np.complex128)


def residual(g: ComputationGraph, f, discr: Discretization,
             errtype: ErrType = ErrType.ABS, input: str | None = None) -> np.ndarray:
    """r_i = g(z_i) - f(z_i), divided by f(z_i) under relative error."""
    pts = discr.points
    gv = eval_graph(g, pts, input=input)
    fv = _target_values(f, pts)
    r = gv - fv
    if ErrType(errtype) == ErrType.REL:
        bad = [i for i, v in enumerate(fv) if v == 0]
        if bad:
            raise OptimizeError(
                f"relative error undefined: target vanishes at point index {bad[0]}"
            )
        r = r / fv
    return r


def _svd_pinv_numpy(A: np.ndarray, b: np.ndarray, droptol: float):
    u, s, vh = np.linalg.svd(A, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return np.zeros(A.shape[1], dtype=A.dtype), 0
    keep = s > droptol * s[0]
    kept = int(np.count_nonzero(keep))
    if kept == 0:
        return np.zeros(A.shape[1], dtype=A.dtype), 0
    coeff = (u[:, keep].conj().T @ b) / s[keep]
    return vh[keep].conj().T @ coeff, kept


def _gram_pinv_mp(J, b, droptol, hermitian: bool):
    """Pseudoinverse solve via G = J^H J = Q diag(E) Q^H at working precision."""
    N, K = len(J), len(J[0])
    G = mp.matrix(K, K)
    w = [mp.mpf(0)] * K
    for a in range(K):
        cola = [J[i][a] for i in range(N)]
        for c in range(a, K):
            s = mp.fdot(cola, (J[i][c] for i in range(N)), conjugate=hermitian)
            G[c, a] = s  # fdot conjugates its second argument, so s = (J^H J)[c, a]
            G[a, c] = mp.conj(s) if hermitian else s
        w[a] = mp.fdot(b, cola, conjugate=hermitian)
    E, Q = mp.eighe(G) if hermitian else mp.eigsy(G)
    emax = max((abs(E[j]) for j in range(K)), default=mp.mpf(0))
    if emax == 0:
        return [mp.mpf(0)] * K, 0
    drop2 = (mp.mpf(droptol) ** 2) * emax
    delta = [mp.mpf(0)] * K
    kept = 0
    for j in range(K):
        if E[j] <= 0 or E[j] <= drop2:
            continue
        kept += 1
        proj = mp.fdot(w, (Q[t, j] for t in range(K)), conjugate=hermitian) / E[j]
        for t in range(K):
            delta[t] = delta[t] + Q[t, j] * proj
    return delta, kept


def gn_step(J, r, config: GNConfig) -> np.ndarray:
    """Least-squares update direction delta = pinv(J) r with drop tolerance.

    Under ``REAL_SVD`` the real and imaginary parts are stacked so the
    returned update is real.  If every singular value falls below the
    tolerance the step is zero and a warning is emitted.
    """
    entries = getattr(J, "entries", J)
    entries = np.asarray(entries)
    r = np.asarray(r)
    real_mode = LinLsqr(config.linlsqr) == LinLsqr.REAL_SVD
    if entries.dtype == object:
        N, K = entries.shape
        if real_mode:
            Jl = [[entries[i, k].real for k in range(K)] for i in range(N)]
            Jl += [[entries[i, k].imag for k in range(K)] for i in range(N)]
            bl = [r[i].real for i in range(N)] + [r[i].imag for i in range(N)]
            delta, kept = _gram_pinv_mp(Jl, bl, config.droptol, hermitian=False)
        else:
            Jl = [[mp.mpc(entries[i, k]) for k in range(K)] for i in range(N)]
            bl = [mp.mpc(r[i]) for i in range(N)]
            delta, kept = _gram_pinv_mp(Jl, bl, config.droptol, hermitian=True)
        out = np.array(delta, dtype=object)
    else:
        if real_mode:
            A = np.vstack([entries.real, entries.imag])
            b = np.concatenate([np.asarray(r).real, np.asarray(r).imag])
        else:
            A = entries
            b = r
        out, kept = _svd_pinv_numpy(A, b, config.droptol)
    if kept == 0:
        warnings.warn("all singular values below the drop tolerance; zero step")
    return out


def opt_gauss_newton(g: ComputationGraph, f, discr: Discretization, refs,
                     config: GNConfig | None = None,
                     input: str | None = None) -> GNReport:
    """Iterate Gauss-Newton updates c <- c - gamma*delta on the graph's coefficients.

    The graph is modified in place.  ``residual_history`` records the
    max-magnitude residual seen before each applied update; convergence is
    declared when it falls below ``stoptol``.  On stagnation (residual
    above ``divergence_factor`` times the best seen for
    ``divergence_patience`` consecutive iterations) the best coefficients
    are restored and the report is flagged unconverged.
    """
    config = config or GNConfig()
    refs = [CoeffRef(*ref) for ref in refs]
    if not refs:
        raise GraphError("need a nonempty coefficient selection")
    errtype = ErrType(config.errtype)
    real_mode = LinLsqr(config.linlsqr) == LinLsqr.REAL_SVD
    prec = g.coeff_type.prec
    report = GNReport(iterations=0)
    with _precision_context(g, prec):
        pts = discr.points
        fv = _target_values(f, pts)
        if errtype == ErrType.REL and any(v == 0 for v in fv):
            raise OptimizeError("relative error undefined: target vanishes on the discretization")
        if real_mode:
            base = g.get_coeffs(refs)
            if any(getattr(c, "imag", 0) != 0 for c in base):
                raise OptimizeError("real least squares requires real coefficients")
        elif not g.coeff_type.is_complex:
            raise OptimizeError(
                "complex least squares would produce complex updates for a "
                "real-coefficient graph; convert the graph to a complex kind "
                "or select real least squares"
            )
        if config.perturbation:
            rng = np.random.default_rng(config.seed)
            c = g.get_coeffs(refs)
            noise = rng.standard_normal(len(refs))
            if g.coeff_type.is_complex and not real_mode:
                noise = noise + 1j * rng.standard_normal(len(refs))
            g.set_coeffs(refs, [ci + config.perturbation * ni for ci, ni in zip(c, noise)])

        gamma = config.gamma
        best_rmax = None
        best_coeffs = None
        above_best = 0

        def current_residual():
            gv = eval_graph(g, pts, input=input)
            r = gv - fv
            if errtype == ErrType.REL:
                r = r / fv
            return r

        def rnorm2(r):
            return float(sum(abs(x) ** 2 for x in r)) ** 0.5

        for _ in range(config.maxiter):
            r = current_residual()
            rmax = max((float(abs(x)) for x in r), default=0.0)
            if best_rmax is None or rmax < best_rmax:
                best_rmax = rmax
                best_coeffs = g.get_coeffs(refs)
                above_best = 0
            elif rmax > config.divergence_factor * best_rmax:
                above_best += 1
                if above_best >= config.divergence_patience:
                    g.set_coeffs(refs, best_coeffs)
                    report.best_residual = best_rmax
                    if config.logger:
                        print(f"gauss-newton: stagnated at residual {rmax:.3e}; stopping")
                    return report
            else:
                above_best = 0
            if config.logger:
                print(f"gauss-newton iter {report.iterations}: max residual {rmax:.3e}")
            if rmax <= config.stoptol:
                report.converged = True
                report.best_residual = rmax
                return report
            J = eval_jac(g, pts, refs, input=input).entries
            if errtype == ErrType.REL:
                J = J / fv[:, None]
            delta = gn_step(J, r, config)
            c = g.get_coeffs(refs)
            if config.adaptive_gamma:
                rn = rnorm2(r)
                while True:
                    g.set_coeffs(refs, [ci - gamma * di for ci, di in zip(c, delta)])
                    if rnorm2(current_residual()) <= rn or gamma <= config.gamma_min:
                        break
                    gamma /= 2
                gamma = min(config.gamma, 2 * gamma)
            else:
                g.set_coeffs(refs, [ci - gamma * di for ci, di in zip(c, delta)])
            report.residual_history.append(rmax)
            report.iterations += 1
        # out of iterations: keep the best coefficients seen
        r = current_residual()
        rmax = max((float(abs(x)) for x in r), default=0.0)
        if rmax <= config.stoptol:
            report.converged = True
            report.best_residual = rmax
        elif best_rmax is not None and best_rmax < rmax:
            g.set_coeffs(refs, best_coeffs)
            report.best_residual = best_rmax
        else:
            report.best_residual = rmax
    return report
