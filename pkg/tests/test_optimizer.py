import math
import warnings

import numpy as np
import pytest
from mpmath import mp

from matgraph import (
    Discretization,
    ErrType,
    GNConfig,
    LinLsqr,
    OptimizeError,
    bigfloat,
    convert_precision,
    gn_step,
    graph_monomial,
    graph_monomial_degopt,
    opt_gauss_newton,
    residual,
)
from matgraph.targets import exp_target, sqrt1p_target


class TestDiscretization:
    def test_closed_circle_sampling(self):
        d = Discretization.disk(0.0, 0.45, 200)
        assert len(d) == 200
        assert d.points[0] == pytest.approx(0.45)
        assert d.points[-1] == pytest.approx(d.points[0])  # closed: endpoints coincide
        k = 7
        assert d.points[k] == pytest.approx(0.45 * np.exp(2j * np.pi * k / 199))

    def test_high_precision_points(self):
        d = Discretization.disk(0.0, 0.45, 16, prec=256)
        assert d.points.dtype == object
        with mp.workprec(256):
            assert abs(d.points[0] - mp.mpf(0.45)) < mp.mpf(2) ** -250
            assert abs(d.points[4] - mp.mpf(0.45) * mp.exp(mp.mpc(0, 8) * mp.pi / 15)) < mp.mpf(2) ** -250

    def test_count_validation(self):
        with pytest.raises(ValueError):
            Discretization.disk(0, 1, 1)


class TestResidual:
    def test_zero_when_representable(self):
        g, _ = graph_monomial([1.0, 2.0])
        d = Discretization.disk(0, 0.5, 32)
        r = residual(g, lambda z: 1 + 2 * z, d)
        assert np.max(np.abs(r)) < 1e-15

    def test_taylor5_rel_residual_level(self):
        # max_i |p5(z_i) - e^{z_i}| / |e^{z_i}| on the 0.45-circle: the tail
        # is dominated by |z|^6/720 (~1.15e-5), maximized near z = -0.45
        # where |e^z| is smallest, giving ~1.7e-5
        c = [1.0 / math.factorial(j) for j in range(6)]
        g, _ = graph_monomial(c)
        d = Discretization.disk(0, 0.45, 200)
        r = residual(g, lambda z: np.exp(z), d, errtype=ErrType.REL)
        m = np.max(np.abs(r))
        assert 1e-5 <= m <= 3e-5

    def test_abs_vs_rel_scaling_identity(self):
        c = [1.0 / math.factorial(j) for j in range(4)]
        g, _ = graph_monomial(c)
        d = Discretization.disk(0, 0.3, 50)
        ra = residual(g, lambda z: np.exp(z), d, errtype=ErrType.ABS)
        rr = residual(g, lambda z: np.exp(z), d, errtype=ErrType.REL)
        assert np.allclose(rr, ra / np.exp(d.points))

    def test_constant_zero_graph(self):
        g, _ = graph_monomial([0.0])
        d = Discretization.disk(0, 0.5, 16)
        r = residual(g, lambda z: np.exp(z), d)
        assert np.allclose(r, -np.exp(d.points))

    def test_rel_with_vanishing_target(self):
        g, _ = graph_monomial([1.0])
        d = Discretization.from_points([0.0, 1.0, -1.0])
        with pytest.raises(OptimizeError):
            residual(g, lambda z: z, d, errtype=ErrType.REL)


class TestGnStep:
    def test_orthonormal_columns(self):
        rng = np.random.default_rng(41)
        q, _ = np.linalg.qr(rng.standard_normal((12, 4)))
        r = rng.standard_normal(12)
        delta = gn_step(q, r, GNConfig(droptol=0.0))
        assert np.allclose(delta, q.conj().T @ r, rtol=1e-12)

    def test_duplicate_columns_minimum_norm(self):
        # normal-equations oracle on the 3x2 instance with equal columns:
        # the minimum-norm solution splits the coefficient evenly
        col = np.array([1.0, 2.0, 2.0])
        J = np.stack([col, col], axis=1)
        r = np.array([3.0, 1.0, 1.0])
        delta = gn_step(J, r, GNConfig(droptol=1e-12))
        single = col @ r / (col @ col)
        assert np.allclose(delta, [single / 2, single / 2], rtol=1e-12)

    def test_droptol_infinite_zero_step(self):
        J = np.eye(3)
        with warnings.catch_warnings(record=True) as w:
            warnings.simplefilter("always")
            delta = gn_step(J, np.ones(3), GNConfig(droptol=np.inf))
            assert np.all(delta == 0)
            assert any("drop tolerance" in str(x.message) for x in w)

    def test_real_stacking_returns_real(self):
        rng = np.random.default_rng(42)
        J = rng.standard_normal((10, 3)) + 1j * rng.standard_normal((10, 3))
        r = rng.standard_normal(10) + 1j * rng.standard_normal(10)
        delta = gn_step(J, r, GNConfig(linlsqr=LinLsqr.REAL_SVD))
        assert np.isrealobj(delta)
        # oracle: stacked real least squares
        A = np.vstack([J.real, J.imag])
        b = np.concatenate([r.real, r.imag])
        want, *_ = np.linalg.lstsq(A, b, rcond=None)
        assert np.allclose(delta, want, rtol=1e-10)

    def test_mp_real_path_matches_numpy(self):
        rng = np.random.default_rng(43)
        A = rng.standard_normal((9, 4))
        b = rng.standard_normal(9)
        want, *_ = np.linalg.lstsq(A, b, rcond=None)
        Aob = np.array([[mp.mpf(v) for v in row] for row in A], dtype=object)
        bob = np.array([mp.mpf(v) + 0 * mp.mpc(1j) for v in b], dtype=object)
        with mp.workprec(128):
            # complex entries with zero imaginary part exercise the stacking
            delta = gn_step(Aob, bob, GNConfig(linlsqr=LinLsqr.REAL_SVD, droptol=1e-20))
        got = np.array([float(x) for x in delta])
        assert np.allclose(got, want, rtol=1e-10)

    def test_mp_complex_path_matches_numpy(self):
        rng = np.random.default_rng(44)
        A = rng.standard_normal((8, 3)) + 1j * rng.standard_normal((8, 3))
        b = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        want, *_ = np.linalg.lstsq(A, b, rcond=None)
        Aob = np.array([[mp.mpc(v) for v in row] for row in A], dtype=object)
        bob = np.array([mp.mpc(v) for v in b], dtype=object)
        with mp.workprec(128):
            delta = gn_step(Aob, bob, GNConfig(droptol=1e-20))
        got = np.array([complex(x) for x in delta])
        assert np.allclose(got, want, rtol=1e-9)


class TestOptGaussNewton:
    def test_linear_problem_one_exact_step(self):
        # with a linear-in-coefficients graph a single full step reaches the
        # least-squares optimum; the next step is numerically zero
        rng = np.random.default_rng(45)
        g, cref = graph_monomial([0.5, -0.2, 0.1, 0.05])
        d = Discretization.disk(0, 0.8, 60)

        def f(z):
            return np.cos(z)

        config = GNConfig(stoptol=0.0, maxiter=2, droptol=0.0, linlsqr=LinLsqr.REAL_SVD)
        report = opt_gauss_newton(g, f, d, cref, config)
        assert report.iterations == 2
        u = 2.0 ** -53
        c = np.array(g.get_coeffs(cref))
        from matgraph import eval_jac

        J = eval_jac(g, d.points, cref).entries
        r = residual(g, f, d)
        delta = gn_step(J, r, config)
        assert np.linalg.norm(delta) <= 100 * u * max(np.linalg.norm(c), 1.0)

    def test_first_step_never_increases_linear_residual(self):
        rng = np.random.default_rng(46)
        for gamma in (0.25, 0.5, 1.0):
            g, cref = graph_monomial(list(rng.uniform(-1, 1, 5)))
            d = Discretization.disk(0, 0.7, 40)
            f = lambda z: np.exp(z)
            r0 = np.linalg.norm(residual(g, f, d))
            config = GNConfig(stoptol=0.0, maxiter=1, gamma=gamma, droptol=1e-14,
                              linlsqr=LinLsqr.REAL_SVD)
            opt_gauss_newton(g, f, d, cref, config)
            r1 = np.linalg.norm(residual(g, f, d))
            assert r1 <= r0 * (1 + 1e-12)

    def test_already_converged_zero_iterations(self):
        g, cref = graph_monomial([1.0, 1.0])
        d = Discretization.disk(0, 0.5, 16)
        report = opt_gauss_newton(g, lambda z: 1 + z, d, cref,
                                  GNConfig(stoptol=1e-12, linlsqr=LinLsqr.REAL_SVD))
        assert report.converged and report.iterations == 0
        assert report.residual_history == []

    def test_gamma_zero_runs_to_maxiter(self):
        g, cref = graph_monomial([1.0, 1.0])
        before = g.get_coeffs(cref)
        d = Discretization.disk(0, 0.5, 16)
        config = GNConfig(stoptol=1e-30, maxiter=5, gamma=0.0, linlsqr=LinLsqr.REAL_SVD)
        report = opt_gauss_newton(g, lambda z: np.exp(z), d, cref, config)
        assert not report.converged
        assert report.iterations == 5
        assert g.get_coeffs(cref) == before

    def test_real_svd_keeps_coefficients_real(self):
        g, cref = graph_monomial([1.0, 0.9, 0.4])
        d = Discretization.disk(0, 0.5, 40)
        config = GNConfig(linlsqr=LinLsqr.REAL_SVD, maxiter=4, stoptol=1e-14)
        opt_gauss_newton(g, lambda z: np.exp(z), d, cref, config)
        for c in g.get_coeffs(cref):
            assert isinstance(c, float)

    def test_perturbation_seeded_reproducible(self):
        # gamma = 0 keeps the coefficients at start + noise, isolating the
        # symmetry-breaking perturbation itself
        def run_once(amplitude):
            g, cref = graph_monomial([1.0, 1.0, 0.5])
            d = Discretization.disk(0, 0.4, 24)
            config = GNConfig(maxiter=1, stoptol=1e-30, gamma=0.0,
                              perturbation=amplitude, seed=9,
                              linlsqr=LinLsqr.REAL_SVD)
            opt_gauss_newton(g, lambda z: np.exp(z), d, cref, config)
            return g.get_coeffs(cref)

        a, b = run_once(1e-3), run_once(1e-3)
        assert a == b
        clean = run_once(None)
        assert clean == [1.0, 1.0, 0.5]
        assert a != clean
        assert max(abs(x - y) for x, y in zip(a, clean)) < 1e-2

    def test_residual_history_matches_iterations(self):
        g, cref = graph_monomial([1.0, 1.0, 0.4])
        d = Discretization.disk(0, 0.5, 30)
        config = GNConfig(maxiter=3, stoptol=1e-30, linlsqr=LinLsqr.REAL_SVD)
        report = opt_gauss_newton(g, lambda z: np.exp(z), d, cref, config)
        assert len(report.residual_history) == report.iterations

    def test_adaptive_gamma_monotone(self):
        g, cref = graph_monomial([1.0, 1.0, 0.5, 0.1])
        d = Discretization.disk(0, 0.6, 40)
        config = GNConfig(maxiter=8, stoptol=1e-15, adaptive_gamma=True, droptol=1e-14,
                          linlsqr=LinLsqr.REAL_SVD)
        report = opt_gauss_newton(g, lambda z: np.exp(z), d, cref, config)
        hist = report.residual_history
        # accepted steps never increase the 2-norm; the max-norm history
        # should be close to monotone as well for this smooth problem
        assert all(b <= a * (1 + 1e-9) for a, b in zip(hist, hist[1:]))


@pytest.mark.slow
class TestHighPrecisionRun:
    def test_small_degopt_fit_improves(self):
        # tiny version of the full design workflow: m=2, disk 0.3, 64 bits
        c = [1.0 / math.factorial(j) for j in range(4)]
        g, cref = graph_monomial_degopt(c)
        gb = convert_precision(g, bigfloat(128))
        d = Discretization.disk(0, 0.3, 60, prec=128)
        config = GNConfig(errtype=ErrType.REL, stoptol=1e-20, maxiter=25,
                          droptol=1e-13, linlsqr=LinLsqr.REAL_SVD)
        r0 = max(abs(x) for x in residual(gb, exp_target, d, ErrType.REL))
        report = opt_gauss_newton(gb, exp_target, d, cref, config)
        r1 = max(abs(x) for x in residual(gb, exp_target, d, ErrType.REL))
        # capacity-limited: the best degree-4 polynomial has max relative
        # error ~|z|^5/120 ~ 2e-5 on this disk; the warm start is 4.3e-4
        assert float(r1) < float(r0) / 10
        assert float(r1) < 5e-5


def test_sqrt1p_target_rel_error_guard():
    # relative error is undefined when the target vanishes on the domain
    g, cref = graph_monomial([1.0, 0.5])
    d = Discretization.from_points([0.5, -1.0, 0.5j])
    with pytest.raises(OptimizeError):
        opt_gauss_newton(g, sqrt1p_target, d, cref,
                         GNConfig(errtype=ErrType.REL, maxiter=1, linlsqr=LinLsqr.REAL_SVD))


def test_complex_lsq_on_real_graph_rejected():
    g, cref = graph_monomial([1.0, 0.5])
    d = Discretization.disk(0, 0.5, 16)
    with pytest.raises(OptimizeError):
        opt_gauss_newton(g, lambda z: np.exp(z), d, cref,
                         GNConfig(linlsqr=LinLsqr.COMPLEX_SVD, maxiter=1))
