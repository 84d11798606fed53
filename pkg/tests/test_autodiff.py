import math

import numpy as np
import pytest
from mpmath import mp

from matgraph import (
    CoeffRef,
    ComputationGraph,
    bigfloat,
    convert_precision,
    eval_jac,
    finite_diff_jac,
    graph_monomial,
    graph_monomial_degopt,
)
from matgraph.optimizer import Discretization

from support import random_graph


def circle_discr(n=200, r=0.45):
    return r * np.exp(1j * 2 * np.pi * np.arange(n) / (n - 1))


class TestJacobianFixtures:
    def test_monomial_exp_singular_values(self):
        c = [1.0 / math.factorial(j) for j in range(6)]
        g, cref = graph_monomial(c)
        J = eval_jac(g, circle_discr(), cref)
        assert J.shape == (200, 6)
        sv = np.linalg.svd(J.entries, compute_uv=False)
        expected = [14.142189931772608, 6.363885389264312, 2.863711391309838,
                    1.2886540714299903, 0.579886987450398, 0.2609452239018225]
        assert np.allclose(sv, expected, rtol=1e-6)

    def test_degopt_rank(self):
        c = [1.0 / math.factorial(j) for j in range(6)]
        g, cref = graph_monomial_degopt(c)
        J = eval_jac(g, circle_discr(), cref)
        assert J.shape == (200, 34)
        sv = np.linalg.svd(J.entries, compute_uv=False)
        assert int(np.sum(sv > 1e-12 * sv[0])) == 9

    def test_unreachable_ref_gives_zero_column(self):
        g, cref = graph_monomial([1.0, 2.0])
        g.add_lincomb("dead", 3.0, "A", 4.0, "I")
        J = eval_jac(g, circle_discr(16), [CoeffRef("dead", 1)])
        assert np.all(J.entries == 0)

    def test_linear_y_columns_equal_basis_values(self):
        # columns addressed by the final-combination coefficients are the
        # basis values themselves (the evaluation is linear in them)
        from matgraph import Degopt, eval_graph, graph_degopt

        rng = np.random.default_rng(31)
        HA = [list(rng.uniform(-1, 1, k + 2)) for k in range(2)]
        HB = [list(rng.uniform(-1, 1, k + 2)) for k in range(2)]
        y = list(rng.uniform(-1, 1, 4))
        g, cref = graph_degopt(Degopt(HA, HB, y))
        pts = circle_discr(20)
        yrefs = cref[-4:]
        J = eval_jac(g, pts, yrefs)
        basis = [np.ones(20, complex), pts]
        for name in ("B3", "B4"):
            gb = g.copy()
            gb.set_outputs([name])
            basis.append(np.asarray([complex(v) for v in __import__("matgraph").eval_graph(gb, pts)]))
        for k in range(4):
            assert np.allclose(J.entries[:, k], basis[k], rtol=1e-13, atol=1e-15)


class TestFiniteDifferenceAgreement:
    def test_example_graph_binary64(self):
        c = [1.0 / math.factorial(j) for j in range(6)]
        g, cref = graph_monomial(c)
        pts = circle_discr(40)
        J1 = eval_jac(g, pts, cref).entries
        J2 = finite_diff_jac(g, pts, cref, h=1e-7).entries
        mask = np.abs(J1) > 1e-10
        # difference-quotient rounding noise is ~u/(2h*|J|) ~ 5e-8 for the
        # smallest entries here
        assert np.max(np.abs((J1 - J2)[mask] / J1[mask])) <= 1e-6

    def test_linear_graph_exact_any_h(self):
        # no h^2 truncation term for a linear-in-coefficients graph: the
        # deviation is pure rounding, which scales like u/h
        g, cref = graph_monomial([1.0, 2.0, 3.0])
        pts = circle_discr(10)
        u = 2.0 ** -53
        J1 = eval_jac(g, pts, cref).entries
        for h in (1e-3, 1e-7, 0.25):
            J2 = finite_diff_jac(g, pts, cref, h=h).entries
            assert np.abs(J1 - J2).max() <= 16 * u * (1 + 1 / h)

    def test_high_precision_agreement(self):
        c = [1.0 / math.factorial(j) for j in range(5)]
        g, cref = graph_monomial(c)
        gb = convert_precision(g, bigfloat(256))
        pts = Discretization.disk(0, 0.45, 12, prec=256).points
        J1 = eval_jac(gb, pts, cref).entries
        with mp.workprec(256):
            J2 = finite_diff_jac(gb, pts, cref, h=mp.mpf(2) ** -64).entries
            scale = max(abs(v) for v in J1.reshape(-1))
            diff = max(abs(a - b) for a, b in zip(J1.reshape(-1), J2.reshape(-1)))
            assert diff <= scale * mp.mpf(2) ** -100

    def test_complex_step(self):
        c = [1.0 / math.factorial(j) for j in range(6)]
        g, cref = graph_monomial(c)
        pts = circle_discr(10)
        J1 = eval_jac(g, pts, cref).entries
        J2 = finite_diff_jac(g, pts, cref, h=1e-7, complex_step=True).entries
        assert np.allclose(J1, J2, rtol=1e-6, atol=1e-10)

    def test_random_graphs_within_tolerance(self):
        # acceptance 8(a) scope lives in test_acceptance; spot-check here.
        # The difference quotient runs at 256 bits so its own noise cannot
        # mask entries that are small but above the exclusion cutoff.
        rng = np.random.default_rng(32)
        for _ in range(10):
            g = random_graph(rng, n_nodes=10)
            refs = g.all_coeff_refs()
            if not refs:
                continue
            pts = rng.uniform(-1, 1, 8) + 1j * rng.uniform(-1, 1, 8)
            pts /= np.maximum(1.0, np.abs(pts))
            J1 = eval_jac(g, pts, refs).entries
            gb = convert_precision(g, bigfloat(256))
            with mp.workprec(256):
                J2 = finite_diff_jac(gb, np.array([mp.mpc(z) for z in pts], dtype=object),
                                     refs, h=mp.mpf(2) ** -40).entries
            J2 = np.array([[complex(v) for v in row] for row in J2])
            mask = np.abs(J1) > 1e-10
            if mask.any():
                assert np.max(np.abs((J1 - J2)[mask] / J1[mask])) <= 1e-6


class TestErrors:
    def test_singularity_names_point(self):
        g = ComputationGraph()
        g.add_lincomb("D", 1.0, "A", 0.0, "I")
        g.add_ldiv("X", "D", "I")
        g.add_lincomb("S", 1.0, "X", 0.0, "I")
        g.set_outputs(["S"])
        pts = np.array([1.0, 0.0, 2.0], dtype=complex)
        from matgraph import SingularMatrixError

        with pytest.raises(SingularMatrixError, match="index 1"):
            eval_jac(g, pts, [CoeffRef("S", 1)])

    def test_multi_output_rejected(self):
        from matgraph import GraphError

        g, cref = graph_monomial([1.0, 1.0, 1.0])
        g.add_output("A2")
        with pytest.raises(GraphError):
            eval_jac(g, circle_discr(8), cref)
