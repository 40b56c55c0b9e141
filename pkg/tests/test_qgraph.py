"""Quantum graph determinants: exponential-sum ring, matrix assembly,
commensurable lattice reduction, and structural classification."""

import cmath
import math

import numpy as np
import pytest

from resonance_atlas.qgraph import (DET_DIM_CAP, ExpSum, GraphError,
                                    GraphDeterminant, GraphSpec,
                                    IncommensurableError, KSHStructureError,
                                    PolynomialCoefficientError, assemble_A,
                                    classify_KSH, commensurable_reduce,
                                    graph_resonances, symbolic_det)
from resonance_atlas.rootfind import SearchRect

TWO_PI = 2 * math.pi


def lasso_graph():
    """One loop of length 1 and one lead at the same vertex."""
    return GraphSpec([0], [(0, 0, 1.0)], [0])


def haar_unitary(rng, d):
    z = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_tree(rng, n_vertices, n_leads, unitary=False):
    edges = []
    for v in range(1, n_vertices):
        p = int(rng.integers(0, v))
        edges.append((p, v, float(rng.uniform(0.4, 2.0))))
    leads = [int(rng.integers(0, n_vertices)) for _ in range(n_leads)]
    g = GraphSpec(range(n_vertices), edges, leads)
    if not unitary:
        return g
    coupling = {}
    for v in range(n_vertices):
        d = g.degree(v)
        if d:
            coupling[v] = haar_unitary(rng, d)
    return GraphSpec(range(n_vertices), edges, leads, coupling)


class TestExpSum:
    def test_merge_and_sort(self):
        F = ExpSum.from_terms([(1e-12, (2.0,)), (0.0, (1.0,)), (-3.0, (5.0,))])
        assert F.frequencies == (-3.0, 0.0)
        assert F.terms[1][1] == (3.0,)

    def test_dust_dropped_relative_to_peak(self):
        F = ExpSum.from_terms([(0.0, (1e-30,)), (5.0, (1.0,))])
        assert F.frequencies == (5.0,)

    def test_trailing_zero_trim(self):
        F = ExpSum.from_terms([(0.0, (1.0, 2.0, 0.0, 0.0))])
        assert F.terms == ((0.0, (1.0, 2.0)),)

    def test_eval_oracle(self):
        rng = np.random.default_rng(3)
        terms = [(-1.5, (0.3, -0.2)), (0.0, (1.0,)), (2.0, (0.0, 0.0, 0.5))]
        F = ExpSum.from_terms(terms)
        for _ in range(8):
            z = complex(rng.uniform(-3, 3), rng.uniform(-2, 2))
            want = sum(sum(c * z ** m for m, c in enumerate(cs))
                       * cmath.exp(1j * b * z) for b, cs in terms)
            assert F.eval(z) == pytest.approx(want, rel=1e-12)

    def test_ring_operations_match_pointwise(self):
        F = ExpSum.from_terms([(0.0, (1.0, 1j)), (1.0, (2.0,))])
        G = ExpSum.from_terms([(-0.5, (0.5,)), (1.0, (-1.0, 0.0, 3.0))])
        for z in (0.3 - 0.2j, -1.1 + 0.4j, 2.0 - 1.5j):
            assert (F + G)(z) == pytest.approx(F(z) + G(z), rel=1e-12)
            assert (F - G)(z) == pytest.approx(F(z) - G(z), rel=1e-12)
            assert (F * G)(z) == pytest.approx(F(z) * G(z), rel=1e-12)
            assert F.scale(2j)(z) == pytest.approx(2j * F(z), rel=1e-12)

    def test_flags(self):
        assert ExpSum(()).is_zero
        assert ExpSum.constant(2.0).constant_coefficients
        assert not ExpSum.monomial(1.0, (0.0, 1.0)).constant_coefficients

    def test_zeta_plane_form(self):
        F = ExpSum.from_terms([(0.5, (1.0, -2.0)), (2.0, (3.0,))])
        D = F.to_exppoly()
        b0 = F.frequencies[0]
        for z in (1.0 - 0.5j, -2.0 + 0.3j):
            lhs = F(z)
            rhs = cmath.exp(1j * b0 * z) * D.eval(-1j * z)
            assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_normalized_coefficients(self):
        F = ExpSum.from_terms([(0.0, (2.0,)), (1.0, (-4.0, 6.0))])
        assert F.normalized_coefficients() == ((1.0,), (-2.0, 3.0))


class TestGraphSpec:
    def test_rejects_bad_input(self):
        with pytest.raises(GraphError):
            GraphSpec([0, 0], [], [])
        with pytest.raises(GraphError):
            GraphSpec([0], [(0, 1, 1.0)], [])
        with pytest.raises(GraphError):
            GraphSpec([0], [(0, 0, -1.0)], [])
        with pytest.raises(GraphError):
            GraphSpec([0], [], [1])
        with pytest.raises(GraphError):
            GraphSpec([0], [(0, 0, 1.0)], [0], coupling="dirichlet")

    def test_rejects_bad_unitaries(self):
        with pytest.raises(GraphError):
            GraphSpec([0], [(0, 0, 1.0)], [0], coupling={})
        with pytest.raises(GraphError):
            GraphSpec([0], [(0, 0, 1.0)], [0],
                      coupling={0: np.eye(2)})
        with pytest.raises(GraphError):
            GraphSpec([0], [(0, 0, 1.0)], [0],
                      coupling={0: 2.0 * np.eye(3)})

    def test_degree_and_channel_order(self):
        g = lasso_graph()
        assert g.degree(0) == 3
        assert g.channels(0) == [("edge", 0, "u"), ("edge", 0, "v"),
                                 ("lead", 0, "")]
        assert g.dim == 3

    def test_json_round_trip_kirchhoff(self):
        g = GraphSpec([0, 1], [(0, 1, 1.5)], [0, 0, 1])
        h = GraphSpec.from_json(g.to_json())
        assert h.vertices == g.vertices
        assert h.edges == g.edges
        assert h.leads == g.leads
        assert h.coupling == "kirchhoff"

    def test_json_round_trip_unitary(self):
        rng = np.random.default_rng(5)
        g = random_tree(rng, 3, 2, unitary=True)
        h = GraphSpec.from_json(g.to_json())
        assert h.edges == g.edges
        for v in g.vertices:
            if g.degree(v):
                assert np.allclose(h.coupling[v], g.coupling[v])


class TestDeterminants:
    def test_lasso_symbolic(self):
        F = symbolic_det(lasso_graph())
        assert F.frequencies == (0.0, 1.0, 2.0)
        nc = F.normalized_coefficients()
        assert nc in (((3,), (-4,), (1,)), ((-3,), (4,), (-1,)))

    def test_dead_end_edge_is_reflective(self):
        # a lead against a Neumann wall scatters unitarily: the
        # determinant is constant and there are no resonances at all
        g = GraphSpec([0, 1], [(0, 1, 0.7)], [0])
        F = symbolic_det(g)
        assert F.terms == ((0.0, (-2 + 0j,)),)

    def test_symbolic_matches_numeric_kirchhoff(self):
        rng = np.random.default_rng(17)
        for _ in range(6):
            g = random_tree(rng, int(rng.integers(2, 5)),
                            int(rng.integers(1, 3)))
            F = symbolic_det(g)
            for _ in range(4):
                z = complex(rng.uniform(-3, 3), rng.uniform(-1.5, 1.5))
                if abs(z) < 0.1:
                    continue
                det = complex(np.linalg.det(assemble_A(g, z)))
                scale = max(1.0, abs(det))
                assert abs(F(z) - det) <= 1e-8 * scale

    def test_symbolic_matches_numeric_unitary(self):
        rng = np.random.default_rng(19)
        for _ in range(4):
            g = random_tree(rng, 3, 2, unitary=True)
            F = symbolic_det(g)
            assert not F.is_zero
            for _ in range(4):
                z = complex(rng.uniform(-3, 3), rng.uniform(-1.5, 1.5))
                if abs(z) < 0.1:
                    continue
                det = complex(np.linalg.det(assemble_A(g, z)))
                scale = max(1.0, abs(det))
                assert abs(F(z) - det) <= 1e-8 * scale

    def test_vectorized_determinant_handle(self):
        g = lasso_graph()
        h = GraphDeterminant(g)
        zs = np.array([1.0 - 0.2j, 2.5 + 0.1j, -3.0 - 1.0j])
        vals = h(zs)
        for z, v in zip(zs, vals):
            assert v == pytest.approx(complex(np.linalg.det(
                assemble_A(g, z))), rel=1e-12)

    def test_dimension_cap(self):
        g = GraphSpec(range(7), [(i, i + 1, 1.0) for i in range(6)], [0])
        assert g.dim == 13
        with pytest.raises(GraphError):
            symbolic_det(g)

    def test_origin_is_rejected_numerically(self):
        with pytest.raises(GraphError):
            assemble_A(lasso_graph(), 0.0)


class TestCommensurable:
    def test_lasso_lattice(self):
        form = commensurable_reduce(symbolic_det(lasso_graph()))
        assert form.beta == pytest.approx(1.0)
        assert form.degrees == (0, 1, 2)
        xi = sorted(x.real for x, _ in form.xi_roots)
        assert xi == pytest.approx([1.0, 3.0], abs=1e-9)
        assert form.spurious == ()
        assert form.has_embedded
        assert form.min_modulus == pytest.approx(1.0)

    def test_third_length_refines_beta(self):
        F = ExpSum.from_terms([(0.0, (1.0,)), (1.0 / 3.0, (1.0,)),
                               (1.0, (1.0,))])
        form = commensurable_reduce(F)
        assert form.beta == pytest.approx(1.0 / 3.0)
        assert form.degrees == (0, 1, 3)

    def test_inside_unit_disk_roots_are_spurious(self):
        # P(w) = (w - 0.5)(w - 3): the root inside the unit disk cannot
        # generate a lattice of determinant zeros
        F = ExpSum.from_terms([(0.0, (1.5,)), (1.0, (-3.5,)), (2.0, (1.0,))])
        form = commensurable_reduce(F)
        assert form.spurious == (pytest.approx(0.5 + 0j),)
        assert form.xi_roots == ((pytest.approx(3.0 + 0j), 1),)
        assert not form.has_embedded

    def test_pi_ratio_is_incommensurable(self):
        F = ExpSum.from_terms([(0.0, (1.0,)), (1.0, (1.0,)),
                               (math.pi, (1.0,))])
        with pytest.raises(IncommensurableError):
            commensurable_reduce(F)

    def test_polynomial_coefficients_rejected(self):
        F = ExpSum.from_terms([(0.0, (1.0, 2.0)), (1.0, (1.0,))])
        with pytest.raises(PolynomialCoefficientError):
            commensurable_reduce(F)

    def test_degenerate_sums_rejected(self):
        with pytest.raises(GraphError):
            commensurable_reduce(ExpSum(()))
        with pytest.raises(GraphError):
            commensurable_reduce(ExpSum.constant(2.0))

    def test_lattice_points_enumeration(self):
        form = commensurable_reduce(symbolic_det(lasso_graph()))
        rect = SearchRect.from_bounds(0.5, 30.0, -2.0, 0.5)
        pts = form.lattice_points(rect)
        assert len(pts) == 8
        for xi, k in pts:
            t = round(k.real / TWO_PI)
            want = TWO_PI * t - 1j * math.log(abs(xi))
            assert k == pytest.approx(want, abs=1e-12)


class TestClassification:
    def test_lasso_is_neutral(self):
        rep = classify_KSH(symbolic_det(lasso_graph()))
        assert rep.mu_max == 0.0
        assert rep.neutral_strip
        assert rep.segments == ()

    def test_energy_dependent_coupling_gives_slope(self):
        w = 1j
        U1 = np.array([[(w - 1) / 2, -(w + 1) / 2],
                       [-(w + 1) / 2, (w - 1) / 2]])
        g = GraphSpec([0, 1], [(0, 1, 1.0)], [1],
                      coupling={0: np.array([[1j]]), 1: U1})
        F = symbolic_det(g)
        assert F.frequencies == (0.0, 2.0)
        rep = classify_KSH(F)
        assert rep.mu_max == pytest.approx(0.5)
        assert len(rep.segments) == 1
        assert rep.segments[0][1] == 1
        assert not rep.neutral_strip

    def test_advanced_structure_rejected(self):
        F = ExpSum.from_terms([(0.0, (1.0,)), (2.0, (0.0, 0.0, 1.0))])
        with pytest.raises(KSHStructureError):
            classify_KSH(F)


class TestGraphResonances:
    def test_lasso_zeros_sit_on_the_lattice(self):
        g = lasso_graph()
        rect = SearchRect.from_bounds(0.5, 30.0, -2.0, 0.5)
        res = graph_resonances(g, rect)
        form = commensurable_reduce(symbolic_det(g))
        pts = form.lattice_points(rect)
        assert res.total == len(pts) == 8
        for z, m in res.zeros:
            assert m == 1
            assert min(abs(z - k) for _, k in pts) < 1e-7

    def test_origin_puncture_enforced(self):
        with pytest.raises(GraphError):
            graph_resonances(lasso_graph(),
                             SearchRect.from_bounds(-1.0, 1.0, -1.0, 1.0))
