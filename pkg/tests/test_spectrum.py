import math

import numpy as np
import pytest
import scipy.linalg as sla

from specbound import ambient as amb
from specbound import spectrum
from specbound.ambient import Constant, Warped, WarpSpec
from specbound.quadrature import icosphere
from specbound.surface import ZonalGraph, make_geodesic_sphere, random_star_graph


class TestMesh:
    def test_unit_sphere_chords(self, r3):
        m = spectrum.build_intrinsic_mesh(make_geodesic_sphere(r3, 1.0), 2)
        v = m.directions
        chord = np.linalg.norm(v[m.edges[:, 0]] - v[m.edges[:, 1]], axis=1)
        assert np.allclose(m.edge_lengths, chord, rtol=1e-15)

    def test_area_converges(self, r3):
        areas = [spectrum.build_intrinsic_mesh(make_geodesic_sphere(r3, 1.0), l).total_area()
                 for l in (3, 4, 5)]
        errs = [4 * math.pi - a for a in areas]
        assert all(e > 0 for e in errs)
        assert 1.8 < math.log2(errs[0] / errs[1]) < 2.2

    def test_hyperbolic_edges_are_geodesic(self, h3):
        g = make_geodesic_sphere(h3, 0.7)
        m = spectrum.build_intrinsic_mesh(g, 2)
        e = m.edges[0]
        d = amb.geodesic_distance(h3, (0.7, m.directions[e[0]]), (0.7, m.directions[e[1]]))
        assert m.edge_lengths[0] == pytest.approx(d, rel=1e-14)

    def test_topology(self, r3):
        m = spectrum.build_intrinsic_mesh(make_geodesic_sphere(r3, 1.0), 3)
        assert m.euler_characteristic == 2

    def test_level_range(self, r3):
        with pytest.raises(ValueError):
            spectrum.build_intrinsic_mesh(make_geodesic_sphere(r3, 1.0), 8)
        with pytest.raises(ValueError):
            spectrum.build_intrinsic_mesh(make_geodesic_sphere(r3, 1.0), 1)

    def test_needs_surface(self, ch2):
        with pytest.raises(ValueError):
            spectrum.build_intrinsic_mesh(make_geodesic_sphere(ch2, 0.5), 3)

    def test_warped_edge_third_order(self):
        # warped lengths of a round sphere against exact constant-curvature chords' geodesics
        w = Warped(3, WarpSpec("SINH_DELTA", 2.0, 1.0), amb.CurvatureClass("PINCHED_NEG", 1.0))
        h = Constant(3, -1.0)
        gw = random_star_graph(w, 4, 0.6)
        gc = ZonalGraph(h, gw.r0, gw.terms)
        errs = []
        for lv in (3, 4, 5):
            a = spectrum.build_intrinsic_mesh(gw, lv).edge_lengths
            b = spectrum.build_intrinsic_mesh(gc, lv).edge_lengths
            errs.append(np.max(np.abs(a - b)))
        assert math.log2(errs[0] / errs[1]) > 2.5 and math.log2(errs[1] / errs[2]) > 2.5


class TestOperator:
    def test_kernel_and_symmetry(self, h3):
        op = spectrum.assemble(spectrum.build_intrinsic_mesh(random_star_graph(h3, 1, 0.7), 3))
        S = op.stiffness
        assert abs(S - S.T).max() < 1e-14
        assert np.max(np.abs(S @ np.ones(S.shape[0]))) < 1e-12
        assert np.all(op.mass > 0)

    def test_mass_equals_area(self, r3):
        m = spectrum.build_intrinsic_mesh(make_geodesic_sphere(r3, 1.0), 3)
        assert math.fsum(spectrum.assemble(m).mass) == pytest.approx(m.total_area(), rel=1e-14)

    def test_methods_agree(self, h3):
        op = spectrum.assemble(spectrum.build_intrinsic_mesh(random_star_graph(h3, 5, 0.8), 4))
        a = spectrum.smallest_positive_eigenvalue(op, "dense").lambda1
        b = spectrum.smallest_positive_eigenvalue(op, "shift-invert").lambda1
        assert abs(a - b) <= 1e-9 * a

    def test_against_generalized_dense(self, r3):
        op = spectrum.assemble(spectrum.build_intrinsic_mesh(random_star_graph(r3, 2, 1.0), 2))
        ev = sla.eigh(op.stiffness.toarray(), np.diag(op.mass), eigvals_only=True)
        lam = spectrum.smallest_positive_eigenvalue(op).lambda1
        assert lam == pytest.approx(ev[1], rel=1e-12)

    def test_eigenvector_normalized(self, r3):
        res = spectrum.solve(random_star_graph(r3, 2, 1.0), 3)
        op = spectrum.assemble(spectrum.build_intrinsic_mesh(random_star_graph(r3, 2, 1.0), 3))
        x = res.eigenvector
        assert abs(op.mass @ x) < 1e-12
        assert x @ (op.mass * x) == pytest.approx(1.0, rel=1e-12)
        assert res.residual < 1e-8

    def test_scaling(self, r3):
        g = random_star_graph(r3, 8, 1.0)
        a = spectrum.solve(g, 3).lambda1
        b = spectrum.solve(g.scaled(2.0), 3).lambda1
        assert b == pytest.approx(a / 4, rel=1e-12)

    def test_permutation_invariance(self, r3, rng):
        m = spectrum.build_intrinsic_mesh(random_star_graph(r3, 8, 1.0), 3)
        perm = rng.permutation(m.n_vertices)
        inv = np.argsort(perm)
        faces = inv[m.faces]
        from specbound import kernels
        rows, cols, vals, mass, _ = kernels.cotan_assemble(faces, m.face_lengths)
        import scipy.sparse as sp
        S = sp.coo_matrix((vals, (rows, cols)), shape=(m.n_vertices,) * 2).tocsr()
        a = spectrum.smallest_positive_eigenvalue(spectrum.assemble(m)).lambda1
        b = spectrum.smallest_positive_eigenvalue(spectrum.SpectralOperator(S, mass, m)).lambda1
        assert b == pytest.approx(a, rel=1e-12)

    def test_variational_upper_bound(self, h3, rng):
        op = spectrum.assemble(spectrum.build_intrinsic_mesh(random_star_graph(h3, 5, 0.8), 3))
        lam = spectrum.smallest_positive_eigenvalue(op).lambda1
        m = op.mass
        for _ in range(20):
            x = rng.standard_normal(len(m))
            x -= (m @ x) / m.sum()
            assert x @ (op.stiffness @ x) / (x @ (m * x)) >= lam * (1 - 1e-12)

    def test_sphere_multiplicity(self, r3):
        op = spectrum.assemble(spectrum.build_intrinsic_mesh(make_geodesic_sphere(r3, 1.0), 3))
        n = len(op.mass)
        d = 1 / np.sqrt(op.mass)
        ev = np.linalg.eigvalsh((op.stiffness.toarray() * d).T * d)
        assert np.ptp(ev[1:4]) < 1e-10 * ev[1]
        assert ev[4] > 2 * ev[1]

    def test_unknown_method(self, r3):
        op = spectrum.assemble(spectrum.build_intrinsic_mesh(make_geodesic_sphere(r3, 1.0), 2))
        with pytest.raises(ValueError):
            spectrum.smallest_positive_eigenvalue(op, "lanczos")


class TestRayleigh:
    def test_upper_bound(self, h3):
        g = random_star_graph(h3, 3, 0.7, symmetric=True)
        m = spectrum.build_intrinsic_mesh(g, 4)
        op = spectrum.assemble(m)
        lam = spectrum.smallest_positive_eigenvalue(op).lambda1
        rb = spectrum.rayleigh_bound(m, None, op, abort_tol=1e-2)
        assert rb.value >= lam

    def test_sphere_sharp(self, r3):
        m = spectrum.build_intrinsic_mesh(make_geodesic_sphere(r3, 1.0), 4)
        op = spectrum.assemble(m)
        lam = spectrum.smallest_positive_eigenvalue(op).lambda1
        rb = spectrum.rayleigh_bound(m, None, op)
        assert rb.value == pytest.approx(lam, rel=1e-3)

    def test_off_center_aborts(self, r3):
        m = spectrum.build_intrinsic_mesh(random_star_graph(r3, 7, 1.0), 3)
        with pytest.raises(ValueError):
            spectrum.rayleigh_bound(m, None, abort_tol=1e-8)

    def test_function_family(self, h3):
        m = spectrum.build_intrinsic_mesh(make_geodesic_sphere(h3, 0.5), 2)
        g = spectrum.test_functions(m)
        assert np.allclose(np.linalg.norm(g, axis=1), np.sinh(0.5), rtol=1e-14)


class TestConvergence:
    def test_observed_order(self):
        assert spectrum.observed_order(1 + 1, 1 + 0.25, 1 + 1 / 16) == pytest.approx(2.0)
        assert math.isnan(spectrum.observed_order(1, 2, 1.5))
        assert spectrum.richardson([1.25, 1 + 1 / 16], 2.0) == pytest.approx(1.0)

    def test_h3_sphere_second_order(self, h3):
        t = spectrum.convergence_study(make_geodesic_sphere(h3, 0.5), (3, 4, 5))
        exact = amb.sphere_eigenvalue(h3, 0.5)
        assert 1.7 < t.order < 2.3
        assert abs(t.finest - exact) <= t.budget
        assert abs(t.extrapolated - exact) < abs(t.finest - exact)

    def test_non_monotone_warns(self, r3, monkeypatch):
        seq = iter([2.0, 1.0, 1.5])

        class R:
            def __init__(self):
                self.lambda1 = next(seq)
        results = {3: R(), 4: R(), 5: R()}
        with pytest.warns(RuntimeWarning):
            t = spectrum.convergence_study(make_geodesic_sphere(r3, 1.0), (3, 4, 5), results=results)
        assert math.isnan(t.order) and t.budget == 0.5

    def test_level_validation(self, r3):
        with pytest.raises(ValueError):
            spectrum.convergence_study(make_geodesic_sphere(r3, 1.0), (3, 5, 6))
        with pytest.raises(ValueError):
            spectrum.convergence_study(make_geodesic_sphere(r3, 1.0), (3, 4))

    def test_rows(self, r3):
        t = spectrum.convergence_study(make_geodesic_sphere(r3, 1.0), (2, 3, 4))
        rows = t.rows()
        assert [r[0] for r in rows] == [2, 3, 4]
        assert math.isnan(rows[0][2]) and rows[2][2] == t.order


class TestEncodings:
    def test_warped_vs_constant(self):
        w = Warped(3, WarpSpec("SINH_DELTA", 2.0, 1.0), amb.CurvatureClass("PINCHED_NEG", 1.0))
        gw = random_star_graph(w, 4, 0.6)
        gc = ZonalGraph(Constant(3, -1.0), gw.r0, gw.terms)
        c = spectrum.compare_encodings(gw, gc, 4)
        assert c.agrees
        assert c.edge_discrepancy < 5e-3

    def test_rank1_k1_identical(self, grid3):
        from specbound.ambient import Rank1
        g1 = random_star_graph(Rank1(1, 3), 4, 0.6)
        g2 = ZonalGraph(Constant(3, -1.0), g1.r0, g1.terms)
        c = spectrum.compare_encodings(g1, g2, 3)
        assert c.difference == 0.0


class TestCoordinateResidual:
    def test_small_and_decreasing(self, r3):
        a = spectrum.coordinate_eigenfunction_residual(r3, 1.0, 3)
        b = spectrum.coordinate_eigenfunction_residual(r3, 1.0, 4)
        assert b < a < 0.1

    def test_wrong_lambda_is_worse(self, h3):
        lam = amb.sphere_eigenvalue(h3, 0.5)
        good = spectrum.coordinate_eigenfunction_residual(h3, 0.5, 4)
        bad = spectrum.coordinate_eigenfunction_residual(h3, 0.5, 4, lam=1.5 * lam)
        assert bad > 5 * good
