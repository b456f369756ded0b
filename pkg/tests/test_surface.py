import math

import mpmath
import numpy as np
import pytest

from specbound import ambient as amb
from specbound.ambient import Constant, Rank1, Warped, WarpSpec
from specbound.quadrature import make_grid, tangent_basis
from specbound.surface import (GraphValidationError, OffsetSphereGraph, ZonalGraph, ZonalTerm,
                               domain_volume, evaluate, from_record, make_geodesic_sphere,
                               radial_gradient_sq, radial_integrals, random_star_graph,
                               surface_integral, transplant_volume)


def _fd_gradient(graph, u, h=1e-6):
    """Tangential gradient of t by central differences along an orthonormal frame."""
    b = tangent_basis(u)
    g = np.zeros_like(u)
    for a in range(u.shape[1] - 1):
        e = b[:, a, :]
        up = (u + h * e) / np.linalg.norm(u + h * e, axis=1, keepdims=True)
        um = (u - h * e) / np.linalg.norm(u - h * e, axis=1, keepdims=True)
        g += ((graph.radius(up) - graph.radius(um)) / (2 * h))[:, None] * e
    return g


class TestSpheres:
    def test_sphere_sec_is_one(self, r3, grid3):
        s = evaluate(make_geodesic_sphere(r3, 1.3), grid3)
        assert np.all(s.sec_theta == 1.0)

    def test_euclidean_area(self, r3, grid3):
        assert surface_integral(make_geodesic_sphere(r3, 1.0), grid3) == pytest.approx(4 * math.pi, rel=1e-14)

    def test_hyperbolic_area(self, h3, grid3):
        expect = float(4 * mpmath.pi * mpmath.sinh(0.5) ** 2)
        assert round(expect, 7) == 3.4122763
        assert surface_integral(make_geodesic_sphere(h3, 0.5), grid3) == pytest.approx(expect, rel=1e-13)

    def test_rank1_area(self, ch2, grid4):
        R = 0.8
        expect = float(2 * mpmath.pi ** 2 * mpmath.sinh(R) ** 3 * mpmath.cosh(R))
        assert surface_integral(make_geodesic_sphere(ch2, R), grid4) == pytest.approx(expect, rel=1e-12)

    @pytest.mark.parametrize("a", [Constant(3, 0), Constant(3, -1), Constant(3, 1), Rank1(2, 2)])
    def test_ball_volume(self, a):
        g = make_grid(a.dim)
        R = 0.6
        assert domain_volume(make_geodesic_sphere(a, R), g) == pytest.approx(amb.ball_volume(a, R), rel=1e-10)

    def test_radius_cap(self, s3):
        with pytest.raises(GraphValidationError):
            make_geodesic_sphere(s3, 0.8)


class TestSecant:
    @pytest.mark.parametrize("a", [Constant(3, 0), Constant(3, -1), Constant(3, 1)])
    def test_against_fd(self, a, rng):
        g = random_star_graph(a, seed=3, r0=0.5, eps=0.25)
        u = rng.standard_normal((40, 3))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        t, grad = g.radius_and_gradient(u)
        assert np.allclose(grad, _fd_gradient(g, u), atol=1e-8)
        s = amb.sin_delta(a.curvature_class, t)
        sec_fd = np.sqrt(1 + np.sum(_fd_gradient(g, u) ** 2, axis=1) / s ** 2)
        sec = evaluate(g, type("G", (), {"d": 3, "nodes": u, "weights": np.ones(40)})()).sec_theta
        assert np.allclose(sec, sec_fd, rtol=1e-7)

    def test_rank1_vertical_direction(self, ch2):
        # a graph varying only along the Hopf fibre direction sees cosh-scaled cometric
        u = np.array([[1.0, 0, 0, 0]])
        g = ZonalGraph(ch2, 0.5, [ZonalTerm(1, 0.1, (0.0, 1.0, 0.0, 0.0))])
        t, grad = g.radius_and_gradient(u)
        jv = ch2.structure[0] @ u[0]
        assert abs(abs(grad[0] @ jv) - np.linalg.norm(grad[0])) < 1e-14  # grad is vertical here
        expect = np.sum(grad ** 2) / (np.sinh(t) * np.cosh(t)) ** 2
        assert amb.sphere_cometric_norm(ch2, t, u, grad)[0] == pytest.approx(expect[0], rel=1e-13)

    @pytest.mark.parametrize("k", [0.0, -1.0, 1.0])
    def test_offset_gradient_fd(self, k, rng):
        a = Constant(3, k)
        g = OffsetSphereGraph(a, (0.1, -0.05, 0.08), 0.5)
        u = rng.standard_normal((30, 3))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        _, grad = g.radius_and_gradient(u)
        assert np.allclose(grad, _fd_gradient(g, u), atol=1e-8)

    @pytest.mark.parametrize("k", [0.0, -1.0, 1.0])
    def test_offset_sphere_points(self, k, grid3):
        a = Constant(3, k)
        g = OffsetSphereGraph(a, (0.1, -0.05, 0.08), 0.5)
        t = g.radius(grid3.nodes)
        d = a.distance(g.center_point, a.embed(t, grid3.nodes))
        assert np.max(np.abs(d - 0.5)) < 1e-13
        assert surface_integral(g, grid3) == pytest.approx(amb.sphere_area(a, 0.5), rel=1e-10)
        assert domain_volume(g, grid3) == pytest.approx(amb.ball_volume(a, 0.5), rel=1e-9)


class TestRadialGradient:
    def test_pole_sphere_zero(self, h3, grid3):
        _, g2 = radial_gradient_sq(make_geodesic_sphere(h3, 0.7), grid3.nodes)
        assert np.max(g2) == 0.0

    def test_offset_about_center_zero(self, h3, grid3):
        g = OffsetSphereGraph(h3, (0.1, 0.2, -0.1), 0.6)
        r, g2 = radial_gradient_sq(g, grid3.nodes, g.center_point)
        assert np.max(np.abs(r - 0.6)) < 1e-12
        assert np.max(g2) < 1e-14

    def test_embedded_matches_pole_formula(self, s3, grid3):
        g = random_star_graph(s3, seed=2, r0=0.4)
        r1, a = radial_gradient_sq(g, grid3.nodes)
        r2, b = radial_gradient_sq(g, grid3.nodes, s3.pole)
        assert np.allclose(r1, r2, atol=1e-13) and np.allclose(a, b, atol=1e-11)


class TestVolumes:
    def test_radial_integrals(self):
        t = np.array([0.1, 0.5, 2.0])
        out = radial_integrals(lambda r: np.sinh(r) ** 2, t)
        expect = [float(mpmath.quad(lambda s: mpmath.sinh(s) ** 2, [0, x])) for x in t]
        assert np.allclose(out, expect, rtol=1e-12)

    def test_warped_model_matches_constant(self, grid3):
        w = Warped(3, WarpSpec("SINH_DELTA", 2.0, 1.0), amb.CurvatureClass("PINCHED_NEG", 1.0))
        c = Constant(3, -1.0)
        gw = random_star_graph(w, seed=4, r0=0.6)
        gc = ZonalGraph(c, gw.r0, gw.terms)
        assert domain_volume(gw, grid3) == pytest.approx(domain_volume(gc, grid3), rel=1e-12)
        assert surface_integral(gw, grid3) == pytest.approx(surface_integral(gc, grid3), rel=1e-12)

    def test_transplant_uses_model(self, warped_nonneg, grid3):
        g = random_star_graph(warped_nonneg, seed=1, r0=0.5, symmetric=True)
        model = ZonalGraph(warped_nonneg.model_space, g.r0, g.terms, True)
        assert transplant_volume(g, grid3) == pytest.approx(domain_volume(model, grid3), rel=1e-12)
        assert transplant_volume(g, grid3) != pytest.approx(domain_volume(g, grid3), rel=1e-6)

    def test_grid_convergence(self, h3):
        g = random_star_graph(h3, seed=9, r0=0.8)
        a = surface_integral(g, make_grid(3, "GAUSS_PRODUCT", 48))
        b = surface_integral(g, make_grid(3, "GAUSS_PRODUCT", 64))
        assert abs(a - b) < 1e-10 * a


class TestGenerator:
    def test_deterministic(self, h3):
        assert random_star_graph(h3, 5, 0.8) == random_star_graph(h3, 5, 0.8)
        assert random_star_graph(h3, 5, 0.8) != random_star_graph(h3, 6, 0.8)

    def test_eps_bound(self, r3):
        g = random_star_graph(r3, 12, 1.0, eps=0.3)
        lo, hi = g.bounds()
        assert lo >= 0.7 - 1e-12 and hi <= 1.3 + 1e-12
        assert max(abs(lo - 1), abs(hi - 1)) == pytest.approx(0.3, rel=1e-12)

    def test_symmetric_even(self, r3, grid3):
        g = random_star_graph(r3, 3, 1.0, symmetric=True)
        assert g.antipodally_symmetric
        assert all(t.degree % 2 == 0 for t in g.terms)
        assert np.allclose(g.radius(grid3.nodes), g.radius(-grid3.nodes), atol=1e-15)

    def test_odd_symmetric_rejected(self, r3):
        with pytest.raises(GraphValidationError):
            ZonalGraph(r3, 1.0, [ZonalTerm(1, 0.1, (1.0, 0, 0))], symmetric=True)

    def test_bad_eps(self, r3):
        with pytest.raises(GraphValidationError):
            random_star_graph(r3, 1, 1.0, eps=1.0)

    def test_dimension_mismatch(self, r3):
        with pytest.raises(GraphValidationError):
            evaluate(make_geodesic_sphere(r3, 1.0), make_grid(4))

    def test_scaled(self, r3):
        g = random_star_graph(r3, 2, 1.0)
        assert g.scaled(2.0).r0 == 2.0 and g.scaled(2.0).terms == g.terms


class TestRecords:
    @pytest.mark.parametrize("make", [
        lambda: random_star_graph(Constant(3, -1.0), 5, 0.8),
        lambda: random_star_graph(Rank1(2, 2), 11, 0.7, eps=0.15),
        lambda: OffsetSphereGraph(Constant(3, 1.0), (0.1, -0.05, 0.08), 0.5),
        lambda: random_star_graph(Warped(3, WarpSpec("PERTURBED_SIN", 0.7, 1.0, 0.05, 2),
                                         amb.CurvatureClass("NONNEG_PINCHED", 1.0)),
                                  1, 0.5, symmetric=True),
    ])
    def test_roundtrip(self, make, grid3):
        g = make()
        back = from_record(g.to_record())
        assert back == g
        assert back.to_record() == g.to_record()

    def test_bad_record(self):
        with pytest.raises(ValueError):
            from_record("nonsense 1 2")
