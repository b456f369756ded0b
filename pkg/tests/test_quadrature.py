import math

import numpy as np
import pytest
from scipy import special

from specbound.ambient import unit_sphere_area
from specbound.quadrature import (Rule, icosphere, make_grid, qmc_error_estimate,
                                  spherical_triangle_areas, tangent_basis)


@pytest.mark.parametrize("d,rule,res", [(3, "GAUSS_PRODUCT", 12), (3, "ICOSPHERE_VERTEX", 3),
                                        (4, "HOPF_PRODUCT", 8), (5, "QMC_SOBOL", 10),
                                        (8, "QMC_SOBOL", 10)])
def test_total_area(d, rule, res):
    g = make_grid(d, rule, res)
    assert g.integrate(np.ones(g.size)) == pytest.approx(unit_sphere_area(d), rel=1e-12)
    assert np.allclose(np.linalg.norm(g.nodes, axis=1), 1.0, atol=1e-14)


def test_unit_sphere_area_values():
    assert unit_sphere_area(3) == pytest.approx(4 * math.pi)
    assert unit_sphere_area(4) == pytest.approx(2 * math.pi ** 2)


def test_gauss_exact_polynomials():
    g = make_grid(3, "GAUSS_PRODUCT", 10)
    x, y, z = g.nodes.T
    assert g.integrate(x ** 2) == pytest.approx(4 * math.pi / 3, rel=1e-14)
    assert g.integrate(x ** 2 * y ** 2 * z ** 4) == pytest.approx(
        4 * math.pi * 3 / (9 * 7 * 5 * 3), rel=1e-12)
    assert abs(g.integrate(x * y ** 3)) < 1e-14


def test_hopf_exact_polynomials():
    g = make_grid(4, "HOPF_PRODUCT", 8)
    u = g.nodes
    # int_{S^3} u_i^2 = 2 pi^2 / 4, int u_1^2 u_3^2 = 2 pi^2 / 24
    assert g.integrate(u[:, 2] ** 2) == pytest.approx(math.pi ** 2 / 2, rel=1e-13)
    assert g.integrate(u[:, 0] ** 2 * u[:, 2] ** 2) == pytest.approx(math.pi ** 2 / 12, rel=1e-13)


def test_spherical_harmonic_orthogonality():
    g = make_grid(3)
    x, y, z = g.nodes.T
    theta = np.arccos(np.clip(z, -1, 1))
    phi = np.arctan2(y, x)
    y31 = special.sph_harm_y(3, 1, theta, phi) if hasattr(special, "sph_harm_y") else \
        special.sph_harm(1, 3, phi, theta)
    assert abs(g.integrate(np.abs(y31) ** 2) - 1.0) < 1e-13


def test_icosphere_counts():
    for lv in range(4):
        v, f = icosphere(lv)
        assert len(v) == 10 * 4 ** lv + 2
        assert len(f) == 20 * 4 ** lv
        assert len(v) - 3 * len(f) // 2 + len(f) == 2  # Euler characteristic


def test_icosphere_orientation():
    v, f = icosphere(2)
    a, b, c = v[f[:, 0]], v[f[:, 1]], v[f[:, 2]]
    outward = np.einsum("ij,ij->i", np.cross(b - a, c - a), a + b + c)
    assert np.all(outward > 0)


def test_spherical_triangle_octant():
    e = np.eye(3)
    area = spherical_triangle_areas(e[None, 0], e[None, 1], e[None, 2])
    assert area[0] == pytest.approx(math.pi / 2, rel=1e-15)


def test_icosphere_rule_second_order():
    f = lambda u: np.exp(u[:, 0]) * np.cos(u[:, 1])
    ref = make_grid(3, "GAUSS_PRODUCT", 60)
    exact = ref.integrate(f(ref.nodes))
    errs = [abs(make_grid(3, "ICOSPHERE_VERTEX", lv).integrate(f(make_grid(3, "ICOSPHERE_VERTEX", lv).nodes)) - exact)
            for lv in (3, 4, 5)]
    rates = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert all(1.6 < r < 2.4 for r in rates)


def test_coarsen():
    g = make_grid(3, "GAUSS_PRODUCT", 48)
    assert g.coarsen().resolution == 32
    assert make_grid(3, "ICOSPHERE_VERTEX", 4).coarsen().resolution == 3
    s = make_grid(5, "QMC_SOBOL", 10, seed=3).coarsen()
    assert s.resolution == 9 and s.seed == 3


def test_sobol_deterministic_and_error():
    a = make_grid(5, "QMC_SOBOL", 12, seed=4)
    b = make_grid(5, "QMC_SOBOL", 12, seed=4)
    assert np.array_equal(a.nodes, b.nodes)
    vals = a.nodes[:, 0] ** 2
    err = qmc_error_estimate(a, vals)
    assert abs(a.integrate(vals) - unit_sphere_area(5) / 5) < 20 * err + 1e-3


def test_rule_dimension_mismatch():
    with pytest.raises(ValueError):
        make_grid(4, "GAUSS_PRODUCT", 8)
    with pytest.raises(ValueError):
        make_grid(3, "HOPF_PRODUCT", 8)


def test_default_rules():
    assert make_grid(3).rule is Rule.GAUSS_PRODUCT and make_grid(3).resolution == 48
    assert make_grid(4).rule is Rule.HOPF_PRODUCT


def test_nodes_readonly():
    g = make_grid(3, "GAUSS_PRODUCT", 4)
    with pytest.raises(ValueError):
        g.nodes[0, 0] = 1.0


@pytest.mark.parametrize("d", [3, 4, 6])
def test_tangent_basis(d, rng):
    u = rng.standard_normal((30, d))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    b = tangent_basis(u)
    assert b.shape == (30, d - 1, d)
    assert np.allclose(np.einsum("nad,nd->na", b, u), 0, atol=1e-14)
    assert np.allclose(np.einsum("nad,nbd->nab", b, b), np.eye(d - 1), atol=1e-14)
