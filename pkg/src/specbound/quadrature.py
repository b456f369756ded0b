"""Quadrature rules on unit spheres and the icosphere triangulation."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special
from scipy.stats import qmc

from .ambient import unit_sphere_area


class Rule(enum.Enum):
    GAUSS_PRODUCT = "GAUSS_PRODUCT"        # S^2: Gauss-Legendre in z, trapezoid in azimuth
    ICOSPHERE_VERTEX = "ICOSPHERE_VERTEX"  # S^2: icosphere vertices, lumped spherical areas
    HOPF_PRODUCT = "HOPF_PRODUCT"          # S^3: Hopf coordinates
    QMC_SOBOL = "QMC_SOBOL"                # S^(d-1), d-1 >= 4


@dataclass(frozen=True)
class DirectionGrid:
    """Nodes and weights of a quadrature rule on ``S^(d-1)``.

    ``resolution`` is the rule parameter: Gauss nodes in the polar variable for
    the product rules, subdivision level for the icosphere, ``log2`` of the
    point count for Sobol.
    """

    d: int
    nodes: np.ndarray
    weights: np.ndarray
    rule: Rule
    resolution: int
    order: float  # algebraic order in h, or inf for spectrally accurate rules
    seed: int = 0

    @property
    def sphere_dim(self) -> int:
        return self.d - 1

    @property
    def size(self) -> int:
        return len(self.weights)

    def coarsen(self) -> "DirectionGrid":
        """The next coarser grid of the same rule (used for error estimates)."""
        if self.rule is Rule.ICOSPHERE_VERTEX:
            return make_grid(self.d, self.rule, self.resolution - 1)
        if self.rule is Rule.QMC_SOBOL:
            return make_grid(self.d, self.rule, self.resolution - 1, seed=self.seed)
        return make_grid(self.d, self.rule, max(2, (2 * self.resolution) // 3))

    def integrate(self, values) -> float:
        return math.fsum(np.asarray(values, dtype=float) * self.weights)


def default_rule(d: int) -> Rule:
    if d == 3:
        return Rule.GAUSS_PRODUCT
    if d == 4:
        return Rule.HOPF_PRODUCT
    return Rule.QMC_SOBOL


_DEFAULT_RES = {Rule.GAUSS_PRODUCT: 48, Rule.ICOSPHERE_VERTEX: 5, Rule.HOPF_PRODUCT: 24,
                Rule.QMC_SOBOL: 16}


def make_grid(d: int, rule: Rule | str | None = None, resolution: int | None = None,
              seed: int = 0) -> DirectionGrid:
    rule = default_rule(d) if rule is None else Rule(rule)
    res = _DEFAULT_RES[rule] if resolution is None else int(resolution)
    if rule in (Rule.GAUSS_PRODUCT, Rule.ICOSPHERE_VERTEX) and d != 3:
        raise ValueError(f"{rule.value} is a rule on S^2")
    if rule is Rule.HOPF_PRODUCT and d != 4:
        raise ValueError("HOPF_PRODUCT is a rule on S^3")
    if rule is Rule.GAUSS_PRODUCT:
        nodes, weights = _gauss_product_s2(res)
        order = math.inf
    elif rule is Rule.ICOSPHERE_VERTEX:
        nodes, weights = _icosphere_vertex_rule(res)
        order = 2.0
    elif rule is Rule.HOPF_PRODUCT:
        nodes, weights = _hopf_product_s3(res)
        order = math.inf
    else:
        nodes, weights = _sobol_sphere(d, res, seed)
        order = 1.0
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return DirectionGrid(d, nodes, weights, rule, res, order, seed)


@lru_cache(maxsize=16)
def _gauss_product_s2(n: int):
    z, wz = special.roots_legendre(n)
    m = 2 * n
    phi = 2.0 * np.pi * np.arange(m) / m
    zz, pp = np.meshgrid(z, phi, indexing="ij")
    rho = np.sqrt(1.0 - zz ** 2)
    nodes = np.stack([rho * np.cos(pp), rho * np.sin(pp), zz], axis=-1).reshape(-1, 3)
    weights = np.repeat(wz * (2.0 * np.pi / m), m)
    return nodes, weights


@lru_cache(maxsize=16)
def _hopf_product_s3(n: int):
    # u = (cos eta e^{i xi1}, sin eta e^{i xi2}); volume form = ds/2 dxi1 dxi2, s = sin^2 eta
    x, wx = special.roots_legendre(n)
    s = 0.5 * (x + 1.0)
    ws = 0.5 * wx
    m = 2 * n
    xi = 2.0 * np.pi * np.arange(m) / m
    ss, a, b = np.meshgrid(s, xi, xi, indexing="ij")
    ce, se = np.sqrt(1.0 - ss), np.sqrt(ss)
    nodes = np.stack([ce * np.cos(a), ce * np.sin(a), se * np.cos(b), se * np.sin(b)],
                     axis=-1).reshape(-1, 4)
    weights = np.repeat(ws * 0.5 * (2.0 * np.pi / m) ** 2, m * m)
    return nodes, weights


def _sobol_sphere(d: int, m: int, seed: int):
    sampler = qmc.Sobol(d, scramble=True, seed=np.random.Generator(np.random.Philox(seed)))
    pts = sampler.random_base2(m)
    pts = np.clip(pts, 1e-16, 1.0 - 1e-16)
    g = special.ndtri(pts)
    nodes = g / np.linalg.norm(g, axis=1, keepdims=True)
    weights = np.full(len(nodes), unit_sphere_area(d) / len(nodes))
    return nodes, weights


def qmc_error_estimate(grid: DirectionGrid, values) -> float:
    """Half-sample split estimate for a Sobol grid: ``|I_a - I_b| / 2``."""
    v = np.asarray(values, dtype=float) * grid.weights
    h = len(v) // 2
    ia = 2.0 * math.fsum(v[:h])
    ib = 2.0 * math.fsum(v[h:])
    return abs(ia - ib) / 2.0


# ---------------------------------------------------------------------------
# icosphere


@lru_cache(maxsize=16)
def icosphere(level: int) -> tuple[np.ndarray, np.ndarray]:
    """Vertices and faces of the icosahedron subdivided ``level`` times.

    Faces are oriented counter-clockwise seen from outside; the result has
    ``10 * 4**level + 2`` vertices.
    """
    t = (1.0 + math.sqrt(5.0)) / 2.0
    v = np.array([[-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
                  [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
                  [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1]], dtype=float)
    f = np.array([[0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
                  [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
                  [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
                  [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1]], dtype=np.int64)
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    for _ in range(level):
        nv = len(v)
        e = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        e.sort(axis=1)
        uniq, inv = np.unique(e, axis=0, return_inverse=True)
        inv = inv.reshape(-1)
        mid = v[uniq[:, 0]] + v[uniq[:, 1]]
        mid /= np.linalg.norm(mid, axis=1, keepdims=True)
        nf = len(f)
        a, b, c = f[:, 0], f[:, 1], f[:, 2]
        ab, bc, ca = inv[:nf] + nv, inv[nf:2 * nf] + nv, inv[2 * nf:] + nv
        f = np.concatenate([np.stack([a, ab, ca], 1), np.stack([b, bc, ab], 1),
                            np.stack([c, ca, bc], 1), np.stack([ab, bc, ca], 1)])
        v = np.concatenate([v, mid])
    v.setflags(write=False)
    f.setflags(write=False)
    return v, f


def spherical_triangle_areas(a, b, c) -> np.ndarray:
    """Areas of spherical triangles with unit-vector corners (Van Oosterom-Strackee)."""
    num = np.abs(np.einsum("ij,ij->i", a, np.cross(b, c)))
    den = 1.0 + np.einsum("ij,ij->i", a, b) + np.einsum("ij,ij->i", b, c) + np.einsum("ij,ij->i", c, a)
    return 2.0 * np.arctan2(num, den)


@lru_cache(maxsize=16)
def _icosphere_vertex_rule(level: int):
    v, f = icosphere(level)
    area = spherical_triangle_areas(v[f[:, 0]], v[f[:, 1]], v[f[:, 2]])
    w = np.zeros(len(v))
    for j in range(3):
        np.add.at(w, f[:, j], area / 3.0)
    w *= 4.0 * np.pi / math.fsum(w)
    return np.array(v), w


def tangent_basis(u: np.ndarray) -> np.ndarray:
    """Orthonormal bases of the tangent spaces of the unit sphere at the rows of ``u``.

    Returns an array of shape ``(N, d-1, d)``; deterministic per node.
    """
    u = np.asarray(u, dtype=float)
    n, d = u.shape
    # complete each u with the standard basis and orthonormalise by QR
    idx = np.argsort(np.abs(u), axis=1)[:, : d - 1]
    m = np.zeros((n, d, d))
    m[:, :, 0] = u
    eye = np.eye(d)
    m[:, :, 1:] = eye[idx].transpose(0, 2, 1)
    q, _ = np.linalg.qr(m)
    basis = q[:, :, 1:].transpose(0, 2, 1)
    return basis
