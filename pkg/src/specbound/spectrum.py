"""Intrinsic piecewise-linear finite elements for lambda_1 of 2-dimensional radial graphs."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import ambient as amb
from . import kernels
from .ambient import AmbientModel, Constant, Warped
from .quadrature import icosphere
from .surface import RadialGraph, geometry_of, make_geodesic_sphere


class DegenerateMeshError(ValueError):
    pass


class EigenSolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class TriMesh:
    directions: np.ndarray   # (V, 3) icosphere vertices
    faces: np.ndarray        # (F, 3)
    edges: np.ndarray        # (E, 2), sorted vertex pairs
    edge_lengths: np.ndarray  # (E,)
    face_edges: np.ndarray   # (F, 3): edge index opposite each corner
    radii: np.ndarray        # (V,) t(u_v)
    level: int
    graph: RadialGraph

    @property
    def n_vertices(self) -> int:
        return len(self.directions)

    @property
    def face_lengths(self) -> np.ndarray:
        return self.edge_lengths[self.face_edges]

    @property
    def euler_characteristic(self) -> int:
        return self.n_vertices - len(self.edges) + len(self.faces)

    def total_area(self) -> float:
        return math.fsum(kernels.triangle_areas(self.face_lengths))


@dataclass(frozen=True)
class SpectralOperator:
    stiffness: sp.csr_matrix
    mass: np.ndarray
    mesh: TriMesh | None = None


@dataclass(frozen=True)
class SpectralResult:
    lambda1: float
    eigenvector: np.ndarray
    residual: float
    level: int
    n_vertices: int
    method: str


def _edge_structure(faces: np.ndarray):
    nf = len(faces)
    # edge opposite corner j joins corners j+1 and j+2
    e = np.concatenate([faces[:, [1, 2]], faces[:, [2, 0]], faces[:, [0, 1]]])
    e = np.sort(e, axis=1)
    edges, inv = np.unique(e, axis=0, return_inverse=True)
    inv = inv.reshape(-1)
    face_edges = np.stack([inv[:nf], inv[nf:2 * nf], inv[2 * nf:]], axis=1)
    return edges, face_edges


def great_circle_points(ua, ub, s):
    """Points at fraction ``s`` along the minor arcs from ``ua`` to ``ub`` and unit-speed tangents."""
    cosw = np.clip(np.sum(ua * ub, axis=1), -1.0, 1.0)
    w = np.arccos(cosw)
    perp = ub - cosw[:, None] * ua
    perp /= np.linalg.norm(perp, axis=1, keepdims=True)
    ang = (s * w)[:, None]
    pts = np.cos(ang) * ua + np.sin(ang) * perp
    tan = -np.sin(ang) * ua + np.cos(ang) * perp
    return pts, tan, w


def warped_edge_lengths(graph: RadialGraph, warp: amb.WarpSpec, ua, ub):
    """Induced-metric length of the parameter great-circle path, 3-point Gauss rule."""
    xg, wg = np.polynomial.legendre.leggauss(3)
    total = np.zeros(len(ua))
    for x, w in zip(xg, wg):
        s = 0.5 * (x + 1.0)
        pts, tan, arc = great_circle_points(ua, ub, s)
        t, g = graph.radius_and_gradient(pts)
        tdot = np.sum(g * tan, axis=1) * arc
        psi = warp.psi(t)
        total += 0.5 * w * np.sqrt(tdot ** 2 + (psi * arc) ** 2)
    return total


def build_intrinsic_mesh(graph: RadialGraph, level: int) -> TriMesh:
    if graph.d != 3:
        raise ValueError("intrinsic meshes are built for surfaces in 3-dimensional ambients")
    if not 2 <= level <= 7:
        raise ValueError("mesh level must lie in [2, 7]")
    u, faces = icosphere(level)
    edges, face_edges = _edge_structure(faces)
    t = graph.radius(u)
    ambient = graph.ambient
    ua, ub = u[edges[:, 0]], u[edges[:, 1]]
    if isinstance(ambient, Warped):
        lengths = warped_edge_lengths(graph, ambient.warp, ua, ub)
    else:
        space = geometry_of(ambient)
        q = space.embed(t, u)
        lengths = space.distance(q[edges[:, 0]], q[edges[:, 1]])
    mesh = TriMesh(u, faces, edges, lengths, face_edges, t, level, graph)
    areas = kernels.triangle_areas(mesh.face_lengths)
    if np.any(areas <= 0):
        bad = int(np.sum(areas <= 0))
        raise DegenerateMeshError(
            f"{bad} triangles violate the strict triangle inequality; "
            "use a finer level or a smaller perturbation")
    if mesh.euler_characteristic != 2:
        raise DegenerateMeshError("mesh is not a topological sphere")
    return mesh


def assemble(mesh: TriMesh) -> SpectralOperator:
    rows, cols, vals, mass, _ = kernels.cotan_assemble(mesh.faces, mesh.face_lengths)
    n = mesh.n_vertices
    stiff = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    stiff.sum_duplicates()
    stiff.sort_indices()
    return SpectralOperator(stiff, mass, mesh)


def _pick(evals, evecs, op):
    order = np.argsort(evals)
    evals, evecs = evals[order], evecs[:, order]
    # evals[0] is the constant mode
    return float(evals[1]), evecs[:, 1]


def smallest_positive_eigenvalue(op: SpectralOperator, method: str = "auto",
                                 tol: float = 1e-10) -> SpectralResult:
    """Smallest eigenvalue of ``S x = lambda M x`` on the mass-complement of constants."""
    S, m = op.stiffness, op.mass
    n = len(m)
    if method == "auto":
        method = "dense" if n < 1000 else "shift-invert"
    dinv = 1.0 / np.sqrt(m)
    A = sp.diags(dinv) @ S @ sp.diags(dinv)
    A = 0.5 * (A + A.T)
    if method == "dense":
        evals, y = sla.eigh(A.toarray(), subset_by_index=[0, 4])
    elif method == "shift-invert":
        scale = 8.0 * math.pi / math.fsum(m)
        sigma = -1e-2 * scale
        v0 = np.sqrt(m) * (1.0 + 0.1 * np.cos(np.arange(n)))
        try:
            evals, y = spla.eigsh(A.tocsc(), k=5, sigma=sigma, which="LM", v0=v0,
                                  tol=1e-14, maxiter=5000)
        except spla.ArpackNoConvergence as exc:
            raise EigenSolverError("shift-invert iteration did not converge") from exc
    else:
        raise ValueError(f"unknown method {method!r}")
    lam, yv = _pick(evals, y, op)
    x = dinv * yv
    ones = np.ones(n)
    x = x - (m @ x) / m.sum() * ones
    x = x / math.sqrt(x @ (m * x))
    # one Rayleigh-quotient refinement of the eigenvalue estimate
    lam = float(x @ (S @ x)) / float(x @ (m * x))
    r = S @ x - lam * m * x
    res = float(np.linalg.norm(r) / (lam * np.linalg.norm(m * x)))
    if not res <= 1e-8:
        raise EigenSolverError(f"relative residual {res:.2e} exceeds 1e-8")
    return SpectralResult(lam, x, res, op.mesh.level if op.mesh else -1, n, method)


def solve(graph: RadialGraph, level: int, method: str = "auto") -> SpectralResult:
    return smallest_positive_eigenvalue(assemble(build_intrinsic_mesh(graph, level)), method)


# ---------------------------------------------------------------------------
# test-function bounds


@dataclass(frozen=True)
class RayleighBound:
    value: float
    max_projection: float
    lambda1: float | None = None


def mesh_normal_coordinates(mesh: TriMesh, center=None) -> np.ndarray:
    """Normal coordinates of the mesh vertices at ``center`` (pole if ``None``)."""
    graph = mesh.graph
    pole_coords = mesh.radii[:, None] * mesh.directions
    if center is None or isinstance(graph.ambient, Warped):
        return pole_coords
    space = geometry_of(graph.ambient)
    q = space.embed(mesh.radii, mesh.directions)
    return space.normal_coordinates(center, q)


def test_functions(mesh: TriMesh, center=None) -> np.ndarray:
    """``g_i = sin_delta(r) x_i / r`` at the mesh vertices (columns ``i``)."""
    x = mesh_normal_coordinates(mesh, center)
    r = np.linalg.norm(x, axis=1)
    f = amb.sin_delta(mesh.graph.ambient.curvature_class, r)
    return (f / r)[:, None] * x


def rayleigh_bound(mesh: TriMesh, center=None, op: SpectralOperator | None = None,
                   abort_tol: float = 1e-4) -> RayleighBound:
    """Rayleigh quotient of the coordinate test family on the mesh.

    The discrete ``g_i`` are projected to be mass-orthogonal to constants; the
    largest relative projection is reported and must stay below ``abort_tol``.
    """
    op = assemble(mesh) if op is None else op
    g = test_functions(mesh, center)
    m = op.mass
    vol = m.sum()
    mean = (m @ g) / vol
    proj = float(np.max(np.abs(mean)))
    if proj > abort_tol:
        raise ValueError(f"test functions are not centred: |mean| = {proj:.3e}")
    g = g - mean[None, :]
    num = math.fsum(np.einsum("vi,vi->i", g, op.stiffness @ g))
    den = math.fsum(np.einsum("vi,vi->i", g, m[:, None] * g))
    return RayleighBound(num / den, proj)


def coordinate_eigenfunction_residual(ambient: AmbientModel, R: float, level: int,
                                      lam: float | None = None) -> float:
    """``max_i ||S f_i - lam M f_i||_{M^-1} / ||f_i||_M`` for ``f_i = x_i / r`` on ``S(R)``."""
    mesh = build_intrinsic_mesh(make_geodesic_sphere(ambient, R), level)
    op = assemble(mesh)
    lam = amb.sphere_eigenvalue(ambient, R) if lam is None else lam
    f = mesh.directions
    m = op.mass
    worst = 0.0
    for i in range(3):
        r = op.stiffness @ f[:, i] - lam * m * f[:, i]
        worst = max(worst, math.sqrt(r @ (r / m)) / math.sqrt(f[:, i] @ (m * f[:, i])))
    return worst


# ---------------------------------------------------------------------------
# convergence


@dataclass(frozen=True)
class ConvergenceTable:
    levels: tuple
    lambdas: tuple
    orders: tuple
    order: float
    extrapolated: float
    budget: float
    extrapolation_spread: float

    @property
    def finest(self) -> float:
        return self.lambdas[-1]

    def rows(self):
        out = []
        for i, (l, lam) in enumerate(zip(self.levels, self.lambdas)):
            p = self.orders[i - 2] if i >= 2 else math.nan
            out.append((l, lam, p))
        return out


GCI_SAFETY = 1.25


def observed_order(a: float, b: float, c: float) -> float:
    d1, d2 = a - b, b - c
    if d1 == 0 or d2 == 0 or (d1 > 0) != (d2 > 0):
        return math.nan
    return math.log2(abs(d1) / abs(d2))


def richardson(lams, p):
    return lams[-1] + (lams[-1] - lams[-2]) / (2.0 ** p - 1.0)


def convergence_study(graph: RadialGraph, levels=(3, 4, 5), method: str = "auto",
                      results: dict | None = None) -> ConvergenceTable:
    levels = tuple(sorted(levels))
    if len(levels) < 3:
        raise ValueError("need at least three levels")
    if any(b - a != 1 for a, b in zip(levels, levels[1:])):
        raise ValueError("levels must be consecutive")
    lams = []
    for l in levels:
        if results is not None and l in results:
            lams.append(results[l].lambda1)
        else:
            res = solve(graph, l, method)
            if results is not None:
                results[l] = res
            lams.append(res.lambda1)
    orders = tuple(observed_order(*lams[i:i + 3]) for i in range(len(lams) - 2))
    p = orders[-1]
    if math.isnan(p):
        warnings.warn("non-monotone eigenvalue sequence; order reported as NaN", RuntimeWarning)
        extrap = lams[-1]
        budget = abs(lams[-1] - lams[-2])
        spread = 0.0
    else:
        extrap = richardson(lams, p)
        # grid convergence index with the usual safety factor for three-level studies
        budget = GCI_SAFETY * abs(lams[-1] - extrap)
        spread = 0.0
        if len(lams) >= 4 and not math.isnan(orders[-2]):
            spread = abs(extrap - richardson(lams[:-1], orders[-2]))
    return ConvergenceTable(levels, tuple(lams), orders, p, extrap, budget, spread)


@dataclass(frozen=True)
class EncodingComparison:
    lambda_a: float
    lambda_b: float
    edge_discrepancy: float  # max relative edge-length difference
    budget: float            # 2 * edge_discrepancy * max(lambda), first-order sensitivity

    @property
    def difference(self) -> float:
        return abs(self.lambda_a - self.lambda_b)

    @property
    def agrees(self) -> bool:
        return self.difference <= self.budget


def compare_encodings(graph_a: RadialGraph, graph_b: RadialGraph, level: int,
                      method: str = "auto") -> EncodingComparison:
    """Compare ``lambda_1`` of one surface described in two ambient encodings.

    The eigenvalue scales like an inverse squared length, so a relative edge
    perturbation ``e`` moves it by at most about ``2 e`` relative.
    """
    ma, mb = build_intrinsic_mesh(graph_a, level), build_intrinsic_mesh(graph_b, level)
    if not np.array_equal(ma.edges, mb.edges):
        raise ValueError("meshes do not share connectivity")
    disc = float(np.max(np.abs(ma.edge_lengths / mb.edge_lengths - 1.0)))
    la = smallest_positive_eigenvalue(assemble(ma), method).lambda1
    lb = smallest_positive_eigenvalue(assemble(mb), method).lambda1
    return EncodingComparison(la, lb, disc, 2.0 * disc * max(la, lb))
