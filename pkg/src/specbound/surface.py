"""Star-shaped closed hypersurfaces written as radial graphs over the unit sphere."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import ambient as amb
from .ambient import AmbientModel, Constant, Rank1, Warped
from .quadrature import DirectionGrid, Rule, make_grid


class GraphValidationError(ValueError):
    pass


@dataclass(frozen=True)
class ZonalTerm:
    """``amplitude * C_l(<u, axis>)`` with ``C_l`` the zonal Gegenbauer profile."""

    degree: int
    amplitude: float
    axis: tuple


class RadialGraph:
    """Base class: ``t(u)`` and its tangential gradient on the unit sphere."""

    kind = "abstract"
    ambient: AmbientModel
    antipodally_symmetric: bool = False

    @property
    def d(self) -> int:
        return self.ambient.dim

    def radius(self, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def radius_and_gradient(self, u: np.ndarray):
        """Return ``t(u)`` and the tangential gradient (Euclidean components, shape ``(N, d)``)."""
        raise NotImplementedError

    def bounds(self, grid: DirectionGrid | None = None) -> tuple[float, float]:
        if grid is None:
            grid = _check_grid(self.d)
        t = self.radius(grid.nodes)
        return float(t.min()), float(t.max())

    def validate(self, grid: DirectionGrid | None = None):
        lo, hi = self.bounds(grid)
        if not lo > 0:
            raise GraphValidationError(f"radial function must be positive (min {lo})")
        if hi >= self.ambient.r_max:
            raise GraphValidationError(f"graph leaves the ambient validity range ({hi})")
        cap = hypersurface_radius_cap(self.ambient)
        if hi >= cap:
            raise GraphValidationError(
                f"max radius {hi} violates the radius hypothesis < {cap}")
        return self

    def normal_coordinates(self, u) -> np.ndarray:
        u = np.atleast_2d(np.asarray(u, dtype=float))
        return self.radius(u)[:, None] * u

    def to_record(self) -> str:
        raise NotImplementedError


def hypersurface_radius_cap(ambient: AmbientModel) -> float:
    """Radius hypothesis of the hypersurface layer: ``pi/(4 delta)`` for positive model curvature."""
    cls = ambient.curvature_class
    if cls.tag is amb.CurvatureTag.NONNEG_PINCHED:
        return math.pi / (4.0 * cls.delta)
    return math.inf


class ZonalGraph(RadialGraph):
    """``t(u) = r0 * (1 + sum_j a_j C_{l_j}(<u, v_j>))``.

    With no terms this is the geodesic sphere of radius ``r0`` about the pole.
    """

    kind = "zonal"

    def __init__(self, ambient: AmbientModel, r0: float, terms=(), symmetric: bool | None = None):
        self.ambient = ambient
        self.r0 = float(r0)
        self.terms = tuple(ZonalTerm(int(t.degree), float(t.amplitude),
                                     tuple(float(x) for x in t.axis)) for t in terms)
        for t in self.terms:
            if len(t.axis) != ambient.dim:
                raise GraphValidationError("term axis has the wrong dimension")
        even = all(t.degree % 2 == 0 for t in self.terms)
        self.antipodally_symmetric = even if symmetric is None else bool(symmetric)
        if self.antipodally_symmetric and not even:
            raise GraphValidationError("odd-degree terms break antipodal symmetry")

    def __eq__(self, other):
        return (isinstance(other, ZonalGraph) and self.ambient == other.ambient
                and self.r0 == other.r0 and self.terms == other.terms
                and self.antipodally_symmetric == other.antipodally_symmetric)

    def __repr__(self):
        return f"ZonalGraph(r0={self.r0}, terms={len(self.terms)}, ambient={self.ambient})"

    @property
    def is_sphere(self) -> bool:
        return not self.terms

    def perturbation(self, u):
        u = np.atleast_2d(np.asarray(u, dtype=float))
        val = np.zeros(len(u))
        grad = np.zeros_like(u)
        for t in self.terms:
            axis = np.asarray(t.axis)
            x = u @ axis
            c, dc = amb.zonal(t.degree, self.d, x)
            val += t.amplitude * c
            grad += (t.amplitude * dc)[:, None] * (axis[None, :] - x[:, None] * u)
        return val, grad

    def radius(self, u):
        return self.r0 * (1.0 + self.perturbation(u)[0])

    def radius_and_gradient(self, u):
        p, g = self.perturbation(u)
        return self.r0 * (1.0 + p), self.r0 * g

    def scaled(self, c: float) -> "ZonalGraph":
        return ZonalGraph(self.ambient, self.r0 * c, self.terms, self.antipodally_symmetric)

    def to_record(self) -> str:
        lines = ["graph zonal", ambient_record(self.ambient), f"r0 {_f(self.r0)}",
                 f"symmetric {int(self.antipodally_symmetric)}"]
        for t in self.terms:
            lines.append(" ".join(["term", str(t.degree), _f(t.amplitude)] + [_f(a) for a in t.axis]))
        return "\n".join(lines) + "\n"


class OffsetSphereGraph(RadialGraph):
    """Geodesic sphere of radius ``rho`` centred at ``center`` (normal coordinates at the pole)."""

    kind = "offset_sphere"

    def __init__(self, ambient: Constant, center, rho: float):
        if not isinstance(ambient, Constant):
            raise GraphValidationError("offset spheres need a constant-curvature ambient")
        self.ambient = ambient
        self.center = tuple(float(x) for x in center)
        self.rho = float(rho)
        c = np.asarray(self.center)
        if len(c) != ambient.dim:
            raise GraphValidationError("center has the wrong dimension")
        if np.linalg.norm(c) >= self.rho:
            raise GraphValidationError("the pole must lie inside the sphere")
        self.antipodally_symmetric = bool(np.linalg.norm(c) == 0.0)

    def __eq__(self, other):
        return (isinstance(other, OffsetSphereGraph) and self.ambient == other.ambient
                and self.center == other.center and self.rho == other.rho)

    @property
    def center_point(self) -> np.ndarray:
        return self.ambient.from_normal_coordinates(np.asarray(self.center))

    def radius_and_gradient(self, u):
        u = np.atleast_2d(np.asarray(u, dtype=float))
        c = np.asarray(self.center)
        a = np.linalg.norm(c)
        w = c / a if a > 0 else np.zeros_like(c)
        x = u @ w
        k = self.ambient.k
        if k == 0:
            t = x * a + np.sqrt((x * a) ** 2 - a * a + self.rho ** 2)
            # F = t^2 - 2 t a x + a^2 - rho^2
            dt_dx = 2.0 * t * a / (2.0 * t - 2.0 * a * x)
        else:
            dl = self.ambient.delta
            if k < 0:
                A, B, C = math.cosh(dl * a), math.sinh(dl * a) * x, math.cosh(dl * self.rho)
                tau = np.arctanh(B / A) + np.arccosh(C / np.sqrt(A * A - B * B))
                ft = A * np.sinh(tau) - B * np.cosh(tau)
                dtau_dx = math.sinh(dl * a) * np.sinh(tau) / ft
            else:
                A, B, C = math.cos(dl * a), math.sin(dl * a) * x, math.cos(dl * self.rho)
                tau = np.arctan2(B, A) + np.arccos(C / np.sqrt(A * A + B * B))
                ft = -A * np.sin(tau) + B * np.cos(tau)
                dtau_dx = -math.sin(dl * a) * np.sin(tau) / ft
            t = tau / dl
            dt_dx = dtau_dx / dl
        grad = dt_dx[:, None] * (w[None, :] - x[:, None] * u)
        return t, grad

    def radius(self, u):
        return self.radius_and_gradient(u)[0]

    def to_record(self) -> str:
        return "\n".join(["graph offset_sphere", ambient_record(self.ambient),
                          "center " + " ".join(_f(x) for x in self.center),
                          f"rho {_f(self.rho)}"]) + "\n"


def _f(x: float) -> str:
    return format(float(x), ".17g")


def _check_grid(d: int) -> DirectionGrid:
    if d == 3:
        return make_grid(3, Rule.ICOSPHERE_VERTEX, 5)
    if d == 4:
        return make_grid(4, Rule.HOPF_PRODUCT, 24)
    return make_grid(d, Rule.QMC_SOBOL, 15, seed=1)


# ---------------------------------------------------------------------------
# construction


def make_geodesic_sphere(ambient: AmbientModel, R: float) -> ZonalGraph:
    return ZonalGraph(ambient, R, (), symmetric=True).validate()


def random_star_graph(ambient: AmbientModel, seed: int, r0: float, eps: float = 0.2,
                      bandlimit: int = 4, symmetric: bool = False,
                      poles_per_degree: int = 3) -> ZonalGraph:
    """Seeded random band-limited perturbation of the sphere of radius ``r0``.

    The perturbation is a sum of zonal harmonics of degrees ``1..bandlimit``
    (even degrees only when ``symmetric``) about random axes, rescaled so that
    its maximum modulus on a dense check grid equals ``eps``.  Random numbers
    come from numpy's counter-based Philox generator keyed by ``seed``.
    """
    if not 0 < eps < 1:
        raise GraphValidationError("eps must lie in (0, 1)")
    d = ambient.dim
    rng = np.random.Generator(np.random.Philox(int(seed)))
    degrees = [l for l in range(1, bandlimit + 1) if not symmetric or l % 2 == 0]
    if not degrees:
        raise GraphValidationError("no admissible degrees below the band limit")
    terms = []
    for l in degrees:
        for _ in range(poles_per_degree):
            axis = rng.standard_normal(d)
            axis /= np.linalg.norm(axis)
            amp = rng.standard_normal() / (1.0 + l) / float(amb.zonal(l, d, np.array(1.0))[0])
            terms.append(ZonalTerm(l, amp, tuple(axis)))
    raw = ZonalGraph(ambient, r0, terms, symmetric)
    p, _ = raw.perturbation(_check_grid(d).nodes)
    scale = eps / np.max(np.abs(p))
    terms = [ZonalTerm(t.degree, t.amplitude * scale, t.axis) for t in terms]
    return ZonalGraph(ambient, r0, terms, symmetric).validate()


# ---------------------------------------------------------------------------
# sampling and integration


@dataclass(frozen=True)
class SurfaceSample:
    """Per-node data of a graph on a direction grid."""

    nodes: np.ndarray
    t: np.ndarray
    grad_t: np.ndarray
    sec_theta: np.ndarray
    phi: np.ndarray
    dm_weight: np.ndarray
    grid: DirectionGrid = field(repr=False)

    @property
    def volume(self) -> float:
        return math.fsum(self.dm_weight)


def evaluate(graph: RadialGraph, grid: DirectionGrid) -> SurfaceSample:
    if grid.d != graph.d:
        raise GraphValidationError(f"grid on S^{grid.d - 1} does not match graph dimension {graph.d}")
    u = grid.nodes
    t, g = graph.radius_and_gradient(u)
    if np.any(t <= 0):
        raise GraphValidationError("radial function not positive on the grid")
    q = amb.sphere_cometric_norm(graph.ambient, t, u, g)
    sec = np.sqrt(1.0 + q)
    phi = graph.ambient.density(t)
    return SurfaceSample(u, t, g, sec, phi, sec * phi * grid.weights, grid)


def surface_integral(graph: RadialGraph, grid: DirectionGrid, F=None, sample=None) -> float:
    """``int_M F dm`` pulled back to the direction sphere; ``F`` maps a sample to node values."""
    s = evaluate(graph, grid) if sample is None else sample
    if F is None:
        return s.volume
    vals = np.asarray(F(s) if callable(F) else F, dtype=float)
    if not np.all(np.isfinite(vals)):
        raise ValueError("integrand not finite")
    return math.fsum(vals * s.dm_weight)


_GL_CACHE = {}


def _gl(n):
    if n not in _GL_CACHE:
        x, w = np.polynomial.legendre.leggauss(n)
        _GL_CACHE[n] = (0.5 * (x + 1.0), 0.5 * w)
    return _GL_CACHE[n]


def radial_integrals(density, t: np.ndarray, rtol: float = 1e-10) -> np.ndarray:
    """``int_0^{t_j} density`` for every node, by Gauss-Legendre with an accuracy check.

    A 24-point rule is compared against a 48-point rule; any node failing the
    relative tolerance is split into halves recursively.
    """
    t = np.asarray(t, dtype=float)
    return _adaptive(density, np.zeros_like(t), t, rtol, depth=0)


def _adaptive(density, a, b, rtol, depth):
    x1, w1 = _gl(24)
    x2, w2 = _gl(48)
    h = (b - a)[:, None]
    i1 = np.sum(w1 * density(a[:, None] + h * x1), axis=1) * (b - a)
    i2 = np.sum(w2 * density(a[:, None] + h * x2), axis=1) * (b - a)
    bad = np.abs(i1 - i2) > rtol * np.abs(i2)
    if bad.any():
        if depth > 30:
            raise ArithmeticError("radial quadrature failed to converge")
        m = 0.5 * (a[bad] + b[bad])
        i2[bad] = (_adaptive(density, a[bad], m, rtol, depth + 1)
                   + _adaptive(density, m, b[bad], rtol, depth + 1))
    return i2


def domain_volume(graph: RadialGraph, grid: DirectionGrid) -> float:
    t = graph.radius(grid.nodes)
    return math.fsum(grid.weights * radial_integrals(graph.ambient._density, t))


def transplant_volume(graph: RadialGraph, grid: DirectionGrid) -> float:
    """Volume of the star body with the same radial profile in the comparison space form."""
    if isinstance(graph.ambient, Rank1):
        return domain_volume(graph, grid)
    model = graph.ambient.model_space
    t = graph.radius(grid.nodes)
    return math.fsum(grid.weights * radial_integrals(model._density, t))


def normal_coordinates(graph: RadialGraph, u) -> np.ndarray:
    return graph.normal_coordinates(u)


# ---------------------------------------------------------------------------
# embedded surface data (constant curvature)


def embedded_surface(graph: RadialGraph, u: np.ndarray):
    """Embedded points and embedded tangent vectors of a graph in a space form.

    Returns ``(q, tangents)`` with ``tangents`` of shape ``(N, d-1, D)`` being
    the images of an orthonormal tangent basis of the unit sphere at ``u``.
    """
    from .quadrature import tangent_basis

    space = geometry_of(graph.ambient)
    t, g = graph.radius_and_gradient(u)
    q = space.embed(t, u)
    basis = tangent_basis(u)
    dt = np.einsum("nad,nd->na", basis, g)
    cls = space.curvature_class
    s = np.asarray(amb.sin_delta(cls, t))
    c = np.asarray(amb.cos_delta(cls, t))
    radial = c[:, None] * u
    if space.k != 0:
        radial = np.concatenate([radial, (-space.k / space.delta * s)[:, None]], axis=1)
    ang = s[:, None, None] * basis
    if space.k != 0:
        ang = np.concatenate([ang, np.zeros(ang.shape[:2] + (1,))], axis=2)
    tangents = dt[:, :, None] * radial[:, None, :] + ang
    return q, tangents


def geometry_of(ambient: AmbientModel) -> Constant:
    if isinstance(ambient, Constant):
        return ambient
    if isinstance(ambient, Rank1) and ambient.k == 1:
        return ambient.as_constant()
    raise amb.UnsupportedAmbientError(f"no space-form encoding for {ambient!r}")


def unit_normals(space: Constant, q: np.ndarray, tangents: np.ndarray) -> np.ndarray:
    """Unit normals (ambient metric) to the embedded hypersurface; sign is arbitrary."""
    gsig = space.metric_signature
    rows = tangents * gsig
    if space.k != 0:
        rows = np.concatenate([rows, (q * gsig)[:, None, :]], axis=1)
    _, _, vt = np.linalg.svd(rows)
    eta = vt[:, -1, :]
    nrm = np.sqrt(np.abs(space.inner(eta, eta)))
    return eta / nrm[:, None]


def radial_gradient_sq(graph: RadialGraph, u: np.ndarray, p=None):
    """Distances ``r = d(p, q)`` and ``|grad^M r|^2`` at the graph points over ``u``.

    For ``p`` at the pole (or ``None``) this uses ``1 - sec^-2``; otherwise the
    normal is computed in the embedding of the space form.
    """
    if p is None:
        t, g = graph.radius_and_gradient(u)
        qn = amb.sphere_cometric_norm(graph.ambient, t, u, g)
        return t, qn / (1.0 + qn)
    space = geometry_of(graph.ambient)
    q, tangents = embedded_surface(graph, u)
    eta = unit_normals(space, q, tangents)
    v = space.log(q, np.broadcast_to(p, q.shape))
    r = np.sqrt(np.maximum(space.inner(v, v), 0.0))
    dr = -v / r[:, None]
    a = space.inner(dr, eta)
    return r, np.clip(1.0 - a * a, 0.0, 1.0)


# ---------------------------------------------------------------------------
# serialization


def ambient_record(a: AmbientModel) -> str:
    if isinstance(a, Constant):
        return f"ambient constant {a.dim} {_f(a.k)}"
    if isinstance(a, Rank1):
        return f"ambient rank1 {a.k} {a.n}"
    w = a.warp
    c = a.declared_class
    return (f"ambient warped {a.dim} {w.family.value} {_f(w.r_max)} {_f(w.delta)} {_f(w.eps)} "
            f"{int(w.m)} {c.tag.value} {_f(c.delta)}")


def parse_ambient(tokens: list[str]) -> AmbientModel:
    kind = tokens[0]
    if kind == "constant":
        return Constant(int(tokens[1]), float(tokens[2]))
    if kind == "rank1":
        return Rank1(int(tokens[1]), int(tokens[2]))
    if kind == "warped":
        warp = amb.WarpSpec(tokens[2], float(tokens[3]), float(tokens[4]), float(tokens[5]),
                            int(tokens[6]))
        return Warped(int(tokens[1]), warp, amb.CurvatureClass(tokens[7], float(tokens[8])))
    raise ValueError(f"unknown ambient tag {kind!r}")


def from_record(text: str) -> RadialGraph:
    lines = [ln.split() for ln in text.strip().splitlines() if ln.strip()]
    if not lines or lines[0][0] != "graph":
        raise ValueError("not a graph record")
    kind = lines[0][1]
    ambient = parse_ambient(lines[1][1:])
    fields = {ln[0]: ln[1:] for ln in lines[2:] if ln[0] != "term"}
    if kind == "zonal":
        terms = [ZonalTerm(int(ln[1]), float(ln[2]), tuple(float(x) for x in ln[3:]))
                 for ln in lines[2:] if ln[0] == "term"]
        return ZonalGraph(ambient, float(fields["r0"][0]), terms, bool(int(fields["symmetric"][0])))
    if kind == "offset_sphere":
        return OffsetSphereGraph(ambient, [float(x) for x in fields["center"]], float(fields["rho"][0]))
    raise ValueError(f"unknown graph kind {kind!r}")
