"""Centers of mass of hypersurfaces with respect to a radial mass distribution."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import ambient as amb
from .ambient import CurvatureClass, Warped
from .quadrature import DirectionGrid
from .surface import RadialGraph, SurfaceSample, evaluate, geometry_of


class NotConvergedError(RuntimeError):
    pass


class MassTag(enum.Enum):
    SIN_DELTA_OVER_R = "SIN_DELTA_OVER_R"
    SINH_OVER_R = "SINH_OVER_R"


@dataclass(frozen=True)
class MassDistribution:
    tag: MassTag
    curvature_class: CurvatureClass

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if self.tag is MassTag.SINH_OVER_R:
            num = np.sinh(r)
        else:
            num = np.asarray(amb.sin_delta(self.curvature_class, r))
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(r > 0, num / np.where(r > 0, r, 1.0), 1.0)

    @classmethod
    def for_ambient(cls, ambient) -> "MassDistribution":
        from .ambient import Rank1
        if isinstance(ambient, Rank1):
            return cls(MassTag.SINH_OVER_R, ambient.curvature_class)
        return cls(MassTag.SIN_DELTA_OVER_R, ambient.curvature_class)


@dataclass(frozen=True)
class CenterResult:
    point: np.ndarray          # embedded point (pole coordinates for warped ambients)
    coordinates: np.ndarray    # normal coordinates of the point at the pole
    moment_norm: float
    iterations: int
    converged: bool
    volume: float


def moment(p, graph: RadialGraph, grid: DirectionGrid, G: MassDistribution | None = None,
           sample: SurfaceSample | None = None) -> np.ndarray:
    """``int_M G(|X_p|) X_p dm`` as a tangent vector at ``p`` in normal coordinates.

    ``p=None`` means the pole; that is the only choice for warped ambients.
    """
    G = MassDistribution.for_ambient(graph.ambient) if G is None else G
    s = evaluate(graph, grid) if sample is None else sample
    if isinstance(graph.ambient, Warped) and p is not None:
        raise amb.UnsupportedAmbientError("warped ambients only support the pole as center")
    if p is None:
        x = s.t[:, None] * s.nodes
    else:
        space = geometry_of(graph.ambient)
        q = space.embed(s.t, s.nodes)
        x = space.normal_coordinates(p, q)
    r = np.linalg.norm(x, axis=1)
    w = G(r) * s.dm_weight
    return np.array([math.fsum(w * x[:, i]) for i in range(x.shape[1])])


def _moment_tangent(space, p, q, G, dm):
    v = space.log(p, q)
    r = np.sqrt(np.maximum(space.inner(v, v), 0.0))
    w = G(r) * dm
    m = np.array([math.fsum(w * v[:, i]) for i in range(v.shape[1])])
    return m, math.fsum(w)


def solve_center(graph: RadialGraph, grid: DirectionGrid, G: MassDistribution | None = None,
                 init=None, tol: float = 1e-10, max_iter: int = 200) -> CenterResult:
    """Damped fixed-point iteration ``p <- exp_p(alpha m(p) / W(p))``.

    ``alpha`` starts at 1 and is halved while the moment norm fails to decrease.
    ``init`` is given in normal coordinates at the pole (default: the pole).
    """
    G = MassDistribution.for_ambient(graph.ambient) if G is None else G
    s = evaluate(graph, grid)
    vol = s.volume
    space = geometry_of(graph.ambient)
    q = space.embed(s.t, s.nodes)
    x0 = np.zeros(graph.d) if init is None else np.asarray(init, dtype=float)
    p = space.from_normal_coordinates(x0)
    radius_ok = space.r_max

    def norm_of(m):
        return math.sqrt(max(float(space.inner(m, m)), 0.0))

    m, W = _moment_tangent(space, p, q, G, s.dm_weight)
    mn = norm_of(m)
    it = 0
    while mn > tol * vol and it < max_iter:
        alpha = 1.0
        while True:
            step = alpha * m / W
            if norm_of(step) >= radius_ok:
                alpha *= 0.5
                continue
            p_new = space.exp(p, step)
            if space.k != 0:
                # re-project onto the quadric against drift
                p_new = p_new / math.sqrt(abs(space.k * float(space.inner(p_new, p_new))))
            m_new, W_new = _moment_tangent(space, p_new, q, G, s.dm_weight)
            mn_new = norm_of(m_new)
            if mn_new < mn or alpha < 1e-6:
                break
            alpha *= 0.5
        if float(np.max(space.distance(p_new, q))) >= radius_ok:
            raise amb.GeometryDomainError("center iterate left the validity region")
        p, m, W, mn = p_new, m_new, W_new, mn_new
        it += 1
    converged = mn <= tol * vol
    coords = space.normal_coordinates(space.pole, p)
    return CenterResult(p, coords, mn, it, converged, vol)


def require_center(result: CenterResult) -> CenterResult:
    if not result.converged:
        raise NotConvergedError(
            f"center of mass not converged after {result.iterations} iterations "
            f"(moment {result.moment_norm:.3e})")
    return result


def pole_certificate(graph: RadialGraph, grid: DirectionGrid, tol: float = 1e-10) -> CenterResult:
    """Certify the pole as a center of mass (the only option for warped ambients)."""
    s = evaluate(graph, grid)
    m = moment(None, graph, grid, sample=s)
    mn = float(np.linalg.norm(m))
    d = graph.d
    try:
        pole = geometry_of(graph.ambient).pole
    except amb.UnsupportedAmbientError:
        # warped and higher rank-one ambients: the pole in its own polar chart
        pole = np.zeros(d)
    return CenterResult(pole, np.zeros(d), mn, 0, mn <= tol * s.volume, s.volume)
