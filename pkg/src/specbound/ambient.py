"""Closed-form geometry of the supported ambient spaces.

Three families are modelled:

* ``Constant`` -- simply connected space forms of curvature ``k`` (Euclidean,
  round sphere of radius ``1/delta``, hyperboloid model of ``H^d``).
* ``Warped`` -- rotationally symmetric metrics ``dr^2 + psi(r)^2 du^2`` around a
  pole, used as concrete pinched-curvature test ambients.
* ``Rank1`` -- noncompact rank-one symmetric spaces ``KH^n`` for
  ``K = R, C, H`` with the metric normalised to ``-4 <= K <= -1``.

Points of constant-curvature spaces are handled in an embedding:
``R^d`` for ``k = 0`` and the quadric ``<x, x> = 1/k`` in ``R^(d+1)`` (Euclidean
signature for ``k > 0``, Lorentzian for ``k < 0``) otherwise.  The pole is
``(0, ..., 0, 1/delta)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special


class GeometryDomainError(ValueError):
    """A radius or point lies outside the validity range of a model."""


class UnsupportedAmbientError(TypeError):
    """An operation has no closed form for the given ambient."""


class CurvatureTag(enum.Enum):
    NONNEG_PINCHED = "NONNEG_PINCHED"  # 0 <= K <= delta^2
    NONPOS = "NONPOS"                  # K <= 0
    PINCHED_NEG = "PINCHED_NEG"        # K <= -delta^2


@dataclass(frozen=True)
class CurvatureClass:
    """Curvature hypothesis selecting the ``sin_delta``/``cos_delta`` branch."""

    tag: CurvatureTag
    delta: float = 1.0

    def __post_init__(self):
        tag = CurvatureTag(self.tag)
        object.__setattr__(self, "tag", tag)
        if tag is CurvatureTag.NONPOS:
            # delta is not observable in this branch
            object.__setattr__(self, "delta", 1.0)
        elif not self.delta > 0:
            raise ValueError(f"delta must be positive for {tag.value}, got {self.delta}")

    @property
    def curvature(self) -> float:
        """Model curvature ``k`` of the comparison space form."""
        if self.tag is CurvatureTag.NONNEG_PINCHED:
            return self.delta ** 2
        if self.tag is CurvatureTag.PINCHED_NEG:
            return -self.delta ** 2
        return 0.0

    @property
    def r_limit(self) -> float:
        return math.pi / self.delta if self.tag is CurvatureTag.NONNEG_PINCHED else math.inf

    @classmethod
    def for_curvature(cls, k: float) -> "CurvatureClass":
        if k > 0:
            return cls(CurvatureTag.NONNEG_PINCHED, math.sqrt(k))
        if k < 0:
            return cls(CurvatureTag.PINCHED_NEG, math.sqrt(-k))
        return cls(CurvatureTag.NONPOS)


def _check_radius(r, limit, name="r"):
    r = np.asarray(r, dtype=float)
    if np.any(r < 0) or np.any(~np.isfinite(r)) or np.any(r >= limit):
        raise GeometryDomainError(f"{name} outside [0, {limit}): {r}")
    return r


def sin_delta(cls: CurvatureClass, r):
    """Generalized sine: solution of ``f'' + k f = 0``, ``f(0)=0``, ``f'(0)=1``."""
    r = _check_radius(r, cls.r_limit)
    if cls.tag is CurvatureTag.NONNEG_PINCHED:
        out = np.sin(cls.delta * r) / cls.delta
    elif cls.tag is CurvatureTag.PINCHED_NEG:
        out = np.sinh(cls.delta * r) / cls.delta
    else:
        out = r.copy()
    return out if out.ndim else float(out)


def cos_delta(cls: CurvatureClass, r):
    """Derivative of :func:`sin_delta`."""
    r = _check_radius(r, cls.r_limit)
    if cls.tag is CurvatureTag.NONNEG_PINCHED:
        out = np.cos(cls.delta * r)
    elif cls.tag is CurvatureTag.PINCHED_NEG:
        out = np.cosh(cls.delta * r)
    else:
        out = np.ones_like(r)
    return out if out.ndim else float(out)


def unit_sphere_area(d: int) -> float:
    """Area of the unit sphere ``S^(d-1)`` in ``R^d``."""
    return 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)


# ---------------------------------------------------------------------------
# warps


class WarpFamily(enum.Enum):
    SIN_DELTA = "SIN_DELTA"
    LINEAR = "LINEAR"
    SINH_DELTA = "SINH_DELTA"
    PERTURBED_SIN = "PERTURBED_SIN"


@dataclass(frozen=True)
class WarpSpec:
    """Warping function ``psi`` of a rotationally symmetric metric.

    ``PERTURBED_SIN`` is ``psi(r) = sin(delta r)/delta * (1 + eps r^m)``.
    """

    family: WarpFamily
    r_max: float
    delta: float = 1.0
    eps: float = 0.0
    m: int = 2

    def __post_init__(self):
        object.__setattr__(self, "family", WarpFamily(self.family))
        if not self.r_max > 0:
            raise ValueError("r_max must be positive")
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if self.family is WarpFamily.PERTURBED_SIN and (int(self.m) != self.m or self.m < 2):
            raise ValueError("PERTURBED_SIN needs an integer exponent m >= 2")
        if self.family in (WarpFamily.SIN_DELTA, WarpFamily.PERTURBED_SIN):
            if self.r_max >= math.pi / self.delta:
                raise ValueError("sine warps need r_max < pi/delta")

    def derivatives(self, r):
        """Return ``(psi, psi', psi'')`` at ``r``."""
        r = np.asarray(r, dtype=float)
        d = self.delta
        fam = self.family
        if fam is WarpFamily.LINEAR:
            return r, np.ones_like(r), np.zeros_like(r)
        if fam is WarpFamily.SINH_DELTA:
            s = np.sinh(d * r) / d
            return s, np.cosh(d * r), d * d * s
        s = np.sin(d * r) / d
        c = np.cos(d * r)
        if fam is WarpFamily.SIN_DELTA:
            return s, c, -d * d * s
        e, m = self.eps, int(self.m)
        g = 1.0 + e * r ** m
        g1 = e * m * r ** (m - 1)
        g2 = e * m * (m - 1) * r ** (m - 2)
        return s * g, c * g + s * g1, -d * d * s * g + 2.0 * c * g1 + s * g2

    def psi(self, r):
        return self.derivatives(r)[0]

    def check_origin(self, r: float = 1e-6, tol: float = 1e-10) -> bool:
        """Check ``psi(0) = 0`` and ``psi'(0) = 1`` through the series at small ``r``."""
        p, p1, _ = self.derivatives(np.array(r))
        return abs(float(p) / r - 1.0) < tol and abs(float(p1) - 1.0) < tol


@dataclass(frozen=True)
class CurvatureCertificate:
    passed: bool
    k_radial_min: float
    k_radial_max: float
    k_tangential_min: float
    k_tangential_max: float
    violating_r: float | None = None
    band: tuple = (0.0, 0.0)


def curvature_certificate(warp: WarpSpec, cls: CurvatureClass, samples: int = 1000,
                          slack: float = 1e-9) -> CurvatureCertificate:
    """Sample the radial and tangential sectional curvatures on ``(0, r_max]``.

    Radial curvature is ``-psi''/psi`` and tangential curvature is
    ``(1 - psi'^2)/psi^2``; both must lie in the band of ``cls``.
    """
    if samples < 100:
        raise ValueError("need at least 100 samples")
    r = np.linspace(warp.r_max / samples, warp.r_max, samples)
    p, p1, p2 = warp.derivatives(r)
    if np.any(p <= 0):
        bad = float(r[np.argmax(p <= 0)])
        return CurvatureCertificate(False, math.nan, math.nan, math.nan, math.nan, bad)
    k_rad = -p2 / p
    k_tan = (1.0 - p1 * p1) / (p * p)
    if cls.tag is CurvatureTag.NONNEG_PINCHED:
        lo, hi = 0.0, cls.delta ** 2
    elif cls.tag is CurvatureTag.NONPOS:
        lo, hi = -math.inf, 0.0
    else:
        lo, hi = -math.inf, -cls.delta ** 2
    bad = ((k_rad < lo - slack) | (k_rad > hi + slack) |
           (k_tan < lo - slack) | (k_tan > hi + slack))
    return CurvatureCertificate(
        passed=not bool(bad.any()),
        k_radial_min=float(k_rad.min()), k_radial_max=float(k_rad.max()),
        k_tangential_min=float(k_tan.min()), k_tangential_max=float(k_tan.max()),
        violating_r=float(r[np.argmax(bad)]) if bad.any() else None,
        band=(lo, hi),
    )


# ---------------------------------------------------------------------------
# ambient models


class AmbientModel:
    """Common surface of the three ambient encodings."""

    dim: int
    r_max: float = math.inf

    @property
    def sphere_dim(self) -> int:
        """Dimension ``n`` of geodesic spheres (= hypersurface dimension)."""
        return self.dim - 1

    def _density(self, r):
        raise NotImplementedError

    def density(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r <= 0) or np.any(r >= self.r_max):
            raise GeometryDomainError(f"radius outside (0, {self.r_max}): {r}")
        out = self._density(r)
        return out if out.ndim else float(out)

    def metric_factors(self, t, u=None):
        """Horizontal and vertical squared scale factors of ``S(t)`` over the unit sphere."""
        raise NotImplementedError

    def sphere_eigenvalue(self, r):
        raise UnsupportedAmbientError(f"no closed-form sphere spectrum for {self.tag}")

    def sphere_area(self, r):
        return unit_sphere_area(self.dim) * self.density(r)

    def radial_integral(self, r: float) -> float:
        """``int_0^r phi``."""
        if not 0 <= r < self.r_max:
            raise GeometryDomainError(f"radius outside [0, {self.r_max}): {r}")
        if r == 0:
            return 0.0
        val, _ = integrate.quad(lambda s: self._density(np.asarray(s)), 0.0, r,
                                epsabs=0.0, epsrel=1e-13, limit=200)
        return val

    def ball_volume(self, r: float) -> float:
        return unit_sphere_area(self.dim) * self.radial_integral(r)

    @property
    def curvature_class(self) -> CurvatureClass:
        raise NotImplementedError

    @property
    def model_space(self) -> "Constant":
        """Comparison space form used for transplantation."""
        return Constant(self.dim, self.curvature_class.curvature)


@dataclass(frozen=True)
class Constant(AmbientModel):
    """Simply connected space form of dimension ``dim`` and curvature ``k``."""

    dim: int
    k: float = 0.0
    tag: str = field(default="CONSTANT", init=False, repr=False)

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 3:
            raise ValueError("ambient dimension must be an integer >= 3")
        object.__setattr__(self, "k", float(self.k))

    @property
    def delta(self) -> float:
        return math.sqrt(abs(self.k)) if self.k else 1.0

    @property
    def curvature_class(self) -> CurvatureClass:
        return CurvatureClass.for_curvature(self.k)

    @property
    def r_max(self) -> float:
        # geometry layer allows chords up to pi/(2 delta)
        return math.pi / (2.0 * self.delta) if self.k > 0 else math.inf

    def _density(self, r):
        return np.asarray(sin_delta(self.curvature_class, r)) ** (self.dim - 1)

    def metric_factors(self, t, u=None):
        s2 = np.asarray(sin_delta(self.curvature_class, t)) ** 2
        return s2, s2

    def sphere_eigenvalue(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r <= 0) or np.any(r >= self.r_max):
            raise GeometryDomainError(f"radius outside (0, {self.r_max}): {r}")
        out = (self.dim - 1) / np.asarray(sin_delta(self.curvature_class, r)) ** 2
        return out if out.ndim else float(out)

    def radial_integral(self, r: float) -> float:
        if self.k == 0 and 0 <= r:
            return r ** self.dim / self.dim
        return super().radial_integral(r)

    # -- embedding model --------------------------------------------------

    @property
    def embed_dim(self) -> int:
        return self.dim if self.k == 0 else self.dim + 1

    @property
    def metric_signature(self) -> np.ndarray:
        g = np.ones(self.embed_dim)
        if self.k < 0:
            g[-1] = -1.0
        return g

    @property
    def pole(self) -> np.ndarray:
        p = np.zeros(self.embed_dim)
        if self.k != 0:
            p[-1] = 1.0 / self.delta
        return p

    def inner(self, a, b):
        return np.sum(np.asarray(a) * np.asarray(b) * self.metric_signature, axis=-1)

    def embed(self, r, u):
        """Embedding coordinates of ``exp_pole(r u)``; ``u`` unit vectors in ``R^dim``."""
        r = np.asarray(r, dtype=float)
        u = np.asarray(u, dtype=float)
        if self.k == 0:
            return r[..., None] * u
        cls = self.curvature_class
        lim = min(self.r_max, cls.r_limit)
        if np.any(r >= lim):
            raise GeometryDomainError(f"radius beyond validity {lim}")
        s = np.asarray(sin_delta(cls, r))[..., None] * u
        c = np.asarray(cos_delta(cls, r))[..., None] / self.delta
        return np.concatenate([s, c], axis=-1)

    def tangent_at_pole(self, v):
        """Lift a vector of ``R^dim`` to the tangent space at the pole."""
        v = np.asarray(v, dtype=float)
        if self.k == 0:
            return v
        return np.concatenate([v, np.zeros(v.shape[:-1] + (1,))], axis=-1)

    def distance(self, a, b):
        """Geodesic distance between embedded points (chord formula, stable for short chords)."""
        c = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
        c2 = np.maximum(self.inner(c, c), 0.0)
        chord = np.sqrt(c2)
        if self.k == 0:
            return chord
        d = self.delta
        if self.k > 0:
            return 2.0 / d * np.arcsin(np.minimum(d * chord / 2.0, 1.0))
        return 2.0 / d * np.arcsinh(d * chord / 2.0)

    def _sk(self, r):
        r = np.asarray(r, dtype=float)
        if self.k > 0:
            return np.sin(self.delta * r) / self.delta, np.cos(self.delta * r)
        if self.k < 0:
            return np.sinh(self.delta * r) / self.delta, np.cosh(self.delta * r)
        return r, np.ones_like(r)

    def exp(self, p, v):
        """Exponential map at the embedded point ``p`` of the ambient tangent vector ``v``."""
        p = np.asarray(p, dtype=float)
        v = np.asarray(v, dtype=float)
        if self.k == 0:
            return p + v
        nv = np.sqrt(np.maximum(self.inner(v, v), 0.0))
        if self.k > 0 and np.any(nv >= self.r_max):
            raise GeometryDomainError("exp beyond the validity radius")
        s, c = self._sk(nv)
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio = np.where(nv > 0, s / np.where(nv > 0, nv, 1.0), 1.0)
        return c[..., None] * p + ratio[..., None] * v

    def log(self, p, q):
        """Inverse of :meth:`exp`; returns an ambient tangent vector at ``p``."""
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        if self.k == 0:
            return q - p
        dist = self.distance(p, q)
        if self.k > 0 and np.any(dist >= self.r_max):
            raise GeometryDomainError("log target beyond the validity radius")
        w = q - self.k * self.inner(p, q)[..., None] * p
        nw = np.sqrt(np.maximum(self.inner(w, w), 0.0))
        with np.errstate(invalid="ignore", divide="ignore"):
            scale = np.where(nw > 0, dist / np.where(nw > 0, nw, 1.0), 0.0)
        return scale[..., None] * w

    def frame(self, p) -> np.ndarray:
        """Orthonormal frame of ``T_p`` as columns (``embed_dim x dim``).

        The frame is the image of the standard frame at the pole under the
        reflection (``k > 0``) or boost (``k < 0``) taking the pole to ``p``.
        """
        p = np.asarray(p, dtype=float)
        d = self.dim
        if self.k == 0:
            return np.eye(d)
        e = np.eye(self.embed_dim)[:, :d]
        x = p[:d] * self.delta
        sx = np.linalg.norm(x)
        if sx < 1e-15:
            return e
        w = x / sx
        if self.k > 0:
            # Householder reflection swapping pole and p (both length 1/delta)
            a = self.pole - p
            a /= np.linalg.norm(a)
            h = np.eye(self.embed_dim) - 2.0 * np.outer(a, a)
            return h @ e
        ch = p[-1] * self.delta
        b = np.eye(self.embed_dim)
        b[:d, :d] += (ch - 1.0) * np.outer(w, w)
        b[:d, d] = sx * w
        b[d, :d] = sx * w
        b[d, d] = ch
        return b @ e

    def normal_coordinates(self, p, q) -> np.ndarray:
        """Geodesic normal coordinates of ``q`` at ``p`` in the frame :meth:`frame`."""
        v = self.log(p, q)
        f = self.frame(p)
        return (v * self.metric_signature) @ f

    def from_normal_coordinates(self, x) -> np.ndarray:
        """Embedded point ``exp_pole(x)`` for ``x`` in ``R^dim``."""
        return self.exp(self.pole, self.tangent_at_pole(x))


@dataclass(frozen=True)
class Warped(AmbientModel):
    """Rotationally symmetric metric ``dr^2 + psi(r)^2 du^2`` about a pole."""

    dim: int
    warp: WarpSpec
    declared_class: CurvatureClass
    tag: str = field(default="WARPED", init=False, repr=False)

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 3:
            raise ValueError("ambient dimension must be an integer >= 3")
        if not self.warp.check_origin():
            raise ValueError("warp must satisfy psi(0)=0, psi'(0)=1")

    @property
    def curvature_class(self) -> CurvatureClass:
        return self.declared_class

    @property
    def r_max(self) -> float:
        return self.warp.r_max

    def _density(self, r):
        return self.warp.psi(r) ** (self.dim - 1)

    def metric_factors(self, t, u=None):
        p2 = self.warp.psi(np.asarray(t, dtype=float)) ** 2
        return p2, p2


RANK1_FIELDS = {1: "R", 2: "C", 4: "H"}


def _structure_matrices(k: int, n: int) -> list[np.ndarray]:
    """Complex (k=2) or quaternionic (k=4) structure operators on ``R^(kn)``."""
    if k == 1:
        return []
    if k == 2:
        blocks = [np.array([[0.0, -1.0], [1.0, 0.0]])]
    else:
        # left multiplication by i, j, k on (a, b, c, d) = a + b i + c j + d k
        qi = np.array([[0, -1, 0, 0], [1, 0, 0, 0], [0, 0, 0, -1], [0, 0, 1, 0]], float)
        qj = np.array([[0, 0, -1, 0], [0, 0, 0, 1], [1, 0, 0, 0], [0, -1, 0, 0]], float)
        qk = np.array([[0, 0, 0, -1], [0, 0, -1, 0], [0, 1, 0, 0], [1, 0, 0, 0]], float)
        blocks = [qi, qj, qk]
    return [np.kron(np.eye(n), b) for b in blocks]


@dataclass(frozen=True)
class Rank1(AmbientModel):
    """Noncompact rank-one symmetric space of real dimension ``k n``."""

    k: int
    n: int
    tag: str = field(default="RANK1", init=False, repr=False)

    def __post_init__(self):
        if self.k == 8:
            raise UnsupportedAmbientError("the Cayley hyperbolic plane (k=8) is not supported")
        if self.k not in RANK1_FIELDS:
            raise ValueError(f"k must be one of 1, 2, 4; got {self.k}")
        if int(self.n) != self.n or self.n < 2:
            raise ValueError("n must be an integer >= 2")
        if self.k * self.n < 3:
            raise ValueError("ambient dimension k*n must be at least 3")

    @property
    def dim(self) -> int:
        return self.k * self.n

    @property
    def curvature_class(self) -> CurvatureClass:
        return CurvatureClass(CurvatureTag.PINCHED_NEG, 1.0)

    @property
    def model_space(self):
        # comparison ball lives in the symmetric space itself
        return self

    def as_constant(self) -> Constant:
        if self.k != 1:
            raise UnsupportedAmbientError("only RH^n has a constant-curvature encoding")
        return Constant(self.n, -1.0)

    @property
    def structure(self) -> list[np.ndarray]:
        return _structure_matrices(self.k, self.n)

    def _density(self, r):
        return np.sinh(r) ** (self.dim - 1) * np.cosh(r) ** (self.k - 1)

    def metric_factors(self, t, u=None):
        sh2 = np.sinh(np.asarray(t, dtype=float)) ** 2
        return sh2, sh2 * np.cosh(np.asarray(t, dtype=float)) ** 2

    def sphere_eigenvalue(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r <= 0):
            raise GeometryDomainError("radius must be positive")
        out = (self.dim - 1) / np.sinh(r) ** 2 - (self.k - 1) / np.cosh(r) ** 2
        return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# module-level operations


def density(ambient: AmbientModel, r):
    return ambient.density(r)


def sphere_eigenvalue(ambient: AmbientModel, r):
    return ambient.sphere_eigenvalue(r)


def sphere_area(ambient: AmbientModel, r):
    return ambient.sphere_area(r)


def ball_volume(ambient: AmbientModel, r: float) -> float:
    return ambient.ball_volume(r)


def admissible_radius(model: AmbientModel) -> float:
    """Largest admissible comparison radius (``pi/(4 delta)`` for positive curvature)."""
    if isinstance(model, Constant) and model.k > 0:
        return math.pi / (4.0 * model.delta)
    return model.r_max


def radius_from_volume(model: AmbientModel, volume: float, rtol: float = 1e-12,
                       max_iter: int = 200) -> float:
    """Radius of the geodesic ball of the given volume.

    Bisection until the bracket is narrower than ``1e-3``, then safeguarded
    Newton steps on the strictly increasing ball volume.
    """
    if not volume > 0:
        raise ValueError("volume must be positive")
    r_cap = admissible_radius(model)
    if math.isfinite(r_cap):
        if volume >= model.ball_volume(r_cap):
            raise GeometryDomainError(
                f"volume {volume} exceeds the admissible ball volume at radius {r_cap}")
        lo, hi = 0.0, r_cap
    else:
        lo, hi = 0.0, 1.0
        while model.ball_volume(hi) < volume:
            lo, hi = hi, 2.0 * hi
            if hi > 1e6:
                raise GeometryDomainError("volume too large to bracket")
    it = 0
    while hi - lo > 1e-3 and it < max_iter:
        mid = 0.5 * (lo + hi)
        if model.ball_volume(mid) < volume:
            lo = mid
        else:
            hi = mid
        it += 1
    r = 0.5 * (lo + hi)
    while it < max_iter:
        f = model.ball_volume(r) - volume
        if abs(f) <= rtol * volume * 0.25:
            return r
        if f < 0:
            lo = r
        else:
            hi = r
        step = f / model.sphere_area(r)
        r_new = r - step
        if not lo < r_new < hi:
            r_new = 0.5 * (lo + hi)
        if abs(r_new - r) <= 1e-16 * r:
            return r_new
        r = r_new
        it += 1
    raise ArithmeticError("radius_from_volume did not converge")


def geodesic_distance(ambient: Constant, a, b) -> float:
    """Distance between polar points ``(r, u)`` given relative to the pole."""
    if not isinstance(ambient, Constant):
        raise UnsupportedAmbientError("distances are only available in space forms")
    (ra, ua), (rb, ub) = a, b
    if ambient.k > 0:
        for r in (ra, rb):
            if r >= ambient.r_max:
                raise GeometryDomainError("polar radius beyond pi/(2 delta)")
    pa = ambient.embed(ra, _unit(ua))
    pb = ambient.embed(rb, _unit(ub))
    return float(ambient.distance(pa, pb))


def _unit(u):
    u = np.asarray(u, dtype=float)
    return u / np.linalg.norm(u)


def exp_map(ambient: Constant, base, v):
    return ambient.exp(base, v)


def log_map(ambient: Constant, base, q):
    return ambient.log(base, q)


def vertical_projectors(ambient: Rank1, u) -> list[np.ndarray]:
    """The vectors ``J_a u`` spanning the vertical directions at ``u``."""
    u = np.asarray(u, dtype=float)
    return [jm @ u for jm in ambient.structure]


def vertical_part(ambient: AmbientModel, u, w):
    """Projection of tangent vectors ``w`` onto the vertical span at ``u`` (batched)."""
    u = np.asarray(u, dtype=float)
    w = np.asarray(w, dtype=float)
    out = np.zeros_like(w)
    if not isinstance(ambient, Rank1):
        return out
    for jm in ambient.structure:
        ju = u @ jm.T
        out += np.sum(w * ju, axis=-1, keepdims=True) * ju
    return out


def sphere_metric_norm(ambient: AmbientModel, t, u, w, tol: float = 1e-10):
    """Squared length of ``w`` (tangent to the unit sphere at ``u``) in the metric of ``S(t)``."""
    u = np.asarray(u, dtype=float)
    w = np.asarray(w, dtype=float)
    if np.any(np.abs(np.sum(u * w, axis=-1)) > tol * np.maximum(1.0, np.linalg.norm(w, axis=-1))):
        raise ValueError("w must be tangent to the unit sphere at u")
    a_h, a_v = ambient.metric_factors(t, u)
    wv = vertical_part(ambient, u, w)
    wh = w - wv
    out = a_h * np.sum(wh * wh, axis=-1) + a_v * np.sum(wv * wv, axis=-1)
    return out if np.ndim(out) else float(out)


def sphere_cometric_norm(ambient: AmbientModel, t, u, g):
    """Squared length of the covector ``g`` (Euclidean components) in the inverse metric of ``S(t)``."""
    a_h, a_v = ambient.metric_factors(t, u)
    gv = vertical_part(ambient, u, g)
    gh = g - gv
    return np.sum(gh * gh, axis=-1) / a_h + np.sum(gv * gv, axis=-1) / a_v


def gegenbauer_alpha(d: int) -> float:
    """Gegenbauer index for zonal harmonics on ``S^(d-1)``."""
    return (d - 2) / 2.0


def zonal(l: int, d: int, x):
    """Zonal harmonic profile of degree ``l`` on ``S^(d-1)`` and its derivative."""
    a = gegenbauer_alpha(d)
    x = np.clip(x, -1.0, 1.0)
    val = special.eval_gegenbauer(l, a, x)
    der = 2.0 * a * special.eval_gegenbauer(l - 1, a + 1.0, x) if l > 0 else np.zeros_like(x)
    return val, der
