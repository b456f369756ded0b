"""Upper bounds for the first eigenvalue and the integral inequalities behind them.

Every check returns a :class:`BoundReport` whose error budget is itemized:

``quadrature``
    change of the margin between the grid and its coarsening,
``fem``
    discretization error of the finite-element eigenvalue (ratio units),
``root``
    effect of the relative tolerance of the comparison radius,
``roundoff``
    a small multiple of machine epsilon times the magnitudes involved.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import ambient as amb
from .ambient import Constant, CurvatureClass, CurvatureTag, Rank1, Warped
from .center import CenterResult, pole_certificate, require_center
from .quadrature import DirectionGrid, tangent_basis
from .spectrum import ConvergenceTable, SpectralResult
from .surface import (OffsetSphereGraph, RadialGraph, ZonalGraph, domain_volume, evaluate,
                      geometry_of, radial_gradient_sq, transplant_volume)

EPS = np.finfo(float).eps
ROOT_RTOL = 1e-12


class HypothesisError(ValueError):
    """A curvature or radius hypothesis of an inequality is not met."""


class Verdict(enum.Enum):
    HOLDS = "HOLDS"
    HOLDS_WITHIN_TOLERANCE = "HOLDS_WITHIN_TOLERANCE"
    VIOLATED = "VIOLATED"
    NOT_EVALUATED = "NOT_EVALUATED"


class Form(enum.Enum):
    STATED = "STATED"
    SHARP = "SHARP"


@dataclass(frozen=True)
class BoundReport:
    check: str
    lhs: float
    rhs: float
    error_budget: dict
    equality_gap: float = math.nan
    metadata: dict = field(default_factory=dict)
    equality_class: bool = True  # False when a gap is recorded but equality is not expected

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    @property
    def relative_margin(self) -> float:
        return self.margin / abs(self.rhs) if self.rhs else math.nan

    @property
    def budget(self) -> float:
        return math.fsum(self.error_budget.values())

    @property
    def verdict(self) -> Verdict:
        return classify(self.margin, self.budget)

    @property
    def is_equality_case(self) -> bool:
        return not math.isnan(self.equality_gap)


def classify(margin: float, budget: float) -> Verdict:
    if math.isnan(margin):
        return Verdict.NOT_EVALUATED
    if margin < -budget:
        return Verdict.VIOLATED
    if margin >= budget:
        return Verdict.HOLDS
    return Verdict.HOLDS_WITHIN_TOLERANCE


# ---------------------------------------------------------------------------
# helpers


def _center_point(graph: RadialGraph, p):
    """Embedded center point, or ``None`` for the pole."""
    if p is None:
        return None
    if isinstance(p, CenterResult):
        if not np.any(p.coordinates):
            return None
        p = p.point
    if isinstance(graph.ambient, Warped) or (isinstance(graph.ambient, Rank1) and graph.ambient.k > 1):
        raise amb.UnsupportedAmbientError("only the pole is available as a center in this ambient")
    p = np.asarray(p, dtype=float)
    space = geometry_of(graph.ambient)
    if np.allclose(p, space.pole, rtol=0.0, atol=0.0):
        return None
    return p


def _distances(graph, sample, point):
    if point is None:
        return sample.t
    space = geometry_of(graph.ambient)
    return space.distance(point, space.embed(sample.t, sample.nodes))


def _is_sphere_about(graph: RadialGraph, point) -> bool:
    ambient = graph.ambient
    if isinstance(ambient, Warped) and not _is_model_warp(ambient):
        # a geodesic sphere, but the enclosed ball is not isometric to the model ball
        return False
    if isinstance(graph, ZonalGraph):
        return graph.is_sphere and point is None
    if isinstance(graph, OffsetSphereGraph):
        c = graph.center_point
        if point is None:
            return not any(graph.center)
        return float(graph.ambient.distance(c, point)) < 1e-8
    return False


def _is_model_warp(ambient: Warped) -> bool:
    w, cls = ambient.warp, ambient.declared_class
    fam = amb.WarpFamily
    if cls.tag is CurvatureTag.NONPOS:
        return w.family is fam.LINEAR
    same = w.delta == cls.delta
    if cls.tag is CurvatureTag.NONNEG_PINCHED:
        return same and (w.family is fam.SIN_DELTA or (w.family is fam.PERTURBED_SIN and w.eps == 0))
    return same and w.family is fam.SINH_DELTA


def _comparison_radius(graph: RadialGraph, grid: DirectionGrid):
    """``(model, R)``: the transplanted volume for space forms and warped metrics,
    the enclosed volume for rank-one spaces."""
    if isinstance(graph.ambient, Rank1):
        model = graph.ambient
        vol = domain_volume(graph, grid)
    else:
        model = graph.ambient.model_space
        vol = transplant_volume(graph, grid)
    return model, amb.radius_from_volume(model, vol, rtol=ROOT_RTOL), vol


def _assemble(check, grid, state_fn, sides, equality, extra=None):
    """Evaluate ``sides(state, R) -> (lhs, rhs, fem)`` on the grid, its coarsening and
    at a perturbed radius, then itemize the budget."""
    st = state_fn(grid)
    lhs, rhs, fem = sides(st, st["R"])
    coarse = state_fn(grid.coarsen())
    lc, rc, _ = sides(coarse, coarse["R"])
    margin = rhs - lhs
    quad = abs(margin - (rc - lc)) if not math.isnan(margin) else 0.0
    lp, rp, _ = sides(st, st["R"] * (1.0 + ROOT_RTOL))
    root = abs((rp - lp) - margin) if not math.isnan(margin) else 0.0
    mags = [abs(x) for x in (lhs, rhs) if not math.isnan(x)]
    budget = {"quadrature": quad, "fem": fem, "root": root,
              "roundoff": 64.0 * EPS * math.fsum(mags) * math.sqrt(grid.size) / 8.0}
    meta = {k: v for k, v in st.items() if np.isscalar(v)}
    meta.update({"grid_size": grid.size, "rule": grid.rule.value})
    if extra:
        meta.update(extra)
    gap = margin if equality else math.nan
    return BoundReport(check, lhs, rhs, budget, gap, meta)


def _lambda_input(spectral, fem_budget):
    """``(lambda1, absolute fem budget)`` from a table, a result or a number."""
    if spectral is None:
        return math.nan, 0.0
    if isinstance(spectral, ConvergenceTable):
        return spectral.finest, spectral.budget + spectral.extrapolation_spread
    if isinstance(spectral, SpectralResult):
        if fem_budget is None:
            raise ValueError("a single spectral result needs an explicit fem_budget")
        return spectral.lambda1, float(fem_budget)
    return float(spectral), 0.0 if fem_budget is None else float(fem_budget)


def _sphere_lambda(graph):
    """Analytic first eigenvalue when the graph is a geodesic sphere about the pole."""
    if isinstance(graph, ZonalGraph) and graph.is_sphere:
        return float(amb.sphere_eigenvalue(graph.ambient, graph.r0))
    return math.nan


def _resolve_center(graph, grid, p):
    if p is None:
        p = pole_certificate(graph, grid)
    return require_center(p)


def _check_warped(ambient: Warped, allowed):
    cls = ambient.declared_class
    if cls.tag not in allowed:
        raise HypothesisError(f"declared class {cls.tag.value} is outside this inequality")
    cert = amb.curvature_certificate(ambient.warp, cls)
    if not cert.passed:
        raise HypothesisError(
            f"curvature certificate failed for {cls.tag.value} at r = {cert.violating_r}")


# ---------------------------------------------------------------------------
# lemmas


def lemma1_check(graph: RadialGraph, grid: DirectionGrid, p=None) -> BoundReport:
    """``int_M sin_delta^2 d(p, q) dm >= Vol(S(R)) sin_delta^2 R`` (``sinh`` in rank-one spaces)."""
    point = _center_point(graph, p)
    rank1 = isinstance(graph.ambient, Rank1)
    cls = graph.ambient.curvature_class

    def state(g):
        s = evaluate(graph, g)
        r = _distances(graph, s, point)
        f = np.sinh(r) if rank1 else np.asarray(amb.sin_delta(cls, r))
        model, R, vol = _comparison_radius(graph, g)
        return {"R": R, "integral": math.fsum(f * f * s.dm_weight), "vol_M": s.volume,
                "vol_domain": vol, "_model": model}

    def sides(st, R):
        fr = math.sinh(R) if rank1 else amb.sin_delta(cls, R)
        rhs = amb.sphere_area(st["_model"], R) * fr * fr
        # the integral is the larger side
        return rhs, st["integral"], 0.0

    return _finish_lemma("LEMMA1", graph, grid, state, sides, point)


def lemma2_check(graph: RadialGraph, grid: DirectionGrid, p=None) -> BoundReport:
    """``int_M tanh^2 d(p, q) dm >= Vol(S(R)) tanh^2 R`` in a rank-one space."""
    if not isinstance(graph.ambient, Rank1):
        raise amb.UnsupportedAmbientError("the tanh inequality is stated for rank-one spaces")
    point = _center_point(graph, p)

    def state(g):
        s = evaluate(graph, g)
        r = _distances(graph, s, point)
        model, R, vol = _comparison_radius(graph, g)
        return {"R": R, "integral": math.fsum(np.tanh(r) ** 2 * s.dm_weight),
                "vol_M": s.volume, "vol_domain": vol, "_model": model}

    def sides(st, R):
        return amb.sphere_area(st["_model"], R) * math.tanh(R) ** 2, st["integral"], 0.0

    return _finish_lemma("LEMMA2", graph, grid, state, sides, point)


def _finish_lemma(check, graph, grid, state, sides, point):
    rep = _assemble(check, grid, state, sides, _is_sphere_about(graph, point))
    model = graph.ambient if isinstance(graph.ambient, Rank1) else graph.ambient.model_space
    meta = dict(rep.metadata)
    meta["vol_S_R"] = float(amb.sphere_area(model, meta["R"]))
    return replace(rep, metadata=meta)


def induced_coordinate_energy(graph: RadialGraph, u: np.ndarray) -> np.ndarray:
    """``sum_i |grad^M x_i|^2`` at the graph points over ``u``, ``x_i = t(u) u_i``.

    The induced metric in an orthonormal frame ``e_a`` of the unit sphere is
    ``G = psi(t)^2 I + dt dt^T``; the coordinate differentials are
    ``D_i = dt u_i + t e_a^i`` and the sum is ``tr(G^-1 D D^T)``.
    """
    ambient = graph.ambient
    u = np.asarray(u, dtype=float)
    t, g = graph.radius_and_gradient(u)
    if isinstance(ambient, Warped):
        psi = ambient.warp.psi(t)
    elif isinstance(ambient, Constant):
        psi = np.asarray(amb.sin_delta(ambient.curvature_class, t))
    else:
        raise amb.UnsupportedAmbientError("coordinate energies need a space form or a warped metric")
    basis = tangent_basis(u)
    da = np.einsum("nad,nd->na", basis, g)
    n = da.shape[1]
    G = (psi ** 2)[:, None, None] * np.eye(n)[None] + da[:, :, None] * da[:, None, :]
    D = da[:, :, None] * u[:, None, :] + t[:, None, None] * basis
    DDt = np.einsum("nai,nbi->nab", D, D)
    X = np.linalg.solve(G, DDt)
    return np.trace(X, axis1=1, axis2=2)


def _l2_hypothesis(ambient, cls: CurvatureClass, t_max: float):
    k = cls.curvature
    if isinstance(ambient, Constant):
        if ambient.k > k + 1e-12:
            raise HypothesisError(f"ambient curvature {ambient.k} exceeds the class bound {k}")
    elif isinstance(ambient, Warped):
        cert = amb.curvature_certificate(ambient.warp, ambient.declared_class)
        kmax = max(cert.k_radial_max, cert.k_tangential_max)
        if not kmax <= k + 1e-9:
            raise HypothesisError(f"sampled curvature {kmax} exceeds the class bound {k}")
    else:
        raise amb.UnsupportedAmbientError("coordinate energies need a space form or a warped metric")
    if cls.tag is CurvatureTag.NONNEG_PINCHED and not t_max < math.pi / cls.delta:
        raise HypothesisError("graph is not inside a geodesic ball of radius < pi/delta")


def lemma_l2_check(graph: RadialGraph, grid: DirectionGrid,
                   curvature_class: CurvatureClass | None = None) -> BoundReport:
    """Pointwise ``sum_i |grad^M x_i|^2 <= n t^2 / sin_delta^2 t``; reports the worst node.

    ``curvature_class`` overrides the upper curvature bound used on the right
    (default: the ambient's own class).
    """
    cls = graph.ambient.curvature_class if curvature_class is None else curvature_class
    u = grid.nodes
    t = graph.radius(u)
    _l2_hypothesis(graph.ambient, cls, float(t.max()))
    n = graph.d - 1
    sig = induced_coordinate_energy(graph, u)
    s = np.asarray(amb.sin_delta(cls, t))
    bound = n * t * t / (s * s)
    excess = sig - bound
    i = int(np.argmax(excess))
    lhs, rhs = float(sig[i]), float(bound[i])
    budget = {"quadrature": 0.0, "fem": 0.0, "root": 0.0,
              "roundoff": 64.0 * EPS * (abs(lhs) + abs(rhs))}
    eq = _is_sphere_about(graph, None)
    meta = {"worst_node": i, "t_worst": float(t[i]), "grid_size": grid.size,
            "rule": grid.rule.value, "class": cls.tag.value,
            "n_violating": int(np.sum(excess > budget["roundoff"]))}
    return BoundReport("LEMMA_L2", lhs, rhs, budget, rhs - lhs if eq else math.nan, meta)


# ---------------------------------------------------------------------------
# gradient corrections


def gradient_correction(graph: RadialGraph, grid: DirectionGrid, center=None, kind: str = "sin",
                        sample=None) -> float:
    """``int_M |grad^M f(r)|^2 dm`` with ``f = sin_delta`` (``kind="sin"``) or ``cos_delta``.

    ``|grad^M r|^2 = 1 - sec^-2`` about the pole; about another center it comes
    from the embedded normal.
    """
    s = evaluate(graph, grid) if sample is None else sample
    point = _center_point(graph, center)
    cls = graph.ambient.curvature_class
    if point is None:
        r = s.t
        g2 = 1.0 - 1.0 / s.sec_theta ** 2
    else:
        r, g2 = radial_gradient_sq(graph, s.nodes, point)
    if kind == "sin":
        f1 = np.asarray(amb.cos_delta(cls, r))
    elif kind == "cos":
        f1 = cls.curvature * np.asarray(amb.sin_delta(cls, r))
    else:
        raise ValueError(f"unknown correction kind {kind!r}")
    return math.fsum(f1 * f1 * g2 * s.dm_weight)


# ---------------------------------------------------------------------------
# eigenvalue bounds


def _ratio_report(check, graph, grid, lam, fem_abs, center: CenterResult, model_fn,
                  corr_kind=None, corr_div=None, extra=None):
    point = _center_point(graph, center)

    def state(g):
        s = evaluate(graph, g)
        model, R, _ = _comparison_radius(graph, g)
        corr = gradient_correction(graph, g, point, corr_kind, sample=s) if corr_kind else 0.0
        return {"R": R, "vol_M": s.volume, "correction": corr, "_model": model_fn(model)}

    def sides(st, R):
        model = st["_model"]
        lam_s = float(amb.sphere_eigenvalue(model, R))
        area = float(amb.sphere_area(model, R))
        rhs = st["vol_M"] / area
        if corr_kind:
            rhs += st["correction"] / (corr_div * area)
        return lam / lam_s, rhs, fem_abs / lam_s

    rep = _assemble(check, grid, state, sides, _is_sphere_about(graph, point), extra)
    return _with_sphere_meta(rep, state(grid)["_model"], lam)


def _with_sphere_meta(rep: BoundReport, model, lam):
    meta = dict(rep.metadata)
    R = meta["R"]
    meta["lambda1"] = lam
    meta["lambda1_sphere_R"] = float(amb.sphere_eigenvalue(model, R))
    meta["vol_S_R"] = float(amb.sphere_area(model, R))
    meta.setdefault("correction", 0.0)
    return replace(rep, metadata=meta)


def theorem1_check(graph: RadialGraph, grid: DirectionGrid, spectral,
                   p: CenterResult | None = None, fem_budget: float | None = None) -> BoundReport:
    """``lambda_1(M)/lambda_1(S(R)) <= Vol(M)/Vol(S(R))`` for ``0 <= K <= delta^2`` or ``K <= 0``."""
    ambient = graph.ambient
    if isinstance(ambient, Constant):
        if ambient.k < 0:
            raise HypothesisError("negative constant curvature is covered by the corrected bound")
    elif isinstance(ambient, Warped):
        _check_warped(ambient, (CurvatureTag.NONNEG_PINCHED, CurvatureTag.NONPOS))
    else:
        raise amb.UnsupportedAmbientError("rank-one spaces have their own bound")
    graph.validate(grid)
    center = _resolve_center(graph, grid, p)
    lam, fem = _lambda_input(spectral, fem_budget)
    return _ratio_report("THM1", graph, grid, lam, fem, center, lambda m: m,
                         extra={"moment_norm": center.moment_norm})


def theorem2_check(graph: RadialGraph, grid: DirectionGrid, spectral,
                   p: CenterResult | None = None, fem_budget: float | None = None) -> BoundReport:
    """Ratio bound plus ``1/(n Vol(S(R))) int_M |grad^M sin_delta r|^2`` for ``K <= -delta^2``."""
    ambient = graph.ambient
    if isinstance(ambient, Constant):
        if not ambient.k < 0:
            raise HypothesisError("the corrected bound needs negative curvature")
    elif isinstance(ambient, Warped):
        _check_warped(ambient, (CurvatureTag.PINCHED_NEG,))
    else:
        raise amb.UnsupportedAmbientError("rank-one spaces have their own bound")
    graph.validate(grid)
    center = _resolve_center(graph, grid, p)
    lam, fem = _lambda_input(spectral, fem_budget)
    return _ratio_report("THM2", graph, grid, lam, fem, center, lambda m: m, "sin", graph.d - 1,
                         extra={"moment_norm": center.moment_norm})


def _rank1_parts(graph, grid, center):
    point = _center_point(graph, center)

    def state(g):
        s = evaluate(graph, g)
        model, R, _ = _comparison_radius(graph, g)
        return {"R": R, "vol_M": s.volume, "_model": model,
                "correction": gradient_correction(graph, g, point, "sin", sample=s)}
    return point, state


def theorem3_check(graph: RadialGraph, grid: DirectionGrid, spectral=None,
                   p: CenterResult | None = None, form: Form | str = Form.SHARP,
                   fem_budget: float | None = None) -> BoundReport:
    """Eigenvalue bound in a rank-one symmetric space.

    ``k = 1`` uses the ratio form with the ``sinh`` correction divided by
    ``n - 1``. For ``k > 1`` the ``STATED`` form is the three-term bound on
    ``lambda_1`` and the ``SHARP`` form is
    ``[(kn-1) Vol(M) - (k-1) tanh^2 R Vol(S(R)) + int |grad sinh r|^2] / (Vol(S(R)) sinh^2 R)``.
    Without a spectral input the left side is analytic for geodesic spheres
    and not evaluated otherwise.
    """
    ambient = graph.ambient
    if not isinstance(ambient, Rank1):
        raise amb.UnsupportedAmbientError("this bound is stated for rank-one symmetric spaces")
    form = Form(form)
    graph.validate(grid)
    if spectral is None:
        lam, fem = _sphere_lambda(graph), 0.0
    else:
        if ambient.k > 1:
            raise amb.UnsupportedAmbientError("no finite-element solver for this rank-one space")
        lam, fem = _lambda_input(spectral, fem_budget)
    if math.isnan(lam):
        # right side only; the center is recorded but not required
        center = pole_certificate(graph, grid) if p is None else p
    else:
        center = _resolve_center(graph, grid, p)
    point, state = _rank1_parts(graph, grid, center)
    k, kn = ambient.k, ambient.dim
    n = kn - 1

    if k == 1:
        def sides(st, R):
            lam_s = float(ambient.sphere_eigenvalue(R))
            area = float(ambient.sphere_area(R))
            rhs = st["vol_M"] / area + st["correction"] / (n * area)
            return lam / lam_s, rhs, fem / lam_s
    elif form is Form.STATED:
        def sides(st, R):
            lam_s = float(ambient.sphere_eigenvalue(R))
            area = float(ambient.sphere_area(R))
            ratio = st["vol_M"] / area
            rhs = (lam_s * ratio + (k - 1) / math.cosh(R) ** 2 * ratio
                   + st["correction"] / (math.sinh(R) ** 2 * area))
            return lam, rhs, fem
    else:
        def sides(st, R):
            area = float(ambient.sphere_area(R))
            sh2 = math.sinh(R) ** 2
            rhs = ((kn - 1) * st["vol_M"] - (k - 1) * math.tanh(R) ** 2 * area
                   + st["correction"]) / (area * sh2)
            return lam, rhs, fem

    name = "THM3_STATED" if form is Form.STATED else "THM3_SHARP"
    rep = _assemble(name, grid, state, sides, _is_sphere_about(graph, point),
                    {"moment_norm": center.moment_norm, "form": form.value})
    rep = _with_sphere_meta(rep, ambient, lam)
    if form is Form.STATED and k > 1:
        rep = replace(rep, equality_class=False)
    return rep


def remark_hn_check(graph: RadialGraph, grid: DirectionGrid, spectral,
                    p: CenterResult | None = None, fem_budget: float | None = None) -> BoundReport:
    """Hyperbolic-space ratio bound with ``int_M |grad^M cosh r|^2`` as the correction.

    The right side of the ``sinh`` version is stored as ``metadata["sinh_rhs"]``.
    """
    ambient = graph.ambient
    if isinstance(ambient, Rank1) and ambient.k == 1:
        pass
    elif not (isinstance(ambient, Constant) and ambient.k == -1.0):
        raise amb.UnsupportedAmbientError("this bound is stated for real hyperbolic space")
    graph.validate(grid)
    center = _resolve_center(graph, grid, p)
    lam, fem = _lambda_input(spectral, fem_budget)
    point = _center_point(graph, center)
    n = graph.d - 1
    model = ambient if isinstance(ambient, Rank1) else ambient.model_space

    def state(g):
        s = evaluate(graph, g)
        _, R, _ = _comparison_radius(graph, g)
        return {"R": R, "vol_M": s.volume,
                "correction": gradient_correction(graph, g, point, "cos", sample=s),
                "sinh_correction": gradient_correction(graph, g, point, "sin", sample=s)}

    def sides(st, R):
        lam_s = float(amb.sphere_eigenvalue(model, R))
        area = float(amb.sphere_area(model, R))
        return lam / lam_s, st["vol_M"] / area + st["correction"] / (n * area), fem / lam_s

    rep = _assemble("REMARK_HN", grid, state, sides, _is_sphere_about(graph, point),
                    {"moment_norm": center.moment_norm})
    meta = rep.metadata
    area = float(amb.sphere_area(model, meta["R"]))
    sinh_rhs = meta["vol_M"] / area + meta["sinh_correction"] / (n * area)
    rep = replace(rep, metadata={**meta, "sinh_rhs": sinh_rhs})
    return _with_sphere_meta(rep, model, lam)
