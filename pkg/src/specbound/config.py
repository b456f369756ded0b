"""Scenario configuration files (YAML) with strict validation.

Grammar::

    defaults:                  # optional; merged under every scenario
      grid: {rule: GAUSS_PRODUCT, resolution: 48}
      levels: [3, 4, 5]
    output: {dir: out, format: csv}      # optional
    scenarios:
      - id: r3-sphere
        ambient: {type: constant, dim: 3, k: 0.0}
        graph: {type: sphere, radius: 1.0}
        checks: [LEMMA1, THM1]

Ambient types: ``constant`` (dim, k), ``rank1`` (k, n), ``warped`` (dim,
family, r_max, delta, eps, m, class, class_delta). Graph types: ``sphere``
(radius), ``offset_sphere`` (center, radius), ``generator`` (seed, r0, eps,
bandlimit, symmetric) and ``fixture`` (path to a graph record, relative to the
config file). Unknown keys anywhere are errors.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
import os
from dataclasses import dataclass, field, replace

import yaml

from . import ambient as amb
from .ambient import Constant, CurvatureClass, CurvatureTag, Rank1, Warped
from .quadrature import Rule, default_rule

CHECKS = ("LEMMA1", "LEMMA2", "LEMMA_L2", "THM1", "THM2", "THM3_STATED", "THM3_SHARP",
          "REMARK_HN", "COM", "RAYLEIGH", "COORD_EIG")
FEM_CHECKS = {"THM1", "THM2", "THM3_STATED", "THM3_SHARP", "REMARK_HN", "RAYLEIGH"}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    id: str
    ambient: dict
    graph: dict
    checks: tuple
    grid: dict = field(default_factory=dict)
    levels: tuple = (3, 4, 5)
    tolerances: dict = field(default_factory=dict)
    base_dir: str = "."

    @property
    def seed(self):
        return self.graph.get("seed") if self.graph.get("type") == "generator" else None

    def with_seed(self, seed: int) -> "ScenarioConfig":
        if self.graph.get("type") != "generator":
            raise ConfigError(f"scenario {self.id!r} has no generator graph to reseed")
        return replace(self, id=f"{self.id}-s{seed}", graph={**self.graph, "seed": int(seed)})

    def to_dict(self) -> dict:
        return {"id": self.id, "ambient": self.ambient, "graph": self.graph,
                "checks": list(self.checks), "grid": self.grid, "levels": list(self.levels),
                "tolerances": self.tolerances}


_TOP_KEYS = {"defaults", "output", "scenarios"}
_SCENARIO_KEYS = {"id", "ambient", "graph", "checks", "grid", "levels", "tolerances"}
_DEFAULT_KEYS = {"grid", "levels", "tolerances", "checks"}
_AMBIENT_KEYS = {
    "constant": ({"dim"}, {"k"}),
    "rank1": ({"k", "n"}, set()),
    "warped": ({"dim", "family", "r_max", "class"}, {"delta", "eps", "m", "class_delta"}),
}
_GRAPH_KEYS = {
    "sphere": ({"radius"}, set()),
    "offset_sphere": ({"center", "radius"}, set()),
    "generator": ({"seed", "r0"}, {"eps", "bandlimit", "symmetric"}),
    "fixture": ({"path"}, set()),
}
_GRID_KEYS = {"rule", "resolution", "seed"}
_TOL_KEYS = {"center", "rayleigh_projection"}
_OUTPUT_KEYS = {"dir", "format"}


def _keys(where: str, d, required: set, optional: set):
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected a mapping, got {type(d).__name__}")
    unknown = set(d) - required - optional
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {sorted(unknown)}")
    missing = required - set(d)
    if missing:
        raise ConfigError(f"{where}: missing key(s) {sorted(missing)}")


def build_ambient(spec: dict):
    t = spec["type"]
    if t == "constant":
        return Constant(int(spec["dim"]), float(spec.get("k", 0.0)))
    if t == "rank1":
        return Rank1(int(spec["k"]), int(spec["n"]))
    warp = amb.WarpSpec(spec["family"], float(spec["r_max"]), float(spec.get("delta", 1.0)),
                        float(spec.get("eps", 0.0)), int(spec.get("m", 2)))
    cls = CurvatureClass(spec["class"], float(spec.get("class_delta", 1.0)))
    return Warped(int(spec["dim"]), warp, cls)


def _compatible(check: str, a) -> str | None:
    """``None`` when ``check`` applies to ambient ``a``; otherwise the reason."""
    fem_ok = (a.dim == 3 and not (isinstance(a, Rank1) and a.k > 1))
    if check in FEM_CHECKS - {"THM3_STATED", "THM3_SHARP"} and not fem_ok:
        return "needs a 3-dimensional ambient with a finite-element encoding"
    if check == "LEMMA2" and not isinstance(a, Rank1):
        return "the tanh inequality is stated for rank-one symmetric spaces only"
    if check == "LEMMA_L2" and isinstance(a, Rank1):
        return "coordinate energies need a constant-curvature or warped ambient"
    if check == "THM1":
        if isinstance(a, Rank1) or (isinstance(a, Constant) and a.k < 0):
            return "needs 0 <= K <= delta^2 or K <= 0 (use THM2 or THM3 for negative curvature)"
        if isinstance(a, Warped) and a.declared_class.tag is CurvatureTag.PINCHED_NEG:
            return "declared class K <= -delta^2 belongs to THM2"
    if check == "THM2":
        if isinstance(a, Rank1) or (isinstance(a, Constant) and a.k >= 0):
            return "needs K <= -delta^2 in a space form or warped ambient"
        if isinstance(a, Warped) and a.declared_class.tag is not CurvatureTag.PINCHED_NEG:
            return "declared class must be PINCHED_NEG"
    if check in ("THM3_STATED", "THM3_SHARP") and not isinstance(a, Rank1):
        return "stated for rank-one symmetric spaces only"
    if check == "REMARK_HN":
        hn = (isinstance(a, Constant) and a.k == -1.0) or (isinstance(a, Rank1) and a.k == 1)
        if not hn:
            return "stated for real hyperbolic space only"
    if check == "COORD_EIG" and not fem_ok:
        return "needs a 3-dimensional ambient with a finite-element encoding"
    if check == "COORD_EIG" and isinstance(a, Warped):
        return "needs a closed-form sphere spectrum"
    return None


def _validate_grid(where, grid, d):
    _keys(where, grid, set(), _GRID_KEYS)
    rule = Rule(grid.get("rule", default_rule(d).value))
    if rule in (Rule.GAUSS_PRODUCT, Rule.ICOSPHERE_VERTEX) and d != 3:
        raise ConfigError(f"{where}: rule {rule.value} needs a 3-dimensional ambient")
    if rule is Rule.HOPF_PRODUCT and d != 4:
        raise ConfigError(f"{where}: rule HOPF_PRODUCT needs a 4-dimensional ambient")


def validate_scenario(sc: ScenarioConfig):
    where = f"scenario {sc.id!r}"
    t = sc.ambient.get("type") if isinstance(sc.ambient, dict) else None
    if t not in _AMBIENT_KEYS:
        raise ConfigError(f"{where}: ambient type must be one of {sorted(_AMBIENT_KEYS)}")
    req, opt = _AMBIENT_KEYS[t]
    _keys(f"{where} ambient", sc.ambient, req | {"type"}, opt)
    try:
        a = build_ambient(sc.ambient)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{where} ambient: {exc}") from exc
    g = sc.graph.get("type") if isinstance(sc.graph, dict) else None
    if g not in _GRAPH_KEYS:
        raise ConfigError(f"{where}: graph type must be one of {sorted(_GRAPH_KEYS)}")
    req, opt = _GRAPH_KEYS[g]
    _keys(f"{where} graph", sc.graph, req | {"type"}, opt)
    if g == "offset_sphere" and not isinstance(a, Constant):
        raise ConfigError(f"{where}: offset spheres need a constant-curvature ambient")
    if not sc.checks:
        raise ConfigError(f"{where}: empty checks list")
    for c in sc.checks:
        if c not in CHECKS:
            raise ConfigError(f"{where}: unknown check {c!r}; choose from {list(CHECKS)}")
        why = _compatible(c, a)
        if why:
            raise ConfigError(f"{where}: check {c} is incompatible with ambient "
                              f"{sc.ambient['type']} ({why})")
    if "COORD_EIG" in sc.checks and g != "sphere":
        raise ConfigError(f"{where}: COORD_EIG needs a geodesic sphere graph")
    _validate_grid(f"{where} grid", sc.grid, a.dim)
    if len(sc.levels) < 3 or any(b - a_ != 1 for a_, b in zip(sc.levels, sc.levels[1:])):
        raise ConfigError(f"{where}: levels must be at least three consecutive integers")
    if min(sc.levels) < 2 or max(sc.levels) > 7:
        raise ConfigError(f"{where}: levels must lie in [2, 7]")
    _keys(f"{where} tolerances", sc.tolerances, set(), _TOL_KEYS)
    return a


@dataclass(frozen=True)
class SuiteConfig:
    scenarios: tuple
    output: dict
    digest: str


def _mark(node) -> str:
    m = getattr(node, "start_mark", None)
    return f"line {m.line + 1}, column {m.column + 1}" if m else "unknown position"


def loads(text: str, base_dir: str = ".") -> SuiteConfig:
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        m = exc.problem_mark
        raise ConfigError(f"parse error at line {m.line + 1}, column {m.column + 1}: "
                          f"{exc.problem}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"top level must be a mapping ({_mark(node)})")
    _keys("config", data, {"scenarios"}, _TOP_KEYS - {"scenarios"})
    defaults = data.get("defaults") or {}
    _keys("defaults", defaults, set(), _DEFAULT_KEYS)
    output = data.get("output") or {}
    _keys("output", output, set(), _OUTPUT_KEYS)
    if output.get("format", "csv") not in ("csv", "jsonl"):
        raise ConfigError("output format must be csv or jsonl")
    raw = data["scenarios"]
    if not isinstance(raw, list) or not raw:
        raise ConfigError("scenarios must be a non-empty list")
    seen, out = set(), []
    for i, item in enumerate(raw):
        if not isinstance(item, dict):
            raise ConfigError(f"scenario #{i + 1}: expected a mapping")
        merged = copy.deepcopy(defaults)
        merged.update(item)
        _keys(f"scenario #{i + 1}", merged, {"id", "ambient", "graph", "checks"},
              _SCENARIO_KEYS - {"id", "ambient", "graph", "checks"})
        sid = str(merged["id"])
        if sid in seen:
            raise ConfigError(f"duplicate scenario id {sid!r}")
        seen.add(sid)
        sc = ScenarioConfig(sid, dict(merged["ambient"]), dict(merged["graph"]),
                            tuple(merged["checks"]), dict(merged.get("grid") or {}),
                            tuple(int(x) for x in merged.get("levels", (3, 4, 5))),
                            dict(merged.get("tolerances") or {}), base_dir)
        validate_scenario(sc)
        out.append(sc)
    return SuiteConfig(tuple(out), output, digest_of(out))


def load_config(path) -> SuiteConfig:
    path = os.fspath(path)
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return loads(text, os.path.dirname(os.path.abspath(path)))


def digest_of(scenarios) -> str:
    blob = json.dumps([s.to_dict() for s in scenarios], sort_keys=True, default=_jsonable)
    return hashlib.sha256(blob.encode()).hexdigest()


def _jsonable(x):
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    return str(x)
