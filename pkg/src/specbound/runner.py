"""Scenario execution, seeded sweeps and report emission."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import os
import time
import traceback
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from . import ambient as amb
from . import bounds as bd
from . import center as cm
from . import spectrum as sp
from . import surface as sf
from .ambient import Constant, Rank1
from .bounds import BoundReport, Verdict
from .config import FEM_CHECKS, ScenarioConfig, SuiteConfig, build_ambient
from .quadrature import make_grid

COLUMNS = ("scenario_id", "check", "ambient", "seed", "mesh_level", "grid_size", "lhs", "rhs",
           "margin", "error_budget", "equality_gap", "verdict", "lambda1", "lambda1_sphere_R",
           "R", "vol_M", "vol_S_R", "correction", "wall_ms")
FLOAT_COLUMNS = {"lhs", "rhs", "margin", "error_budget", "equality_gap", "lambda1",
                 "lambda1_sphere_R", "R", "vol_M", "vol_S_R", "correction"}
INT_COLUMNS = {"seed", "mesh_level", "grid_size", "wall_ms"}

EXIT_PASS, EXIT_VIOLATED, EXIT_FAILURE = 0, 2, 3
NEGATE_ENV = "SPECBOUND_TEST_NEGATE"   # comma-separated checks whose margin is negated
JOBS_ENV = "SPECBOUND_JOBS"


@dataclass
class ScenarioResult:
    scenario_id: str
    ambient: str
    seed: int | None
    reports: list = field(default_factory=list)
    spectral: object = None       # ConvergenceTable or None
    center: object = None         # CenterResult or None
    error: str | None = None
    wall_ms: int = 0
    mesh_level: int | None = None
    checks: tuple = ()


@dataclass
class RunReport:
    scenarios: list
    version: str = __version__
    config_hash: str = ""

    @property
    def errors(self):
        return [s for s in self.scenarios if s.error]

    def reports(self):
        for s in self.scenarios:
            for r in s.reports:
                yield s, r

    @property
    def violated(self):
        return [(s, r) for s, r in self.reports() if r.verdict is Verdict.VIOLATED]

    @property
    def equality_failures(self):
        return [(s, r) for s, r in self.reports()
                if r.is_equality_case and r.equality_class and abs(r.equality_gap) > r.budget]

    @property
    def passed(self) -> bool:
        return not self.violated and not self.equality_failures and not self.errors

    @property
    def exit_code(self) -> int:
        if self.errors:
            return EXIT_FAILURE
        if self.violated or self.equality_failures:
            return EXIT_VIOLATED
        return EXIT_PASS


# ---------------------------------------------------------------------------
# pipeline


def build_graph(sc: ScenarioConfig, ambient):
    g = sc.graph
    t = g["type"]
    if t == "sphere":
        return sf.make_geodesic_sphere(ambient, float(g["radius"]))
    if t == "offset_sphere":
        return sf.OffsetSphereGraph(ambient, [float(x) for x in g["center"]],
                                    float(g["radius"])).validate()
    if t == "generator":
        return sf.random_star_graph(ambient, int(g["seed"]), float(g["r0"]),
                                    float(g.get("eps", 0.2)), int(g.get("bandlimit", 4)),
                                    bool(g.get("symmetric", False)))
    path = g["path"]
    if not os.path.isabs(path):
        path = os.path.join(sc.base_dir, path)
    with open(path, encoding="utf-8") as fh:
        graph = sf.from_record(fh.read())
    if graph.ambient != ambient:
        raise ValueError(f"fixture ambient {graph.ambient!r} differs from the configured one")
    return graph.validate()


def _center_for(graph, grid, tol):
    try:
        sf.geometry_of(graph.ambient)
    except amb.UnsupportedAmbientError:
        return cm.pole_certificate(graph, grid, tol)
    return cm.solve_center(graph, grid, tol=tol)


def _com_report(center: cm.CenterResult, tol: float) -> BoundReport:
    rhs = tol * center.volume
    budget = {"quadrature": 0.0, "fem": 0.0, "root": 0.0, "roundoff": 0.0}
    return BoundReport("COM", center.moment_norm, rhs, budget, math.nan,
                       {"vol_M": center.volume, "iterations": center.iterations})


def _rayleigh_report(graph, table, results, center, abort_tol) -> BoundReport:
    level = table.levels[-1]
    res = results[level]
    mesh = sp.build_intrinsic_mesh(graph, level)
    op = sp.assemble(mesh)
    point = None
    if center is not None and np.any(center.coordinates):
        point = center.point
    rb = sp.rayleigh_bound(mesh, point, op, abort_tol)
    budget = {"quadrature": 0.0, "fem": 0.0, "root": 0.0,
              "roundoff": 1e-10 * abs(rb.value)}
    meta = {"lambda1": res.lambda1, "max_projection": rb.max_projection}
    if isinstance(graph, sf.ZonalGraph) and graph.is_sphere:
        try:
            meta["lambda1_sphere_R"] = float(amb.sphere_eigenvalue(graph.ambient, graph.r0))
            meta["R"] = graph.r0
        except amb.UnsupportedAmbientError:
            pass
    return BoundReport("RAYLEIGH", res.lambda1, rb.value, budget, math.nan, meta)


def _coord_eig_report(graph, levels) -> BoundReport:
    R = graph.r0
    ambient = graph.ambient
    res = [sp.coordinate_eigenfunction_residual(ambient, R, l) for l in levels]
    lam = float(amb.sphere_eigenvalue(ambient, R))
    wrong = sp.coordinate_eigenfunction_residual(ambient, R, levels[-1], 1.5 * lam)
    ratios = [a / b for a, b in zip(res, res[1:])]
    budget = {"quadrature": 0.0, "fem": 0.0, "root": 0.0, "roundoff": 0.0}
    meta = {"R": R, "lambda1_sphere_R": lam, "residuals": res, "ratio": ratios[-1],
            "order": math.log2(ratios[-1]), "wrong_residual": wrong}
    # discrimination: the wrong eigenvalue must leave a larger residual
    return BoundReport("COORD_EIG", res[-1], wrong, budget, math.nan, meta)


def run_scenario(sc: ScenarioConfig) -> ScenarioResult:
    t0 = time.perf_counter()
    out = ScenarioResult(sc.id, "", sc.seed, checks=tuple(sc.checks))
    try:
        ambient = build_ambient(sc.ambient)
        out.ambient = sf.ambient_record(ambient).split(" ", 1)[1]
        graph = build_graph(sc, ambient)
        gspec = sc.grid
        grid = make_grid(ambient.dim, gspec.get("rule"), gspec.get("resolution"),
                         int(gspec.get("seed", 0)))
        tol_c = float(sc.tolerances.get("center", 1e-10))
        checks = sc.checks
        needs_center = bool(set(checks) & (FEM_CHECKS | {"COM"}))
        center = _center_for(graph, grid, tol_c) if needs_center else None
        out.center = center
        table, results = None, {}
        if set(checks) & FEM_CHECKS and not (isinstance(ambient, Rank1) and ambient.k > 1):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                table = sp.convergence_study(graph, sc.levels, results=results)
            out.spectral = table
            out.mesh_level = table.levels[-1]
        # theorem checks take the center only when it converged
        pc = center if (center is not None and center.converged) else None
        for c in checks:
            if c == "LEMMA1":
                r = bd.lemma1_check(graph, grid, None)
            elif c == "LEMMA2":
                r = bd.lemma2_check(graph, grid, None)
            elif c == "LEMMA_L2":
                r = bd.lemma_l2_check(graph, grid)
            elif c == "THM1":
                r = bd.theorem1_check(graph, grid, table, pc)
            elif c == "THM2":
                r = bd.theorem2_check(graph, grid, table, pc)
            elif c in ("THM3_STATED", "THM3_SHARP"):
                r = bd.theorem3_check(graph, grid, table, pc, c.split("_")[1])
            elif c == "REMARK_HN":
                r = bd.remark_hn_check(graph, grid, table, pc)
            elif c == "COM":
                r = _com_report(center, tol_c)
            elif c == "RAYLEIGH":
                r = _rayleigh_report(graph, table, results, pc,
                                     float(sc.tolerances.get("rayleigh_projection", 1e-4)))
            else:
                r = _coord_eig_report(graph, sc.levels)
            out.reports.append(_maybe_negate(r))
    except Exception as exc:  # recorded per scenario; the suite continues
        out.error = f"{type(exc).__name__}: {exc}"
        out.reports = []
        if os.environ.get("SPECBOUND_DEBUG"):
            traceback.print_exc()
    out.wall_ms = int(round(1000.0 * (time.perf_counter() - t0)))
    return out


def _maybe_negate(r: BoundReport) -> BoundReport:
    names = {x.strip() for x in os.environ.get(NEGATE_ENV, "").split(",") if x.strip()}
    if r.check in names and not math.isnan(r.margin):
        # swap the sides so that the margin changes sign
        return dataclasses.replace(r, lhs=r.rhs, rhs=r.lhs, equality_gap=-r.equality_gap)
    return r


def default_jobs() -> int:
    try:
        return max(1, int(os.environ.get(JOBS_ENV, "1")))
    except ValueError:
        return 1


def run(configs, jobs: int | None = None, config_hash: str = "") -> RunReport:
    if isinstance(configs, SuiteConfig):
        config_hash = config_hash or configs.digest
        configs = configs.scenarios
    configs = list(configs)
    jobs = default_jobs() if jobs is None else max(1, int(jobs))
    if jobs == 1 or len(configs) <= 1:
        results = [run_scenario(c) for c in configs]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            # map keeps input order, so the merge is deterministic
            results = list(ex.map(run_scenario, configs))
    return RunReport(results, __version__, config_hash)


def expand_seeds(configs, seeds) -> list:
    out = []
    for c in configs:
        if c.graph.get("type") == "generator":
            out.extend(c.with_seed(s) for s in seeds)
        else:
            out.append(c)
    if not any(c.graph.get("type") == "generator" for c in configs):
        raise ValueError("sweep needs at least one generator scenario")
    return out


def sweep(base, seeds, jobs: int | None = None) -> RunReport:
    if isinstance(base, SuiteConfig):
        base = base.scenarios
    elif isinstance(base, ScenarioConfig):
        base = [base]
    from .config import digest_of
    expanded = expand_seeds(list(base), seeds)
    return run(expanded, jobs, digest_of(expanded))


def parse_seed_range(text: str) -> range:
    a, sep, b = text.partition("..")
    if not sep:
        raise ValueError(f"seed range must look like A..B, got {text!r}")
    lo, hi = int(a), int(b)
    if hi < lo:
        raise ValueError("empty seed range")
    return range(lo, hi + 1)


# ---------------------------------------------------------------------------
# emission


def _fmt(col, v) -> str:
    if v is None:
        return ""
    if col in FLOAT_COLUMNS:
        v = float(v)
        return "nan" if math.isnan(v) else format(v, ".17g")
    return str(v)


def rows(report: RunReport):
    for s in report.scenarios:
        if s.error:
            for c in s.checks:
                yield {"scenario_id": s.scenario_id, "check": c, "ambient": s.ambient,
                       "seed": s.seed, "mesh_level": s.mesh_level, "grid_size": None,
                       "lhs": math.nan, "rhs": math.nan, "margin": math.nan,
                       "error_budget": math.nan, "equality_gap": math.nan,
                       "verdict": Verdict.NOT_EVALUATED.value, "lambda1": math.nan,
                       "lambda1_sphere_R": math.nan, "R": math.nan, "vol_M": math.nan,
                       "vol_S_R": math.nan, "correction": math.nan, "wall_ms": s.wall_ms}
            continue
        for r in s.reports:
            m = r.metadata
            fem = r.check in FEM_CHECKS
            yield {"scenario_id": s.scenario_id, "check": r.check, "ambient": s.ambient,
                   "seed": s.seed, "mesh_level": s.mesh_level if fem else None,
                   "grid_size": m.get("grid_size"), "lhs": r.lhs, "rhs": r.rhs,
                   "margin": r.margin, "error_budget": r.budget,
                   "equality_gap": r.equality_gap, "verdict": r.verdict.value,
                   "lambda1": m.get("lambda1", math.nan),
                   "lambda1_sphere_R": m.get("lambda1_sphere_R", math.nan),
                   "R": m.get("R", math.nan), "vol_M": m.get("vol_M", math.nan),
                   "vol_S_R": m.get("vol_S_R", math.nan),
                   "correction": m.get("correction", math.nan), "wall_ms": s.wall_ms}


def to_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for rec in records:
        w.writerow([_fmt(c, rec[c]) for c in COLUMNS])
    return buf.getvalue()


def to_jsonl(records) -> str:
    lines = []
    for rec in records:
        obj = {}
        for c in COLUMNS:
            v = rec[c]
            if c in FLOAT_COLUMNS:
                v = None if v is None or math.isnan(float(v)) else float(v)
            obj[c] = v
        lines.append(json.dumps(obj))
    return "".join(line + "\n" for line in lines)


def from_jsonl(text: str) -> list:
    out = []
    for line in text.splitlines():
        if not line.strip():
            continue
        obj = json.loads(line)
        for c in FLOAT_COLUMNS:
            if obj[c] is None:
                obj[c] = math.nan
        out.append(obj)
    return out


def read_csv(text: str) -> list:
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != COLUMNS:
        raise ValueError("CSV header does not match the report schema")
    out = []
    for row in reader:
        rec = {}
        for c in COLUMNS:
            v = row[c]
            if c in FLOAT_COLUMNS:
                rec[c] = float(v)
            elif c in INT_COLUMNS:
                rec[c] = int(v) if v != "" else None
            else:
                rec[c] = v
        out.append(rec)
    return out


def emit(report: RunReport, out_dir, fmt: str = "csv") -> list:
    """Write ``results.csv`` or ``results.jsonl`` plus ``run.json`` into ``out_dir``."""
    os.makedirs(out_dir, exist_ok=True)
    recs = list(rows(report))
    paths = []
    if fmt == "csv":
        p = os.path.join(out_dir, "results.csv")
        body = to_csv(recs)
    elif fmt == "jsonl":
        p = os.path.join(out_dir, "results.jsonl")
        body = to_jsonl(recs)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    with open(p, "w", encoding="utf-8", newline="") as fh:
        fh.write(body)
    paths.append(p)
    summary = {
        "version": report.version,
        "config_hash": report.config_hash,
        "suite_verdict": "PASS" if report.passed else "FAIL",
        "exit_code": report.exit_code,
        "errors": {s.scenario_id: s.error for s in report.errors},
        "wall_ms": {s.scenario_id: s.wall_ms for s in report.scenarios},
    }
    p = os.path.join(out_dir, "run.json")
    with open(p, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    paths.append(p)
    return paths


def load_results(in_dir) -> list:
    csv_path = os.path.join(in_dir, "results.csv")
    if os.path.exists(csv_path):
        with open(csv_path, encoding="utf-8") as fh:
            return read_csv(fh.read())
    with open(os.path.join(in_dir, "results.jsonl"), encoding="utf-8") as fh:
        return from_jsonl(fh.read())


def summarize(records) -> str:
    by = {}
    for rec in records:
        d = by.setdefault(rec["check"], {})
        d[rec["verdict"]] = d.get(rec["verdict"], 0) + 1
    lines = [f"{'check':<12} " + " ".join(f"{v.value:>22}" for v in Verdict)]
    for check in sorted(by):
        lines.append(f"{check:<12} " + " ".join(f"{by[check].get(v.value, 0):>22d}"
                                                for v in Verdict))
    return "\n".join(lines)
