"""Job files and reports.

A job is a YAML document describing a model manifold, a bundle (directly in
a frame or as a tree of constructions), form requests and named checks.
:func:`run_job` evaluates it into a :class:`Report`, which serialises to
JSON.  The job format is described in the README.
"""

from __future__ import annotations

import datetime as _dt
import json
import logging
import math
import platform
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable

import numpy as np
import yaml

from . import __version__
from . import bundles as bd
from . import constructions as cons
from . import forms as fm
from . import geometry as geo
from . import matrices as mx
from . import random_fixtures as rf
from . import scalar as sf
from .bundles import ConnectionData, MetricField, MetricPath
from .constructions import BundleData
from .errors import JobSpecError, NonHermitianError, NotPositiveDefiniteError
from .forms import Form
from .matrices import MatrixForm

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
FIXTURE_DIR = Path(__file__).parent / "fixtures"
FORMS = ("v", "tv", "at", "at_trans", "ah", "ch")
CONNECTION_CHOICES = ("bundle", "chern", "flat")


@dataclass
class Tolerances:
    identity: float = 1e-9
    exact: float = 1e-12
    transgression: float = 1e-8
    integral: float = 1e-5

    def as_dict(self):
        return {"identity": self.identity, "exact": self.exact, "transgression": self.transgression, "integral": self.integral}


@dataclass
class JobSpec:
    manifold: dict
    bundle: dict | None
    requests: list = field(default_factory=list)
    checks: list = field(default_factory=list)
    tolerances: Tolerances = field(default_factory=Tolerances)
    seed: int = 0
    samples: int = 100
    name: str = ""


# ----------------------------------------------------------------------------
# Loading


def _require(cond, msg):
    if not cond:
        raise JobSpecError(msg)


def parse_job(data: Any, name: str = "") -> JobSpec:
    """Validate the top-level structure of a loaded job document."""
    _require(isinstance(data, dict), "job must be a mapping")
    allowed = {"schema_version", "name", "manifold", "bundle", "requests", "checks", "tolerances", "seed", "samples"}
    unknown = set(data) - allowed
    _require(not unknown, f"unknown top-level keys: {sorted(unknown)}")
    version = data.get("schema_version", SCHEMA_VERSION)
    _require(version == SCHEMA_VERSION, f"unsupported schema_version {version!r}")
    _require(isinstance(data.get("manifold"), dict), "job needs a 'manifold' mapping")
    tol = Tolerances()
    for k, v in (data.get("tolerances") or {}).items():
        _require(hasattr(tol, k), f"unknown tolerance {k!r}")
        setattr(tol, k, _as_float(v, k))
    requests = data.get("requests") or []
    checks = data.get("checks") or []
    _require(isinstance(requests, list) and isinstance(checks, list), "'requests' and 'checks' must be lists")
    for r in requests:
        _require(isinstance(r, dict) and r.get("form") in FORMS, f"request needs form in {FORMS}: {r!r}")
        idx = r.get("index", 0)
        _require(isinstance(idx, int) and idx >= 0, f"request index must be a non-negative integer: {r!r}")
    for c in checks:
        if isinstance(c, str):
            c = {"name": c}
        _require(isinstance(c, dict) and c.get("name") in CHECKS, f"unknown check {c!r}; known: {sorted(CHECKS)}")
    checks = [{"name": c} if isinstance(c, str) else c for c in checks]
    return JobSpec(
        manifold=data["manifold"],
        bundle=data.get("bundle"),
        requests=requests,
        checks=checks,
        tolerances=tol,
        seed=int(data.get("seed", 0)),
        samples=int(data.get("samples", 100)),
        name=str(data.get("name", name)),
    )


def resolve_job_path(path: str | Path) -> Path:
    """A filesystem path, or the name of a shipped fixture."""
    p = Path(path)
    if p.exists():
        return p
    for cand in (FIXTURE_DIR / str(path), FIXTURE_DIR / f"{path}.job"):
        if cand.exists():
            return cand
    raise FileNotFoundError(f"no job file {path!s}")


def load_job(path: str | Path) -> JobSpec:
    p = resolve_job_path(path)
    try:
        data = yaml.safe_load(p.read_text())
    except yaml.YAMLError as e:
        raise JobSpecError(f"{p}: invalid YAML: {e}") from e
    return parse_job(data, p.stem)


# ----------------------------------------------------------------------------
# Building objects


def _parse_complex(x) -> complex:
    if isinstance(x, (int, float, complex)) and not isinstance(x, bool):
        return complex(x)
    if isinstance(x, str):
        e = sf.parse_expr(x, sf.ChartSpec(1, ("zz",)))
        if not sf.is_constant(e):
            raise JobSpecError(f"expected a constant, got {x!r}")
        return e.value
    if isinstance(x, list) and len(x) == 2:
        return complex(float(x[0]), float(x[1]))
    raise JobSpecError(f"cannot read {x!r} as a complex number")


def build_manifold(desc: dict, resolution: int | None = None) -> geo.ModelManifold:
    factors = desc.get("factors")
    _require(isinstance(factors, list) and factors, "manifold needs a non-empty 'factors' list")
    res = int(resolution or desc.get("resolution", geo.DEFAULT_RESOLUTION))
    parts = []
    next_index = 1
    for f in factors:
        _require(isinstance(f, dict), f"manifold factor must be a mapping: {f!r}")
        kind = f.get("kind")
        if kind == "cp1":
            coords = f.get("coords") or [f"z{next_index}"]
            _require(len(coords) == 1, "a cp1 factor has exactly one coordinate")
            parts.append(geo.make_cp1(coords[0], res))
        elif kind == "torus":
            n = int(f.get("n", len(f.get("coords") or []) or 1))
            coords = f.get("coords") or [f"z{next_index + k}" for k in range(n)]
            periods = f.get("periods")
            if periods is not None:
                periods = [(_parse_complex(a), _parse_complex(b)) for a, b in periods]
            parts.append(geo.make_torus(n, periods, coords, res))
        else:
            raise JobSpecError(f"unknown manifold factor kind {kind!r}")
        next_index += parts[-1].n
    M = parts[0]
    for P in parts[1:]:
        M = geo.product(M, P)
    return M


class _Builder:
    def __init__(self, manifold: geo.ModelManifold):
        self.manifold = manifold

    def expr(self, text, chart, params=()):
        if isinstance(text, (int, float)) and not isinstance(text, bool):
            return sf.const(text)
        if not isinstance(text, str):
            raise JobSpecError(f"expected an expression string, got {text!r}")
        return sf.parse_expr(text, chart, params)

    def form(self, entry, chart, params=()) -> Form:
        if entry in (0, "0", None):
            return Form.zero(chart)
        if isinstance(entry, (str, int, float)):
            return Form.scalar(chart, self.expr(entry, chart, params))
        if isinstance(entry, dict):
            acc = Form.zero(chart)
            for label, coeff in entry.items():
                sign, key = fm.parse_basis_label(chart, str(label))
                if sign == 0:
                    continue
                acc = acc + Form(chart, {key: sf.mul(sign, self.expr(coeff, chart, params))})
            return acc
        raise JobSpecError(f"cannot read form entry {entry!r}")

    def matrix(self, rows, chart, rank=None, params=()) -> MatrixForm:
        _require(isinstance(rows, list) and all(isinstance(r, list) for r in rows), "matrix must be a list of rows")
        if rank is not None:
            _require(len(rows) == rank and all(len(r) == rank for r in rows), f"matrix must be {rank}x{rank}")
        return MatrixForm(chart, [[self.form(e, chart, params) for e in row] for row in rows])

    def block(self, rows, chart, p, q):
        _require(isinstance(rows, list) and len(rows) == p and all(isinstance(r, list) and len(r) == q for r in rows), f"block must be {p}x{q}")
        return [[self.form(e, chart) for e in row] for row in rows]

    def scalars(self, rows, chart, rank=None, params=()):
        _require(isinstance(rows, list) and all(isinstance(r, list) for r in rows), "metric must be a list of rows")
        if rank is not None:
            _require(len(rows) == rank and all(len(r) == rank for r in rows), f"metric must be {rank}x{rank}")
        return [[self.expr(e, chart, params) for e in row] for row in rows]

    def bundle(self, node, M: geo.ModelManifold | None = None) -> BundleData:
        M = M or self.manifold
        _require(isinstance(node, dict), f"bundle node must be a mapping: {node!r}")
        kinds = [k for k in ("frame", "trivial", "line_cp1", "sum", "tensor", "pullback", "extension") if k in node]
        _require(len(kinds) == 1, f"bundle node needs exactly one constructor, found {kinds}")
        extra = set(node) - {kinds[0], "higgs", "metric", "name"}
        _require(not extra, f"unknown bundle keys {sorted(extra)}")
        kind, body = kinds[0], node[kinds[0]]
        chart = M.chart
        if kind == "frame":
            B = self._frame(body, M)
        elif kind == "trivial":
            B = cons.trivial_bundle(M, int((body or {}).get("rank", 1)))
        elif kind == "line_cp1":
            body = body or {}
            coord = body.get("coord")
            idx = 0 if coord is None else chart.coord_names.index(coord)
            _require(chart.kinds[idx] == "cp1", "line_cp1 needs a cp1 coordinate")
            B = cons.cp1_line_bundle(M, int(body.get("degree", 1)), idx)
        elif kind in ("sum", "tensor"):
            _require(isinstance(body, list) and len(body) >= 2, f"{kind} needs a list of at least two bundles")
            parts = [self.bundle(b, M) for b in body]
            op = cons.direct_sum if kind == "sum" else cons.tensor
            B = parts[0]
            for P in parts[1:]:
                B = op(B, P)
        elif kind == "pullback":
            _require(isinstance(body, dict) and "bundle" in body, "pullback needs 'bundle'")
            if "factor" in body:
                i = int(body["factor"])
                target = M.factor_manifold(i)
                f = geo.projection(M, i)
            else:
                _require("manifold" in body and "map" in body, "pullback needs 'factor' or 'manifold' + 'map'")
                target = build_manifold(body["manifold"], M.resolution)
                comps = [self.expr(c, chart) for c in body["map"]]
                f = geo.HoloMap(chart, target.chart, comps)
            B = cons.pull_bundle(f, self.bundle(body["bundle"], target), M)
        else:
            _require(isinstance(body, dict) and "sub" in body and "quotient" in body, "extension needs 'sub' and 'quotient'")
            sub = self.bundle(body["sub"], M)
            quo = self.bundle(body["quotient"], M)
            s = self.block(body.get("s_deriv", [[0] * quo.rank for _ in range(sub.rank)]), chart, sub.rank, quo.rank)
            off = body.get("higgs_offdiag")
            off = None if off is None else self.block(off, chart, sub.rank, quo.rank)
            B = cons.split_extension(sub, quo, s, off)
        if "metric" in node:
            B = B.with_metric(MetricField(chart, self.scalars(node["metric"], chart, B.rank)))
        if "higgs" in node:
            B = B.with_higgs(self.matrix(node["higgs"], chart, B.rank))
        if "name" in node:
            B = replace(B, name=str(node["name"]))
        return B

    def _frame(self, body, M):
        _require(isinstance(body, dict) and "rank" in body, "frame needs 'rank'")
        chart = M.chart
        r = int(body["rank"])
        metric = None
        if "metric" in body:
            metric = MetricField(chart, self.scalars(body["metric"], chart, r))
        conn = body.get("connection", "chern" if metric is not None else "zero")
        if conn == "chern":
            _require(metric is not None, "connection 'chern' needs a metric")
            C = bd.chern_connection(metric)
        elif conn == "zero":
            C = ConnectionData.trivial(chart, r)
        else:
            C = ConnectionData(self.matrix(conn, chart, r))
        higgs = None
        if "higgs" in body:
            higgs = bd.HiggsData(self.matrix(body["higgs"], chart, r))
        return BundleData(M, C, metric, higgs, name=str(body.get("name", "E")))


# ----------------------------------------------------------------------------
# Running


def _as_float(x, what):
    try:
        return float(x)
    except (TypeError, ValueError):
        raise JobSpecError(f"{what} must be a number, got {x!r}") from None


def _cpair(z) -> list:
    z = complex(z)
    return [float(z.real), float(z.imag)]


def _point_json(p):
    return None if p is None else [_cpair(z) for z in p]


class JobContext:
    """Everything a request or check needs: manifold, bundle, sample points."""

    def __init__(self, spec: JobSpec, resolution: int | None = None, seed: int | None = None, tol: float | None = None):
        self.spec = spec
        self.tol = Tolerances(**spec.tolerances.as_dict())
        if tol is not None:
            self.tol.identity = float(tol)
        self.seed = spec.seed if seed is None else int(seed)
        self.manifold = build_manifold(spec.manifold, resolution)
        self.builder = _Builder(self.manifold)
        self.bundle = None if spec.bundle is None else self.builder.bundle(spec.bundle)
        self.points = self.manifold.sample_points(spec.samples, self.seed)
        if self.bundle is not None:
            self.bundle.validate(self.points, self.tol.identity)

    @property
    def chart(self):
        return self.manifold.chart

    def need_bundle(self) -> BundleData:
        if self.bundle is None:
            raise JobSpecError("this request or check needs a 'bundle'")
        return self.bundle

    def need_metric(self) -> MetricField:
        B = self.need_bundle()
        if B.metric is None:
            raise JobSpecError("this request or check needs a metric on the bundle")
        return B.metric

    def connection(self, which="bundle") -> ConnectionData:
        B = self.need_bundle()
        if which == "bundle":
            return B.connection
        if which == "chern":
            return bd.chern_connection(self.need_metric())
        if which == "flat":
            return bd.higgs_flat_connection(self.need_metric(), B.theta)
        raise JobSpecError(f"connection must be one of {CONNECTION_CHOICES}, got {which!r}")

    def request_points(self, spec_points):
        if spec_points is None or spec_points == "sample":
            return self.points
        if isinstance(spec_points, dict):
            _require(set(spec_points) <= {"sample", "seed"}, f"bad points spec {spec_points!r}")
            return self.manifold.sample_points(int(spec_points.get("sample", self.spec.samples)), int(spec_points.get("seed", self.seed)))
        _require(isinstance(spec_points, list), f"bad points spec {spec_points!r}")
        pts = np.array([[_parse_complex(z) for z in p] for p in spec_points], dtype=complex)
        _require(pts.ndim == 2 and pts.shape[1] == self.chart.n, f"points must have {self.chart.n} coordinates")
        return pts

    def path(self, desc) -> MetricPath:
        h0 = self.need_metric()
        _require(isinstance(desc, dict), "tv needs a 'path' mapping")
        if "to" in desc:
            h1 = MetricField(self.chart, self.builder.scalars(desc["to"], self.chart, h0.rank))
            return MetricPath.linear(h0, h1)
        if "H_t" in desc:
            param = str(desc.get("param", "t"))
            return MetricPath(self.chart, self.builder.scalars(desc["H_t"], self.chart, h0.rank, (param,)), param)
        if desc.get("constant"):
            return MetricPath.constant(h0)
        raise JobSpecError("path needs 'to', 'H_t' or 'constant: true'")

    def second_connection(self, C0, desc) -> ConnectionData:
        if desc in (None, "theta"):
            return C0.shifted(self.need_bundle().theta)
        _require(isinstance(desc, dict) and "connection" in desc, "at_trans 'to' must be 'theta' or {connection: matrix}")
        return ConnectionData(self.builder.matrix(desc["connection"], self.chart, C0.rank))


def compute_form(ctx: JobContext, req: dict) -> Form:
    kind = req["form"]
    k = int(req.get("index", 0))
    which = req.get("connection", "bundle")
    if kind == "v":
        return bd.v_form(ctx.connection(which), ctx.need_metric(), k)
    if kind == "tv":
        return bd.tv_transgression(ctx.connection(which), ctx.path(req.get("path")), k, ctx.points)
    if kind == "at":
        return bd.at_form(ctx.connection(which), k)
    if kind == "ch":
        return bd.ch_form(ctx.connection(which))
    if kind == "at_trans":
        C0 = ctx.connection(which)
        return bd.at_transgression(C0, ctx.second_connection(C0, req.get("to")), k, ctx.points, ctx.tol.identity)
    if kind == "ah":
        B = ctx.need_bundle()
        return bd.ah_form(ctx.connection(which), B.theta, k, points=ctx.points, tol=ctx.tol.identity)
    raise JobSpecError(f"unknown form {kind!r}")


def run_request(ctx: JobContext, req: dict, position: int) -> dict:
    form = compute_form(ctx, req)
    pts = ctx.request_points(req.get("points"))
    values = fm.evaluate_form(form, pts)
    out = {
        "id": str(req.get("id", f"{req['form']}{req.get('index', '')}#{position}")),
        "form": req["form"],
        "index": int(req.get("index", 0)),
        "points": [_point_json(p) for p in pts],
        "bidegrees": sorted([list(b) for b in form.bidegrees()]),
        "coefficients": {fm.basis_label(ctx.chart, k): [_cpair(v) for v in vals] for k, vals in sorted(values.items(), key=lambda kv: fm._sort_key((kv[0], None)))},
    }
    if req.get("expressions"):
        out["expressions"] = {fm.basis_label(ctx.chart, k): sf.to_string(c) for k, c in form.terms.items()}
    if req.get("integrate"):
        out["integral"] = _cpair(_integrate(ctx, form, req))
    return out


def _integrate(ctx, form, req):
    M = ctx.manifold
    if "factor" in req:
        i = int(req["factor"])
        base = req.get("base_point")
        base = None if base is None else [_parse_complex(z) for z in base]
        pulled = geo.pullback(geo.inclusion(M, i, base), form)
        sub = M.factor_manifold(i)
        return geo.integrate(fm.bidegree_part(pulled, sub.n, sub.n), sub)
    return geo.integrate(fm.bidegree_part(form, M.n, M.n), M)


# ----------------------------------------------------------------------------
# Checks


def _result(passed, residual, tolerance, point=None, component=None, **details):
    out = {"passed": bool(passed), "residual": float(residual), "tolerance": float(tolerance), "worst": {"point": _point_json(point), "component": component}}
    if details:
        out["details"] = details
    return out


def _form_residual(ctx, form, pts=None, tol=None, relative_to=None):
    pts = ctx.points if pts is None else pts
    v, p, key = fm.sup_norm(form, pts)
    if relative_to is not None:
        scale = fm.sup_norm(relative_to, pts)[0]
        v = v / scale if scale > 0 else v
    return v, p, None if key is None else fm.basis_label(ctx.chart, key)


def _worst(results):
    """Combine several ``(residual, point, component)`` triples."""
    return max(results, key=lambda r: r[0]) if results else (0.0, None, None)


def _listify(x, default):
    if x is None:
        return list(default)
    return list(x) if isinstance(x, (list, tuple)) else [x]


def check_higgs_valid(ctx, params):
    B = ctx.need_bundle()
    rep = bd.validate_higgs(ctx.connection(params.get("connection", "bundle")), B.theta, ctx.points, params.get("tol", ctx.tol.identity))
    res = max(rep.holomorphy_residual, rep.nilpotency_residual)
    return _result(rep.passed, res, rep.tol, rep.worst_point, ",".join(rep.failures) or None,
                   holomorphy_residual=rep.holomorphy_residual, nilpotency_residual=rep.nilpotency_residual)


def check_metric_valid(ctx, params):
    h = ctx.need_metric()
    tol = params.get("tol", ctx.tol.identity)
    try:
        h.check(ctx.points, tol)
    except (NonHermitianError, NotPositiveDefiniteError) as e:
        return _result(False, math.inf, tol, component=str(e))
    return _result(True, 0.0, tol)


def check_flatness(ctx, params):
    C = ctx.connection(params.get("connection", "bundle"))
    tol = params.get("tol", ctx.tol.identity)
    v, p, k = _form_residual_matrix(ctx, bd.curvature(C))
    return _result(v <= tol, v, tol, p, k)


def _form_residual_matrix(ctx, M):
    v, p, loc = mx.sup_norm(M, ctx.points)
    comp = None if loc is None else f"[{loc[0]}][{loc[1]}] {fm.basis_label(ctx.chart, loc[2])}"
    return v, p, comp


def check_bianchi(ctx, params):
    C = ctx.connection(params.get("connection", "bundle"))
    F = bd.curvature(C)
    res = mx.exterior_d(F) + mx.supercommutator(C.A, F)
    tol = params.get("tol", ctx.tol.identity)
    v, p, k = _form_residual_matrix(ctx, res)
    return _result(v <= tol, v, tol, p, k)


def check_v_closed(ctx, params):
    C = ctx.connection(params.get("connection", "bundle"))
    h = ctx.need_metric()
    tol = params.get("tol", ctx.tol.identity)
    flat = bd.flatness_residual(C, ctx.points)
    if flat >= 1e-12:
        return _result(False, math.inf, tol, component="connection is not flat", flatness_residual=flat)
    res = _worst([_form_residual(ctx, fm.d(bd.v_form(C, h, j))) for j in _listify(params.get("j"), [0, 1])])
    return _result(res[0] <= tol, res[0], tol, res[1], res[2], flatness_residual=flat)


def check_v_real(ctx, params):
    C = ctx.connection(params.get("connection", "bundle"))
    h = ctx.need_metric()
    tol = params.get("tol", ctx.tol.identity)
    res = []
    for j in _listify(params.get("j"), [0, 1]):
        v = bd.v_form(C, h, j)
        res.append(_form_residual(ctx, v - fm.conjugate(v)))
    r = _worst(res)
    return _result(r[0] <= tol, r[0], tol, r[1], r[2])


def check_v_vanishes(ctx, params):
    C = ctx.connection(params.get("connection", "flat"))
    h = ctx.need_metric()
    tol = params.get("tol", ctx.tol.exact)
    r = _worst([_form_residual(ctx, bd.v_form(C, h, j)) for j in _listify(params.get("j"), [1, 2])])
    return _result(r[0] <= tol, r[0], tol, r[1], r[2])


def reznikov_trial(rng, rank: int, dim: int, js=(1, 2), samples: int = 8):
    """One random nilpotent Higgs field on a ``dim``-torus with the identity
    metric: returns the largest coefficient of ``tr omega^(2j+1)``."""
    chart = sf.ChartSpec(dim, tuple(f"z{i + 1}" for i in range(dim)), ("torus",) * dim)
    theta = rf.nilpotent_higgs(chart, rng, rank)
    h = MetricField.identity(chart, rank)
    C = bd.higgs_flat_connection(h, theta)
    om = bd.omega_form(C, h)
    pts = sf.random_points(dim, samples, int(rng.integers(1 << 30)))
    worst = 0.0
    for j in js:
        worst = max(worst, fm.sup_norm(mx.trace(mx.mat_power(om, 2 * j + 1)), pts)[0])
    return worst


def check_reznikov_random(ctx, params):
    trials = int(params.get("trials", 20))
    lo, hi = _listify(params.get("ranks"), [2, 5])
    dim = int(params.get("dim", 3))
    js = _listify(params.get("j"), [1, 2])
    tol = params.get("tol", ctx.tol.exact)
    rng = np.random.default_rng(ctx.seed)
    worst, worst_rank = 0.0, None
    for t in range(trials):
        r = lo + t % (hi - lo + 1)
        v = reznikov_trial(rng, r, dim, js)
        if v >= worst:
            worst, worst_rank = v, r
    return _result(worst <= tol, worst, tol, component=None if worst_rank is None else f"rank {worst_rank}", trials=trials, seed=ctx.seed)


def check_tv_transgression(ctx, params):
    C = ctx.connection(params.get("connection", "bundle"))
    path = ctx.path(params.get("path"))
    tol = params.get("tol", ctx.tol.transgression)
    res = []
    for j in _listify(params.get("j"), [0, 1]):
        T = bd.tv_transgression(C, path, j, ctx.points)
        resid = fm.d(T) - (bd.v_form(C, path.at(1.0), j) - bd.v_form(C, path.at(0.0), j))
        res.append(_form_residual(ctx, resid))
    r = _worst(res)
    return _result(r[0] <= tol, r[0], tol, r[1], r[2])


def check_tv_constant_path(ctx, params):
    C = ctx.connection(params.get("connection", "bundle"))
    path = MetricPath.constant(ctx.need_metric())
    zero = all(bd.tv_transgression(C, path, j, ctx.points).is_zero() for j in _listify(params.get("j"), [0, 1]))
    return _result(zero, 0.0 if zero else math.inf, 0.0)


def check_at_transgression(ctx, params):
    C0 = ctx.connection(params.get("connection", "bundle"))
    C1 = ctx.second_connection(C0, params.get("to"))
    tol = params.get("tol", ctx.tol.identity)
    res = []
    for k in _listify(params.get("k"), [1, 2]):
        T = bd.at_transgression(C0, C1, k, ctx.points, tol)
        res.append(_form_residual(ctx, fm.delbar(T) - (bd.at_form(C1, k) - bd.at_form(C0, k))))
    r = _worst(res)
    return _result(r[0] <= tol, r[0], tol, r[1], r[2])


def check_ah_at_relation(ctx, params):
    """``ah_k = sign * 2 pi i * at_{k+1}(nabla, nabla + theta)``."""
    B = ctx.need_bundle()
    C = ctx.connection(params.get("connection", "bundle"))
    sign = float(params.get("sign", 1))
    tol = params.get("tol", ctx.tol.identity)
    res = []
    for k in _listify(params.get("k"), [0, 1]):
        ah = bd.ah_form(C, B.theta, k, points=ctx.points)
        at = bd.at_transgression(C, C.shifted(B.theta), k + 1, ctx.points)
        res.append(_form_residual(ctx, ah - at.scale(sign * bd.TWO_PI_I)))
    r = _worst(res)
    return _result(r[0] <= tol, r[0], tol, r[1], r[2], sign=sign)


def check_ah_closed(ctx, params):
    B = ctx.need_bundle()
    C = ctx.connection(params.get("connection", "bundle"))
    tol = params.get("tol", ctx.tol.identity)
    r = _worst([_form_residual(ctx, fm.delbar(bd.ah_form(C, B.theta, k, points=ctx.points))) for k in _listify(params.get("k"), [0, 1])])
    return _result(r[0] <= tol, r[0], tol, r[1], r[2])


def check_ah_vanishes(ctx, params):
    B = ctx.need_bundle()
    C = ctx.connection(params.get("connection", "bundle"))
    tol = params.get("tol", ctx.tol.exact)
    r = _worst([_form_residual(ctx, bd.ah_form(C, B.theta, k, points=ctx.points)) for k in _listify(params.get("k"), [1, 2])])
    return _result(r[0] <= tol, r[0], tol, r[1], r[2])


def check_harmonic_identities(ctx, params):
    """For ``nabla = nabla_h + theta + theta*``: ``omega = -(theta + theta*)``
    and ``v_1 + ah_0 + conj(ah_0) = 0``."""
    B = ctx.need_bundle()
    h = ctx.need_metric()
    theta = B.theta
    tol_exact = params.get("tol_omega", ctx.tol.exact)
    tol = params.get("tol", 1e-10)
    flat = bd.higgs_flat_connection(h, theta)
    om = bd.omega_form(flat, h)
    r1 = _form_residual_matrix(ctx, om + theta + bd.hermitian_star(theta, h))
    ah0 = bd.ah_form(bd.chern_connection(h), theta, 0, points=ctx.points)
    r2 = _form_residual(ctx, bd.v_form(flat, h, 0) + ah0 + fm.conjugate(ah0))
    passed = r1[0] <= tol_exact and r2[0] <= tol
    worst = r1 if r1[0] / tol_exact >= r2[0] / tol else r2
    return _result(passed, max(r1[0], r2[0]), min(tol, tol_exact), worst[1], worst[2], omega_residual=r1[0], v1_ah0_residual=r2[0])


def check_ah1_equals_2_omega_dz(ctx, params):
    """``ah_1 = 2 omega_FS ^ dz`` on a CP^1 x torus base (relative error)."""
    B = ctx.need_bundle()
    chart = ctx.chart
    kinds = chart.kinds
    _require("cp1" in kinds and "torus" in kinds, "check needs a cp1 and a torus coordinate")
    cp, tz = kinds.index("cp1"), kinds.index("torus")
    expected = fm.wedge(geo.omega_fs(chart, cp), Form.dz(chart, tz)).scale(2)
    ah1 = bd.ah_form(ctx.connection(params.get("connection", "bundle")), B.theta, 1, points=ctx.points)
    tol = params.get("tol", ctx.tol.identity)
    r = _form_residual(ctx, ah1 - expected, relative_to=expected)
    return _result(r[0] <= tol, r[0], tol, r[1], r[2])


def check_ch_rank(ctx, params):
    C = ctx.connection(params.get("connection", "bundle"))
    ch0 = fm.bidegree_part(bd.ch_form(C), 0, 0)
    r = _form_residual(ctx, ch0 - Form.scalar(ctx.chart, C.rank))
    tol = params.get("tol", ctx.tol.exact)
    return _result(r[0] <= tol, r[0], tol, r[1], r[2])


def check_integral(ctx, params):
    _require("form" in params and params["form"] in FORMS, "integral check needs 'form'")
    req = {"form": params["form"], "index": int(params.get("index", 0)), "connection": params.get("connection", "bundle")}
    for key in ("factor", "base_point", "path", "to"):
        if key in params:
            req[key] = params[key]
    form = compute_form(ctx, req)
    value = _integrate(ctx, form, req)
    expected = _parse_complex(params.get("expected", 0))
    tol = params.get("tol", ctx.tol.integral)
    err = abs(value - expected)
    return _result(err <= tol, err, tol, value=_cpair(value), expected=_cpair(expected))


CHECKS: dict[str, Callable] = {
    "higgs_valid": check_higgs_valid,
    "metric_valid": check_metric_valid,
    "flatness": check_flatness,
    "bianchi": check_bianchi,
    "v_closed": check_v_closed,
    "v_real": check_v_real,
    "v_vanishes": check_v_vanishes,
    "reznikov_random": check_reznikov_random,
    "tv_transgression": check_tv_transgression,
    "tv_constant_path": check_tv_constant_path,
    "at_transgression": check_at_transgression,
    "ah_at_relation": check_ah_at_relation,
    "ah_closed": check_ah_closed,
    "ah_vanishes": check_ah_vanishes,
    "harmonic_identities": check_harmonic_identities,
    "ah1_equals_2_omega_dz": check_ah1_equals_2_omega_dz,
    "ch_rank": check_ch_rank,
    "integral": check_integral,
}


# ----------------------------------------------------------------------------
# Report


@dataclass
class Report:
    requests: list
    checks: list
    metadata: dict
    warnings: list = field(default_factory=list)

    @property
    def all_passed(self) -> bool:
        return all(c["passed"] for c in self.checks)

    @property
    def exit_status(self) -> int:
        return 0 if self.all_passed else 1

    def to_dict(self, timestamp: bool = True) -> dict:
        meta = dict(self.metadata)
        if not timestamp:
            meta.pop("generated_at", None)
        return {
            "schema_version": SCHEMA_VERSION,
            "metadata": meta,
            "requests": self.requests,
            "checks": self.checks,
            "warnings": self.warnings,
            "summary": {"checks": len(self.checks), "failed": sum(1 for c in self.checks if not c["passed"]), "all_passed": self.all_passed},
        }

    def to_json(self, timestamp: bool = True) -> str:
        return json.dumps(self.to_dict(timestamp), indent=2, sort_keys=True, allow_nan=True) + "\n"


def _periodicity_warnings(ctx: JobContext) -> list:
    B = ctx.bundle
    if B is None or "torus" not in ctx.chart.kinds:
        return []
    fields = []
    for M in (B.connection.A, B.theta):
        for row in M.entries:
            for e in row:
                fields.extend(e.terms.values())
    if B.metric is not None:
        fields.extend(x for row in B.metric.H for x in row)
    worst = 0.0
    for f in fields:
        if sf.is_constant(f):
            continue
        worst = max(worst, geo.periodicity_defect(f, ctx.manifold, 8, ctx.seed))
    if worst > 1e-8:
        msg = f"bundle data is not periodic on the torus factors (defect {worst:.3g}); integrals over the torus are not meaningful"
        log.warning(msg)
        return [msg]
    return []


def run_job(spec: JobSpec, mode: str = "all", resolution: int | None = None, seed: int | None = None, tol: float | None = None) -> Report:
    """Evaluate a job.  ``mode`` is ``all``, ``check`` (checks only) or
    ``compute`` (requests only)."""
    if mode not in ("all", "check", "compute"):
        raise ValueError(f"unknown mode {mode!r}")
    ctx = JobContext(spec, resolution, seed, tol)
    warnings = _periodicity_warnings(ctx)
    requests = []
    if mode in ("all", "compute"):
        requests = [run_request(ctx, r, i) for i, r in enumerate(spec.requests)]
    checks = []
    if mode in ("all", "check"):
        for i, c in enumerate(spec.checks):
            params = {k: v for k, v in c.items() if k not in ("name", "id")}
            for k in params:
                if k.startswith("tol"):
                    params[k] = _as_float(params[k], k)
            res = CHECKS[c["name"]](ctx, params)
            res = {"id": str(c.get("id", f"{c['name']}#{i}")), "name": c["name"], **res}
            checks.append(res)
    metadata = {
        "job": spec.name,
        "mode": mode,
        "seed": ctx.seed,
        "samples": spec.samples,
        "grid": {"resolution": ctx.manifold.resolution, "points": ctx.manifold.size},
        "chart": {"coords": list(ctx.chart.coord_names), "kinds": list(ctx.chart.kinds)},
        "tolerances": ctx.tol.as_dict(),
        "versions": {"higgsforms": __version__, "numpy": np.__version__, "python": platform.python_version()},
        "generated_at": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }
    return Report(requests, checks, metadata, warnings)
