"""Connections, metrics and the characteristic forms built from them.

Frame conventions (fixed once, checked by the defining-identity tests):

* a connection is ``nabla = d + A`` with ``A`` an ``r x r`` matrix of 1-forms
  acting on column vectors of functions;
* a hermitian metric is a matrix ``H`` of scalar fields with
  ``h(psi1, psi2) = psi2^dagger H psi1`` (linear in the first slot).

With these, the adjoint connection is ``A* = H^-1 dH - H^-1 A^dagger H``,
the Chern connection of ``H`` (holomorphic frame) is ``H^-1 del H`` and the
metric adjoint of an End(E)-valued 1-form is ``M* = H^-1 M^dagger H``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import forms as fm
from . import matrices as mx
from . import scalar as sf
from .errors import (
    DegreeError,
    HiggsValidationError,
    IncompatibleConnectionsError,
    NonHermitianError,
    NotPositiveDefiniteError,
)
from .forms import Form
from .matrices import MatrixForm
from .scalar import ChartSpec, Evaluator

log = logging.getLogger(__name__)

TWO_PI_I = 2j * math.pi
I_OVER_2PI = 1j / (2 * math.pi)

DEFAULT_SAMPLES = 64


def _sample(chart: ChartSpec, points):
    if points is None:
        return sf.random_points(chart.n, DEFAULT_SAMPLES, seed=12345)
    pts = np.asarray(points, dtype=complex)
    return pts[None, :] if pts.ndim == 1 else pts


# ----------------------------------------------------------------------------
# Bundle data types


class MetricField:
    """Hermitian metric in a frame: an ``r x r`` matrix of scalar fields."""

    def __init__(self, chart: ChartSpec, H: Sequence[Sequence]):
        rows = [[sf.as_expr(x) for x in row] for row in H]
        r = len(rows)
        if r == 0 or any(len(row) != r for row in rows):
            raise ValueError("metric matrix must be square")
        self.chart = chart
        self.H = rows
        self._inverse = None

    @property
    def rank(self):
        return len(self.H)

    @classmethod
    def identity(cls, chart, r):
        return cls(chart, [[1 if i == j else 0 for j in range(r)] for i in range(r)])

    @property
    def inverse(self) -> list:
        if self._inverse is None:
            self._inverse = mx.inverse(self.H)
        return self._inverse

    def matrix(self) -> MatrixForm:
        return MatrixForm.from_scalars(self.chart, self.H)

    def inverse_matrix(self) -> MatrixForm:
        return MatrixForm.from_scalars(self.chart, self.inverse)

    def values(self, points, params=None) -> np.ndarray:
        pts = _sample(self.chart, points)
        ev = Evaluator(pts, params)
        r = self.rank
        out = np.empty((pts.shape[0], r, r), dtype=complex)
        for i in range(r):
            for j in range(r):
                out[:, i, j] = ev(self.H[i][j])
        return out

    def check(self, points=None, tol: float = 1e-9, params=None):
        """Raise unless hermitian and positive definite at every sample point.

        Positivity is tested with leading principal minors.
        """
        vals = self.values(points, params)
        scale = max(1.0, float(np.max(np.abs(vals))))
        herm = float(np.max(np.abs(vals - np.conj(np.swapaxes(vals, 1, 2)))))
        if herm > tol * scale:
            raise NonHermitianError(f"metric is not hermitian (residual {herm:.3g})")
        for m in range(1, self.rank + 1):
            minors = np.linalg.det(vals[:, :m, :m]).real
            if np.min(minors) <= 0:
                raise NotPositiveDefiniteError(f"leading minor {m} is not positive at a sample point")
        return self


class MetricPath:
    """A family of metrics ``H_t``, ``t in [0, 1]``, written with a real parameter."""

    def __init__(self, chart: ChartSpec, H_t: Sequence[Sequence], param: str = "t"):
        self.chart = chart
        self.param = param
        self.H = [[sf.as_expr(x) for x in row] for row in H_t]
        memo = {}
        self.Hdot = [[sf.partial_param(x, param, memo) for x in row] for row in self.H]

    @classmethod
    def linear(cls, h0: MetricField, h1: MetricField, param="t"):
        """``h0 + t (h1 - h0)``."""
        t = sf.param(param)
        r = h0.rank
        H = [[sf.add(h0.H[i][j], sf.mul(t, sf.sub(h1.H[i][j], h0.H[i][j]))) for j in range(r)] for i in range(r)]
        return cls(h0.chart, H, param)

    @classmethod
    def constant(cls, h: MetricField, param="t"):
        return cls(h.chart, h.H, param)

    @property
    def rank(self):
        return len(self.H)

    def is_constant(self) -> bool:
        return all(sf.is_zero(x) for row in self.Hdot for x in row)

    def _subst(self, rows, t):
        mapping = {("param", self.param): sf.const(float(t))}
        memo = {}
        return [[sf.substitute(x, mapping, memo) for x in row] for row in rows]

    def at(self, t: float) -> MetricField:
        return MetricField(self.chart, self._subst(self.H, t))

    def dot_at(self, t: float) -> list:
        return self._subst(self.Hdot, t)

    def check(self, points=None, ts=(0.0, 0.25, 0.5, 0.75, 1.0), tol=1e-9):
        for t in ts:
            self.at(t).check(points, tol)
        return self


class ConnectionData:
    """``nabla = d + A`` in a frame; the (0,1) part of ``A`` defines dbar_E."""

    def __init__(self, A: MatrixForm):
        bad = A.degrees() - {1}
        if bad:
            raise DegreeError(f"connection matrix must consist of 1-forms (found degrees {sorted(bad)})")
        self.A = A

    @classmethod
    def trivial(cls, chart, r):
        return cls(MatrixForm.zeros(chart, r))

    @property
    def chart(self):
        return self.A.chart

    @property
    def rank(self):
        return self.A.rank

    @property
    def part01(self) -> MatrixForm:
        return mx.bidegree_part(self.A, 0, 1)

    def shifted(self, eta: MatrixForm) -> "ConnectionData":
        """``nabla + eta``."""
        return ConnectionData(self.A + eta)

    def __repr__(self):
        return f"ConnectionData(rank={self.rank}, n={self.chart.n})"


class HiggsData:
    """A Higgs field: End(E)-valued form of bidegree (1,0)."""

    def __init__(self, theta: MatrixForm):
        bad = theta.bidegrees() - {(1, 0)}
        if bad:
            raise DegreeError(f"Higgs field must have bidegree (1,0), found {sorted(bad)}")
        self.theta = theta

    @property
    def rank(self):
        return self.theta.rank


# ----------------------------------------------------------------------------
# Connections and adjoints


def curvature(C: ConnectionData) -> MatrixForm:
    """``F = dA + A ^ A``."""
    return mx.exterior_d(C.A) + mx.mat_mul_wedge(C.A, C.A)


def bianchi_residual(C: ConnectionData, points=None) -> float:
    """Sup of ``dF + [A, F]`` at sample points (zero for any connection)."""
    F = curvature(C)
    res = mx.exterior_d(F) + mx.supercommutator(C.A, F)
    return mx.sup_norm(res, _sample(C.chart, points))[0]


def hermitian_star(M: MatrixForm, h: MetricField) -> MatrixForm:
    """Metric adjoint ``M* = H^-1 M^dagger H`` of an End(E)-valued 1-form,
    defined by ``h(M psi1, psi2) = h(psi1, M* psi2)``."""
    if M.degrees() - {1}:
        raise DegreeError("hermitian_star expects a matrix of 1-forms")
    if h.rank != M.rank:
        raise ValueError("rank mismatch between form and metric")
    return h.inverse_matrix() @ M.conjugate_transpose() @ h.matrix()


def adjoint_connection(C: ConnectionData, h: MetricField) -> ConnectionData:
    """The connection ``nabla*`` with ``dh(psi1, psi2) = h(nabla psi1, psi2) + h(psi1, nabla* psi2)``."""
    if h.rank != C.rank:
        raise ValueError("rank mismatch between connection and metric")
    Hinv = h.inverse_matrix()
    Hm = h.matrix()
    dH = mx.exterior_d(Hm)
    A_star = Hinv @ dH - Hinv @ C.A.conjugate_transpose() @ Hm
    return ConnectionData(A_star)


def chern_connection(h: MetricField) -> ConnectionData:
    """Chern connection ``H^-1 del H`` of a metric in a holomorphic frame
    (the frame in which dbar_E is the plain dbar)."""
    return ConnectionData(h.inverse_matrix() @ mx.exterior_d(h.matrix(), "holo"))


def higgs_flat_connection(h: MetricField, theta: MatrixForm) -> ConnectionData:
    """``nabla_h + theta + theta*``: flat exactly when ``F_h = -[theta, theta*]``."""
    A = chern_connection(h).A + theta + hermitian_star(theta, h)
    return ConnectionData(A)


def omega_form(C: ConnectionData, h: MetricField) -> MatrixForm:
    """``(nabla* - nabla) / 2``."""
    return (adjoint_connection(C, h).A - C.A).scale(0.5)


def flatness_residual(C: ConnectionData, points=None) -> float:
    """Sup over sample points and coefficients of ``|F|``."""
    return mx.sup_norm(curvature(C), _sample(C.chart, points))[0]


# ----------------------------------------------------------------------------
# Flat-bundle forms


def v_form(C: ConnectionData, h: MetricField, j: int) -> Form:
    """``(2 pi i)^-j tr omega^(2j+1)``, a real closed form for flat ``C``."""
    if j < 0:
        raise ValueError("j must be >= 0")
    om = omega_form(C, h)
    return mx.trace(mx.mat_power(om, 2 * j + 1)).scale(TWO_PI_I ** (-j))


def _gauss_legendre(m: int):
    x, w = np.polynomial.legendre.leggauss(m)
    return (x + 1) / 2, w / 2


def tv_transgression(
    C: ConnectionData,
    path: MetricPath,
    j: int,
    points=None,
    tol: float = 1e-10,
    start_nodes: int = 4,
    max_nodes: int = 256,
) -> Form:
    """Transgression ``Tv_2j`` between the endpoint metrics of ``path``:

        1/2 (2j+1) (2 pi i)^-j  int_0^1 tr(H_t^-1 dH_t/dt omega_t^2j) dt

    so that ``d Tv = v(h_1) - v(h_0)``.  The t-integral is a Gauss-Legendre
    sum whose node count doubles until sampled coefficients of successive
    rules agree to ``tol``; the result is a symbolic form (a weighted sum of
    the integrand at the nodes), so it can be differentiated exactly.
    """
    if path.rank != C.rank:
        raise ValueError("rank mismatch between connection and metric path")
    if path.is_constant():
        return Form.zero(C.chart)
    pts = _sample(C.chart, points)
    cache = {}

    def integrand(t):
        if t not in cache:
            h = path.at(t)
            X = MatrixForm.from_scalars(C.chart, mx.scalar_matmul(h.inverse, path.dot_at(t)))
            om2j = mx.mat_power(omega_form(C, h), 2 * j)
            cache[t] = mx.trace(X @ om2j)
        return cache[t]

    def rule(m):
        acc = Form.zero(C.chart)
        for t, w in zip(*_gauss_legendre(m)):
            acc = acc + integrand(float(t)).scale(float(w))
        return acc

    m = start_nodes
    prev = rule(m)
    while True:
        m *= 2
        cur = rule(m)
        diff = fm.sup_norm(cur - prev, pts)[0]
        size = fm.sup_norm(cur, pts)[0]
        if diff <= tol * max(1.0, size) or m >= max_nodes:
            if diff > tol * max(1.0, size):
                log.warning("tv_transgression: %d nodes, last change %.3g", m, diff)
            break
        prev = cur
    log.debug("tv_transgression converged with %d nodes", m)
    return cur.scale(0.5 * (2 * j + 1) * TWO_PI_I ** (-j))


def psi_k(matrices: Sequence, tol: float = 1e-10) -> complex:
    """``Alt tr(A_1 ... A_k)`` with ``Alt`` = ``1/k! sum_sigma sgn(sigma) ...``.

    Computed through the exterior algebra: with ``alpha = sum_i A_i e_i`` for
    anticommuting generators ``e_i``, ``tr(alpha^k)`` equals ``k! psi_k`` times
    ``e_1 ^ ... ^ e_k``.
    """
    mats = [np.asarray(a, dtype=complex) for a in matrices]
    k = len(mats)
    if k == 0:
        raise ValueError("psi_k needs at least one argument")
    r = mats[0].shape[0]
    for a in mats:
        if a.shape != (r, r):
            raise ValueError("all arguments must be square of the same size")
        if np.max(np.abs(a - a.conj().T)) > tol * max(1.0, np.max(np.abs(a))):
            raise NonHermitianError("psi_k arguments must be hermitian")
    chart = ChartSpec(k, tuple(f"e{i + 1}" for i in range(k)))
    alpha = MatrixForm.zeros(chart, r)
    for i, a in enumerate(mats):
        alpha = alpha + MatrixForm.from_constant(chart, a, Form.dz(chart, i))
    top = mx.trace(mx.mat_power(alpha, k)).coefficient(tuple(range(k)), ())
    return complex(top.value) / math.factorial(k) if isinstance(top, sf.Const) else 0j


# ----------------------------------------------------------------------------
# Atiyah classes and Higgs classes


def atiyah_rep(C: ConnectionData) -> MatrixForm:
    """Raw (1,1) part of the curvature (no ``i / 2 pi`` factor)."""
    return mx.bidegree_part(curvature(C), 1, 1)


def _normalised_power_trace(At: MatrixForm, k: int, tail: MatrixForm | None = None) -> Form:
    P = mx.mat_power(At, k)
    if tail is not None:
        P = P @ tail
    return mx.trace(P).scale(I_OVER_2PI**k / math.factorial(k))


def at_form(C: ConnectionData, k: int) -> Form:
    """``1/k! (i/2pi)^k tr(At^k)``, a (k,k)-form; ``at_0`` is the rank."""
    if k < 0:
        raise ValueError("k must be >= 0")
    if k == 0:
        return Form.scalar(C.chart, C.rank)
    return _normalised_power_trace(atiyah_rep(C), k)


def ch_form(C: ConnectionData, kmax: int | None = None) -> Form:
    """Atiyah-Chern character ``sum_k at_k`` up to ``kmax`` (default: n)."""
    kmax = C.chart.n if kmax is None else kmax
    At = atiyah_rep(C)
    acc = Form.scalar(C.chart, C.rank)
    P = MatrixForm.identity(C.chart, C.rank)
    for k in range(1, kmax + 1):
        P = P @ At
        acc = acc + mx.trace(P).scale(I_OVER_2PI**k / math.factorial(k))
    return acc


def check_compatible(C0: ConnectionData, C1: ConnectionData, points=None, tol=1e-9) -> float:
    """Sup of the difference of the (0,1) parts; raises if it exceeds ``tol``."""
    if C0.chart != C1.chart or C0.rank != C1.rank:
        raise IncompatibleConnectionsError("connections on different bundles")
    diff = C1.part01 - C0.part01
    if diff.is_zero():
        return 0.0
    res = mx.sup_norm(diff, _sample(C0.chart, points))[0]
    if res > tol:
        raise IncompatibleConnectionsError(f"(0,1) parts differ (residual {res:.3g})")
    return res


def at_transgression(C0: ConnectionData, C1: ConnectionData, k: int, points=None, tol: float = 1e-9) -> Form:
    """Transgression ``at_k(E, nabla_0, nabla_1)`` of bidegree (k, k-1).

    With ``eta = A_1 - A_0`` the curvature of ``nabla_0 + t eta + dt d/dt`` is
    ``F_t + dt ^ eta`` where ``F_t = F_0 + t [nabla_0, eta] + t^2 eta ^ eta``.
    Its k-th power has dt-linear part ``dt ^ k tr(F_t^(k-1) eta)``; dt is taken
    off from the left and the polynomial t-integrand is integrated exactly by
    Gauss-Legendre with k+1 nodes.  The result satisfies

        dbar at_k(nabla_0, nabla_1) = at_k(nabla_1) - at_k(nabla_0).
    """
    check_compatible(C0, C1, points, tol)
    if k < 0:
        raise ValueError("k must be >= 0")
    if k == 0:
        return Form.zero(C0.chart)
    eta = C1.A - C0.A
    F0 = curvature(C0)
    cov = mx.exterior_d(eta) + mx.supercommutator(C0.A, eta)
    quad = eta @ eta
    acc = Form.zero(C0.chart)
    for t, w in zip(*_gauss_legendre(k + 1)):
        t = float(t)
        Ft = F0 + cov.scale(t) + quad.scale(t * t)
        acc = acc + mx.trace(mx.mat_power(Ft, k - 1) @ eta).scale(float(w) * k)
    return fm.bidegree_part(acc, k, k - 1).scale(I_OVER_2PI**k / math.factorial(k))


@dataclass
class HiggsReport:
    """Residuals of the two Higgs-field conditions at sample points."""

    passed: bool
    holomorphy_residual: float
    nilpotency_residual: float
    tol: float
    worst_point: list | None = None
    failures: list = field(default_factory=list)


def validate_higgs(C: ConnectionData, theta: MatrixForm, points=None, tol: float = 1e-9) -> HiggsReport:
    """Check ``[dbar_E, theta] = 0`` and ``theta ^ theta = 0``."""
    bad = theta.bidegrees() - {(1, 0)}
    if bad:
        raise DegreeError(f"Higgs field must have bidegree (1,0), found {sorted(bad)}")
    pts = _sample(C.chart, points)
    hol = mx.exterior_d(theta, "antiholo") + mx.supercommutator(C.part01, theta)
    nil = theta @ theta
    r1, p1, _ = mx.sup_norm(hol, pts)
    r2, p2, _ = mx.sup_norm(nil, pts)
    failures = []
    if r1 > tol:
        failures.append("holomorphy")
    if r2 > tol:
        failures.append("nilpotency")
    worst = p1 if r1 >= r2 else p2
    return HiggsReport(
        passed=not failures,
        holomorphy_residual=r1,
        nilpotency_residual=r2,
        tol=tol,
        worst_point=None if worst is None else [complex(z) for z in worst],
        failures=failures,
    )


def ah_form(C: ConnectionData, theta: MatrixForm, k: int, validate: bool = True, points=None, tol: float = 1e-9) -> Form:
    """``1/k! (i/2pi)^k tr(At^k theta)``, a (k+1, k)-form; ``ah_0 = tr theta``."""
    if k < 0:
        raise ValueError("k must be >= 0")
    if validate:
        rep = validate_higgs(C, theta, points, tol)
        if not rep.passed:
            raise HiggsValidationError(f"invalid Higgs field ({', '.join(rep.failures)})", rep)
    if k == 0:
        return mx.trace(theta)
    return _normalised_power_trace(atiyah_rep(C), k, theta)
