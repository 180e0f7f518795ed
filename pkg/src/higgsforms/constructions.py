"""Bundle constructions: direct sums, tensor products, pullbacks and the
block connection of a smooth splitting of an extension.

Each construction builds the specific connection used to prove the
corresponding characteristic-class identity, so the identities hold exactly
at the level of forms.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

from . import bundles as bd
from . import geometry as geo
from . import matrices as mx
from . import scalar as sf
from .bundles import ConnectionData, HiggsData, MetricField
from .errors import ChartMismatchError, DegreeError
from .forms import Form
from .geometry import HoloMap, ModelManifold
from .matrices import MatrixForm


@dataclass(frozen=True)
class BundleData:
    """A trivialised bundle ``(E, nabla, h, theta)`` over a model manifold.

    For Higgs-bundle work ``connection`` should be compatible with the
    holomorphic structure (e.g. a Chern connection); for flat-bundle work it
    is the flat connection.
    """

    manifold: ModelManifold
    connection: ConnectionData
    metric: MetricField | None = None
    higgs: HiggsData | None = None
    name: str = ""

    def __post_init__(self):
        r = self.connection.rank
        chart = self.manifold.chart
        if self.connection.chart != chart:
            raise ChartMismatchError("connection does not live on the manifold chart")
        if self.metric is not None and (self.metric.rank != r or self.metric.chart != chart):
            raise ValueError("metric rank or chart inconsistent with the connection")
        if self.higgs is not None and (self.higgs.rank != r or self.higgs.theta.chart != chart):
            raise ValueError("Higgs field rank or chart inconsistent with the connection")

    @property
    def rank(self) -> int:
        return self.connection.rank

    @property
    def chart(self):
        return self.manifold.chart

    @property
    def theta(self) -> MatrixForm:
        if self.higgs is None:
            return MatrixForm.zeros(self.chart, self.rank)
        return self.higgs.theta

    def with_higgs(self, theta: MatrixForm) -> "BundleData":
        return replace(self, higgs=HiggsData(theta))

    def with_metric(self, metric: MetricField) -> "BundleData":
        return replace(self, metric=metric)

    def validate(self, points=None, tol=1e-9) -> "BundleData":
        if points is None:
            points = self.manifold.sample_points(64)
        if self.metric is not None:
            self.metric.check(points, tol)
        if self.higgs is not None:
            rep = bd.validate_higgs(self.connection, self.higgs.theta, points, tol)
            if not rep.passed:
                raise bd.HiggsValidationError(f"invalid Higgs field ({', '.join(rep.failures)})", rep)
        return self


def trivial_bundle(M: ModelManifold, rank: int = 1) -> BundleData:
    """Trivial flat bundle with the identity metric."""
    return BundleData(M, ConnectionData.trivial(M.chart, rank), MetricField.identity(M.chart, rank), name=f"O^{rank}")


def cp1_line_bundle(M: ModelManifold, degree: int, index: int = 0) -> BundleData:
    """``O(degree)`` on the CP^1 coordinate ``index`` with metric
    ``(1 + |z|^2)^-degree`` and its Chern connection; ``at_1 = degree * omega_FS``."""
    z, zb = M.chart.z(index), M.chart.zbar(index)
    h = MetricField(M.chart, [[sf.power(sf.add(1, sf.mul(z, zb)), -degree)]])
    return BundleData(M, bd.chern_connection(h), h, name=f"O({degree})")


def same_manifold(B1: BundleData, B2: BundleData):
    if B1.chart != B2.chart:
        raise ChartMismatchError("bundles live on different manifolds")


def direct_sum(B1: BundleData, B2: BundleData) -> BundleData:
    """Block-diagonal connection, metric and Higgs field."""
    same_manifold(B1, B2)
    A = mx.block_diag(B1.connection.A, B2.connection.A)
    metric = None
    if B1.metric is not None and B2.metric is not None:
        H = _block_scalars(B1.metric.H, B2.metric.H)
        metric = MetricField(B1.chart, H)
    higgs = None
    if B1.higgs is not None or B2.higgs is not None:
        higgs = HiggsData(mx.block_diag(B1.theta, B2.theta))
    return BundleData(B1.manifold, ConnectionData(A), metric, higgs, name=f"({B1.name} + {B2.name})")


def _block_scalars(P, Q, S=None):
    p, q = len(P), len(Q)
    rows = [list(P[i]) + ([sf.ZERO] * q if S is None else list(S[i])) for i in range(p)]
    rows += [[sf.ZERO] * p + list(Q[i]) for i in range(q)]
    return rows


def _kron_scalars(P, Q):
    p, q = len(P), len(Q)
    return [[sf.mul(P[i][j], Q[k][l]) for j in range(p) for l in range(q)] for i in range(p) for k in range(q)]


def tensor(B1: BundleData, B2: BundleData) -> BundleData:
    """``nabla' (x) 1 + 1 (x) nabla''`` with the lexicographic Kronecker
    ordering; metric ``H' (x) H''`` and Higgs field ``theta' (x) 1 + 1 (x) theta''``."""
    same_manifold(B1, B2)
    chart = B1.chart
    I1 = MatrixForm.identity(chart, B1.rank)
    I2 = MatrixForm.identity(chart, B2.rank)
    A = mx.kron(B1.connection.A, I2) + mx.kron(I1, B2.connection.A)
    metric = None
    if B1.metric is not None and B2.metric is not None:
        metric = MetricField(chart, _kron_scalars(B1.metric.H, B2.metric.H))
    higgs = None
    if B1.higgs is not None or B2.higgs is not None:
        higgs = HiggsData(mx.kron(B1.theta, I2) + mx.kron(I1, B2.theta))
    return BundleData(B1.manifold, ConnectionData(A), metric, higgs, name=f"({B1.name} x {B2.name})")


def pull_bundle(f: HoloMap, B: BundleData, source: ModelManifold) -> BundleData:
    """``f^* B`` over ``source``; connection, metric and Higgs pulled back entrywise."""
    if f.target != B.chart or f.source != source.chart:
        raise ChartMismatchError("map does not go from the source manifold to the bundle's base")
    A = geo.pullback_matrix(f, B.connection.A)
    metric = None if B.metric is None else MetricField(source.chart, geo.pullback_scalars(f, B.metric.H))
    higgs = None if B.higgs is None else HiggsData(geo.pullback_matrix(f, B.higgs.theta))
    return BundleData(source, ConnectionData(A), metric, higgs, name=f"f*{B.name}")


def split_extension(
    sub: BundleData,
    quotient: BundleData,
    s_deriv: Sequence[Sequence[Form]],
    higgs_offdiag: Sequence[Sequence[Form]] | None = None,
) -> BundleData:
    """Extension ``0 -> E' -> E -> E'' -> 0`` written through a smooth splitting.

    ``s_deriv`` is the (0,1)-form valued ``Hom(E'', E')`` block (rank(E') rows,
    rank(E'') columns).  The connection is ``[[nabla', s_deriv], [0, nabla'']]``
    and, when given, the Higgs field is ``[[theta', higgs_offdiag], [0, theta'']]``.
    """
    same_manifold(sub, quotient)
    p, q = sub.rank, quotient.rank
    _check_block(s_deriv, p, q, {(0, 1)}, "s_deriv")
    A = mx.block(sub.connection.A, quotient.connection.A, s_deriv)
    metric = None
    if sub.metric is not None and quotient.metric is not None:
        metric = MetricField(sub.chart, _block_scalars(sub.metric.H, quotient.metric.H))
    higgs = None
    if sub.higgs is not None or quotient.higgs is not None or higgs_offdiag is not None:
        if higgs_offdiag is not None:
            _check_block(higgs_offdiag, p, q, {(1, 0)}, "higgs_offdiag")
        higgs = HiggsData(mx.block(sub.theta, quotient.theta, higgs_offdiag))
    return BundleData(sub.manifold, ConnectionData(A), metric, higgs, name=f"ext({sub.name}, {quotient.name})")


def _check_block(blk, p, q, allowed, what):
    if len(blk) != p or any(len(r) != q for r in blk):
        raise ValueError(f"{what} must be a {p}x{q} block")
    for row in blk:
        for e in row:
            bad = e.bidegrees() - allowed
            if bad:
                raise DegreeError(f"{what} entries must have bidegree {sorted(allowed)}, found {sorted(bad)}")


def flat_connection(B: BundleData) -> ConnectionData:
    """``nabla + theta + theta*`` for a bundle whose connection is the Chern
    connection of its metric."""
    if B.metric is None:
        raise ValueError("flat_connection needs a metric")
    return ConnectionData(B.connection.A + B.theta + bd.hermitian_star(B.theta, B.metric))
