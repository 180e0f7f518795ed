
import numpy as np
import pytest

from higgsforms import bundles as bd
from higgsforms import constructions as cons
from higgsforms import forms as fm
from higgsforms import geometry as geo
from higgsforms import matrices as mx
from higgsforms import random_fixtures as rf
from higgsforms import scalar as sf
from higgsforms.bundles import ConnectionData, MetricField
from higgsforms.constructions import BundleData
from higgsforms.errors import ChartMismatchError
from higgsforms.forms import Form
from higgsforms.matrices import MatrixForm

TOL = 1e-9
T2 = geo.make_torus(2, resolution=8)
PTS = T2.sample_points(100, seed=5) * 0.9
RANDOM_PTS = sf.random_points(2, 100, seed=5, radius=0.8)


def fres(a, pts=RANDOM_PTS):
    return fm.sup_norm(a, pts)[0]


def random_holo_bundle(rng, r, M=T2, higgs=True):
    """Chern connection of a random metric, optionally with a holomorphic Higgs field."""
    h = rf.random_metric(M.chart, rng, r, scale=0.3)
    theta = rf.holomorphic_higgs(M.chart, rng, r) if higgs else None
    return BundleData(M, bd.chern_connection(h), h, None if theta is None else bd.HiggsData(theta))


def random_flat_bundle(rng, r, M=T2):
    return BundleData(M, rf.commuting_flat_connection(M.chart, rng, r), rf.random_metric(M.chart, rng, r, scale=0.3))


def ah(B, k):
    return bd.ah_form(B.connection, B.theta, k, points=RANDOM_PTS)


def test_v_additivity():
    rng = np.random.default_rng(0)
    B1, B2 = random_flat_bundle(rng, 1), random_flat_bundle(rng, 1)
    S = cons.direct_sum(B1, B2)
    for j in (0, 1):
        lhs = bd.v_form(S.connection, S.metric, j)
        rhs = bd.v_form(B1.connection, B1.metric, j) + bd.v_form(B2.connection, B2.metric, j)
        assert fres(lhs - rhs) < TOL


def test_v_additivity_rank2():
    rng = np.random.default_rng(1)
    B1, B2 = random_flat_bundle(rng, 2), random_flat_bundle(rng, 2)
    S = cons.direct_sum(B1, B2)
    lhs = bd.v_form(S.connection, S.metric, 1)
    rhs = bd.v_form(B1.connection, B1.metric, 1) + bd.v_form(B2.connection, B2.metric, 1)
    assert fres(lhs - rhs) < TOL


def test_sum_with_trivial_line_adds_nothing():
    rng = np.random.default_rng(2)
    B = random_holo_bundle(rng, 2)
    S = cons.direct_sum(B, cons.trivial_bundle(T2, 1))
    for k in (0, 1):
        assert fres(ah(S, k) - ah(B, k)) < TOL
    assert fres(bd.ch_form(S.connection) - bd.ch_form(B.connection) - Form.scalar(T2.chart, 1)) < TOL


def test_ah_direct_sum_additivity():
    rng = np.random.default_rng(3)
    B1, B2 = random_holo_bundle(rng, 1), random_holo_bundle(rng, 2)
    S = cons.direct_sum(B1, B2)
    for k in (0, 1, 2):
        assert fres(ah(S, k) - ah(B1, k) - ah(B2, k)) < TOL


def test_example_summands():
    M = geo.product(geo.make_cp1("z1", 8), geo.make_torus(1, names=["z2"], resolution=8))
    c = M.chart
    p = geo.projection(M, 0)
    base = M.factor_manifold(0)
    Lp = cons.pull_bundle(p, cons.cp1_line_bundle(base, 1), M)
    Lm = cons.pull_bundle(p, cons.cp1_line_bundle(base, -1), M)
    dz = Form.dz(c, 1)
    Lp = Lp.with_higgs(MatrixForm(c, [[dz]]))
    Lm = Lm.with_higgs(MatrixForm(c, [[-dz]]))
    S = cons.direct_sum(Lp, Lm)
    w_dz = fm.wedge(geo.omega_fs(c, 0), dz)
    pts = sf.random_points(2, 50, seed=6)
    assert fm.sup_norm(bd.ah_form(Lp.connection, Lp.theta, 1, points=pts) - w_dz, pts)[0] < 1e-14
    assert fm.sup_norm(bd.ah_form(Lm.connection, Lm.theta, 1, points=pts) - w_dz, pts)[0] < 1e-14
    assert fm.sup_norm(bd.ah_form(S.connection, S.theta, 1, points=pts) - w_dz.scale(2), pts)[0] < 1e-14


def test_tensor_with_trivial_line_is_identity():
    rng = np.random.default_rng(4)
    B = random_holo_bundle(rng, 2)
    Tn = cons.tensor(B, cons.trivial_bundle(T2, 1))
    assert fres(bd.ch_form(Tn.connection) - bd.ch_form(B.connection)) < TOL
    for k in (0, 1):
        assert fres(ah(Tn, k) - ah(B, k)) < TOL
    assert fres(bd.v_form(Tn.connection, Tn.metric, 0) - bd.v_form(B.connection, B.metric, 0)) < TOL


def test_ch_multiplicative_fs_lines():
    M = geo.product(geo.make_cp1("z1", 8), geo.make_cp1("z2", 8))
    p1 = geo.projection(M, 0)
    p2 = geo.projection(M, 1)
    L1 = cons.pull_bundle(p1, cons.cp1_line_bundle(M.factor_manifold(0), 1), M)
    L2 = cons.pull_bundle(p2, cons.cp1_line_bundle(M.factor_manifold(1), -2), M)
    Tn = cons.tensor(L1, L2)
    pts = sf.random_points(2, 100, seed=7)
    lhs = bd.ch_form(Tn.connection)
    rhs = fm.wedge(bd.ch_form(L1.connection), bd.ch_form(L2.connection))
    assert fm.sup_norm(lhs - rhs, pts)[0] < TOL
    # the (2,2) part integrates to c1(L1) c1(L2) = -2 (product of degrees)
    top = fm.bidegree_part(lhs, 2, 2)
    assert geo.integrate(top, M.with_resolution(32)) == pytest.approx(-2, abs=1e-4)


def test_ch_multiplicative_random():
    rng = np.random.default_rng(8)
    B1, B2 = random_holo_bundle(rng, 2, higgs=False), random_holo_bundle(rng, 2, higgs=False)
    Tn = cons.tensor(B1, B2)
    lhs = bd.ch_form(Tn.connection)
    rhs = fm.wedge(bd.ch_form(B1.connection), bd.ch_form(B2.connection))
    assert fres(lhs - rhs) < TOL


def test_at_tensor_formula():
    rng = np.random.default_rng(9)
    B1, B2 = random_holo_bundle(rng, 2, higgs=False), random_holo_bundle(rng, 1, higgs=False)
    Tn = cons.tensor(B1, B2)
    I1 = MatrixForm.identity(T2.chart, 2)
    I2 = MatrixForm.identity(T2.chart, 1)
    expected = mx.kron(bd.atiyah_rep(B1.connection), I2) + mx.kron(I1, bd.atiyah_rep(B2.connection))
    assert mx.sup_norm(bd.atiyah_rep(Tn.connection) - expected, RANDOM_PTS)[0] < TOL


def test_ah_tensor_convolution():
    rng = np.random.default_rng(10)
    B1, B2 = random_holo_bundle(rng, 1), random_holo_bundle(rng, 2)
    Tn = cons.tensor(B1, B2)
    for k in (0, 1, 2):
        rhs = Form.zero(T2.chart)
        for i in range(k + 1):
            j = k - i
            rhs = rhs + fm.wedge(ah(B1, i), bd.at_form(B2.connection, j))
            rhs = rhs + fm.wedge(bd.at_form(B1.connection, i), ah(B2, j))
        assert fres(ah(Tn, k) - rhs) < TOL


def test_ah_tensor_rank1_brute_force():
    # rank 1 x rank 1: At = a1 + a2, theta = t1 + t2, ah_1 = (i/2pi) (a1 + a2) (t1 + t2)
    rng = np.random.default_rng(11)
    B1, B2 = random_holo_bundle(rng, 1), random_holo_bundle(rng, 1)
    Tn = cons.tensor(B1, B2)
    a = (bd.atiyah_rep(B1.connection)[0, 0] + bd.atiyah_rep(B2.connection)[0, 0]).scale(bd.I_OVER_2PI)
    t = B1.theta[0, 0] + B2.theta[0, 0]
    assert fres(ah(Tn, 1) - fm.wedge(a, t)) < TOL


def test_distributivity():
    rng = np.random.default_rng(12)
    B1, B2, B3 = (random_holo_bundle(rng, 1, higgs=False) for _ in range(3))
    lhs = cons.tensor(cons.direct_sum(B1, B2), B3)
    rhs = cons.direct_sum(cons.tensor(B1, B3), cons.tensor(B2, B3))
    assert fres(bd.ch_form(lhs.connection) - bd.ch_form(rhs.connection)) < TOL


def test_pullback_naturality():
    src = geo.make_torus(2, names=["w1", "w2"], resolution=8)
    f = geo.HoloMap(src.chart, T2.chart, [sf.parse_expr("w1 + 0.5*w2^2", src.chart), sf.parse_expr("(1-1i)*w2 + 0.3*w1*w2", src.chart)])
    rng = np.random.default_rng(13)
    B = random_holo_bundle(rng, 2)
    P = cons.pull_bundle(f, B, src)
    pts = sf.random_points(2, 100, seed=14, radius=0.6)
    lhs = bd.atiyah_rep(P.connection)
    rhs = geo.pullback_matrix(f, bd.atiyah_rep(B.connection))
    assert mx.sup_norm(lhs - rhs, pts)[0] < TOL
    for k in (0, 1):
        a = bd.ah_form(P.connection, P.theta, k, points=pts)
        b = geo.pullback(f, bd.ah_form(B.connection, B.theta, k, points=RANDOM_PTS))
        assert fm.sup_norm(a - b, pts)[0] < TOL
    for k in (1, 2):
        a = bd.at_form(P.connection, k)
        b = geo.pullback(f, bd.at_form(B.connection, k))
        assert fm.sup_norm(a - b, pts)[0] < TOL


def test_pullback_identity_map():
    rng = np.random.default_rng(15)
    B = random_holo_bundle(rng, 2)
    P = cons.pull_bundle(geo.HoloMap.identity(T2.chart), B, T2)
    assert fres(bd.ch_form(P.connection) - bd.ch_form(B.connection)) == 0


def test_pull_bundle_chart_mismatch():
    rng = np.random.default_rng(16)
    B = random_holo_bundle(rng, 1)
    other = geo.make_torus(1)
    with pytest.raises(ChartMismatchError):
        cons.pull_bundle(geo.HoloMap.identity(other.chart), B, other)


def zero_block(chart, p, q):
    return [[Form.zero(chart) for _ in range(q)] for _ in range(p)]


def test_split_extension_zero_is_direct_sum():
    rng = np.random.default_rng(17)
    B1, B2 = random_holo_bundle(rng, 1, higgs=False), random_holo_bundle(rng, 2, higgs=False)
    E = cons.split_extension(B1, B2, zero_block(T2.chart, 1, 2))
    S = cons.direct_sum(B1, B2)
    assert mx.sup_norm(E.connection.A - S.connection.A, RANDOM_PTS)[0] == 0


@pytest.mark.parametrize("seed", range(3))
def test_split_extension_ch_splits(seed):
    rng = np.random.default_rng(18 + seed)
    B1, B2 = random_holo_bundle(rng, 2, higgs=False), random_holo_bundle(rng, 1, higgs=False)
    s = [[fm.bidegree_part(rf.random_form(T2.chart, rng, 1), 0, 1)] for _ in range(2)]
    E = cons.split_extension(B1, B2, s)
    lhs = bd.ch_form(E.connection)
    rhs = bd.ch_form(B1.connection) + bd.ch_form(B2.connection)
    assert fres(lhs - rhs) < TOL


def test_split_extension_ah_splits():
    rng = np.random.default_rng(21)
    c = T2.chart
    theta1 = rf.holomorphic_higgs(c, rng, 1)
    B1 = BundleData(T2, bd.chern_connection(rf.random_metric(c, rng, 1)), None, bd.HiggsData(theta1))
    B2 = BundleData(T2, bd.chern_connection(rf.random_metric(c, rng, 1)), None, bd.HiggsData(theta1))
    s = [[fm.bidegree_part(rf.random_form(c, rng, 1), 0, 1)]]
    off = [[Form.dz(c, 0, rf.random_polynomial(c, rng, 2, 2, holomorphic=True)) + Form.dz(c, 1, rf.random_polynomial(c, rng, 2, 1, holomorphic=True))]]
    E = cons.split_extension(B1, B2, s, off)
    assert bd.validate_higgs(E.connection, E.theta, RANDOM_PTS).passed
    for k in (0, 1, 2):
        assert fres(ah(E, k) - ah(B1, k) - ah(B2, k)) < TOL


def test_split_extension_shape_and_degree_checks():
    rng = np.random.default_rng(22)
    B1, B2 = random_holo_bundle(rng, 1, higgs=False), random_holo_bundle(rng, 1, higgs=False)
    with pytest.raises(ValueError):
        cons.split_extension(B1, B2, zero_block(T2.chart, 2, 1))
    with pytest.raises(Exception):
        cons.split_extension(B1, B2, [[Form.dz(T2.chart, 0)]])


def test_bundle_manifold_mismatch():
    rng = np.random.default_rng(23)
    B1 = random_holo_bundle(rng, 1)
    B2 = cons.trivial_bundle(geo.make_cp1(), 1)
    with pytest.raises(ChartMismatchError):
        cons.direct_sum(B1, B2)


def test_bundle_validate_rejects_bad_higgs():
    c = T2.chart
    theta = MatrixForm.from_constant(c, np.eye(1), Form.dz(c, 0, c.zbar(0)))
    B = BundleData(T2, ConnectionData.trivial(c, 1), MetricField.identity(c, 1), bd.HiggsData(theta))
    with pytest.raises(bd.HiggsValidationError):
        B.validate(RANDOM_PTS)
