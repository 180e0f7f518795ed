import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from higgsforms import forms as fm
from higgsforms import matrices as mx
from higgsforms import random_fixtures as rf
from higgsforms import scalar as sf
from higgsforms.errors import DegreeError, SingularityError
from higgsforms.forms import Form
from higgsforms.geometry import omega_fs
from higgsforms.matrices import MatrixForm
from higgsforms.scalar import ChartSpec

CHART2 = ChartSpec(2)
PTS2 = sf.random_points(2, 100, seed=2, radius=0.8)


def mres(M: MatrixForm, pts=PTS2) -> float:
    return mx.sup_norm(M, pts)[0]


def rand_matrix(seed, degree, r=2, chart=CHART2):
    rng = np.random.default_rng(seed)
    return MatrixForm(chart, [[rf.random_form(chart, rng, degree, terms=2) for _ in range(r)] for _ in range(r)])


def test_identity_is_unit():
    M = rand_matrix(0, 1, 3)
    I = MatrixForm.identity(CHART2, 3)
    assert mres(I @ M - M) == 0 and mres(M @ I - M) == 0


def test_nilpotent_theta_squares_to_zero():
    N = np.triu(np.arange(1, 10).reshape(3, 3), 1)
    theta = MatrixForm.from_constant(CHART2, N, Form.dz(CHART2, 0))
    assert (theta @ theta).is_zero()


def test_example_at_times_theta():
    c = ChartSpec(2, ("z1", "z2"), ("cp1", "torus"))
    w = omega_fs(c, 0)
    At = MatrixForm(c, [[w, Form.zero(c)], [Form.zero(c), -w]])
    theta = MatrixForm.from_constant(c, np.diag([1, -1]), Form.dz(c, 1))
    prod = At @ theta
    wdz = fm.wedge(w, Form.dz(c, 1))
    pts = sf.random_points(2, 20, seed=1)
    expected = MatrixForm(c, [[wdz, Form.zero(c)], [Form.zero(c), wdz]])
    assert mres(prod - expected, pts) < 1e-15
    assert fm.sup_norm(mx.trace(prod) - wdz.scale(2), pts)[0] < 1e-15


def test_trace_identity():
    t = mx.trace(MatrixForm.identity(CHART2, 4))
    assert set(t.terms) == {((), ())} and t.terms[((), ())].value == 4


def test_super_commutator_odd_odd():
    A = rand_matrix(1, 1)
    assert mres(mx.supercommutator(A, A) - (A @ A).scale(2)) < 1e-12


def test_super_commutator_brute_force_2x2():
    c = ChartSpec(1)
    E12 = np.array([[0, 1], [0, 0]])
    E21 = E12.T
    theta = MatrixForm.from_constant(c, E12, Form.dz(c, 0))
    theta_s = MatrixForm.from_constant(c, E21, Form.dzbar(c, 0))
    got = mx.supercommutator(theta, theta_s)
    # [theta, theta*] = theta theta* + theta* theta (both odd)
    # = E12 E21 dz^dzbar + E21 E12 dzbar^dz = diag(1, -1) dz^dzbar
    vals = mx.evaluate_matrix(got, np.zeros((1, 1)))
    assert set(vals) == {((0,), (0,))}
    assert np.allclose(vals[((0,), (0,))][0], np.diag([1, -1]))


def test_super_commutator_needs_homogeneous():
    A = rand_matrix(2, 1) + rand_matrix(3, 2)
    with pytest.raises(DegreeError):
        mx.supercommutator(A, A)


def test_shape_mismatch():
    with pytest.raises(ValueError):
        MatrixForm.identity(CHART2, 2) @ MatrixForm.identity(CHART2, 3)


@settings(max_examples=1000)
@given(st.integers(0, 2**31 - 1), st.integers(0, 4), st.integers(0, 4))
def test_trace_of_supercommutator_vanishes(seed, da, db):
    A = rand_matrix(seed, da)
    B = rand_matrix(seed + 1, db)
    assert fm.sup_norm(mx.trace(mx.supercommutator(A, B)), PTS2[:20])[0] < 1e-10


@settings(max_examples=200)
@given(st.integers(0, 2**31 - 1))
def test_associativity(seed):
    A, B, C = rand_matrix(seed, 1), rand_matrix(seed + 1, 1), rand_matrix(seed + 2, 0)
    assert mres((A @ B) @ C - A @ (B @ C), PTS2[:20]) < 1e-10


def test_kron_convention():
    c = ChartSpec(1)
    a = MatrixForm.from_constant(c, np.array([[1, 2], [3, 4]]))
    b = MatrixForm.from_constant(c, np.array([[0, 5], [6, 7]]))
    vals = mx.evaluate_matrix(mx.kron(a, b), np.zeros((1, 1)))
    assert np.allclose(vals[((), ())][0], np.kron([[1, 2], [3, 4]], [[0, 5], [6, 7]]))


def test_symbolic_inverse():
    c = ChartSpec(1)
    z, zb = c.z(0), c.zbar(0)
    rows = [[sf.add(2, sf.mul(z, zb)), z], [zb, sf.const(1)]]
    inv = mx.inverse(rows)
    p = np.array([0.3 + 0.2j])
    M = np.array([[complex(sf.evaluate(e, p)) for e in row] for row in rows])
    Mi = np.array([[complex(sf.evaluate(e, p)) for e in row] for row in inv])
    assert np.allclose(Mi @ M, np.eye(2))


def test_singular_constant_inverse():
    with pytest.raises(SingularityError):
        mx.inverse([[sf.const(1), sf.const(2)], [sf.const(2), sf.const(4)]])
