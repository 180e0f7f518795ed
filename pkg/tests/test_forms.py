import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from higgsforms import forms as fm
from higgsforms import random_fixtures as rf
from higgsforms import scalar as sf
from higgsforms.errors import ChartMismatchError, DegreeError
from higgsforms.forms import Form, basis_product, merge_sign
from higgsforms.scalar import ChartSpec, parse_expr

CHART3 = ChartSpec(3)
PTS3 = sf.random_points(3, 100, seed=9, radius=0.8)


def residual(a: Form, pts=PTS3) -> float:
    return fm.sup_norm(a, pts)[0]


def rand_form(seed, degree=None, chart=CHART3):
    rng = np.random.default_rng(seed)
    if degree is None:
        degree = int(rng.integers(0, 2 * chart.n + 1))
    return rf.random_form(chart, rng, degree, terms=3)


def test_merge_sign_brute_force():
    # Compare against counting inversions of the concatenation.
    for a in itertools.chain.from_iterable(itertools.combinations(range(4), k) for k in range(5)):
        for b in itertools.chain.from_iterable(itertools.combinations(range(4), k) for k in range(5)):
            seq = a + b
            if len(set(seq)) < len(seq):
                assert merge_sign(a, b)[0] == 0
                continue
            inv = sum(1 for i in range(len(seq)) for j in range(i + 1, len(seq)) if seq[i] > seq[j])
            sign, merged = merge_sign(a, b)
            assert sign == (-1) ** inv and merged == tuple(sorted(seq))


def test_wedge_anticommutes_one_forms():
    c = ChartSpec(1)
    a = fm.wedge(Form.dz(c, 0), Form.dzbar(c, 0))
    b = fm.wedge(Form.dzbar(c, 0), Form.dz(c, 0))
    assert set(a.terms) == {((0,), (0,))}
    assert residual(a + b, sf.random_points(1, 5)) == 0


def test_wedge_unit():
    a = rand_form(1, 2)
    assert residual(fm.wedge(a, Form.scalar(CHART3, 1)) - a) == 0


def test_wedge_coefficient(chart1):
    a = Form.dz(chart1, 0, chart1.z(0))
    b = Form.dzbar(chart1, 0, chart1.zbar(0))
    assert fm.coeff_at(fm.wedge(a, b), (0,), (0,), [2 + 1j]) == pytest.approx(5)


def test_wedge_chart_mismatch():
    with pytest.raises(ChartMismatchError):
        fm.wedge(Form.dz(ChartSpec(1), 0), Form.dz(ChartSpec(2), 0))


def test_d_examples(chart1):
    a = Form.dzbar(chart1, 0, chart1.z(0))
    assert fm.coeff_at(fm.d(a), (0,), (0,), [0.3j]) == pytest.approx(1)
    f = Form.scalar(chart1, parse_expr("exp(z1)*z1^2", chart1))
    assert fm.delbar(f).is_zero()
    g = Form.dz(chart1, 0, parse_expr("zbar1/(1+z1*zbar1)", chart1))
    assert fm.coeff_at(fm.d(g), (0,), (0,), [1]) == pytest.approx(-0.25)


def test_bidegree_part_examples(chart2):
    a = fm.wedge(Form.dz(chart2, 0), Form.dzbar(chart2, 0)) + fm.wedge(Form.dz(chart2, 0), Form.dz(chart2, 1))
    p = fm.bidegree_part(a, 1, 1)
    assert set(p.terms) == {((0,), (0,))}
    assert fm.bidegree_part(Form.dz(chart2, 0), 0, 0).is_zero()
    with pytest.raises(DegreeError):
        fm.bidegree_part(a, 3, 0)


def test_bidegree_part_drops_20_block(chart2):
    rng = np.random.default_rng(3)
    F20 = Form.basis(chart2, (0, 1), (), rf.random_polynomial(chart2, rng))
    F11 = rf.random_form(chart2, rng, 2)
    F11 = fm.bidegree_part(F11, 1, 1) + Form.basis(chart2, (0,), (1,), 1)
    p = fm.bidegree_part(F20 + F11, 1, 1)
    assert residual(p - F11, sf.random_points(2, 20)) == 0
    assert ((0, 1), ()) not in p.terms


def test_conjugate_examples(chart1, chart2):
    a = fm.conjugate(Form.dz(chart1, 0, 1j))
    assert set(a.terms) == {((), (0,))}
    assert fm.coeff_at(a, (), (0,), [0.1]) == pytest.approx(-1j)
    dz = Form.dz(chart2, 1)
    assert set(fm.conjugate(dz).terms) == {((), (1,))}


def test_conjugate_swaps_bidegree_and_sign():
    c = ChartSpec(2)
    # conj(dz1 ^ dzbar2) = dzbar1 ^ dz2 = -dz2 ^ dzbar1
    a = fm.conjugate(Form.basis(c, (0,), (1,)))
    assert fm.coeff_at(a, (1,), (0,), [0, 0]) == pytest.approx(-1)


def test_conjugate_is_pointwise_conjugation():
    # Evaluate forms on real tangent vectors: conj(a)(v) = conj(a(v)).
    a = rand_form(5, 2)
    b = fm.conjugate(a)
    rng = np.random.default_rng(0)
    p = PTS3[0]
    v1 = rng.normal(size=3) + 1j * rng.normal(size=3)
    v2 = rng.normal(size=3) + 1j * rng.normal(size=3)

    def pair(form, x, y):
        # dz_i(v) = v_i, dzbar_i(v) = conj(v_i) for a real tangent vector v
        total = 0j
        for (I, J), c in form.terms.items():
            comps = [lambda v, i=i: v[i] for i in I] + [lambda v, j=j: np.conj(v[j]) for j in J]
            det = comps[0](x) * comps[1](y) - comps[0](y) * comps[1](x)
            total += sf.evaluate(c, p) * det
        return total

    assert pair(b, v1, v2) == pytest.approx(np.conj(pair(a, v1, v2)))


def test_coefficient_pruning():
    c = ChartSpec(1)
    a = Form(c, {((0,), ()): sf.ZERO})
    assert a.is_zero()
    with pytest.raises(ValueError):
        Form(c, {((0, 0), ()): sf.ONE})


def test_basis_label_roundtrip(chart2):
    for key in [((), ()), ((0,), (1,)), ((0, 1), (0, 1))]:
        label = fm.basis_label(chart2, key)
        assert fm.parse_basis_label(chart2, label) == (1, key)
    assert fm.parse_basis_label(chart2, "dzbar1^dz1") == (-1, ((0,), (0,)))


# ---------------------------------------------------------------------------
# Property tests

seeds = st.integers(0, 2**31 - 1)


@settings(max_examples=1000)
@given(seeds)
def test_d_squared_zero(seed):
    a = rand_form(seed)
    assert residual(fm.d(fm.d(a))) < 1e-10
    assert residual(fm.del_(fm.del_(a))) < 1e-10
    assert residual(fm.delbar(fm.delbar(a))) < 1e-10
    assert residual(fm.del_(fm.delbar(a)) + fm.delbar(fm.del_(a))) < 1e-10


@settings(max_examples=1000)
@given(seeds, seeds)
def test_graded_commutativity(s1, s2):
    a, b = rand_form(s1), rand_form(s2)
    sign = (-1) ** (a.degree() * b.degree()) if not (a.is_zero() or b.is_zero()) else 1
    assert residual(fm.wedge(a, b) - fm.wedge(b, a).scale(sign)) < 1e-10


@settings(max_examples=300)
@given(seeds, seeds)
def test_leibniz(s1, s2):
    a, b = rand_form(s1), rand_form(s2)
    if a.is_zero():
        return
    lhs = fm.d(fm.wedge(a, b))
    rhs = fm.wedge(fm.d(a), b) + fm.wedge(a, fm.d(b)).scale((-1) ** a.degree())
    assert residual(lhs - rhs) < 1e-10


@settings(max_examples=300)
@given(seeds, seeds, seeds)
def test_wedge_associative(s1, s2, s3):
    a, b, c = rand_form(s1, 1), rand_form(s2, 1), rand_form(s3, 2)
    assert residual(fm.wedge(fm.wedge(a, b), c) - fm.wedge(a, fm.wedge(b, c))) < 1e-10


@settings(max_examples=300)
@given(seeds)
def test_bidegree_parts_sum_to_identity(seed):
    a = rand_form(seed, None)
    total = Form.zero(CHART3)
    for p in range(4):
        for q in range(4):
            part = fm.bidegree_part(a, p, q)
            assert residual(fm.bidegree_part(part, p, q) - part) == 0
            total = total + part
    assert residual(total - a) == 0


@settings(max_examples=300)
@given(seeds)
def test_conjugate_involution(seed):
    a = rand_form(seed)
    assert residual(fm.conjugate(fm.conjugate(a)) - a) < 1e-12
    assert fm.conjugate(a).bidegrees() == {(q, p) for p, q in a.bidegrees()}


def test_basis_product_matches_wedge():
    c = ChartSpec(2)
    for k1 in [((0,), ()), ((), (1,)), ((1,), (0,))]:
        for k2 in [((1,), ()), ((), (0,)), ((0,), (1,))]:
            sign, key = basis_product(k1, k2)
            w = fm.wedge(Form.basis(c, *k1), Form.basis(c, *k2))
            if sign == 0:
                assert w.is_zero()
            else:
                assert fm.coeff_at(w, *key, [0, 0]) == pytest.approx(sign)
