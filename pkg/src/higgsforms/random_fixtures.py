"""Seeded random fixtures: polynomial fields, metrics, flat connections and
Higgs fields with prescribed algebraic properties."""

from __future__ import annotations

import itertools

import numpy as np

from . import scalar as sf
from .bundles import ConnectionData, MetricField, MetricPath
from .forms import Form
from .matrices import MatrixForm
from .scalar import ChartSpec


def _c(rng, scale=1.0):
    return complex(scale * rng.normal(), scale * rng.normal())


def random_complex_matrix(rng, r, scale=1.0):
    return scale * (rng.normal(size=(r, r)) + 1j * rng.normal(size=(r, r)))


def random_monomial(chart: ChartSpec, rng, max_degree: int = 2, holomorphic: bool = False):
    """A product of at most ``max_degree`` coordinates and conjugates."""
    deg = int(rng.integers(0, max_degree + 1))
    factors = []
    for _ in range(deg):
        i = int(rng.integers(chart.n))
        if holomorphic or rng.random() < 0.5:
            factors.append(chart.z(i))
        else:
            factors.append(chart.zbar(i))
    return sf.mul(*factors)


def random_polynomial(chart: ChartSpec, rng, terms: int = 3, max_degree: int = 2, holomorphic: bool = False, scale=1.0):
    return sf.add(*(sf.mul(_c(rng, scale), random_monomial(chart, rng, max_degree, holomorphic)) for _ in range(terms)))


def random_smooth_field(chart: ChartSpec, rng):
    """Polynomial plus a rational and an exponential piece (all smooth near the origin)."""
    p = random_polynomial(chart, rng, 3, 2)
    q = random_polynomial(chart, rng, 2, 2, scale=0.2)
    e = random_polynomial(chart, rng, 2, 1, scale=0.3)
    return sf.add(p, sf.div(1, sf.add(2, q)), sf.exp(e))


def random_form(chart: ChartSpec, rng, degree: int, terms: int = 3, max_degree: int = 2) -> Form:
    """Random homogeneous form of total degree ``degree`` with polynomial coefficients."""
    keys = []
    for p in range(degree + 1):
        q = degree - p
        if p > chart.n or q > chart.n:
            continue
        for I in itertools.combinations(range(chart.n), p):
            for J in itertools.combinations(range(chart.n), q):
                keys.append((I, J))
    if not keys:
        return Form.zero(chart)
    out = {}
    for _ in range(terms):
        k = keys[int(rng.integers(len(keys)))]
        c = random_polynomial(chart, rng, 2, max_degree)
        out[k] = sf.add(out[k], c) if k in out else c
    return Form(chart, out)


def random_hermitian(rng, r, scale=1.0):
    m = random_complex_matrix(rng, r, scale)
    return (m + m.conj().T) / 2


def random_unitary(rng, r):
    q, _ = np.linalg.qr(random_complex_matrix(rng, r))
    return q


def random_nilpotent(rng, r):
    """``S U S^-1`` with ``U`` strictly upper triangular, unit operator norm."""
    U = np.triu(random_complex_matrix(rng, r), 1)
    S = random_complex_matrix(rng, r) + 2 * np.eye(r)
    Q = S @ U @ np.linalg.inv(S)
    return Q / np.linalg.norm(Q, 2)


def nilpotent_higgs(chart: ChartSpec, rng, r: int) -> MatrixForm:
    """``theta = sum_i P_i dz_i`` with the ``P_i`` commuting nilpotent
    polynomials in one random nilpotent matrix, so ``theta ^ theta = 0``."""
    Q = random_nilpotent(rng, r)
    powers = [np.linalg.matrix_power(Q, m) for m in range(1, r)]
    theta = MatrixForm.zeros(chart, r)
    for i in range(chart.n):
        P = sum(_c(rng) * Qm for Qm in powers)
        theta = theta + MatrixForm.from_constant(chart, P, Form.dz(chart, i))
    return theta


def normal_commuting_higgs(chart: ChartSpec, rng, r: int) -> MatrixForm:
    """``theta = sum_i N_i dz_i`` with commuting normal ``N_i = U D_i U^dagger``;
    then ``theta ^ theta = 0`` and ``[theta, theta*] = 0`` for the identity metric."""
    U = random_unitary(rng, r)
    theta = MatrixForm.zeros(chart, r)
    for i in range(chart.n):
        D = np.diag(rng.normal(size=r) + 1j * rng.normal(size=r))
        theta = theta + MatrixForm.from_constant(chart, U @ D @ U.conj().T, Form.dz(chart, i))
    return theta


def holomorphic_higgs(chart: ChartSpec, rng, r: int) -> MatrixForm:
    """``theta = sum_i f_i(z) P dz_i`` with one constant matrix ``P`` and
    holomorphic polynomials ``f_i``: holomorphic and ``theta ^ theta = 0``."""
    P = random_complex_matrix(rng, r, 0.5)
    theta = MatrixForm.zeros(chart, r)
    for i in range(chart.n):
        f = random_polynomial(chart, rng, 2, 1, holomorphic=True, scale=0.5)
        theta = theta + MatrixForm.from_constant(chart, P, Form.dz(chart, i, f))
    return theta


def commuting_flat_connection(chart: ChartSpec, rng, r: int, scale=0.5) -> ConnectionData:
    """Constant ``A = sum_i M_i dz_i + N_i dzbar_i`` with all ``M_i, N_i``
    simultaneously diagonalisable: ``dA = 0`` and ``A ^ A = 0``."""
    S = random_complex_matrix(rng, r) + 2 * np.eye(r)
    Si = np.linalg.inv(S)
    A = MatrixForm.zeros(chart, r)
    for i in range(chart.n):
        for base in (Form.dz(chart, i), Form.dzbar(chart, i)):
            D = np.diag(scale * (rng.normal(size=r) + 1j * rng.normal(size=r)))
            A = A + MatrixForm.from_constant(chart, S @ D @ Si, base)
    return ConnectionData(A)


def random_metric(chart: ChartSpec, rng, r: int, scale=0.4, holomorphic_dependence=False) -> MetricField:
    """``H = I + G^dagger G`` with random polynomial ``G``: hermitian and
    positive definite everywhere."""
    G = [[random_polynomial(chart, rng, 2, 1, holomorphic_dependence, scale) for _ in range(r)] for _ in range(r)]
    memo = {}
    H = []
    for i in range(r):
        row = []
        for j in range(r):
            s = sf.add(*(sf.mul(sf.conj(G[k][i], memo), G[k][j]) for k in range(r)))
            row.append(sf.add(1 if i == j else 0, s))
        H.append(row)
    return MetricField(chart, H)


def exp_path(chart: ChartSpec, rng, r: int, param="t", scale=0.3) -> MetricPath:
    """``H_t = B^dagger diag(exp(t phi_k)) B`` with real fields ``phi_k`` and a
    constant invertible ``B``."""
    B = random_complex_matrix(rng, r, 0.5) + np.eye(r)
    t = sf.param(param)
    phis = []
    for _ in range(r):
        g = random_polynomial(chart, rng, 2, 1, scale=scale)
        phis.append(sf.add(g, sf.conj(g)))
    D = [sf.exp(sf.mul(t, phi)) for phi in phis]
    H = [[sf.add(*(sf.mul(complex(np.conj(B[k, i]) * B[k, j]), D[k]) for k in range(r))) for j in range(r)] for i in range(r)]
    return MetricPath(chart, H, param)
