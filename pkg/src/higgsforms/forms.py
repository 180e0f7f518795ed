"""Bigraded complex differential forms on a chart.

A :class:`Form` is a sparse table mapping a basis element
``dz_I ^ dzbar_J`` (``I`` and ``J`` strictly increasing index tuples) to a
scalar-field coefficient.  Holomorphic differentials always come first in a
basis element, so the term ``(I, J)`` has bidegree ``(len(I), len(J))``.
"""

from __future__ import annotations

from typing import Iterable, Mapping

import numpy as np

from . import scalar as sf
from .errors import ChartMismatchError, DegreeError
from .scalar import ChartSpec, Evaluator, Expr


def merge_sign(a: tuple, b: tuple):
    """Sign and merged index tuple of ``e_a ^ e_b`` for strictly increasing
    ``a`` and ``b``; ``(0, None)`` when they share an index.

    Every sign in this module comes from here.
    """
    if not a:
        return 1, b
    if not b:
        return 1, a
    if set(a) & set(b):
        return 0, None
    inversions = 0
    for x in b:
        inversions += sum(1 for y in a if y > x)
    return (-1) ** inversions, tuple(sorted(a + b))


def basis_product(left: tuple, right: tuple):
    """Sign and key of ``(dz_I1 dzbar_J1) ^ (dz_I2 dzbar_J2)``."""
    (i1, j1), (i2, j2) = left, right
    s1, i = merge_sign(i1, i2)
    if s1 == 0:
        return 0, None
    s2, j = merge_sign(j1, j2)
    if s2 == 0:
        return 0, None
    # move dz_I2 across dzbar_J1
    s = s1 * s2 * (-1) ** (len(j1) * len(i2))
    return s, (i, j)


def _key_from_indices(chart: ChartSpec, hol: Iterable[int], anti: Iterable[int]):
    """Sign-normalise an arbitrary ordered wedge of dz's followed by dzbar's."""
    sign = 1
    key = ((), ())
    for h in hol:
        s, key = basis_product(key, ((h,), ()))
        sign *= s
        if s == 0:
            return 0, None
    for a in anti:
        s, key = basis_product(key, ((), (a,)))
        sign *= s
        if s == 0:
            return 0, None
    return sign, key


class Form:
    """A complex differential form ``sum_{I,J} f_{IJ} dz_I ^ dzbar_J``.

    Forms are immutable; every operation returns a new form.  Coefficients
    equal to the literal zero are never stored.
    """

    __slots__ = ("chart", "terms")

    def __init__(self, chart: ChartSpec, terms: Mapping | None = None):
        self.chart = chart
        clean = {}
        n = chart.n
        for (i, j), c in (terms or {}).items():
            i, j = tuple(i), tuple(j)
            for idx in (i, j):
                if any(b <= a for a, b in zip(idx, idx[1:])):
                    raise ValueError(f"multi-index {idx} is not strictly increasing")
                if any(x < 0 or x >= n for x in idx):
                    raise ValueError(f"multi-index {idx} out of range for n={n}")
            c = sf.as_expr(c)
            if not sf.is_zero(c):
                clean[(i, j)] = c
        self.terms = clean

    # -- construction helpers
    @classmethod
    def zero(cls, chart):
        return cls(chart, {})

    @classmethod
    def scalar(cls, chart, f):
        return cls(chart, {((), ()): f})

    @classmethod
    def dz(cls, chart, i, coeff=1):
        return cls(chart, {((i,), ()): coeff})

    @classmethod
    def dzbar(cls, chart, i, coeff=1):
        return cls(chart, {((), (i,)): coeff})

    @classmethod
    def basis(cls, chart, hol=(), anti=(), coeff=1):
        """``coeff * dz_{hol[0]} ^ ... ^ dzbar_{anti[0]} ^ ...`` in the given order."""
        s, key = _key_from_indices(chart, hol, anti)
        if s == 0:
            return cls.zero(chart)
        return cls(chart, {key: sf.mul(s, coeff)})

    # -- inspection
    def is_zero(self) -> bool:
        return not self.terms

    def bidegrees(self) -> set:
        return {(len(i), len(j)) for i, j in self.terms}

    def degrees(self) -> set:
        return {len(i) + len(j) for i, j in self.terms}

    def degree(self):
        """Total degree of a homogeneous form; ``None`` for the zero form."""
        ds = self.degrees()
        if not ds:
            return None
        if len(ds) > 1:
            raise DegreeError(f"form is not homogeneous (degrees {sorted(ds)})")
        return ds.pop()

    def coefficient(self, i=(), j=()) -> Expr:
        return self.terms.get((tuple(i), tuple(j)), sf.ZERO)

    # -- arithmetic
    def _check(self, other):
        if other.chart != self.chart:
            raise ChartMismatchError("forms live on different charts")

    def __add__(self, other):
        if not isinstance(other, Form):
            other = Form.scalar(self.chart, other)
        self._check(other)
        terms = dict(self.terms)
        for k, c in other.terms.items():
            terms[k] = sf.add(terms[k], c) if k in terms else c
        return Form(self.chart, terms)

    __radd__ = __add__

    def __neg__(self):
        return Form(self.chart, {k: sf.neg(c) for k, c in self.terms.items()})

    def __sub__(self, other):
        if not isinstance(other, Form):
            other = Form.scalar(self.chart, other)
        self._check(other)
        terms = dict(self.terms)
        for k, c in other.terms.items():
            terms[k] = sf.sub(terms[k], c) if k in terms else sf.neg(c)
        return Form(self.chart, terms)

    def __rsub__(self, other):
        return Form.scalar(self.chart, other) - self

    def scale(self, f) -> "Form":
        """Multiply by a scalar field or number."""
        f = sf.as_expr(f)
        return Form(self.chart, {k: sf.mul(f, c) for k, c in self.terms.items()})

    def __mul__(self, other):
        if isinstance(other, Form):
            return wedge(self, other)
        return self.scale(other)

    def __rmul__(self, other):
        return self.scale(other)

    def __xor__(self, other):
        return wedge(self, other)

    def __repr__(self):
        return f"Form({format_form(self)})"


def basis_label(chart: ChartSpec, key) -> str:
    """Text label of a basis element, e.g. ``dz1^dzbar1^dz2`` style ``dz1^dz2^dzbar1``."""
    i, j = key
    parts = ["d" + chart.coord_names[a] for a in i] + ["d" + chart.conj_names[b] for b in j]
    return "^".join(parts) if parts else "1"


def parse_basis_label(chart: ChartSpec, label: str):
    """Inverse of :func:`basis_label`, accepting any order of the factors.

    Returns ``(sign, key)``; sign 0 means the wedge vanishes (repeated factor).
    """
    label = label.strip()
    if label in ("", "1"):
        return 1, ((), ())
    hol_names = {"d" + c: k for k, c in enumerate(chart.coord_names)}
    anti_names = {"d" + c: k for k, c in enumerate(chart.conj_names)}
    sign = 1
    key = ((), ())
    for part in label.split("^"):
        part = part.strip()
        if part in hol_names:
            s, key = basis_product(key, ((hol_names[part],), ()))
        elif part in anti_names:
            s, key = basis_product(key, ((), (anti_names[part],)))
        else:
            raise sf.UnknownSymbolError(f"unknown differential {part!r} in {label!r}")
        if s == 0:
            return 0, None
        sign *= s
    return sign, key


def format_form(a: Form) -> str:
    if a.is_zero():
        return "0"
    return " + ".join(f"{sf.to_string(c)}*{basis_label(a.chart, k)}" for k, c in sorted(a.terms.items(), key=_sort_key))


def _sort_key(item):
    (i, j), _ = item
    return (len(i) + len(j), len(i), i, j)


def wedge(a: Form, b: Form) -> Form:
    """Exterior product."""
    if a.chart != b.chart:
        raise ChartMismatchError("cannot wedge forms on different charts")
    out = {}
    for ka, ca in a.terms.items():
        for kb, cb in b.terms.items():
            s, k = basis_product(ka, kb)
            if s == 0:
                continue
            c = sf.mul(s, ca, cb)
            out[k] = sf.add(out[k], c) if k in out else c
    return Form(a.chart, out)


def wedge_all(forms: Iterable[Form], chart: ChartSpec | None = None) -> Form:
    forms = list(forms)
    if not forms:
        return Form.scalar(chart, 1)
    out = forms[0]
    for f in forms[1:]:
        out = wedge(out, f)
    return out


def exterior_d(a: Form, mode: str = "full", memo: dict | None = None) -> Form:
    """``d``, ``del`` (``mode='holo'``) or ``delbar`` (``mode='antiholo'``)."""
    if mode not in ("full", "holo", "antiholo"):
        raise ValueError(f"unknown mode {mode!r}")
    n = a.chart.n
    memos = memo if memo is not None else {}
    out = {}
    for key, c in a.terms.items():
        if mode in ("full", "holo"):
            for k in range(n):
                dc = sf.partial(c, k, False, memos.setdefault(("z", k), {}))
                if sf.is_zero(dc):
                    continue
                s, nk = basis_product(((k,), ()), key)
                if s:
                    t = sf.mul(s, dc)
                    out[nk] = sf.add(out[nk], t) if nk in out else t
        if mode in ("full", "antiholo"):
            for k in range(n):
                dc = sf.partial(c, k, True, memos.setdefault(("zbar", k), {}))
                if sf.is_zero(dc):
                    continue
                s, nk = basis_product(((), (k,)), key)
                if s:
                    t = sf.mul(s, dc)
                    out[nk] = sf.add(out[nk], t) if nk in out else t
    return Form(a.chart, out)


def d(a: Form) -> Form:
    return exterior_d(a, "full")


def delbar(a: Form) -> Form:
    return exterior_d(a, "antiholo")


def del_(a: Form) -> Form:
    return exterior_d(a, "holo")


def bidegree_part(a: Form, p: int, q: int) -> Form:
    """The component of bidegree ``(p, q)``."""
    if not (0 <= p <= a.chart.n and 0 <= q <= a.chart.n):
        raise DegreeError(f"bidegree ({p},{q}) out of range for n={a.chart.n}")
    return Form(a.chart, {k: c for k, c in a.terms.items() if len(k[0]) == p and len(k[1]) == q})


def degree_part(a: Form, deg: int) -> Form:
    return Form(a.chart, {k: c for k, c in a.terms.items() if len(k[0]) + len(k[1]) == deg})


def conjugate(a: Form, memo: dict | None = None) -> Form:
    """Complex conjugate: ``conj(f dz_I dzbar_J) = conj(f) dzbar_I dz_J``.

    Reordering the conjugated basis back to holomorphic-first costs the sign
    ``(-1)^{|I||J|}``.
    """
    memo = {} if memo is None else memo
    out = {}
    for (i, j), c in a.terms.items():
        out[(j, i)] = sf.mul((-1) ** (len(i) * len(j)), sf.conj(c, memo))
    return Form(a.chart, out)


def substitute_params(a: Form, values: Mapping, memo: dict | None = None) -> Form:
    """Fix real parameters (e.g. ``{"t": 0.5}``) in every coefficient."""
    mapping = {("param", k): sf.const(v) for k, v in values.items()}
    memo = {} if memo is None else memo
    return Form(a.chart, {k: sf.substitute(c, mapping, memo) for k, c in a.terms.items()})


def coeff_at(a: Form, i, j, p, params=None) -> complex:
    """Value of the ``dz_I ^ dzbar_J`` coefficient at the point ``p``."""
    c = a.terms.get((tuple(i), tuple(j)))
    if c is None:
        return 0j
    return sf.evaluate(c, p, params)


def evaluate_form(a: Form, points, params=None, evaluator: Evaluator | None = None) -> dict:
    """All coefficients at ``points`` (shape ``(N, n)``): ``{key: array(N)}``."""
    ev = evaluator or Evaluator(points, params)
    return {k: ev(c) for k, c in a.terms.items()}


def sup_norm(a: Form, points, params=None, evaluator: Evaluator | None = None):
    """``(max |coefficient|, point, basis key)`` over the sample points.

    The zero form gives ``(0.0, None, None)``.
    """
    pts = np.asarray(points, dtype=complex)
    if pts.ndim == 1:
        pts = pts[None, :]
    ev = evaluator or Evaluator(pts, params)
    best = (0.0, None, None)
    for k, c in a.terms.items():
        vals = np.abs(ev(c))
        idx = int(np.argmax(vals))
        if vals[idx] > best[0] or best[1] is None:
            best = (float(vals[idx]), pts[idx], k)
    return best
