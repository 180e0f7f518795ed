"""Square matrices of differential forms (End(E)-valued forms in a frame).

Products wedge the entries: ``(A B)_ik = sum_j A_ij ^ B_jk``.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from . import forms as fm
from . import scalar as sf
from .errors import ChartMismatchError, DegreeError, SingularityError
from .forms import Form
from .scalar import ChartSpec, Evaluator, Expr


class MatrixForm:
    """An ``r x r`` matrix whose entries are forms on one chart."""

    __slots__ = ("chart", "entries")

    def __init__(self, chart: ChartSpec, entries: Sequence[Sequence[Form]]):
        rows = tuple(tuple(row) for row in entries)
        r = len(rows)
        if r == 0 or any(len(row) != r for row in rows):
            raise ValueError("a MatrixForm must be square and non-empty")
        for row in rows:
            for e in row:
                if not isinstance(e, Form):
                    raise TypeError(f"entries must be Form, got {type(e).__name__}")
                if e.chart != chart:
                    raise ChartMismatchError("all entries must share the chart")
        self.chart = chart
        self.entries = rows

    @property
    def rank(self) -> int:
        return len(self.entries)

    def __getitem__(self, ij):
        i, j = ij
        return self.entries[i][j]

    # -- constructors
    @classmethod
    def zeros(cls, chart, r):
        z = Form.zero(chart)
        return cls(chart, [[z] * r for _ in range(r)])

    @classmethod
    def identity(cls, chart, r):
        return cls.from_scalars(chart, [[1 if i == j else 0 for j in range(r)] for i in range(r)])

    @classmethod
    def from_scalars(cls, chart, rows):
        """Degree-0 matrix from scalar fields (or numbers)."""
        return cls(chart, [[Form.scalar(chart, sf.as_expr(x)) for x in row] for row in rows])

    @classmethod
    def from_constant(cls, chart, matrix, form: Form | None = None):
        """``matrix (x) form`` for a constant numeric matrix; ``form`` defaults to 1."""
        m = np.asarray(matrix, dtype=complex)
        base = form if form is not None else Form.scalar(chart, 1)
        return cls(chart, [[base.scale(sf.const(m[i, j])) for j in range(m.shape[1])] for i in range(m.shape[0])])

    # -- algebra
    def map(self, fn: Callable[[Form], Form]) -> "MatrixForm":
        return MatrixForm(self.chart, [[fn(e) for e in row] for row in self.entries])

    def _check(self, other):
        if not isinstance(other, MatrixForm):
            raise TypeError("expected a MatrixForm")
        if other.chart != self.chart:
            raise ChartMismatchError("matrix forms live on different charts")
        if other.rank != self.rank:
            raise ValueError(f"rank mismatch: {self.rank} vs {other.rank}")

    def __add__(self, other):
        self._check(other)
        return MatrixForm(self.chart, [[a + b for a, b in zip(ra, rb)] for ra, rb in zip(self.entries, other.entries)])

    def __sub__(self, other):
        self._check(other)
        return MatrixForm(self.chart, [[a - b for a, b in zip(ra, rb)] for ra, rb in zip(self.entries, other.entries)])

    def __neg__(self):
        return self.map(lambda e: -e)

    def scale(self, f) -> "MatrixForm":
        f = sf.as_expr(f)
        return self.map(lambda e: e.scale(f))

    def __mul__(self, other):
        if isinstance(other, MatrixForm):
            return mat_mul_wedge(self, other)
        return self.scale(other)

    def __rmul__(self, other):
        return self.scale(other)

    def __matmul__(self, other):
        return mat_mul_wedge(self, other)

    def transpose(self) -> "MatrixForm":
        r = self.rank
        return MatrixForm(self.chart, [[self.entries[j][i] for j in range(r)] for i in range(r)])

    def conjugate_transpose(self, memo: dict | None = None) -> "MatrixForm":
        memo = {} if memo is None else memo
        r = self.rank
        return MatrixForm(self.chart, [[fm.conjugate(self.entries[j][i], memo) for j in range(r)] for i in range(r)])

    def is_zero(self) -> bool:
        return all(e.is_zero() for row in self.entries for e in row)

    def degrees(self) -> set:
        out = set()
        for row in self.entries:
            for e in row:
                out |= e.degrees()
        return out

    def bidegrees(self) -> set:
        out = set()
        for row in self.entries:
            for e in row:
                out |= e.bidegrees()
        return out

    def degree(self):
        """Degree of a homogeneous matrix form (``None`` if zero)."""
        ds = self.degrees()
        if not ds:
            return None
        if len(ds) > 1:
            raise DegreeError(f"matrix form is not homogeneous (degrees {sorted(ds)})")
        return ds.pop()

    def __repr__(self):
        return f"MatrixForm(rank={self.rank}, degrees={sorted(self.degrees())})"


def mat_mul_wedge(a: MatrixForm, b: MatrixForm) -> MatrixForm:
    a._check(b)
    r = a.rank
    out = []
    for i in range(r):
        row = []
        for k in range(r):
            acc = Form.zero(a.chart)
            for j in range(r):
                x, y = a.entries[i][j], b.entries[j][k]
                if x.is_zero() or y.is_zero():
                    continue
                acc = acc + fm.wedge(x, y)
            row.append(acc)
        out.append(row)
    return MatrixForm(a.chart, out)


def mat_power(a: MatrixForm, m: int) -> MatrixForm:
    if m < 0:
        raise ValueError("negative power")
    if m == 0:
        return MatrixForm.identity(a.chart, a.rank)
    out = a
    for _ in range(m - 1):
        out = mat_mul_wedge(out, a)
    return out


def trace(a: MatrixForm) -> Form:
    acc = Form.zero(a.chart)
    for i in range(a.rank):
        acc = acc + a.entries[i][i]
    return acc


def supercommutator(a: MatrixForm, b: MatrixForm) -> MatrixForm:
    """``[A, B] = AB - (-1)^{|A||B|} BA`` for homogeneous ``A`` and ``B``."""
    da, db = a.degree(), b.degree()
    ab = mat_mul_wedge(a, b)
    if da is None or db is None:
        return ab
    ba = mat_mul_wedge(b, a)
    if (da * db) % 2:
        return ab + ba
    return ab - ba


def kron(a: MatrixForm, b: MatrixForm) -> MatrixForm:
    """Kronecker product, lexicographic: row ``(i, k) -> i * rank(b) + k``.

    Entries are ``a_ij ^ b_kl``.
    """
    if a.chart != b.chart:
        raise ChartMismatchError("kron of matrix forms on different charts")
    ra, rb = a.rank, b.rank
    rows = []
    for i in range(ra):
        for k in range(rb):
            row = []
            for j in range(ra):
                for l in range(rb):
                    x, y = a.entries[i][j], b.entries[k][l]
                    row.append(Form.zero(a.chart) if x.is_zero() or y.is_zero() else fm.wedge(x, y))
            rows.append(row)
    return MatrixForm(a.chart, rows)


def block(top_left: MatrixForm, bottom_right: MatrixForm, top_right: Sequence[Sequence[Form]] | None = None) -> MatrixForm:
    """Upper block-triangular ``[[P, S], [0, Q]]`` (block diagonal when ``S`` is None)."""
    if top_left.chart != bottom_right.chart:
        raise ChartMismatchError("blocks on different charts")
    chart = top_left.chart
    p, q = top_left.rank, bottom_right.rank
    z = Form.zero(chart)
    if top_right is None:
        top_right = [[z] * q for _ in range(p)]
    if len(top_right) != p or any(len(r) != q for r in top_right):
        raise ValueError(f"off-diagonal block must be {p}x{q}")
    rows = [list(top_left.entries[i]) + list(top_right[i]) for i in range(p)]
    rows += [[z] * p + list(bottom_right.entries[i]) for i in range(q)]
    return MatrixForm(chart, rows)


def block_diag(a: MatrixForm, b: MatrixForm) -> MatrixForm:
    return block(a, b)


def bidegree_part(a: MatrixForm, p: int, q: int) -> MatrixForm:
    return a.map(lambda e: fm.bidegree_part(e, p, q))


def exterior_d(a: MatrixForm, mode: str = "full") -> MatrixForm:
    memo = {}
    return a.map(lambda e: fm.exterior_d(e, mode, memo))


def substitute_params(a: MatrixForm, values) -> MatrixForm:
    memo = {}
    return a.map(lambda e: fm.substitute_params(e, values, memo))


def evaluate_matrix(a: MatrixForm, points, params=None) -> dict:
    """``{basis key: array (N, r, r)}`` of coefficient values."""
    pts = np.asarray(points, dtype=complex)
    if pts.ndim == 1:
        pts = pts[None, :]
    ev = Evaluator(pts, params)
    r = a.rank
    out = {}
    for i in range(r):
        for j in range(r):
            for k, c in a.entries[i][j].terms.items():
                arr = out.setdefault(k, np.zeros((pts.shape[0], r, r), dtype=complex))
                arr[:, i, j] = ev(c)
    return out


def sup_norm(a: MatrixForm, points, params=None):
    """``(max |coefficient|, point, (i, j, key))`` over all entries."""
    pts = np.asarray(points, dtype=complex)
    if pts.ndim == 1:
        pts = pts[None, :]
    ev = Evaluator(pts, params)
    best = (0.0, None, None)
    for i, row in enumerate(a.entries):
        for j, e in enumerate(row):
            v, p, k = fm.sup_norm(e, pts, evaluator=ev)
            if p is not None and (v > best[0] or best[1] is None):
                best = (v, p, (i, j, k))
    return best


# ----------------------------------------------------------------------------
# Symbolic linear algebra on matrices of scalar fields


def _det(m, rows: tuple, cols: tuple, memo: dict) -> Expr:
    key = (rows, cols)
    if key in memo:
        return memo[key]
    if len(rows) == 1:
        out = m[rows[0]][cols[0]]
    else:
        r0, rest = rows[0], rows[1:]
        terms = []
        for pos, c in enumerate(cols):
            entry = m[r0][c]
            if sf.is_zero(entry):
                continue
            minor = _det(m, rest, cols[:pos] + cols[pos + 1:], memo)
            terms.append(sf.mul((-1) ** pos, entry, minor))
        out = sf.add(*terms)
    memo[key] = out
    return out


def determinant(m: Sequence[Sequence[Expr]]) -> Expr:
    r = len(m)
    return _det([[sf.as_expr(x) for x in row] for row in m], tuple(range(r)), tuple(range(r)), {})


def inverse(m: Sequence[Sequence[Expr]]) -> list:
    """Symbolic inverse ``adj(M) / det(M)``; numeric when ``M`` is constant.

    Raises :class:`SingularityError` for a constant singular matrix.
    """
    r = len(m)
    m = [[sf.as_expr(x) for x in row] for row in m]
    if all(sf.is_constant(x) for row in m for x in row):
        num = np.array([[x.value for x in row] for row in m])
        if abs(np.linalg.det(num)) < 1e-300 or np.linalg.cond(num) > 1e14:
            raise SingularityError("constant matrix is singular")
        inv = np.linalg.inv(num)
        return [[sf.const(inv[i, j]) for j in range(r)] for i in range(r)]
    memo = {}
    full = tuple(range(r))
    det = _det(m, full, full, memo)
    if sf.is_zero(det):
        raise SingularityError("matrix has structurally zero determinant")
    if r == 1:
        return [[sf.div(1, det)]]
    out = [[None] * r for _ in range(r)]
    for i in range(r):
        for j in range(r):
            # adj(M)_ij = (-1)^{i+j} det(M without row j, column i)
            rows = full[:j] + full[j + 1:]
            cols = full[:i] + full[i + 1:]
            minor = _det(m, rows, cols, memo)
            out[i][j] = sf.div(sf.mul((-1) ** (i + j), minor), det)
    return out


def scalar_matmul(a, b) -> list:
    r = len(a)
    return [[sf.add(*(sf.mul(a[i][k], b[k][j]) for k in range(r))) for j in range(r)] for i in range(r)]
