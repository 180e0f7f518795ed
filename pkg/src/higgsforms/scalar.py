"""Scalar fields on a complex chart.

A scalar field is an immutable expression tree over complex literals, the
chart coordinates ``z_i``, their conjugates ``zbar_i`` and optional real
parameters (such as a path parameter ``t``).  The coordinates and their
conjugates are independent symbols, so the Wirtinger derivatives
``d/dz_i`` and ``d/dzbar_i`` are plain symbolic partials.

Construction goes through smart constructors (:func:`add`, :func:`mul`, ...)
that fold constants and eliminate zeros and ones; nothing else is
simplified.  Correctness is established by evaluation, never by comparing
canonical forms.
"""

from __future__ import annotations

import re
import sys
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import ParseError, SingularityError, UnknownSymbolError

sys.setrecursionlimit(max(sys.getrecursionlimit(), 20000))

CHART_KINDS = ("torus", "cp1", "plain")


def conjugate_name(coord: str) -> str:
    """Name of the conjugate symbol of a coordinate: ``z1 -> zbar1``, ``w -> wbar``."""
    if coord.startswith("z"):
        return "zbar" + coord[1:]
    return coord + "bar"


@dataclass(frozen=True)
class ChartSpec:
    """Local holomorphic coordinates on one chart.

    ``kinds`` tags every coordinate with the factor type it belongs to
    (``torus`` or ``cp1``; ``plain`` for scratch charts).
    """

    n: int
    coord_names: tuple = ()
    kinds: tuple = ()

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("a chart needs at least one complex dimension")
        names = tuple(self.coord_names) or tuple(f"z{i + 1}" for i in range(self.n))
        kinds = tuple(self.kinds) or ("plain",) * self.n
        if len(names) != self.n or len(kinds) != self.n:
            raise ValueError("coord_names and kinds must have length n")
        if len(set(names)) != self.n:
            raise ValueError(f"coordinate names must be unique: {names}")
        bad = [k for k in kinds if k not in CHART_KINDS]
        if bad:
            raise ValueError(f"unknown coordinate kinds {bad}")
        conj_names = {conjugate_name(c) for c in names}
        if conj_names & set(names):
            raise ValueError("a coordinate name collides with a conjugate name")
        object.__setattr__(self, "coord_names", names)
        object.__setattr__(self, "kinds", kinds)

    @property
    def conj_names(self):
        return tuple(conjugate_name(c) for c in self.coord_names)

    def z(self, i: int) -> "Sym":
        return Sym("z", i, self.coord_names[i])

    def zbar(self, i: int) -> "Sym":
        return Sym("zbar", i, self.coord_names[i])


# ----------------------------------------------------------------------------
# Expression nodes


class Expr:
    """Base class of scalar-field expression nodes."""

    __slots__ = ()

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, n):
        return power(self, n)

    def __str__(self):
        return to_string(self)

    def __repr__(self):
        return f"{type(self).__name__}<{to_string(self)}>"


class Const(Expr):
    __slots__ = ("value",)

    def __init__(self, value):
        self.value = complex(value)


class Sym(Expr):
    """A coordinate (``kind='z'``), a conjugate coordinate (``'zbar'``) or a
    real parameter (``'param'``, index unused)."""

    __slots__ = ("kind", "index", "coord", "name")

    def __init__(self, kind: str, index: int, coord: str):
        self.kind = kind
        self.index = index
        self.coord = coord
        self.name = conjugate_name(coord) if kind == "zbar" else coord

    @property
    def key(self):
        if self.kind == "param":
            return ("param", self.name)
        return (self.kind, self.index)


class Add(Expr):
    __slots__ = ("args",)

    def __init__(self, args):
        self.args = tuple(args)


class Mul(Expr):
    __slots__ = ("args",)

    def __init__(self, args):
        self.args = tuple(args)


class Div(Expr):
    __slots__ = ("num", "den")

    def __init__(self, num, den):
        self.num = num
        self.den = den


class Pow(Expr):
    __slots__ = ("base", "exponent")

    def __init__(self, base, exponent: int):
        self.base = base
        self.exponent = int(exponent)


class Exp(Expr):
    __slots__ = ("arg",)

    def __init__(self, arg):
        self.arg = arg


ZERO = Const(0)
ONE = Const(1)


def param(name: str = "t") -> Sym:
    """A real parameter symbol."""
    return Sym("param", -1, name)


def const(value) -> Const:
    value = complex(value)
    if value == 0:
        return ZERO
    if value == 1:
        return ONE
    return Const(value)


def as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, float, complex, np.number)):
        return const(x)
    raise TypeError(f"cannot use {type(x).__name__} as a scalar field")


def is_zero(e: Expr) -> bool:
    """Structural zero test: true only for the literal 0."""
    return isinstance(e, Const) and e.value == 0


def is_one(e: Expr) -> bool:
    return isinstance(e, Const) and e.value == 1


def is_constant(e: Expr) -> bool:
    return isinstance(e, Const)


def add(*xs) -> Expr:
    terms = []
    c = 0j
    for x in xs:
        x = as_expr(x)
        parts = x.args if isinstance(x, Add) else (x,)
        for p in parts:
            if isinstance(p, Const):
                c += p.value
            else:
                terms.append(p)
    if c != 0:
        terms.insert(0, const(c))
    if not terms:
        return ZERO
    if len(terms) == 1:
        return terms[0]
    return Add(terms)


def mul(*xs) -> Expr:
    factors = []
    c = 1 + 0j
    for x in xs:
        x = as_expr(x)
        parts = x.args if isinstance(x, Mul) else (x,)
        for p in parts:
            if isinstance(p, Const):
                c *= p.value
            else:
                factors.append(p)
    if c == 0:
        return ZERO
    if c != 1:
        factors.insert(0, const(c))
    if not factors:
        return ONE
    if len(factors) == 1:
        return factors[0]
    return Mul(factors)


def neg(x) -> Expr:
    return mul(-1, x)


def sub(a, b) -> Expr:
    if a is b:
        return ZERO
    return add(a, neg(b))


def div(a, b) -> Expr:
    a, b = as_expr(a), as_expr(b)
    if is_one(b):
        return a
    if isinstance(b, Const) and b.value != 0:
        return mul(1 / b.value, a)
    if is_zero(a) and not is_zero(b):
        return ZERO
    return Div(a, b)


def power(b, n: int) -> Expr:
    if int(n) != n:
        raise ValueError("only integer powers are supported")
    n = int(n)
    b = as_expr(b)
    if n == 0:
        return ONE
    if n == 1:
        return b
    if isinstance(b, Const) and (b.value != 0 or n > 0):
        return const(b.value**n)
    return Pow(b, n)


def exp(a) -> Expr:
    a = as_expr(a)
    if isinstance(a, Const):
        return const(np.exp(a.value))
    return Exp(a)


# ----------------------------------------------------------------------------
# Tree transforms


def _transform(e: Expr, leaf, memo: dict) -> Expr:
    """Rebuild ``e`` bottom-up, mapping leaves through ``leaf``."""
    hit = memo.get(id(e))
    if hit is not None and hit[0] is e:
        return hit[1]
    if isinstance(e, (Const, Sym)):
        out = leaf(e)
    elif isinstance(e, Add):
        out = add(*(_transform(a, leaf, memo) for a in e.args))
    elif isinstance(e, Mul):
        out = mul(*(_transform(a, leaf, memo) for a in e.args))
    elif isinstance(e, Div):
        out = div(_transform(e.num, leaf, memo), _transform(e.den, leaf, memo))
    elif isinstance(e, Pow):
        out = power(_transform(e.base, leaf, memo), e.exponent)
    elif isinstance(e, Exp):
        out = exp(_transform(e.arg, leaf, memo))
    else:
        raise TypeError(f"unknown node {type(e).__name__}")
    memo[id(e)] = (e, out)
    return out


def _conj_leaf(e):
    if isinstance(e, Const):
        return const(e.value.conjugate())
    if e.kind == "z":
        return Sym("zbar", e.index, e.coord)
    if e.kind == "zbar":
        return Sym("z", e.index, e.coord)
    return e


def conj(e, memo: dict | None = None) -> Expr:
    """Complex conjugate as a structural transform: ``z_i <-> zbar_i`` and
    literals conjugated.  Parameters are real and map to themselves."""
    return _transform(as_expr(e), _conj_leaf, {} if memo is None else memo)


def substitute(e, mapping: Mapping, memo: dict | None = None) -> Expr:
    """Replace symbols by expressions.

    ``mapping`` is keyed by :attr:`Sym.key`, e.g. ``{("z", 0): w, ("param",
    "t"): const(0.5)}``.  Unmapped symbols are kept.
    """
    mapping = {k: as_expr(v) for k, v in mapping.items()}

    def leaf(s):
        if isinstance(s, Sym):
            return mapping.get(s.key, s)
        return s

    return _transform(as_expr(e), leaf, {} if memo is None else memo)


def free_symbols(e: Expr) -> set:
    """Keys of all symbols occurring in ``e``."""
    seen = set()
    out = set()
    stack = [e]
    while stack:
        x = stack.pop()
        if id(x) in seen:
            continue
        seen.add(id(x))
        if isinstance(x, Sym):
            out.add(x.key)
        elif isinstance(x, (Add, Mul)):
            stack.extend(x.args)
        elif isinstance(x, Div):
            stack.extend((x.num, x.den))
        elif isinstance(x, Pow):
            stack.append(x.base)
        elif isinstance(x, Exp):
            stack.append(x.arg)
    return out


def node_count(e: Expr) -> int:
    """Number of distinct nodes (shared subtrees counted once)."""
    seen = set()
    stack = [e]
    while stack:
        x = stack.pop()
        if id(x) in seen:
            continue
        seen.add(id(x))
        if isinstance(x, (Add, Mul)):
            stack.extend(x.args)
        elif isinstance(x, Div):
            stack.extend((x.num, x.den))
        elif isinstance(x, Pow):
            stack.append(x.base)
        elif isinstance(x, Exp):
            stack.append(x.arg)
    return len(seen)


# ----------------------------------------------------------------------------
# Differentiation


def diff(e: Expr, key, memo: dict | None = None) -> Expr:
    """Exact partial derivative with respect to the symbol ``key``."""
    if memo is None:
        memo = {}
    hit = memo.get((id(e), key))
    if hit is not None and hit[0] is e:
        return hit[1]
    if isinstance(e, Const):
        out = ZERO
    elif isinstance(e, Sym):
        out = ONE if e.key == key else ZERO
    elif isinstance(e, Add):
        out = add(*(diff(a, key, memo) for a in e.args))
    elif isinstance(e, Mul):
        terms = []
        for k, a in enumerate(e.args):
            da = diff(a, key, memo)
            if not is_zero(da):
                terms.append(mul(*e.args[:k], da, *e.args[k + 1:]))
        out = add(*terms)
    elif isinstance(e, Div):
        dn = diff(e.num, key, memo)
        dd = diff(e.den, key, memo)
        first = div(dn, e.den)
        if is_zero(dd):
            out = first
        else:
            out = sub(first, div(mul(e.num, dd), power(e.den, 2)))
    elif isinstance(e, Pow):
        db = diff(e.base, key, memo)
        out = mul(e.exponent, power(e.base, e.exponent - 1), db)
    elif isinstance(e, Exp):
        out = mul(e, diff(e.arg, key, memo))
    else:
        raise TypeError(f"unknown node {type(e).__name__}")
    memo[(id(e), key)] = (e, out)
    return out


def partial(f, i: int, anti: bool = False, memo: dict | None = None) -> Expr:
    """Wirtinger derivative ``d/dz_i`` (or ``d/dzbar_i`` when ``anti``)."""
    return diff(as_expr(f), ("zbar" if anti else "z", i), memo)


def partial_param(f, name: str = "t", memo: dict | None = None) -> Expr:
    return diff(as_expr(f), ("param", name), memo)


# ----------------------------------------------------------------------------
# Evaluation


class Evaluator:
    """Vectorised evaluation of many fields at a shared set of points.

    Subtrees shared between fields are evaluated once.  ``points`` is an
    array of shape ``(n,)`` or ``(N, n)``; results have shape ``(N,)``.
    """

    def __init__(self, points, params: Mapping | None = None):
        pts = np.asarray(points, dtype=complex)
        if pts.ndim == 1:
            pts = pts[None, :]
        self.points = pts
        self.size = pts.shape[0]
        self._z = pts.T
        self._zbar = np.conj(pts).T
        self.params = dict(params or {})
        self._memo = {}

    def __call__(self, e: Expr) -> np.ndarray:
        v = self._ev(as_expr(e))
        return np.broadcast_to(np.asarray(v, dtype=complex), (self.size,))

    def _ev(self, e):
        hit = self._memo.get(id(e))
        if hit is not None and hit[0] is e:
            return hit[1]
        if isinstance(e, Const):
            out = e.value
        elif isinstance(e, Sym):
            if e.kind == "z":
                out = self._coord(self._z, e)
            elif e.kind == "zbar":
                out = self._coord(self._zbar, e)
            else:
                if e.name not in self.params:
                    raise KeyError(f"no value supplied for parameter {e.name!r}")
                out = self.params[e.name]
        elif isinstance(e, Add):
            out = self._ev(e.args[0])
            for a in e.args[1:]:
                out = out + self._ev(a)
        elif isinstance(e, Mul):
            out = self._ev(e.args[0])
            for a in e.args[1:]:
                out = out * self._ev(a)
        elif isinstance(e, Div):
            den = self._ev(e.den)
            if np.any(np.asarray(den) == 0):
                raise SingularityError(f"division by zero evaluating {to_string(e.den)}")
            out = self._ev(e.num) / den
        elif isinstance(e, Pow):
            b = self._ev(e.base)
            if e.exponent < 0:
                if np.any(np.asarray(b) == 0):
                    raise SingularityError(f"zero raised to a negative power in {to_string(e)}")
                out = 1 / b**(-e.exponent)
            else:
                out = b**e.exponent
        elif isinstance(e, Exp):
            out = np.exp(self._ev(e.arg))
        else:
            raise TypeError(f"unknown node {type(e).__name__}")
        self._memo[id(e)] = (e, out)
        return out

    def _coord(self, arr, s):
        if s.index >= arr.shape[0]:
            raise IndexError(f"symbol {s.name} needs coordinate {s.index}, point has {arr.shape[0]}")
        return arr[s.index]


def evaluate(f, p, params: Mapping | None = None):
    """Evaluate ``f`` at a point (returns complex) or at ``N`` points
    (array of shape ``(N, n)``, returns an array)."""
    pts = np.asarray(p, dtype=complex)
    out = Evaluator(pts, params)(f)
    if pts.ndim == 1:
        return complex(out[0])
    return np.array(out)


# alias matching the operation name used in the docs
eval_field = evaluate


# ----------------------------------------------------------------------------
# Printing


def _fmt_real(x: float) -> str:
    return repr(float(x))


def _fmt_const(c: complex) -> str:
    re_, im = c.real, c.imag
    if im == 0:
        s = _fmt_real(re_)
        return f"({s})" if s.startswith("-") else s
    ims = _fmt_real(abs(im)) + "i"
    if re_ == 0:
        return f"(-{ims})" if im < 0 else ims
    sign = "-" if im < 0 else "+"
    return f"({_fmt_real(re_)}{sign}{ims})"


def to_string(e: Expr) -> str:
    """Render a parseable text form."""
    if isinstance(e, Const):
        return _fmt_const(e.value)
    if isinstance(e, Sym):
        return e.name
    if isinstance(e, Add):
        return "(" + " + ".join(to_string(a) for a in e.args) + ")"
    if isinstance(e, Mul):
        return "(" + "*".join(to_string(a) for a in e.args) + ")"
    if isinstance(e, Div):
        return f"({to_string(e.num)}/{to_string(e.den)})"
    if isinstance(e, Pow):
        base = to_string(e.base)
        if isinstance(e.base, Pow) or (isinstance(e.base, Const) and not base.startswith("(")):
            base = f"({base})"
        n = e.exponent
        return f"{base}^{n}" if n >= 0 else f"{base}^({n})"
    if isinstance(e, Exp):
        return f"exp({to_string(e.arg)})"
    raise TypeError(f"unknown node {type(e).__name__}")


# ----------------------------------------------------------------------------
# Parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?i?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)

FUNCTIONS = {"exp": exp, "conj": conj}


@dataclass
class _Tok:
    kind: str
    text: str
    pos: int


def _tokenize(text: str):
    toks = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            start = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ParseError(f"unexpected character {text[start]!r}", start, text)
        kind = m.lastgroup
        toks.append(_Tok(kind, m.group(kind), m.start(kind)))
        pos = m.end()
    toks.append(_Tok("end", "", len(text)))
    return toks


class _Parser:
    def __init__(self, text, chart, params):
        self.text = text
        self.toks = _tokenize(text)
        self.k = 0
        self.symbols = {}
        for i, name in enumerate(chart.coord_names):
            self.symbols[name] = chart.z(i)
            self.symbols[conjugate_name(name)] = chart.zbar(i)
        for p in params:
            if p in self.symbols or p in FUNCTIONS:
                raise ValueError(f"parameter name {p!r} collides with a coordinate or function")
            self.symbols[p] = param(p)

    @property
    def tok(self):
        return self.toks[self.k]

    def take(self):
        t = self.toks[self.k]
        self.k += 1
        return t

    def expect(self, text):
        t = self.take()
        if t.text != text:
            found = repr(t.text) if t.kind != "end" else "end of input"
            raise ParseError(f"expected {text!r}, found {found}", t.pos, self.text)
        return t

    def parse(self):
        e = self.expr()
        if self.tok.kind != "end":
            raise ParseError(f"unexpected token {self.tok.text!r}", self.tok.pos, self.text)
        return e

    def expr(self):
        e = self.term()
        while self.tok.text in ("+", "-") and self.tok.kind == "op":
            op = self.take().text
            rhs = self.term()
            e = add(e, rhs) if op == "+" else sub(e, rhs)
        return e

    def term(self):
        e = self.unary()
        while self.tok.text in ("*", "/") and self.tok.kind == "op":
            op = self.take().text
            rhs = self.unary()
            e = mul(e, rhs) if op == "*" else div(e, rhs)
        return e

    def unary(self):
        if self.tok.kind == "op" and self.tok.text in ("-", "+"):
            op = self.take().text
            e = self.unary()
            return neg(e) if op == "-" else e
        return self.power()

    def power(self):
        b = self.base()
        if self.tok.text == "^":
            self.take()
            n = self.integer()
            b = power(b, n)
            if self.tok.text == "^":
                raise ParseError("chained powers need parentheses", self.tok.pos, self.text)
        return b

    def integer(self):
        paren = False
        if self.tok.text == "(":
            paren = True
            self.take()
        sign = 1
        if self.tok.text == "-":
            self.take()
            sign = -1
        t = self.take()
        if t.kind != "num" or not t.text.isdigit():
            raise ParseError("exponent must be an integer", t.pos, self.text)
        if paren:
            self.expect(")")
        return sign * int(t.text)

    def base(self):
        t = self.take()
        if t.kind == "num":
            if t.text.endswith("i"):
                return const(complex(0, float(t.text[:-1])))
            return const(float(t.text))
        if t.kind == "ident":
            if t.text in FUNCTIONS and self.tok.text == "(":
                self.take()
                inner = self.expr()
                self.expect(")")
                return FUNCTIONS[t.text](inner)
            if t.text in self.symbols:
                return self.symbols[t.text]
            raise UnknownSymbolError(f"unknown symbol {t.text!r}", t.pos, self.text)
        if t.text == "(":
            e = self.expr()
            self.expect(")")
            return e
        found = repr(t.text) if t.kind != "end" else "end of input"
        raise ParseError(f"unexpected {found}", t.pos, self.text)


def parse_expr(text: str, chart: ChartSpec, params: Sequence[str] = ()) -> Expr:
    """Parse an expression over ``chart`` (and optional real parameters).

    Grammar (with a unary sign allowed in front of any factor)::

        expr   := term (('+'|'-') term)*
        term   := factor (('*'|'/') factor)*
        factor := base ('^' integer)?
        base   := number | symbol | '(' expr ')' | func '(' expr ')'
        func   := 'exp' | 'conj'

    Numbers are decimals with an optional ``i`` suffix (``2+3i``).
    Division by zero is not a parse error; it surfaces at evaluation.
    """
    if not isinstance(text, str):
        raise ParseError(f"expected an expression string, got {type(text).__name__}")
    return _Parser(text, chart, tuple(params)).parse()


def random_points(n: int, count: int, seed: int = 0, radius: float = 1.0) -> np.ndarray:
    """Seeded random points with real and imaginary parts in ``[-radius, radius]``."""
    rng = np.random.default_rng(seed)
    return radius * (rng.uniform(-1, 1, (count, n)) + 1j * rng.uniform(-1, 1, (count, n)))
