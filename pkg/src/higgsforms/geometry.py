"""Model manifolds: complex tori, the affine chart of CP^1 and their products.

Each complex coordinate carries its own two-dimensional sample grid with
integration weights (real area elements ``dx dy``); a manifold's grid is the
product of the coordinate grids.  Integrals of top-degree forms are weighted
sums over that grid.

* torus coordinate: a uniform ``m x m`` grid on the fundamental domain
  ``{a w1 + b w2 : 0 <= a, b < 1}``, equal weights (periodic rectangle rule);
* CP^1 coordinate: the substitution ``u = |z|^2 / (1 + |z|^2)``, midpoint rule
  in ``u`` and uniform angles.  The point at infinity is ``u = 1`` and has
  measure zero, so the single affine chart suffices for integration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import forms as fm
from . import scalar as sf
from .errors import ChartMismatchError, DegreeError
from .forms import Form
from .matrices import MatrixForm
from .scalar import ChartSpec, Evaluator, Expr

DEFAULT_RESOLUTION = 64


@dataclass(frozen=True)
class Factor:
    """One factor of a product manifold, occupying coordinates ``offset ..
    offset + dim - 1`` of the product chart."""

    kind: str
    offset: int
    dim: int
    periods: tuple = ()


def _coord_grid_torus(w1: complex, w2: complex, m: int):
    a = np.arange(m) / m
    A, B = np.meshgrid(a, a, indexing="ij")
    pts = (A * w1 + B * w2).ravel()
    area = abs((np.conj(w1) * w2).imag)
    return pts.astype(complex), np.full(pts.shape, area / m**2)


def _coord_grid_cp1(m: int):
    u = (np.arange(m) + 0.5) / m
    phi = 2 * np.pi * np.arange(m) / m
    U, PHI = np.meshgrid(u, phi, indexing="ij")
    r = np.sqrt(U / (1 - U))
    pts = (r * np.exp(1j * PHI)).ravel()
    w = (1.0 / (2 * (1 - U) ** 2) * (1.0 / m) * (2 * np.pi / m)).ravel()
    return pts.astype(complex), w


class ModelManifold:
    """A charted model manifold with a product sample grid."""

    def __init__(self, chart: ChartSpec, factors: Sequence[Factor], resolution: int = DEFAULT_RESOLUTION):
        if resolution < 1:
            raise ValueError("resolution must be positive")
        self.chart = chart
        self.factors = tuple(factors)
        self.resolution = int(resolution)
        self._coord = []
        for f in self.factors:
            for k in range(f.dim):
                if f.kind == "torus":
                    w1, w2 = f.periods[k]
                    self._coord.append(_coord_grid_torus(w1, w2, self.resolution))
                else:
                    self._coord.append(_coord_grid_cp1(self.resolution))
        if len(self._coord) != chart.n:
            raise ValueError("factors do not cover the chart")
        self._grid = None
        self._weights = None

    @property
    def n(self):
        return self.chart.n

    @property
    def size(self) -> int:
        return int(np.prod([len(p) for p, _ in self._coord]))

    def with_resolution(self, resolution: int) -> "ModelManifold":
        return ModelManifold(self.chart, self.factors, resolution)

    def _gather(self, flat_idx):
        shape = tuple(len(p) for p, _ in self._coord)
        idx = np.unravel_index(flat_idx, shape)
        pts = np.stack([self._coord[c][0][idx[c]] for c in range(self.n)], axis=1)
        w = np.ones(len(flat_idx))
        for c in range(self.n):
            w = w * self._coord[c][1][idx[c]]
        return pts, w

    @property
    def grid(self) -> np.ndarray:
        """All grid points, shape ``(N, n)``."""
        if self._grid is None:
            self._grid, self._weights = self._gather(np.arange(self.size))
        return self._grid

    @property
    def weights(self) -> np.ndarray:
        if self._weights is None:
            self.grid
        return self._weights

    def chunks(self, chunk: int = 1 << 16):
        """Iterate ``(points, weights)`` over the grid without materialising it."""
        N = self.size
        for start in range(0, N, chunk):
            yield self._gather(np.arange(start, min(N, start + chunk)))

    def sample_points(self, count: int = 100, seed: int = 0) -> np.ndarray:
        """``count`` distinct grid points chosen with a seeded generator."""
        rng = np.random.default_rng(seed)
        N = self.size
        if count >= N:
            return self.grid.copy()
        idx = rng.choice(N, size=count, replace=False)
        return self._gather(np.sort(idx))[0]

    def factor_manifold(self, index: int) -> "ModelManifold":
        f = self.factors[index]
        names = self.chart.coord_names[f.offset:f.offset + f.dim]
        chart = ChartSpec(f.dim, names, (f.kind,) * f.dim)
        return ModelManifold(chart, [Factor(f.kind, 0, f.dim, f.periods)], self.resolution)

    def __repr__(self):
        desc = " x ".join(f"{f.kind}^{f.dim}" if f.dim > 1 else f.kind for f in self.factors)
        return f"ModelManifold({desc}, resolution={self.resolution})"


def make_torus(n: int = 1, periods=None, names=None, resolution: int = DEFAULT_RESOLUTION) -> ModelManifold:
    """Product of ``n`` one-dimensional complex tori ``C / (w1 Z + w2 Z)``.

    ``periods`` is a list of ``n`` pairs ``(w1, w2)``; the default is the square
    lattice ``(1, i)`` in every coordinate.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if periods is None:
        periods = [(1, 1j)] * n
    periods = tuple((complex(a), complex(b)) for a, b in periods)
    if len(periods) != n:
        raise ValueError(f"need {n} period pairs")
    for w1, w2 in periods:
        if abs((np.conj(w1) * w2).imag) < 1e-14:
            raise ValueError(f"degenerate periods {w1}, {w2}")
    names = tuple(names) if names else tuple(f"z{i + 1}" for i in range(n))
    chart = ChartSpec(n, names, ("torus",) * n)
    return ModelManifold(chart, [Factor("torus", 0, n, periods)], resolution)


def make_cp1(name: str = "z1", resolution: int = DEFAULT_RESOLUTION) -> ModelManifold:
    chart = ChartSpec(1, (name,), ("cp1",))
    return ModelManifold(chart, [Factor("cp1", 0, 1)], resolution)


def product(m1: ModelManifold, m2: ModelManifold) -> ModelManifold:
    """Cartesian product; coordinates are concatenated (renumbered
    ``z1 .. zN`` if the names collide)."""
    names = m1.chart.coord_names + m2.chart.coord_names
    n = len(names)
    try:
        chart = ChartSpec(n, names, m1.chart.kinds + m2.chart.kinds)
    except ValueError:
        chart = ChartSpec(n, tuple(f"z{i + 1}" for i in range(n)), m1.chart.kinds + m2.chart.kinds)
    factors = list(m1.factors) + [Factor(f.kind, f.offset + m1.n, f.dim, f.periods) for f in m2.factors]
    return ModelManifold(chart, factors, min(m1.resolution, m2.resolution))


# ----------------------------------------------------------------------------
# Holomorphic maps and pullback


class HoloMap:
    """A holomorphic map given by target coordinates as fields of source coordinates."""

    def __init__(self, source: ChartSpec, target: ChartSpec, components: Sequence):
        comps = [sf.as_expr(c) for c in components]
        if len(comps) != target.n:
            raise ValueError(f"need {target.n} components, got {len(comps)}")
        for c in comps:
            for kind, idx in sf.free_symbols(c):
                if kind != "z":
                    raise ValueError(f"map component {sf.to_string(c)} is not holomorphic")
                if idx >= source.n:
                    raise ChartMismatchError("map component uses a coordinate outside the source chart")
        self.source = source
        self.target = target
        self.components = comps
        memos = [{} for _ in range(source.n)]
        self._jac = [[sf.partial(c, s, False, memos[s]) for s in range(source.n)] for c in comps]
        cmemo = {}
        self._conj_components = [sf.conj(c, cmemo) for c in comps]
        self._conj_jac = [[sf.conj(x, cmemo) for x in row] for row in self._jac]

    @classmethod
    def identity(cls, chart):
        return cls(chart, chart, [chart.z(i) for i in range(chart.n)])

    def substitute(self, e: Expr, memo: dict | None = None) -> Expr:
        mapping = {}
        for t in range(self.target.n):
            mapping[("z", t)] = self.components[t]
            mapping[("zbar", t)] = self._conj_components[t]
        return sf.substitute(e, mapping, memo)

    def pull_dz(self, t: int) -> Form:
        return Form(self.source, {((s,), ()): self._jac[t][s] for s in range(self.source.n)})

    def pull_dzbar(self, t: int) -> Form:
        return Form(self.source, {((), (s,)): self._conj_jac[t][s] for s in range(self.source.n)})


def projection(M: ModelManifold, index: int) -> HoloMap:
    """Projection of ``M`` onto its ``index``-th factor."""
    f = M.factors[index]
    target = M.factor_manifold(index).chart
    return HoloMap(M.chart, target, [M.chart.z(f.offset + k) for k in range(f.dim)])


def inclusion(M: ModelManifold, index: int, base_point=None) -> HoloMap:
    """Inclusion of the ``index``-th factor as the slice through ``base_point``."""
    f = M.factors[index]
    source = M.factor_manifold(index).chart
    base = np.zeros(M.n, dtype=complex) if base_point is None else np.asarray(base_point, dtype=complex)
    comps = []
    for c in range(M.n):
        if f.offset <= c < f.offset + f.dim:
            comps.append(source.z(c - f.offset))
        else:
            comps.append(sf.const(base[c]))
    return HoloMap(source, M.chart, comps)


def pullback(f: HoloMap, a: Form, memo: dict | None = None) -> Form:
    """``f^* a``: substitute coordinates and pull back differentials."""
    if a.chart != f.target:
        raise ChartMismatchError("form does not live on the target chart of the map")
    memo = {} if memo is None else memo
    acc = Form.zero(f.source)
    for (I, J), c in a.terms.items():
        term = Form.scalar(f.source, f.substitute(c, memo))
        for t in I:
            term = fm.wedge(term, f.pull_dz(t))
        for t in J:
            term = fm.wedge(term, f.pull_dzbar(t))
        acc = acc + term
    return acc


def pullback_matrix(f: HoloMap, M: MatrixForm) -> MatrixForm:
    memo = {}
    return MatrixForm(f.source, [[pullback(f, e, memo) for e in row] for row in M.entries])


def pullback_scalars(f: HoloMap, rows) -> list:
    memo = {}
    return [[f.substitute(sf.as_expr(x), memo) for x in row] for row in rows]


# ----------------------------------------------------------------------------
# Integration


def orientation_factor(n: int) -> complex:
    """``dz_1..dz_n dzbar_1..dzbar_n = factor * dx_1 dy_1 ... dx_n dy_n``."""
    return (-1) ** (n * (n - 1) // 2) * (-2j) ** n


def integrate(a: Form, M: ModelManifold, chunk: int = 1 << 16) -> complex:
    """Integral of a top-degree form as a weighted sum over the grid."""
    if a.chart != M.chart:
        raise ChartMismatchError("form and manifold charts differ")
    n = M.n
    top = (tuple(range(n)), tuple(range(n)))
    others = [k for k in a.terms if k != top]
    if others:
        raise DegreeError(f"integrate needs a top-degree ({n},{n}) form; found bidegrees {sorted(a.bidegrees())}")
    c = a.terms.get(top)
    if c is None:
        return 0j
    total = 0j
    for pts, w in M.chunks(chunk):
        total += complex(np.sum(Evaluator(pts)(c) * w))
    return orientation_factor(n) * total


def integrate_factor(a: Form, M: ModelManifold, index: int, base_point=None) -> complex:
    """Integral over the ``index``-th factor, on the slice through ``base_point``."""
    f = inclusion(M, index, base_point)
    return integrate(pullback(f, a), M.factor_manifold(index))


# ----------------------------------------------------------------------------
# Fubini-Study data and periodicity diagnostics


def fs_density(chart: ChartSpec, index: int = 0) -> Expr:
    """``1 / (1 + |z|^2)^2`` in the coordinate ``index``."""
    z, zb = chart.z(index), chart.zbar(index)
    return sf.power(sf.add(1, sf.mul(z, zb)), -2)


def omega_fs(chart: ChartSpec, index: int = 0) -> Form:
    """Fubini-Study form ``(i / 2pi) (1 + |z|^2)^-2 dz ^ dzbar`` (total mass 1)."""
    return Form(chart, {((index,), (index,)): sf.mul(1j / (2 * math.pi), fs_density(chart, index))})


def periodicity_defect(e: Expr, M: ModelManifold, count: int = 16, seed: int = 0) -> float:
    """Largest change of ``e`` under a lattice translation in any torus
    coordinate, sampled at grid points (0 for periodic fields)."""
    pts = M.sample_points(count, seed)
    base = Evaluator(pts)(e)
    worst = 0.0
    for f in M.factors:
        if f.kind != "torus":
            continue
        for k in range(f.dim):
            for w in f.periods[k]:
                shifted = pts.copy()
                shifted[:, f.offset + k] += w
                try:
                    vals = Evaluator(shifted)(e)
                except ZeroDivisionError:
                    return math.inf
                worst = max(worst, float(np.max(np.abs(vals - base))))
    return worst
