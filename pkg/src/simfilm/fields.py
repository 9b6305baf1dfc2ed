"""Grids, sampled fields, multi-indices, and exact-coefficient polynomials.

Shared value types for the numerical modules.  Grids come in three kinds:
``uniform-1d`` (symmetric uniform line grid), ``radial`` (uniform grid in
r >= 0 representing a rotationally symmetric planar field), and
``tensor-2d`` (tensor product of two symmetric line grids).  Integration
is trapezoidal in every kind; the radial kind carries the 2*pi*r Jacobian.

Polynomials keep Fraction coefficients so that operator identities that
hold exactly in rational arithmetic can be verified without rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator

import numpy as np


# ----------------------------------------------------------------------
# Multi-indices
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class MultiIndex:
    """Immutable multi-index beta = (b1, ..., bN), all parts >= 0."""

    parts: tuple[int, ...]

    def __post_init__(self):
        if not self.parts or any(p < 0 for p in self.parts):
            raise ValueError("multi-index parts must be non-negative and non-empty")

    @property
    def dim(self) -> int:
        return len(self.parts)

    @property
    def order(self) -> int:
        return sum(self.parts)

    def factorial(self) -> int:
        """beta! as an exact integer."""
        out = 1
        for p in self.parts:
            out *= math.factorial(p)
        return out

    def sort_key(self) -> tuple:
        # graded lexicographic: degree first, then x1 before x2 within a degree
        return (self.order, tuple(-p for p in self.parts))

    def __iter__(self) -> Iterator[int]:
        return iter(self.parts)

    def __getitem__(self, i: int) -> int:
        return self.parts[i]

    def __str__(self) -> str:
        return "(" + ",".join(str(p) for p in self.parts) + ")"


def multi_indices(dim: int, max_order: int) -> list[MultiIndex]:
    """All multi-indices with |beta| <= max_order in graded-lex order."""
    out: list[MultiIndex] = []

    def rec(prefix: list[int], remaining_dim: int, budget: int):
        if remaining_dim == 1:
            for b in range(budget + 1):
                out.append(MultiIndex(tuple(prefix + [b])))
            return
        for b in range(budget + 1):
            rec(prefix + [b], remaining_dim - 1, budget - b)

    rec([], dim, max_order)
    out.sort(key=MultiIndex.sort_key)
    return out


# ----------------------------------------------------------------------
# Grids and sampled fields
# ----------------------------------------------------------------------

UNIFORM_1D = "uniform-1d"
RADIAL = "radial"
TENSOR_2D = "tensor-2d"


@dataclass(frozen=True)
class Grid:
    kind: str
    axes: tuple[np.ndarray, ...]

    @property
    def dim(self) -> int:
        # physical dimension of the field the grid represents
        return 2 if self.kind in (RADIAL, TENSOR_2D) else 1

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(a.size for a in self.axes)

    def spacing(self, axis: int = 0) -> float:
        a = self.axes[axis]
        return float(a[1] - a[0])

    def mesh(self) -> tuple[np.ndarray, ...]:
        if self.kind == TENSOR_2D:
            return tuple(np.meshgrid(*self.axes, indexing="ij"))
        return (self.axes[0],)

    def points(self) -> np.ndarray:
        """Flattened coordinates, shape (npoints, len(axes))."""
        if self.kind == TENSOR_2D:
            g = np.meshgrid(*self.axes, indexing="ij")
            return np.stack([m.ravel() for m in g], axis=1)
        return self.axes[0][:, None]

    def radii(self) -> np.ndarray:
        """|y| at every grid node, in the field's own layout."""
        if self.kind == TENSOR_2D:
            y1, y2 = self.mesh()
            return np.hypot(y1, y2)
        return np.abs(self.axes[0])


def uniform_grid_1d(extent: float, spacing: float) -> Grid:
    """Symmetric grid on [-extent, extent] built as spacing * integers."""
    m = int(round(extent / spacing))
    axis = spacing * np.arange(-m, m + 1, dtype=np.float64)
    return Grid(UNIFORM_1D, (axis,))


def radial_grid(rmax: float, spacing: float) -> Grid:
    m = int(round(rmax / spacing))
    axis = spacing * np.arange(0, m + 1, dtype=np.float64)
    return Grid(RADIAL, (axis,))


def tensor_grid_2d(extent: float, spacing: float) -> Grid:
    m = int(round(extent / spacing))
    axis = spacing * np.arange(-m, m + 1, dtype=np.float64)
    return Grid(TENSOR_2D, (axis, axis))


@dataclass
class SampledField:
    """Field values sampled on a grid, plus provenance metadata."""

    grid: Grid
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != self.grid.shape:
            raise ValueError(
                f"values shape {self.values.shape} != grid shape {self.grid.shape}")

    def copy_with(self, values: np.ndarray, **meta) -> "SampledField":
        m = dict(self.meta)
        m.update(meta)
        return SampledField(self.grid, values, m)


def integrate(f: SampledField) -> float:
    """Trapezoidal integral of the field over its domain."""
    g = f.grid
    if g.kind == UNIFORM_1D:
        return float(np.trapezoid(f.values, g.axes[0]))
    if g.kind == RADIAL:
        r = g.axes[0]
        return float(2.0 * np.pi * np.trapezoid(f.values * r, r))
    if g.kind == TENSOR_2D:
        inner = np.trapezoid(f.values, g.axes[1], axis=1)
        return float(np.trapezoid(inner, g.axes[0]))
    raise ValueError(f"unknown grid kind {g.kind!r}")


def quadrature_weights(grid: Grid) -> np.ndarray:
    """Node weights w with sum(w * f.values) == integrate(f), grid-shaped.

    Trapezoidal weights on each axis (half weight at the ends); the radial
    kind folds in its 2*pi*r Jacobian, the tensor kind is the outer product
    of its two axis weight vectors.
    """
    def line(axis: np.ndarray) -> np.ndarray:
        h = float(axis[1] - axis[0])
        w = np.full(axis.size, h)
        w[0] *= 0.5
        w[-1] *= 0.5
        return w

    if grid.kind == UNIFORM_1D:
        return line(grid.axes[0])
    if grid.kind == RADIAL:
        r = grid.axes[0]
        return 2.0 * np.pi * r * line(r)
    if grid.kind == TENSOR_2D:
        return np.outer(line(grid.axes[0]), line(grid.axes[1]))
    raise ValueError(f"unknown grid kind {grid.kind!r}")


def inner_product(f: SampledField, g: SampledField) -> float:
    if f.grid is not g.grid and (f.grid.kind != g.grid.kind
                                 or f.grid.shape != g.grid.shape):
        raise ValueError("fields live on different grids")
    return integrate(SampledField(f.grid, f.values * g.values))


# ----------------------------------------------------------------------
# Exact-coefficient polynomials
# ----------------------------------------------------------------------

class Polynomial:
    """Polynomial in ``dim`` variables with Fraction coefficients."""

    __slots__ = ("dim", "coeffs")

    def __init__(self, dim: int, coeffs: dict[tuple[int, ...], Fraction] | None = None):
        self.dim = dim
        self.coeffs: dict[tuple[int, ...], Fraction] = {}
        if coeffs:
            for e, c in coeffs.items():
                c = Fraction(c)
                if c != 0:
                    self.coeffs[tuple(e)] = c

    @classmethod
    def monomial(cls, exps: tuple[int, ...], coeff=1) -> "Polynomial":
        return cls(len(exps), {tuple(exps): Fraction(coeff)})

    def degree(self) -> int:
        return max((sum(e) for e in self.coeffs), default=0)

    def __add__(self, other: "Polynomial") -> "Polynomial":
        out = dict(self.coeffs)
        for e, c in other.coeffs.items():
            out[e] = out.get(e, Fraction(0)) + c
        return Polynomial(self.dim, out)

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return self + other.scaled(Fraction(-1))

    def scaled(self, c) -> "Polynomial":
        c = Fraction(c)
        return Polynomial(self.dim, {e: v * c for e, v in self.coeffs.items()})

    def partial(self, i: int) -> "Polynomial":
        out: dict[tuple[int, ...], Fraction] = {}
        for e, c in self.coeffs.items():
            if e[i] > 0:
                ne = list(e)
                ne[i] -= 1
                ne = tuple(ne)
                out[ne] = out.get(ne, Fraction(0)) + c * e[i]
        return Polynomial(self.dim, out)

    def laplacian(self) -> "Polynomial":
        out = Polynomial(self.dim)
        for i in range(self.dim):
            out = out + self.partial(i).partial(i)
        return out

    def y_dot_grad(self) -> "Polynomial":
        # sum_i y_i d/dy_i; multiplies each monomial by its degree in y_i
        out: dict[tuple[int, ...], Fraction] = {}
        for e, c in self.coeffs.items():
            deg = sum(e)
            if deg:
                out[e] = out.get(e, Fraction(0)) + c * deg
        return Polynomial(self.dim, out)

    def evaluate(self, pts: np.ndarray) -> np.ndarray:
        """Evaluate at points of shape (n, dim) in float arithmetic."""
        pts = np.asarray(pts, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
        out = np.zeros(pts.shape[0])
        for e, c in sorted(self.coeffs.items()):
            term = np.full(pts.shape[0], float(c))
            for i, p in enumerate(e):
                if p:
                    term *= pts[:, i] ** p
            out += term
        return out

    def sample(self, grid: Grid, scale: float = 1.0) -> SampledField:
        vals = scale * self.evaluate(grid.points())
        return SampledField(grid, vals.reshape(grid.shape),
                            {"polynomial": True})

    def __repr__(self) -> str:
        terms = []
        for e in sorted(self.coeffs, key=lambda t: (sum(t), tuple(-x for x in t))):
            terms.append(f"{self.coeffs[e]}*y^{e}")
        return " + ".join(terms) if terms else "0"
