"""Eigenpairs of the rescaled operator and its adjoint.

The rescaled fourth-order operator is

    B  = -Delta^2 + (1/4) y . grad + (N/4) I,
    B* = -Delta^2 - (1/4) y . grad,

with point spectrum {-k/4 : k = 0, 1, 2, ...}.  Eigenfunctions are
normalized kernel derivatives

    psi_beta = ((-1)^{|beta|} / sqrt(beta!)) D^beta F,

and the adjoint eigenfunctions are generalized Hermite polynomials

    psi*_beta = (1/sqrt(beta!)) [ y^beta + sum_{j=1}^{floor(|beta|/4)}
                                   (1/j!) Delta^{2j} y^beta ].

The polynomial bracket is kept in exact rational arithmetic and the
1/sqrt(beta!) normalization is applied only at evaluation time, so the
adjoint eigenrelation B* psi* = lambda psi* can be checked as exact
coefficient identities rather than float comparisons.

The second-order analogue (m = 1) uses B = Delta + (1/2) y . grad
+ (N/2) I, whose adjoints are products of classical probabilists'
Hermite polynomials in y_i / sqrt(2); these too have exact dyadic
bracket coefficients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from fractions import Fraction

import numpy as np

from . import kernel as kernel_mod
from .fields import (Grid, MultiIndex, Polynomial, SampledField, integrate,
                     multi_indices)
from .kernel import KernelModel, eval_derivative


def _as_multi(beta) -> MultiIndex:
    if isinstance(beta, MultiIndex):
        return beta
    if isinstance(beta, int):
        return MultiIndex((beta,))
    return MultiIndex(tuple(int(b) for b in beta))


# ----------------------------------------------------------------------
# Eigenvalues
# ----------------------------------------------------------------------

def eigenvalue(beta, order: int = 2) -> Fraction:
    """Exact eigenvalue -|beta| / (2 * order); -|beta|/4 in the main case."""
    b = _as_multi(beta)
    return Fraction(-b.order, 2 * order)


# ----------------------------------------------------------------------
# Eigenfunctions
# ----------------------------------------------------------------------

def eigenfunction(model: KernelModel, beta, grid: Grid) -> SampledField:
    """psi_beta sampled on a grid via Fourier-side differentiation."""
    b = _as_multi(beta)
    f = eval_derivative(model, b.parts, grid)
    scale = (-1.0) ** b.order / math.sqrt(b.factorial())
    return SampledField(grid, scale * f.values,
                        {"kernel_model": model, "beta": b.parts,
                         "scale": scale})


# ----------------------------------------------------------------------
# Adjoint polynomials (exact bracket + separate normalization)
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class AdjointPolynomial:
    """psi*_beta = bracket / sqrt(norm_square), bracket exact."""

    bracket: Polynomial
    norm_square: int  # beta!

    @property
    def dim(self) -> int:
        return self.bracket.dim

    def degree(self) -> int:
        return self.bracket.degree()

    def scale(self) -> float:
        return 1.0 / math.sqrt(self.norm_square)

    def evaluate(self, pts: np.ndarray) -> np.ndarray:
        return self.bracket.evaluate(pts) * self.scale()

    def sample(self, grid: Grid) -> SampledField:
        vals = self.evaluate(grid.points()).reshape(grid.shape)
        return SampledField(grid, vals, {"adjoint": True})

    def float_coeffs(self) -> dict[tuple[int, ...], float]:
        s = self.scale()
        return {e: float(c) * s for e, c in self.bracket.coeffs.items()}


def _hermite_bracket_1d(k: int) -> Polynomial:
    """Integer-coefficient bracket of the m=1 adjoint in one variable:
    2^{k/2} He_k(y / sqrt(2)), expanded exactly (all powers dyadic)."""
    # He recurrence in exact rational arithmetic
    prev = Polynomial(1, {(0,): Fraction(1)})
    if k == 0:
        return prev
    cur = Polynomial(1, {(1,): Fraction(1)})
    for n in range(1, k):
        nxt = Polynomial(1, {(e[0] + 1,): c for e, c in cur.coeffs.items()})
        nxt = nxt - prev.scaled(n)
        prev, cur = cur, nxt
    # substitute y / sqrt(2) and multiply by 2^{k/2}: term y^j picks up
    # 2^{(k-j)/2}, an integer because k - j is even
    out = {}
    for e, c in cur.coeffs.items():
        j = e[0]
        out[(j,)] = c * Fraction(2 ** ((k - j) // 2))
    return Polynomial(1, out)


def adjoint_polynomial(beta, order: int = 2) -> AdjointPolynomial:
    """Adjoint eigenfunction as an exact bracket plus normalization.

    order=2: bracket = y^beta + sum_{j>=1} (1/j!) Delta^{2j} y^beta.
    order=1: product of scaled probabilists' Hermite polynomials.
    """
    b = _as_multi(beta)
    n = b.dim
    if order == 2:
        mono = Polynomial.monomial(b.parts)
        out = Polynomial(n, dict(mono.coeffs))
        term = mono
        for j in range(1, b.order // 4 + 1):
            term = term.laplacian().laplacian()
            out = out + term.scaled(Fraction(1, math.factorial(j)))
        return AdjointPolynomial(out, b.factorial())
    if order == 1:
        prod = Polynomial(n, {(0,) * n: Fraction(1)})
        for i, bi in enumerate(b.parts):
            one = _hermite_bracket_1d(bi)
            lifted = {}
            for e, c in one.coeffs.items():
                exps = [0] * n
                exps[i] = e[0]
                lifted[tuple(exps)] = c
            li = Polynomial(n, lifted)
            # polynomial product (small, exact)
            acc: dict[tuple[int, ...], Fraction] = {}
            for e1, c1 in prod.coeffs.items():
                for e2, c2 in li.coeffs.items():
                    e = tuple(a + bb for a, bb in zip(e1, e2))
                    acc[e] = acc.get(e, Fraction(0)) + c1 * c2
            prod = Polynomial(n, acc)
        return AdjointPolynomial(prod, b.factorial())
    raise ValueError("order must be 1 or 2")


# ----------------------------------------------------------------------
# Operator application
# ----------------------------------------------------------------------

def apply_B_star(p, order: int = 2):
    """B* applied exactly: -Delta^2 - (1/4) y.grad (order 2),
    Delta - (1/2) y.grad (order 1).  Accepts Polynomial or
    AdjointPolynomial and returns the same type."""
    if isinstance(p, AdjointPolynomial):
        return AdjointPolynomial(apply_B_star(p.bracket, order), p.norm_square)
    if order == 2:
        return (p.laplacian().laplacian().scaled(-1)
                + p.y_dot_grad().scaled(Fraction(-1, 4)))
    if order == 1:
        return p.laplacian() + p.y_dot_grad().scaled(Fraction(-1, 2))
    raise ValueError("order must be 1 or 2")


def _derivative_values(model: KernelModel, beta: tuple[int, ...], grid: Grid):
    return eval_derivative(model, beta, grid).values


def apply_B(model: KernelModel, f: SampledField) -> SampledField:
    """B applied to a kernel-derived field through Fourier-side derivatives.

    The field must carry (beta, scale) metadata from eval_kernel /
    eval_derivative / eigenfunction; finite differences are never used.
    """
    if "beta" not in f.meta or "scale" not in f.meta:
        raise ValueError("field lacks derivative metadata; cannot apply B")
    beta = tuple(f.meta["beta"])
    scale = float(f.meta["scale"])
    g = f.grid
    n = model.dim

    def dvals(extra: tuple[int, ...]) -> np.ndarray:
        full = tuple(b + e for b, e in zip(beta, extra))
        return _derivative_values(model, full, g)

    if g.kind == "radial":
        if any(beta):
            raise ValueError("radial apply_B supports only beta = 0")
        r = g.axes[0]
        t4 = kernel_mod.radial_component(model, 4, 0, r)
        t1 = kernel_mod.radial_component(model, 1, 1, r)
        t2 = kernel_mod.radial_component(model, 2, 0, r)
        t0 = kernel_mod.radial_component(model, 0, 0, r)
        if model.order == 2:
            # Delta^2 F = T_{4,0};  y.grad F = r F'(r) = -r T_{1,1}
            vals = -t4 - 0.25 * r * t1 + n / 4.0 * t0
        else:
            vals = -t2 - 0.5 * r * t1 + n / 2.0 * t0
        return SampledField(g, scale * vals, {"derived": "B"})

    if n == 1:
        lap = dvals((2,))
        bih = dvals((4,))
        grad1 = dvals((1,))
        y = g.axes[0]
        ydg = y * grad1
    else:
        mesh = g.mesh()
        lap = dvals((2, 0)) + dvals((0, 2))
        bih = dvals((4, 0)) + 2.0 * dvals((2, 2)) + dvals((0, 4))
        ydg = mesh[0] * dvals((1, 0)) + mesh[1] * dvals((0, 1))
    if model.order == 2:
        vals = -bih + 0.25 * ydg + n / 4.0 * f.values / scale
    else:
        vals = lap + 0.5 * ydg + n / 2.0 * f.values / scale
    return SampledField(g, scale * vals, {"derived": "B"})


# ----------------------------------------------------------------------
# Eigenpair sets and the Gram matrix
# ----------------------------------------------------------------------

@dataclass
class EigenPairSet:
    model: KernelModel
    max_order: int
    grid: Grid
    indices: list[MultiIndex]
    eigenfunctions: dict[tuple[int, ...], SampledField]
    adjoints: dict[tuple[int, ...], AdjointPolynomial]
    eigenvalues: dict[tuple[int, ...], Fraction]

    def level_count(self, k: int) -> int:
        return sum(1 for b in self.indices if b.order == k)


def build_eigenpairs(model: KernelModel, max_order: int, grid: Grid) -> EigenPairSet:
    if max_order > model.max_deriv:
        raise ValueError("max_order exceeds the model's max_deriv")
    idx = multi_indices(model.dim, max_order)
    eig = {}
    adj = {}
    lam = {}
    for b in idx:
        eig[b.parts] = eigenfunction(model, b, grid)
        adj[b.parts] = adjoint_polynomial(b, order=model.order)
        lam[b.parts] = eigenvalue(b, order=model.order)
    return EigenPairSet(model=model, max_order=max_order, grid=grid,
                        indices=idx, eigenfunctions=eig, adjoints=adj,
                        eigenvalues=lam)


@dataclass
class GramResult:
    indices: list[MultiIndex]
    matrix: np.ndarray
    refined_matrix: np.ndarray | None
    drift: float
    under_resolved: bool


def _gram_on_grid(model: KernelModel, indices: list[MultiIndex],
                  adjoints: dict, grid: Grid) -> np.ndarray:
    n = len(indices)
    fields = [eigenfunction(model, b, grid) for b in indices]
    pts = grid.points()
    advals = [adjoints[b.parts].evaluate(pts).reshape(grid.shape)
              for b in indices]
    g = np.empty((n, n))
    for i, f in enumerate(fields):
        for j in range(n):
            g[i, j] = integrate(SampledField(grid, f.values * advals[j]))
    return g


def gram_matrix(pairs: EigenPairSet, refine_check: bool = True,
                drift_tol: float = 1e-6) -> GramResult:
    """Duality pairings <psi_beta, psi*_gamma> in graded-lex order.

    When refine_check is set the matrix is recomputed on a grid with
    half the spacing; drift above drift_tol marks the base grid as
    under-resolved.
    """
    g = _gram_on_grid(pairs.model, pairs.indices, pairs.adjoints, pairs.grid)
    refined = None
    drift = 0.0
    if refine_check:
        base = pairs.grid
        fine_axes = tuple(np.linspace(a[0], a[-1], 2 * (a.size - 1) + 1)
                          for a in base.axes)
        fine = Grid(base.kind, fine_axes)
        refined = _gram_on_grid(pairs.model, pairs.indices, pairs.adjoints,
                                fine)
        drift = float(np.max(np.abs(g - refined)))
    return GramResult(indices=pairs.indices, matrix=g,
                      refined_matrix=refined, drift=drift,
                      under_resolved=drift > drift_tol)
