"""Rescaled linear evolution realized two ways.

The rescaled solution of the fourth-order linear flow admits both a
convolution form

    w(y, tau) = int F(y - z e^{-tau/4}) u0(z) dz

and an eigenfunction expansion

    w(y, tau) = sum_beta e^{-|beta| tau / 4} M_beta psi_beta(y),
    M_beta = (1 / sqrt(beta!)) int z^beta u0(z) dz.

Both are computed by direct physical-space quadrature; agreement between
them exercises the entire kernel/spectral stack.  The convolution reads
kernel values from a fine table (the kernel is even, so |.| folding
applies); initial data must be effectively supported inside its grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _accel
from .fields import (Grid, MultiIndex, SampledField, integrate,
                     uniform_grid_1d)
from .kernel import KernelModel, line_table, TABLE_SPACING
from .spectral import EigenPairSet, eigenfunction

SUPPORT_RTOL = 1e-8


def _as_parts(beta, dim: int) -> tuple[int, ...]:
    if isinstance(beta, MultiIndex):
        parts = beta.parts
    elif isinstance(beta, int):
        parts = (beta,)
    else:
        parts = tuple(int(b) for b in beta)
    if len(parts) != dim:
        raise ValueError("beta dimension mismatch")
    return parts


def _check_support(u0: SampledField) -> None:
    v = np.abs(u0.values)
    peak = float(np.max(v))
    if peak == 0.0:
        return
    if u0.grid.kind == "uniform-1d":
        edge = max(v[0], v[-1])
    elif u0.grid.kind == "tensor-2d":
        edge = max(float(np.max(v[0])), float(np.max(v[-1])),
                   float(np.max(v[:, 0])), float(np.max(v[:, -1])))
    else:
        edge = float(v[-1])
    if edge > SUPPORT_RTOL * peak:
        raise ValueError(
            "initial data reaches the grid boundary; enlarge the grid")


# ----------------------------------------------------------------------
# Moments
# ----------------------------------------------------------------------

@dataclass
class MomentSet:
    values: dict[tuple[int, ...], float]
    source: str


def momentum(u0: SampledField, beta) -> float:
    """M_beta(u0) = (1/sqrt(beta!)) int z^beta u0(z) dz."""
    _check_support(u0)
    parts = _as_parts(beta, u0.grid.dim)
    if u0.grid.kind == "radial":
        if any(parts):
            raise ValueError("only beta = 0 moments on radial grids")
        return integrate(u0)
    pts = u0.grid.points()
    mono = np.ones(pts.shape[0])
    for i, p in enumerate(parts):
        if p:
            mono *= pts[:, i] ** p
    weighted = SampledField(u0.grid,
                            (mono.reshape(u0.grid.shape)) * u0.values)
    fact = 1.0
    for p in parts:
        fact *= math.factorial(p)
    return integrate(weighted) / math.sqrt(fact)


def moment_set(u0: SampledField, indices: list[MultiIndex],
               source: str = "") -> MomentSet:
    return MomentSet(values={b.parts: momentum(u0, b) for b in indices},
                     source=source)


def remove_moments(model: KernelModel, u0: SampledField,
                   max_order: int) -> SampledField:
    """Subtract an eigenfunction combination so all weighted moments of
    order <= max_order vanish on u0's grid.

    The subtraction coefficients are obtained from the moment matrix of
    the eigenfunctions *as sampled on this grid*, not from their exact
    continuum biorthogonality, so the resulting moments vanish to
    rounding even when the grid truncates the eigenfunction tails.
    """
    from .fields import multi_indices

    idx = multi_indices(u0.grid.dim, max_order)
    psis = [eigenfunction(model, b, u0.grid) for b in idx]
    n = len(idx)
    mat = np.empty((n, n))
    rhs = np.empty(n)
    for i, g in enumerate(idx):
        rhs[i] = momentum(u0, g)
        for j, psi in enumerate(psis):
            mat[i, j] = momentum(psi, g)
    coeff = np.linalg.solve(mat, rhs)
    vals = u0.values.copy()
    for cj, psi in zip(coeff, psis):
        vals = vals - cj * psi.values
    return SampledField(u0.grid, vals, dict(u0.meta))


# ----------------------------------------------------------------------
# Evolution
# ----------------------------------------------------------------------

def evolve_expansion(pairs: EigenPairSet, u0: SampledField, tau: float,
                     truncation: int | None = None) -> SampledField:
    """Finite eigenfunction expansion of the evolved state on pairs.grid."""
    if tau < 0:
        raise ValueError("tau must be non-negative")
    k = pairs.max_order if truncation is None else int(truncation)
    if k > pairs.max_order:
        raise ValueError("truncation exceeds available eigenpairs")
    out = np.zeros(pairs.grid.shape)
    for b in pairs.indices:
        if b.order > k:
            continue
        mb = momentum(u0, b)
        out += math.exp(-b.order * tau / 4.0) * mb \
            * pairs.eigenfunctions[b.parts].values
    return SampledField(pairs.grid, out,
                        {"tau": tau, "truncation": k, "evolved": "expansion"})


def evolve_convolution(model: KernelModel, u0: SampledField, tau: float,
                       grid: Grid | None = None) -> SampledField:
    """Direct quadrature of the convolution form (one-dimensional)."""
    if model.dim != 1 or u0.grid.dim != 1:
        raise ValueError("convolution evolution is implemented for dim 1")
    if tau <= 0:
        raise ValueError("tau must be positive for the convolution form")
    _check_support(u0)
    if grid is None:
        grid = u0.grid
    z = u0.grid.axes[0]
    y = grid.axes[0]
    scale = math.exp(-tau / 4.0)
    hz = u0.grid.spacing()
    u0w = u0.values * hz
    u0w[0] *= 0.5
    u0w[-1] *= 0.5
    xmax = float(np.max(np.abs(y))) + scale * float(np.max(np.abs(z))) + 1.0
    table = line_table(model, 0, xmax)
    vals = _accel.conv_shifted(y, z, u0w, scale, table, TABLE_SPACING)
    return SampledField(grid, vals, {"tau": tau, "evolved": "convolution"})


# ----------------------------------------------------------------------
# Comparison utilities
# ----------------------------------------------------------------------

@dataclass
class EvolutionComparison:
    tau: float
    truncation: int
    l2_error: float
    linf_error: float


def compare(a: SampledField, b: SampledField) -> EvolutionComparison:
    if a.grid.kind != b.grid.kind or a.grid.shape != b.grid.shape:
        raise ValueError("fields live on different grids")
    diff = a.values - b.values
    l2 = math.sqrt(max(integrate(SampledField(a.grid, diff * diff)), 0.0))
    linf = float(np.max(np.abs(diff)))
    tau = a.meta.get("tau", b.meta.get("tau", float("nan")))
    k = a.meta.get("truncation", b.meta.get("truncation", -1))
    return EvolutionComparison(tau=float(tau), truncation=int(k),
                               l2_error=l2, linf_error=linf)


def l2_norm(f: SampledField) -> float:
    return math.sqrt(max(integrate(SampledField(f.grid, f.values ** 2)), 0.0))


def decay_slope(taus, norms) -> float:
    """Least-squares slope of log(norm) against tau."""
    taus = np.asarray(taus, dtype=np.float64)
    vals = np.log(np.asarray(norms, dtype=np.float64))
    return float(np.polyfit(taus, vals, 1)[0])


def default_bump(grid: Grid, center: float = 0.0,
                 width: float = 1.0) -> SampledField:
    """Mass-normalized C^infinity bump exp(-1/(1 - s^2)), s=(z-c)/w."""
    z = grid.axes[0]
    s = (z - center) / width
    vals = np.zeros_like(z)
    inside = np.abs(s) < 1.0
    vals[inside] = np.exp(-1.0 / (1.0 - s[inside] ** 2))
    f = SampledField(grid, vals, {"bump": (center, width)})
    mass = integrate(f)
    f.values = f.values / mass
    return f
