"""First-order corrections at degenerate eigenvalue levels.

At level k the linearized evolution has an M_k-fold eigenvalue, and the
first-order correction under the nonlinear mobility couples the level's
eigenfunctions through inner products against ``ln |Psi|`` where Psi is
the unknown mixing combination.  This module supplies

* a band-excluded logarithmic quadrature with Richardson extrapolation
  across shrinking exclusion bands (``singular_inner_product``),
* the explicit level-0 correction coefficient (``assemble_k0``),
* the two-fold level-1 planar system reduced to one quadratic equation
  plus a log perturbation (``assemble_dipole`` / ``solve_dipole``),
* the three-fold level-2 planar system reduced to a pair of conics plus
  log perturbations (``assemble_triple`` / ``solve_triple``), and
* conic-section utilities used by the level-2 reduction
  (``classify_conic``, ``intersect_conics``).

Solvers return ``BranchSolution`` records whose mixing coefficients sum
to one and whose residuals are evaluated on the full assembled system.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import ndimage

from . import _accel
from .fields import (RADIAL, TENSOR_2D, UNIFORM_1D, Grid, SampledField,
                     integrate, quadrature_weights, radial_grid,
                     tensor_grid_2d, uniform_grid_1d)
from .kernel import KernelModel, eval_derivative, line_values, radial_component
from .spectral import EigenPairSet, eigenfunction

# Nodes whose |weight| falls below this fraction of the peak weight are
# treated as numerically silent: sign flips of the log argument there are
# quadrature noise, not zero crossings of the integrand.
NOISE_FLOOR = 1e-13
# Even at the finest exclusion level the band may touch at most this
# fraction of the |weight| quadrature mass; beyond it the radius dwarfs
# the log argument's scale and the extrapolation has nothing to work with.
EXCLUDED_FRACTION_MAX = 0.5
# Default exclusion radius as a fraction of the log argument's peak size
# (used where the singular weight vanishes identically and the radius is
# only a formality).
BAND_SCALE_DEFAULT = 0.02
# Default band half-width of the spatial-tube rule, in grid cells: the
# excluded tube spans this many cells on each side of the sign-change
# set at the coarsest level.  The planar level functions oscillate, so
# their zero sets carry concentric rings a few dozen cells apart; the
# coarsest tube must stay narrower than the ring gap or the tubes merge
# and the level values leave the regime the extrapolation models.
BAND_CELLS_DEFAULT = 8.0
# Below this the level's pairing matrix is considered degenerate and the
# root-existence reasoning does not apply.
NONDEGENERACY_MIN = 1e-10
NEWTON_MAX_ITERS = 50
# iterations without halving the best residual before a seed is dropped
_STALL_ITERS = 10
ROOT_TOL = 1e-8
SEED_SLACK = 0.1
DEDUP_TOL = 1e-6
DEFAULT_EXTENT_2D = 28.0
DEFAULT_SPACING_2D = 0.04

_LEVEL1 = ((1, 0), (0, 1))
_LEVEL2 = ((2, 0), (1, 1), (0, 2))


# ----------------------------------------------------------------------
# Band-excluded logarithmic quadrature
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class SingularQuadConfig:
    """Parameters of the log-singular quadrature rule.

    ``exclusion_radius`` is the half-width of the band around the zero
    set of the log argument excluded at the coarsest level; successive
    levels halve it, and the limit of vanishing band is reached by
    fitting v(delta) = v_inf + p*delta*ln(delta) + q*delta.  Two levels
    drop the plain-delta basis term.

    With ``relative`` false the band is the absolute sublevel set
    |log_arg| < delta.  With ``relative`` true, delta counts grid cells:
    the band is the spatial tube of nodes within delta cells of the log
    argument's sign-change set, so it hugs the actual zero curves at
    every amplitude and a decaying integrand's far field — where the
    amplitude falls below any absolute threshold without the function
    ever vanishing — stays fully retained.
    """

    exclusion_radius: float
    extrapolation_levels: int = 3
    relative: bool = False

    def __post_init__(self):
        if not (self.exclusion_radius > 0.0):
            raise ValueError("exclusion_radius must be positive")
        if self.extrapolation_levels < 2:
            raise ValueError("extrapolation_levels must be at least 2")

    def radii(self) -> list[float]:
        return [self.exclusion_radius * 0.5 ** j
                for j in range(self.extrapolation_levels)]


def _check_transversal(w: np.ndarray, a: np.ndarray, wmax: float) -> None:
    """1D guard: zero crossings of the log argument must sit at least
    three grid cells apart, counting only crossings where the weight is
    above the noise floor."""
    relevant = np.abs(w) > NOISE_FLOOR * wmax
    s = np.sign(a)
    pair_rel = relevant[:-1] | relevant[1:]
    flips = np.nonzero((s[:-1] * s[1:] < 0.0) & pair_rel)[0]
    zeros = np.nonzero((s == 0.0) & relevant)[0]
    positions = np.sort(np.concatenate([flips, zeros]))
    if positions.size >= 2 and np.min(np.diff(positions)) < 3:
        raise ValueError(
            "zero crossings of the log argument are not isolated on this "
            "grid (crossings closer than 3 cells); the integrand's zero "
            "set must be transversal at the grid scale")


def _extrapolate(radii: list[float], vals: list[float],
                 ref: float = 0.0) -> float:
    """Fit v(delta) ~ v0 + c1 delta ln delta (+ c2 delta) and return v0.

    ``ref`` is an absolute magnitude reference for the integral (the
    weight's quadrature mass); corrections below rounding noise relative
    to it never trigger the growing-corrections guard, which matters for
    integrals that vanish by symmetry.
    """
    v = np.asarray(vals, dtype=np.float64)
    d = np.asarray(radii, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise ValueError("log quadrature produced non-finite level values")
    diffs = np.abs(np.diff(v))
    scale = max(float(np.max(np.abs(v))), ref, 1e-30)
    if diffs.size >= 2 and diffs[-1] > 4.0 * diffs[0] \
            and diffs[-1] > 1e-12 * scale:
        raise ValueError(
            "band-exclusion corrections grow as the band shrinks; the "
            "excluded mass is not settling, so the extrapolation to a "
            "vanishing band is unreliable")
    cols = [np.ones_like(d), d * np.log(d)]
    if v.size >= 3:
        cols.append(d)
    basis = np.stack(cols, axis=1)
    coef, *_ = np.linalg.lstsq(basis, v, rcond=None)
    return float(coef[0])


def _crossing_points(arr: np.ndarray) -> np.ndarray:
    """Sub-cell zero crossings of a sampled field, in cell coordinates.

    One point per grid edge whose endpoint values have strictly opposite
    signs, placed where the linear interpolant vanishes, plus every node
    whose value is exactly zero.  The point set moves continuously as the
    field's coefficients vary — unlike any node classification — which is
    what keeps banded integrals continuous in those coefficients.
    """
    chunks = []
    for axis in range(arr.ndim):
        lo = tuple(slice(None, -1) if ax == axis else slice(None)
                   for ax in range(arr.ndim))
        hi = tuple(slice(1, None) if ax == axis else slice(None)
                   for ax in range(arr.ndim))
        v0, v1 = arr[lo], arr[hi]
        flip = (np.sign(v0) * np.sign(v1)) < 0.0
        if not flip.any():
            continue
        t = v0[flip] / (v0[flip] - v1[flip])
        idx = np.nonzero(flip)
        coords = [idx[ax].astype(np.float64) for ax in range(arr.ndim)]
        coords[axis] = coords[axis] + t
        chunks.append(np.column_stack(coords))
    zeros = np.nonzero(arr == 0.0)
    if zeros[0].size:
        chunks.append(np.column_stack([z.astype(np.float64) for z in zeros]))
    if not chunks:
        return np.empty((0, arr.ndim))
    return np.concatenate(chunks, axis=0)


def _distance_cells(values: np.ndarray, kind: str,
                    reach: float) -> np.ndarray | None:
    """Per-node distance, in grid cells, to the zero set of a field.

    Distances are measured to the field's sub-cell crossing points, so
    they vary continuously with the field.  Only nodes within ``reach``
    cells of the zero set get true distances; farther nodes are set to
    +inf (any band test at or below ``reach`` treats them as fully
    retained).  Returns None when the field has no zero crossings.
    """
    arr = values if kind == TENSOR_2D else np.asarray(values).ravel()
    pts = _crossing_points(arr)
    if pts.shape[0] == 0:
        return None
    if arr.ndim == 1:
        # nearest sorted crossing on either side of each node
        pos = np.sort(pts[:, 0])
        padded = np.concatenate(([-np.inf], pos, [np.inf]))
        nodes = np.arange(arr.size, dtype=np.float64)
        k = np.searchsorted(pos, nodes)
        return np.minimum(nodes - padded[k], padded[k + 1] - nodes)
    # cheap binary-interface transform as a prefilter: it brackets the
    # point distance within 1.5 cells, so querying only its <= reach+2
    # sublevel set cannot lose any node the band rule will ramp
    s = np.sign(arr)
    iface = arr == 0.0
    for axis in range(arr.ndim):
        lo = tuple(slice(None, -1) if ax == axis else slice(None)
                   for ax in range(arr.ndim))
        hi = tuple(slice(1, None) if ax == axis else slice(None)
                   for ax in range(arr.ndim))
        flip = s[lo] * s[hi] < 0.0
        iface[lo] |= flip
        iface[hi] |= flip
    coarse = ndimage.distance_transform_edt(~iface).ravel()
    sel = np.nonzero(coarse <= reach + 2.0)[0]
    qi, qj = np.unravel_index(sel, arr.shape)
    dist = np.full(arr.size, np.inf)
    dist[sel] = _accel.nearest_dist_2d(pts[:, 0], pts[:, 1], qi, qj,
                                       arr.shape, reach + 4.0)
    return dist


def _singular_quad(w: np.ndarray, a: np.ndarray, wq: np.ndarray,
                   kind: str, cfg: SingularQuadConfig,
                   dist: np.ndarray | None = None) -> float:
    """Core rule on raw arrays: sum of wq * w * ln|a| with the band
    around the zero set of ``a`` removed through a C^1 ramp and the
    result extrapolated to a vanishing band.  In the relative frame the
    band is measured by ``dist`` (cells to the sign-change set of a),
    computed here from a's natural-shape array unless supplied.
    """
    a_shaped = np.asarray(a, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64).ravel()
    a = a_shaped.ravel()
    wq = np.asarray(wq, dtype=np.float64).ravel()
    if not (np.all(np.isfinite(w)) and np.all(np.isfinite(a))):
        raise ValueError("weight and log argument must be finite")
    wmax = float(np.max(np.abs(w))) if w.size else 0.0
    if wmax == 0.0:
        return 0.0
    if kind in (UNIFORM_1D, RADIAL):
        _check_transversal(w, a, wmax)
    if cfg.relative and dist is None:
        dist = _distance_cells(a_shaped, kind, 2.0 * cfg.exclusion_radius)
        if dist is None:
            # no zeros anywhere: the plain sum carries no singular band
            return float(np.sum(wq * w * np.log(np.abs(a))))
    radii = cfg.radii()
    vals: list[float] = []
    counts: list[int] = []
    excl_last = tot_last = 0.0
    for delta in radii:
        val, nex, wex, wtot = _accel.masked_log_quad(w, a, wq, delta, dist)
        vals.append(val)
        counts.append(nex)
        excl_last, tot_last = wex, wtot
    if counts[0] == 0:
        # no node anywhere near the band: the plain sum is already exact
        return vals[0]
    if excl_last > EXCLUDED_FRACTION_MAX * tot_last:
        raise ValueError(
            f"the exclusion band still holds {excl_last / tot_last:.0%} of "
            "the weight mass at the finest level; exclusion_radius dwarfs "
            "the log argument's scale on this grid")
    if any(counts[j + 1] > counts[j] for j in range(len(counts) - 1)):
        raise ValueError("excluded node counts increased on a finer band")
    return _extrapolate(radii, vals, ref=tot_last)


def singular_inner_product(weight_grad: SampledField, log_arg: SampledField,
                           flux: SampledField,
                           cfg: SingularQuadConfig) -> float:
    """Integral of weight_grad * ln|log_arg| * flux with the singular rule.

    The zero band of the log argument is excluded through a smooth ramp
    and the result extrapolated to a vanishing band.  On line and radial
    grids the zero crossings of the log argument are required to be
    isolated (at least three cells apart) wherever the weight is above
    the noise floor.
    """
    g = weight_grad.grid
    for other in (log_arg, flux):
        if other.grid.kind != g.kind or other.grid.shape != g.shape:
            raise ValueError("all three fields must share one grid")
    w = weight_grad.values * flux.values
    return _singular_quad(w, log_arg.values, quadrature_weights(g),
                          g.kind, cfg)


# ----------------------------------------------------------------------
# Level 0: explicit correction coefficient
# ----------------------------------------------------------------------

def assemble_k0(model: KernelModel, pairs: EigenPairSet,
                cfg: SingularQuadConfig | None = None,
                extent: float = 30.0, spacing: float | None = None,
                eigenfunction_scale: float = 1.0) -> float:
    """First-order correction of the level-0 decay exponent.

    Evaluates <div(ln|psi0| grad(lap psi0)) + (N/16) y.grad(psi0), psi0*>
    divided by <psi0, psi0*>.  The adjoint at level 0 is the constant 1,
    so integrating the divergence term by parts once leaves a boundary
    flux plus a singular integral with identically zero weight; the ratio
    form makes the result invariant under positive rescaling of psi0
    (``eigenfunction_scale`` exists to verify exactly that).
    """
    if (0,) * model.dim not in pairs.eigenfunctions:
        raise ValueError("pairs must contain the level-0 eigenfunction")
    n = model.dim
    s = float(eigenfunction_scale)
    if s <= 0.0:
        raise ValueError("eigenfunction_scale must be positive")
    if n == 1:
        grid = uniform_grid_1d(extent, spacing if spacing else 0.01)
        y = grid.axes[0]
        psi0 = s * line_values(model, 0, y)
        radial_stretch = s * y * line_values(model, 1, y)  # y * psi0'
        third = s * line_values(model, 3, y)               # grad(lap psi0)
        # [ln|psi0| * psi0''']_{-L}^{+L}
        edge = 0.0
        for idx, sign in ((y.size - 1, 1.0), (0, -1.0)):
            if abs(psi0[idx]) > 1e-300:
                edge += sign * math.log(abs(psi0[idx])) * third[idx]
    else:
        grid = radial_grid(extent, spacing if spacing else 0.005)
        r = grid.axes[0]
        psi0 = s * radial_component(model, 0, 0, r)
        # y.grad(psi0) = r psi0'(r); psi0' carries the odd-order sign
        psi0p = -s * radial_component(model, 1, 1, r)
        radial_stretch = r * psi0p
        # boundary flux 2*pi*L * ln|psi0(L)| * (lap psi0)'(L)
        lap_grad_L = s * float(radial_component(model, 3, 1,
                                                np.array([r[-1]]))[0])
        edge = 0.0
        if abs(psi0[-1]) > 1e-300:
            edge = 2.0 * math.pi * r[-1] * math.log(abs(psi0[-1])) * lap_grad_L
    if cfg is None:
        cfg = SingularQuadConfig(
            exclusion_radius=BAND_SCALE_DEFAULT * float(np.max(np.abs(psi0))))
    zero_w = SampledField(grid, np.zeros(grid.shape))
    ones = SampledField(grid, np.ones(grid.shape))
    # the adjoint is constant, so its gradient weight vanishes identically
    singular = singular_inner_product(zero_w, SampledField(grid, psi0),
                                      ones, cfg)
    euler = (n / 16.0) * integrate(SampledField(grid, radial_stretch))
    denom = integrate(SampledField(grid, psi0))
    return (edge - singular + euler) / denom


# ----------------------------------------------------------------------
# Shared level-k machinery (planar, N = 2)
# ----------------------------------------------------------------------

def _eig_coeff(beta: tuple[int, ...]) -> float:
    fact = 1
    for b in beta:
        fact *= math.factorial(b)
    return (-1.0) ** sum(beta) / math.sqrt(fact)


def _bump(beta: tuple[int, ...], *extras: tuple[int, ...]) -> tuple[int, ...]:
    out = list(beta)
    for e in extras:
        out = [a + b for a, b in zip(out, e)]
    return tuple(out)


def _grad_values(model: KernelModel, beta: tuple[int, ...],
                 grid: Grid) -> list[np.ndarray]:
    """Cartesian gradient of the normalized eigenfunction psi_beta."""
    c = _eig_coeff(beta)
    return [c * eval_derivative(model, _bump(beta, e), grid).values
            for e in ((1, 0), (0, 1))]


def _grad_lap_values(model: KernelModel, beta: tuple[int, ...],
                     grid: Grid) -> list[np.ndarray]:
    """Cartesian gradient of lap(psi_beta), normalized."""
    c = _eig_coeff(beta)
    out = []
    for e in ((1, 0), (0, 1)):
        vals = (eval_derivative(model, _bump(beta, e, (2, 0)), grid).values
                + eval_derivative(model, _bump(beta, e, (0, 2)), grid).values)
        out.append(c * vals)
    return out


def _adjoint_samples(pairs: EigenPairSet, betas, grid: Grid):
    """Normalized adjoint values and adjoint gradients on the grid."""
    vals, grads = [], []
    for b in betas:
        adj = pairs.adjoints[b]
        vals.append(adj.sample(grid).values)
        grads.append([adj.bracket.partial(d).sample(grid, adj.scale()).values
                      for d in (0, 1)])
    return vals, grads


def _pairing_matrix(model: KernelModel, pairs: EigenPairSet, betas,
                    grid: Grid) -> np.ndarray:
    """P[i, j] = <psi*_i, y.grad(psi_j)> by planar quadrature."""
    y1, y2 = grid.mesh()
    adj_vals, _ = _adjoint_samples(pairs, betas, grid)
    p = np.empty((len(betas), len(betas)))
    for j, bj in enumerate(betas):
        g1, g2 = _grad_values(model, bj, grid)
        stretch = y1 * g1 + y2 * g2
        for i in range(len(betas)):
            p[i, j] = integrate(SampledField(grid, adj_vals[i] * stretch))
    return p


def _require_planar(model: KernelModel, pairs: EigenPairSet, betas) -> None:
    if model.dim != 2:
        raise ValueError("this level system is planar; model.dim must be 2")
    missing = [b for b in betas if b not in pairs.eigenfunctions]
    if missing:
        raise ValueError(f"pairs lacks level eigenfunctions {missing}")


class _LogTerms:
    """Cached evaluators of the log inner products L_i(c).

    The log argument and each weight are barycentric in the mixing
    coefficients (c_1 = 1 - c_2 - ..., then sum of c_q times a per-
    function field), so one assembly precomputes the fields and every
    evaluation is a weighted sum plus the singular rule.  The band
    distance field is computed once per coefficient tuple and shared
    across the level's weights.

    ``mirror`` encodes the exact coordinate-swap symmetry of the level:
    given a reduced coefficient tuple it returns either None (already
    canonical) or the mirrored tuple plus the index permutation relating
    the two sides' values.  Evaluating only on the canonical side makes
    the discrete L_i inherit the continuum invariance exactly, so
    derived antisymmetries hold to rounding rather than to quadrature
    noise; with the assembly's mirrored fields, barycentric composition
    keeps self-mirrored points bit-symmetric as well.
    """

    def __init__(self, a_funcs, w_funcs, wq, kind, cfg, mirror=None):
        self.a_funcs = a_funcs            # one field per level function
        self.w_funcs = w_funcs            # w_funcs[i][q]: weight i, func q
        self.wq = wq
        self.kind = kind
        self.cfg = cfg
        self.mirror = mirror
        self._eval = lru_cache(maxsize=512)(self._eval_uncached)

    def __call__(self, *coeffs: float) -> tuple[float, ...]:
        key = tuple(float(c) for c in coeffs)
        if self.mirror is not None:
            mapped = self.mirror(key)
            if mapped is not None:
                mkey, perm = mapped
                vals = self._eval(tuple(float(c) for c in mkey))
                return tuple(vals[j] for j in perm)
        return self._eval(key)

    def _compose(self, bary, fields):
        out = bary[0] * fields[0]
        for c, f in zip(bary[1:], fields[1:]):
            out += c * f
        return out

    def _eval_uncached(self, coeffs: tuple[float, ...]) -> tuple[float, ...]:
        bary = (1.0 - math.fsum(coeffs), *coeffs)
        a = self._compose(bary, self.a_funcs)
        dist = None
        if self.cfg.relative:
            dist = _distance_cells(a, self.kind,
                                   2.0 * self.cfg.exclusion_radius)
        return tuple(_singular_quad(self._compose(bary, wf), a, self.wq,
                                    self.kind, self.cfg, dist)
                     for wf in self.w_funcs)


def _mirror_pair(key: tuple[float, ...]):
    """Swap symmetry of the two-fold level: c2 <-> 1 - c2 exchanges the
    two level functions under the coordinate swap."""
    c2, = key
    if c2 > 0.5:
        return (1.0 - c2,), (1, 0)
    return None


def _mirror_triple(key: tuple[float, ...]):
    """Swap symmetry of the three-fold level: the coordinate swap fixes
    the mixed function and exchanges the two pure ones, mapping
    (c2, c3) to (c2, 1 - c2 - c3)."""
    c2, c3 = key
    c1 = 1.0 - c2 - c3
    if c3 > c1:
        return (c2, c1), (2, 1, 0)
    return None


def _auto_cfg(cfg) -> SingularQuadConfig:
    """Default band for assembled systems: a spatial tube of
    BAND_CELLS_DEFAULT grid cells around the log argument's sign-change
    set, so the band and its halvings stay grid-resolved everywhere."""
    if cfg is not None:
        return cfg
    return SingularQuadConfig(exclusion_radius=BAND_CELLS_DEFAULT,
                              relative=True)


# ----------------------------------------------------------------------
# Level 1: two-fold system (dipole pair)
# ----------------------------------------------------------------------

@dataclass
class DipoleSystem:
    """Level-1 mixing system reduced to A c2^2 + B c2 + C + omega(c2) = 0.

    ``omega`` bundles the log inner products; ``None`` means identically
    zero (synthetic systems).  ``nondegeneracy`` is the pairing gap
    <psi*_1, y.grad psi_1> - <psi*_1, y.grad psi_2> whose nonvanishing
    underwrites root existence.  Assembled systems carry the pairing
    matrix and the cached log-term evaluator so that the first-order
    eigenvalue correction and raw residuals can be recovered at any c2.
    """

    A: float
    B: float
    C: float
    omega: Callable[[float], float] | None = None
    nondegeneracy: float = 1.0
    alpha1: float = 0.75
    sigma: float = 0.75 / 4.0
    pmat: np.ndarray | None = None
    log_terms: Callable[..., tuple[float, ...]] | None = None
    meta: dict = field(default_factory=dict)

    def quadratic(self, c2: float) -> float:
        return (self.A * c2 + self.B) * c2 + self.C

    def equation(self, c2: float) -> float:
        w = self.omega(c2) if self.omega is not None else 0.0
        return self.quadratic(c2) + w

    def mu_of(self, c2: float) -> float | None:
        """First-order eigenvalue correction from the summed pair."""
        if self.log_terms is None or self.pmat is None:
            return None
        l1, l2 = self.log_terms(c2)
        p, s = self.pmat, self.sigma
        return (s * (p[0, 0] + p[1, 0]) - (l1 + l2)
                - s * c2 * ((p[0, 0] - p[0, 1]) + (p[1, 0] - p[1, 1])))

    def residual_raw(self, c2: float, mu: float) -> tuple[float, float]:
        """Residuals of the two un-reduced level equations."""
        if self.log_terms is None or self.pmat is None:
            raise ValueError("raw residuals need an assembled system")
        l1, l2 = self.log_terms(c2)
        p, s = self.pmat, self.sigma
        eq1 = l1 + (1.0 - c2) * mu - s * p[0, 0] + s * c2 * (p[0, 0] - p[0, 1])
        eq2 = l2 + c2 * mu - s * p[1, 0] + s * c2 * (p[1, 0] - p[1, 1])
        return eq1, eq2


def assemble_dipole(model: KernelModel, pairs: EigenPairSet,
                    cfg: SingularQuadConfig | None = None,
                    extent: float = DEFAULT_EXTENT_2D,
                    spacing: float = DEFAULT_SPACING_2D) -> DipoleSystem:
    """Assemble the two-fold level-1 system on a planar tensor grid."""
    betas = _LEVEL1
    _require_planar(model, pairs, betas)
    grid = tensor_grid_2d(extent, spacing)
    wq = quadrature_weights(grid)
    n = model.dim
    alpha1 = (n + 1) / 4.0
    sigma = alpha1 / 4.0

    p = _pairing_matrix(model, pairs, betas, grid)
    a_coef = -sigma * ((p[0, 0] - p[0, 1]) + (p[1, 0] - p[1, 1]))
    b_coef = sigma * (p[0, 0] + 2.0 * p[1, 0] - p[1, 1])
    c_coef = -sigma * p[1, 0]
    nondeg = p[0, 0] - p[0, 1]

    # The second level function is the coordinate swap of the first, so
    # its fields are taken as exact array transposes: every mirrored
    # identity then holds to rounding on the discrete level as well.
    psi1 = eigenfunction(model, betas[0], grid).values
    a_funcs = [psi1, psi1.T.copy()]
    glap1 = _grad_lap_values(model, betas[0], grid)
    glap = [glap1, [glap1[1].T.copy(), glap1[0].T.copy()]]
    _, adj_grads = _adjoint_samples(pairs, betas, grid)
    w_funcs = [[sum(adj_grads[i][d] * glap[q][d] for d in (0, 1))
                for q in range(2)] for i in range(2)]
    cfg = _auto_cfg(cfg)
    log_terms = _LogTerms(a_funcs, w_funcs, wq, grid.kind, cfg,
                          mirror=_mirror_pair)

    def omega(c2: float) -> float:
        l1, l2 = log_terms(c2)
        return l2 - c2 * (l1 + l2)

    meta = {
        "grid_extent": extent,
        "grid_spacing": spacing,
        "exclusion_radius": cfg.exclusion_radius,
        "extrapolation_levels": cfg.extrapolation_levels,
        # the c2^2 coefficient with the opposite sign, an equivalent
        # printed form kept for cross-checking (see decision ledger)
        "variant_A_opposite": -a_coef,
    }
    return DipoleSystem(A=a_coef, B=b_coef, C=c_coef, omega=omega,
                        nondegeneracy=nondeg, alpha1=alpha1, sigma=sigma,
                        pmat=p, log_terms=log_terms, meta=meta)


# ----------------------------------------------------------------------
# Root records
# ----------------------------------------------------------------------

@dataclass
class BranchSolution:
    """One root of a level system: mixing coefficients plus correction."""

    level: int
    coefficients: dict
    mu_first: float | None
    residual: float
    newton_iters: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        total = sum(self.coefficients.values())
        if abs(total - 1.0) > 1e-12:
            raise ValueError("mixing coefficients must sum to one")


def _newton_1d(g: Callable[[float], float], x0: float,
               max_iters: int, tol: float = 1e-11,
               step: float = 1e-7) -> tuple[float, int, bool]:
    x = float(x0)
    best = math.inf
    since_gain = 0
    for it in range(1, max_iters + 1):
        f = g(x)
        if abs(f) < tol:
            return x, it, True
        # bail out early on noise-level plateaus instead of burning the
        # full iteration budget on a seed that is not converging
        if abs(f) < 0.5 * best:
            best, since_gain = abs(f), 0
        else:
            since_gain += 1
            if since_gain >= _STALL_ITERS:
                return x, it, False
        d = (g(x + step) - g(x - step)) / (2.0 * step)
        if not math.isfinite(d) or d == 0.0:
            return x, it, False
        dx = f / d
        if abs(dx) > 0.5:
            dx = math.copysign(0.5, dx)
        x -= dx
        if not math.isfinite(x) or abs(x) > 5.0:
            return x, it, False
    return x, max_iters, abs(g(x)) < tol


def _dedup_sorted(items, key, tol):
    out = []
    for item in sorted(items, key=key):
        if out and abs(key(item) - key(out[-1])) < tol:
            if item[-1] < out[-1][-1]:  # keep the smaller residual
                out[-1] = item
            continue
        out.append(item)
    return out


def solve_dipole(system: DipoleSystem,
                 max_iters: int = NEWTON_MAX_ITERS) -> list[BranchSolution]:
    """Roots of the level-1 equation on c2 in [0, 1].

    Seeds are the quadratic roots of the polynomial part plus midpoints
    of sign changes on a 101-point lattice; each seed is Newton-polished
    on the full equation.  The returned records carry the root-count
    conditions of the polynomial part and the perturbation-control check
    in their metadata.
    """
    if abs(system.nondegeneracy) < NONDEGENERACY_MIN:
        raise ValueError("level pairing gap is numerically degenerate; "
                         "root existence reasoning does not apply")
    a, b, c = system.A, system.B, system.C

    def g(x: float) -> float:
        # isolated mixing ratios can defeat the band extrapolation (the
        # combined field's zero set loses transversality there); such
        # points are unusable, not fatal — NaN makes every sign test and
        # Newton acceptance reject them
        try:
            return system.equation(x)
        except ValueError:
            return math.nan
    qscale = max(abs(a), abs(b), abs(c))
    seeds: list[float] = []
    linear_fallback = abs(a) <= 1e-12 * max(1.0, qscale)
    if linear_fallback:
        warnings.warn("quadratic coefficient is numerically zero; "
                      "seeding from the linear part", stacklevel=2)
        if abs(b) > 1e-12 * max(1.0, qscale):
            seeds.append(-c / b)
    else:
        disc = b * b - 4.0 * a * c
        if disc >= 0.0:
            root = math.sqrt(disc)
            seeds += [(-b + root) / (2.0 * a), (-b - root) / (2.0 * a)]
        else:
            # complex pair: polish from the vertex, the real representative
            seeds.append(-b / (2.0 * a))

    lattice = np.linspace(0.0, 1.0, 101)
    gvals = np.array([g(x) for x in lattice])
    for i in np.nonzero(gvals[:-1] * gvals[1:] < 0.0)[0]:
        seeds.append(0.5 * (lattice[i] + lattice[i + 1]))
    omega_sup = 0.0
    if system.omega is not None:
        quad_vals = np.array([system.quadratic(x) for x in lattice])
        finite = np.isfinite(gvals)
        omega_sup = float(np.max(np.abs(gvals[finite] - quad_vals[finite]))) \
            if finite.any() else math.inf

    found: list[tuple[float, int, float]] = []
    for seed in seeds:
        if not (-SEED_SLACK <= seed <= 1.0 + SEED_SLACK):
            continue
        x, iters, ok = _newton_1d(g, seed, max_iters)
        if not ok:
            warnings.warn(f"seed {seed:.6g} did not converge in "
                          f"{max_iters} iterations", stacklevel=2)
            continue
        if not (-1e-12 <= x <= 1.0 + 1e-12):
            continue
        x = min(max(x, 0.0), 1.0)
        resid = abs(g(x))
        if resid < ROOT_TOL:
            found.append((x, iters, resid))
    found = _dedup_sorted(found, key=lambda t: t[0], tol=DEDUP_TOL)

    # the assembled equation is covariant under c2 -> 1 - c2 (swapping
    # the two level functions relabels the same branch), so the root set
    # is closed under that map; when a partner seed's Newton run
    # wandered to a different basin, recover the partner by polishing
    # from the mirrored root — and keep it only if it really converges
    # onto the mirror point with a residual as small as any other root's
    for x, iters, resid in list(found):
        xm = 1.0 - x
        if any(abs(xm - y[0]) <= DEDUP_TOL for y in found):
            continue
        xr, it2, ok = _newton_1d(g, xm, max_iters)
        if ok and abs(xr - xm) <= 10.0 * DEDUP_TOL:
            r2 = abs(g(xr))
            if r2 < ROOT_TOL:
                found.append((min(max(xr, 0.0), 1.0), it2, r2))
    found = _dedup_sorted(found, key=lambda t: t[0], tol=DEDUP_TOL)

    conditions = {
        "a": bool(c * (a + b + c) > 0.0),
        "b": False,
        "c": False,
        "linear_fallback": linear_fallback,
        "omega_sup": omega_sup,
    }
    if not linear_fallback:
        vertex = -b / (2.0 * a)
        f_vertex = c - b * b / (4.0 * a)
        conditions["b"] = bool(c * f_vertex < 0.0)
        conditions["c"] = bool(0.0 < vertex < 1.0)
        conditions["vertex"] = vertex
        conditions["value_at_vertex"] = f_vertex
        conditions["controlled"] = bool(omega_sup <= abs(f_vertex))
    else:
        conditions["controlled"] = False
    if conditions["controlled"] and conditions["a"] and conditions["b"] \
            and conditions["c"]:
        conditions["expected_roots"] = "exactly 2"
    elif abs(system.nondegeneracy) >= NONDEGENERACY_MIN:
        conditions["expected_roots"] = "at least 1"
    conditions["root_count"] = len(found)

    out = []
    for x, iters, resid in found:
        out.append(BranchSolution(
            level=1,
            coefficients={(1, 0): 1.0 - x, (0, 1): x},
            mu_first=system.mu_of(x),
            residual=resid,
            newton_iters=iters,
            meta={"conditions": conditions}))
    return out


# ----------------------------------------------------------------------
# Conic utilities
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class ConicCoeffs:
    """A x^2 + B y^2 + C x + D y + E xy + F."""

    A: float
    B: float
    C: float = 0.0
    D: float = 0.0
    E: float = 0.0
    F: float = 0.0

    def value(self, x, y):
        return (self.A * x * x + self.B * y * y + self.C * x
                + self.D * y + self.E * x * y + self.F)

    def gradient(self, x: float, y: float) -> tuple[float, float]:
        return (2.0 * self.A * x + self.C + self.E * y,
                2.0 * self.B * y + self.D + self.E * x)

    def scale(self) -> float:
        return max(abs(self.A), abs(self.B), abs(self.C),
                   abs(self.D), abs(self.E), abs(self.F))

    def swapped(self) -> "ConicCoeffs":
        return ConicCoeffs(A=self.B, B=self.A, C=self.D, D=self.C,
                           E=self.E, F=self.F)


@dataclass(frozen=True)
class ConicClass:
    kind: str  # ellipse | circle | parabola | hyperbola | degenerate
    discriminant: float


def classify_conic(conic: ConicCoeffs, tol: float = 1e-12) -> ConicClass:
    """Classify by the discriminant E^2 - 4AB of the quadratic part.

    Negative: ellipse (circle when A = B and E = 0); zero: parabola;
    positive: hyperbola.  When linear or constant data is present the
    full 3x3 determinant is checked first and a vanishing value reports
    a degenerate conic; a vanishing quadratic part is a line, reported
    as degenerate rather than raised.
    """
    a, b, e = conic.A, conic.B, conic.E
    qscale = max(abs(a), abs(b), abs(e))
    affine = max(abs(conic.C), abs(conic.D), abs(conic.F))
    if qscale <= tol * max(1.0, affine):
        return ConicClass("degenerate", 0.0)
    disc = e * e - 4.0 * a * b
    if affine > tol * qscale:
        half_c, half_d, half_e = conic.C / 2.0, conic.D / 2.0, e / 2.0
        det3 = (a * (b * conic.F - half_d * half_d)
                - half_e * (half_e * conic.F - half_d * half_c)
                + half_c * (half_e * half_d - b * half_c))
        if abs(det3) <= 1e-10 * max(qscale, affine) ** 3:
            return ConicClass("degenerate", disc)
    if abs(disc) <= tol * qscale * qscale:
        return ConicClass("parabola", disc)
    if disc < 0.0:
        if abs(a - b) <= tol * qscale and abs(e) <= tol * qscale:
            return ConicClass("circle", disc)
        return ConicClass("ellipse", disc)
    return ConicClass("hyperbola", disc)


def _poly_trim(c: np.ndarray, floor: float) -> np.ndarray:
    mask = np.abs(c) > floor
    if not mask.any():
        return np.zeros(1)
    return c[: int(np.max(np.nonzero(mask))) + 1]


def _as_y_quadratic(c: ConicCoeffs):
    """Ascending-x coefficient arrays of the conic viewed as a2 y^2 +
    a1(x) y + a0(x)."""
    a2 = np.array([c.B])
    a1 = np.array([c.D, c.E])
    a0 = np.array([c.F, c.C, c.A])
    return a2, a1, a0


def _real_roots(coeffs_ascending: np.ndarray) -> list[float]:
    c = _poly_trim(coeffs_ascending,
                   1e-13 * max(float(np.max(np.abs(coeffs_ascending))), 1e-300))
    if c.size <= 1:
        return []
    roots = np.roots(c[::-1])
    return [float(r.real) for r in roots
            if abs(r.imag) <= 1e-8 * (1.0 + abs(r.real))]


def _y_candidates(c: ConicCoeffs, x: float) -> list[float]:
    s = max(c.scale(), 1e-300)
    a2 = c.B
    a1 = c.E * x + c.D
    a0 = (c.A * x + c.C) * x + c.F
    if abs(a2) > 1e-12 * s:
        disc = a1 * a1 - 4.0 * a2 * a0
        if disc < 0.0:
            if disc > -1e-8 * s * s * (1.0 + x * x) ** 2:
                disc = 0.0
            else:
                return []
        root = math.sqrt(disc)
        return [(-a1 + root) / (2.0 * a2), (-a1 - root) / (2.0 * a2)]
    if abs(a1) > 1e-12 * s * (1.0 + abs(x)):
        return [-a0 / a1]
    return []


def _polish_intersection(c1: ConicCoeffs, c2: ConicCoeffs,
                         x: float, y: float) -> tuple[float, float]:
    for _ in range(4):
        f1 = c1.value(x, y)
        f2 = c2.value(x, y)
        j11, j12 = c1.gradient(x, y)
        j21, j22 = c2.gradient(x, y)
        det = j11 * j22 - j12 * j21
        if det == 0.0 or not math.isfinite(det):
            break
        x -= (f1 * j22 - f2 * j12) / det
        y -= (f2 * j11 - f1 * j21) / det
    return x, y


def _resultant_x(c1: ConicCoeffs, c2: ConicCoeffs) -> np.ndarray:
    """Eliminate y: resultant of the two y-quadratics, ascending in x."""
    from numpy.polynomial import polynomial as npoly

    a2, a1, a0 = _as_y_quadratic(c1)
    b2, b1, b0 = _as_y_quadratic(c2)
    t1 = npoly.polysub(npoly.polymul(a2, b0), npoly.polymul(a0, b2))
    t2 = npoly.polysub(npoly.polymul(a2, b1), npoly.polymul(a1, b2))
    t3 = npoly.polysub(npoly.polymul(a1, b0), npoly.polymul(a0, b1))
    return npoly.polysub(npoly.polymul(t1, t1), npoly.polymul(t2, t3))


def intersect_conics(c1: ConicCoeffs, c2: ConicCoeffs) -> list[tuple[float, float]]:
    """Real intersection points of two conics by resultant elimination.

    Eliminating y yields a polynomial of degree at most four in x; its
    real roots are back-substituted and Newton-polished on the pair.  An
    identically vanishing resultant switches the eliminated variable,
    and if both eliminations vanish the conics share a component, which
    is an error.  At most four points are returned.
    """
    s1 = max(c1.scale(), 1e-300)
    s2 = max(c2.scale(), 1e-300)
    pair_scale = s1 * s2

    both_linear_in_y = abs(c1.B) <= 1e-14 * s1 and abs(c2.B) <= 1e-14 * s2
    candidates: list[tuple[float, float]] = []
    swapped = False
    if both_linear_in_y:
        from numpy.polynomial import polynomial as npoly

        _, a1, a0 = _as_y_quadratic(c1)
        _, b1, b0 = _as_y_quadratic(c2)
        elim = npoly.polysub(npoly.polymul(a1, b0), npoly.polymul(a0, b1))
        if np.max(np.abs(elim)) <= 1e-13 * pair_scale:
            raise ValueError("conics share a common component")
        xs = _real_roots(elim)
    else:
        res = _resultant_x(c1, c2)
        if np.max(np.abs(res)) <= 1e-13 * pair_scale * pair_scale:
            res = _resultant_x(c1.swapped(), c2.swapped())
            if np.max(np.abs(res)) <= 1e-13 * pair_scale * pair_scale:
                raise ValueError("conics share a common component")
            swapped = True
            c1_work, c2_work = c1.swapped(), c2.swapped()
        else:
            c1_work, c2_work = c1, c2
        xs = _real_roots(res)
        c1, c2 = (c1_work, c2_work) if swapped else (c1, c2)
    for x in xs:
        ys = _y_candidates(c1, x) + _y_candidates(c2, x)
        candidates.extend((x, y) for y in ys)

    kept: list[tuple[float, float, float]] = []
    for x, y in candidates:
        x, y = _polish_intersection(c1, c2, x, y)
        if not (math.isfinite(x) and math.isfinite(y)):
            continue
        m = max(1.0, abs(x), abs(y)) ** 2
        resid = max(abs(c1.value(x, y)) / (s1 * m),
                    abs(c2.value(x, y)) / (s2 * m))
        if resid < 1e-9:
            kept.append((x, y, resid))
    dedup: list[tuple[float, float, float]] = []
    for x, y, r in sorted(kept, key=lambda t: (t[0], t[1])):
        if any((x - u) ** 2 + (y - v) ** 2 < 1e-16 for u, v, _ in dedup):
            continue
        dedup.append((x, y, r))
    dedup.sort(key=lambda t: t[2])
    points = [(y, x) if swapped else (x, y) for x, y, _ in dedup[:4]]
    return sorted(points)


# ----------------------------------------------------------------------
# Level 2: three-fold system (conic pair)
# ----------------------------------------------------------------------

@dataclass
class TripleSystem:
    """Level-2 mixing system reduced to two conics plus log perturbations.

    Unknowns are (c2, c3) with c1 = 1 - c2 - c3; the polynomial parts are
    ``conics`` (constant terms live in the omega evaluators for assembled
    systems, but the ConicCoeffs F slots are honored when set), and
    ``omega`` holds the two log-perturbation evaluators (None means
    identically zero).  Assembled systems carry the pairing matrix and
    the cached log-term evaluator for correction recovery and residuals.
    """

    conics: tuple[ConicCoeffs, ConicCoeffs]
    omega: tuple[Callable[[float, float], float],
                 Callable[[float, float], float]] | None = None
    nondegeneracy: float = 1.0
    alpha2: float = 1.0
    sigma: float = 0.25
    pmat: np.ndarray | None = None
    log_terms: Callable[..., tuple[float, ...]] | None = None
    meta: dict = field(default_factory=dict)

    def equation(self, i: int, c2: float, c3: float) -> float:
        val = self.conics[i].value(c2, c3)
        if self.omega is not None:
            val += self.omega[i](c2, c3)
        return val

    def _rhs_parts(self, c2: float, c3: float):
        l_vals = self.log_terms(c2, c3)
        p, s = self.pmat, self.sigma
        q = p[:, [0]] - p  # q[i, j] = p[i, 0] - p[i, j]
        b = np.array([l_vals[i] - s * p[i, 0]
                      + s * (q[i, 1] * c2 + q[i, 2] * c3) for i in range(3)])
        return l_vals, p, s, q, b

    def mu_of(self, c2: float, c3: float) -> tuple[float | None, str]:
        """First-order correction plus the recovery method used."""
        if self.log_terms is None or self.pmat is None:
            return None, "unavailable"
        l_vals, p, s, q, b = self._rhs_parts(c2, c3)
        if abs(c3 - c2) < 1e-6:
            delta = np.array([1.0 - c2 - c3, c2, c3])
            return float(-(delta @ b) / (delta @ delta)), "least-squares"
        mu = ((l_vals[1] - l_vals[2]) - s * (p[1, 0] - p[2, 0])
              + s * (q[1, 1] - q[2, 1]) * c2
              + s * (q[1, 2] - q[2, 2]) * c3) / (c3 - c2)
        return float(mu), "elimination"

    def residual_raw(self, c2: float, c3: float,
                     mu: float) -> tuple[float, float, float]:
        """Residuals of the three un-reduced level equations."""
        if self.log_terms is None or self.pmat is None:
            raise ValueError("raw residuals need an assembled system")
        _, _, _, _, b = self._rhs_parts(c2, c3)
        delta = np.array([1.0 - c2 - c3, c2, c3])
        eqs = b + delta * mu
        return float(eqs[0]), float(eqs[1]), float(eqs[2])


def assemble_triple(model: KernelModel, pairs: EigenPairSet,
                    cfg: SingularQuadConfig | None = None,
                    extent: float = DEFAULT_EXTENT_2D,
                    spacing: float = DEFAULT_SPACING_2D) -> TripleSystem:
    """Assemble the three-fold level-2 system on a planar tensor grid."""
    betas = _LEVEL2
    _require_planar(model, pairs, betas)
    grid = tensor_grid_2d(extent, spacing)
    wq = quadrature_weights(grid)
    n = model.dim
    alpha2 = (n + 2) / 4.0
    sigma = alpha2 / 4.0

    p = _pairing_matrix(model, pairs, betas, grid)
    q = p[:, [0]] - p
    a1 = -sigma * (q[0, 1] + q[1, 1] - q[2, 1])
    b1 = sigma * (q[0, 2] - q[1, 2] + q[2, 2])
    c1 = sigma * (2.0 * (p[1, 0] - p[2, 0]) - (p[1, 1] - p[2, 1]) + p[0, 0])
    d1 = sigma * (2.0 * (p[1, 0] - p[2, 0]) - (p[1, 2] - p[2, 2]) - p[0, 0])
    e1 = sigma * ((p[0, 2] - p[0, 1])
                  - (2.0 * p[1, 0] - p[1, 1] - p[1, 2]
                     - 2.0 * p[2, 0] + p[2, 1] + p[2, 2]))
    a2 = -sigma * q[2, 1]
    b2 = sigma * q[1, 2]
    c2c = sigma * p[2, 0]
    d2 = -sigma * p[1, 0]
    e2 = sigma * (q[1, 1] - q[2, 2])
    nondeg = ((p[0, 2] - p[0, 0]) * (p[1, 2] - p[1, 1])
              - (p[0, 2] - p[0, 1]) * (p[1, 2] - p[1, 0]))

    # Coordinate-swap symmetry is wired in at the array level: the third
    # level function is the transpose of the first, the middle one is
    # symmetrized, and the swap-related weight fields are stored as exact
    # transposes, so the mirrored identities hold to rounding discretely.
    psi1 = eigenfunction(model, betas[0], grid).values
    p2raw = eigenfunction(model, betas[1], grid).values
    psi2 = 0.5 * (p2raw + p2raw.T)
    a_funcs = [psi1, psi2, np.ascontiguousarray(psi1.T)]
    glap1 = _grad_lap_values(model, betas[0], grid)
    g2raw = _grad_lap_values(model, betas[1], grid)
    g2sym = 0.5 * (g2raw[0] + g2raw[1].T)
    glap = [glap1,
            [g2sym, np.ascontiguousarray(g2sym.T)],
            [np.ascontiguousarray(glap1[1].T),
             np.ascontiguousarray(glap1[0].T)]]
    _, adj_grads = _adjoint_samples(pairs, betas, grid)
    w_funcs = [[sum(adj_grads[i][d] * glap[q][d] for d in (0, 1))
                for q in range(3)] for i in range(2)]
    w_funcs[1][1] = 0.5 * (w_funcs[1][1] + w_funcs[1][1].T)
    w_funcs[1][2] = np.ascontiguousarray(w_funcs[1][0].T)
    w_funcs.append([np.ascontiguousarray(w_funcs[0][2].T),
                    np.ascontiguousarray(w_funcs[0][1].T),
                    np.ascontiguousarray(w_funcs[0][0].T)])
    cfg = _auto_cfg(cfg)
    log_terms = _LogTerms(a_funcs, w_funcs, wq, grid.kind, cfg,
                          mirror=_mirror_triple)

    const1 = -sigma * (p[1, 0] - p[2, 0])

    def omega1(c2: float, c3: float) -> float:
        l1, l2, l3 = log_terms(c2, c3)
        return (c3 * (l1 - l2 + l3) - c2 * (l1 + l2 - l3)
                + (l2 - l3) + const1)

    def omega2(c2: float, c3: float) -> float:
        _, l2, l3 = log_terms(c2, c3)
        return c3 * l2 - c2 * l3

    # the first-listed level function against its own radial stretch,
    # without the adjoint: an alternative reading of the c2 coefficient
    y1, y2 = grid.mesh()
    g1p, g2p = _grad_values(model, betas[0], grid)
    u11 = integrate(SampledField(grid, psi1 * (y1 * g1p + y2 * g2p)))
    meta = {
        "grid_extent": extent,
        "grid_spacing": spacing,
        "exclusion_radius": cfg.exclusion_radius,
        "extrapolation_levels": cfg.extrapolation_levels,
        # equivalent printed forms of the first conic's c2 coefficient,
        # kept for cross-checking (see decision ledger)
        "variant_C1_adjoint_minus":
            sigma * (2.0 * (p[1, 0] - p[2, 0])
                     - (p[1, 1] - p[2, 1]) - p[0, 0]),
        "variant_C1_plain_minus":
            sigma * (2.0 * (p[1, 0] - p[2, 0]) - (p[1, 1] - p[2, 1]) - u11),
    }
    return TripleSystem(
        conics=(ConicCoeffs(A=a1, B=b1, C=c1, D=d1, E=e1),
                ConicCoeffs(A=a2, B=b2, C=c2c, D=d2, E=e2)),
        omega=(omega1, omega2), nondegeneracy=nondeg, alpha2=alpha2,
        sigma=sigma, pmat=p, log_terms=log_terms, meta=meta)


def _newton_2d(g1, g2, x0: float, y0: float, max_iters: int,
               tol: float = 1e-11, step: float = 1e-7):
    x, y = float(x0), float(y0)
    best = math.inf
    since_gain = 0
    for it in range(1, max_iters + 1):
        f1, f2 = g1(x, y), g2(x, y)
        if max(abs(f1), abs(f2)) < tol:
            return x, y, it, True
        if max(abs(f1), abs(f2)) < 0.5 * best:
            best, since_gain = max(abs(f1), abs(f2)), 0
        else:
            since_gain += 1
            if since_gain >= _STALL_ITERS:
                return x, y, it, False
        f1x, f2x = g1(x + step, y), g2(x + step, y)
        f1y, f2y = g1(x, y + step), g2(x, y + step)
        j11, j12 = (f1x - f1) / step, (f1y - f1) / step
        j21, j22 = (f2x - f2) / step, (f2y - f2) / step
        det = j11 * j22 - j12 * j21
        if det == 0.0 or not math.isfinite(det):
            return x, y, it, False
        dx = (f1 * j22 - f2 * j12) / det
        dy = (f2 * j11 - f1 * j21) / det
        norm = math.hypot(dx, dy)
        if norm > 0.5:
            dx, dy = dx / norm * 0.5, dy / norm * 0.5
        x -= dx
        y -= dy
        if not (math.isfinite(x) and math.isfinite(y)) \
                or abs(x) > 5.0 or abs(y) > 5.0:
            return x, y, it, False
    return x, y, max_iters, max(abs(g1(x, y)), abs(g2(x, y))) < tol


def solve_triple(system: TripleSystem, max_iters: int = NEWTON_MAX_ITERS,
                 lattice: int = 13) -> list[BranchSolution]:
    """Roots of the level-2 pair on (c2, c3) in [0, 1]^2.

    Seeds are the intersection points of the two polynomial conics plus
    the centers of lattice cells where both equations change sign; each
    seed is Newton-polished on the full pair.  The correction is
    recovered by elimination, falling back to a flagged least-squares
    fit when c2 and c3 coincide at a root.
    """
    if abs(system.nondegeneracy) < NONDEGENERACY_MIN:
        raise ValueError("level pairing matrix is numerically degenerate; "
                         "root existence reasoning does not apply")

    def _safe(i: int):
        # isolated mixing ratios can defeat the band extrapolation (the
        # combined field's zero set loses transversality there); such
        # points are unusable, not fatal — NaN makes every sign test and
        # Newton acceptance reject them
        def wrapped(x: float, y: float) -> float:
            try:
                return system.equation(i, x, y)
            except ValueError:
                return math.nan
        return wrapped

    g1, g2 = _safe(0), _safe(1)

    seeds: list[tuple[float, float]] = []
    conic_scale = max(system.conics[0].scale(), system.conics[1].scale())
    if conic_scale > 0.0:
        try:
            seeds.extend(intersect_conics(*system.conics))
        except ValueError:
            pass

    xs = np.linspace(0.0, 1.0, lattice)
    grid1 = np.array([[g1(x, y) for y in xs] for x in xs])
    grid2 = np.array([[g2(x, y) for y in xs] for x in xs])
    for i in range(lattice - 1):
        for j in range(lattice - 1):
            cell1 = grid1[i:i + 2, j:j + 2]
            cell2 = grid2[i:i + 2, j:j + 2]
            if cell1.min() < 0.0 < cell1.max() \
                    and cell2.min() < 0.0 < cell2.max():
                seeds.append((0.5 * (xs[i] + xs[i + 1]),
                              0.5 * (xs[j] + xs[j + 1])))
    omega_sup = (0.0, 0.0)
    if system.omega is not None:
        sups = []
        for i, gv in ((0, grid1), (1, grid2)):
            con = np.array([[system.conics[i].value(x, y) for y in xs]
                            for x in xs])
            diff = np.abs(gv - con)
            fin = np.isfinite(diff)
            sups.append(float(np.max(diff[fin])) if fin.any() else math.inf)
        omega_sup = tuple(sups)

    found: list[tuple[float, float, int, float]] = []
    for sx, sy in seeds:
        if not (-SEED_SLACK <= sx <= 1.0 + SEED_SLACK
                and -SEED_SLACK <= sy <= 1.0 + SEED_SLACK):
            continue
        x, y, iters, ok = _newton_2d(g1, g2, sx, sy, max_iters)
        if not ok:
            continue
        if not (-1e-12 <= x <= 1.0 + 1e-12
                and -1e-12 <= y <= 1.0 + 1e-12):
            continue
        x = min(max(x, 0.0), 1.0)
        y = min(max(y, 0.0), 1.0)
        resid = max(abs(g1(x, y)), abs(g2(x, y)))
        if resid < ROOT_TOL:
            found.append((x, y, iters, resid))

    def _dedup2d(items):
        kept: list[tuple[float, float, int, float]] = []
        for item in sorted(items, key=lambda t: (t[0], t[1])):
            if any((item[0] - u) ** 2 + (item[1] - v) ** 2 < DEDUP_TOL ** 2
                   for u, v, _, _ in kept):
                continue
            kept.append(item)
        return kept

    dedup = _dedup2d(found)

    # the assembled pair is covariant under the coordinate swap, which
    # relabels the mixing coefficients (c1, c2, c3) -> (c3, c2, c1); the
    # root set is therefore closed under (x, y) -> (x, 1 - x - y).  When
    # a partner seed's Newton run wandered to a different basin, recover
    # the partner by polishing from the mirrored root, keeping it only
    # if it converges onto the mirror point with a root-grade residual.
    for x, y, _, _ in list(dedup):
        xm, ym = x, 1.0 - x - y
        if any((xm - u) ** 2 + (ym - v) ** 2 < DEDUP_TOL ** 2
               for u, v, _, _ in dedup):
            continue
        xr, yr, it2, ok = _newton_2d(g1, g2, xm, ym, max_iters)
        if not ok:
            continue
        if (xr - xm) ** 2 + (yr - ym) ** 2 > (10.0 * DEDUP_TOL) ** 2:
            continue
        r2 = max(abs(g1(xr, yr)), abs(g2(xr, yr)))
        if r2 < ROOT_TOL:
            dedup.append((min(max(xr, 0.0), 1.0),
                          min(max(yr, 0.0), 1.0), it2, r2))
    dedup = _dedup2d(dedup)

    out = []
    for x, y, iters, resid in dedup:
        mu, method = (None, "unavailable")
        if system.log_terms is not None and system.pmat is not None:
            mu, method = system.mu_of(x, y)
        controlled = [bool(omega_sup[i]
                           <= abs(system.conics[i].value(x, y)) + 1e-300)
                      for i in (0, 1)] if system.omega is not None else \
                     [True, True]
        meta = {
            "mu_recovery": method,
            "omega_sup": omega_sup,
            "controlled": controlled,
            "root_count": len(dedup),
        }
        out.append(BranchSolution(
            level=2,
            coefficients={(2, 0): 1.0 - x - y, (1, 1): x, (0, 2): y},
            mu_first=mu,
            residual=resid,
            newton_iters=iters,
            meta=meta))
    return out
