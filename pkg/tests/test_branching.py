"""Banded log quadrature, level systems, and conic utilities.

Frozen oracles used here:
  * int_{-1}^{1} ln|y| dy = -2 exactly;
  * int_R exp(-y^2) ln|y| dy = -sqrt(pi) (gamma + 2 ln 2) / 2
    = -1.7401154534567558... (gamma the Euler constant);
  * the sum of the two assembled level-1 log inner products is
    independent of the mixing ratio in the continuum and equals
    0.1297316796 (adaptive radial quadrature on the closed-form
    integrands, cross-checked by a principal-value evaluation);
  * the level-1 first-order correction is -9/16 - 0.1297316796
    = -0.6922316796 at every mixing ratio;
  * the level-1 pairing matrix is diag(-3, -3) and the level-2 one
    diag(-4, -4, -4) in the continuum, giving nondegeneracy gaps of
    -3 and 16;
  * two unit circles centered at (0,0) and (1,0) intersect exactly at
    (1/2, +-sqrt(3)/2); the ellipse pair x^2 + 4 y^2 = 1, 4 x^2 + y^2
    = 1 intersects at the four points (+-1/sqrt(5), +-1/sqrt(5)).
"""

import math
import warnings

import numpy as np
import pytest

from simfilm import _accel, branching
from simfilm.branching import (BAND_CELLS_DEFAULT, ConicCoeffs, DipoleSystem,
                               SingularQuadConfig, TripleSystem, assemble_k0,
                               classify_conic, intersect_conics,
                               singular_inner_product, solve_dipole,
                               solve_triple)
from simfilm.fields import (RADIAL, TENSOR_2D, UNIFORM_1D, SampledField,
                            integrate, quadrature_weights, radial_grid,
                            tensor_grid_2d, uniform_grid_1d)
from simfilm.kernel import build_kernel
from simfilm.spectral import build_eigenpairs

EULER_GAMMA = 0.5772156649015329
GAUSS_LOG = -math.sqrt(math.pi) * (EULER_GAMMA + 2.0 * math.log(2.0)) / 2.0
# continuum sum of the two level-1 log inner products (mixing-independent)
LOG_SUM_ORACLE = 0.1297316796
MU1_ORACLE = -9.0 / 16.0 - LOG_SUM_ORACLE


def _field(grid, values):
    return SampledField(grid, np.asarray(values, dtype=np.float64))


def _sip(grid, w, a, cfg, flux=None):
    ones = np.ones(grid.shape)
    return singular_inner_product(
        _field(grid, w), _field(grid, a),
        _field(grid, ones if flux is None else flux), cfg)


# ----------------------------------------------------------------------
# Quadrature weights match the integrator on every grid kind
# ----------------------------------------------------------------------

@pytest.mark.parametrize("grid", [
    uniform_grid_1d(3.0, 0.01),
    radial_grid(3.0, 0.01),
    tensor_grid_2d(3.0, 0.05),
])
def test_weights_match_integrate(grid):
    rng = np.random.default_rng(7)
    v = rng.standard_normal(grid.shape)
    direct = float(np.sum(quadrature_weights(grid) * v))
    assert math.isclose(direct, integrate(_field(grid, v)), rel_tol=1e-13)


# ----------------------------------------------------------------------
# Logarithmic quadrature: exact examples
# ----------------------------------------------------------------------

def test_log_integral_unit_interval_absolute():
    grid = uniform_grid_1d(1.0, 2e-4)
    y = grid.axes[0]
    cfg = SingularQuadConfig(exclusion_radius=0.05, extrapolation_levels=3)
    val = _sip(grid, np.ones_like(y), y, cfg)
    assert abs(val - (-2.0)) < 1e-6


def test_log_integral_unit_interval_relative_band():
    grid = uniform_grid_1d(1.0, 1e-4)
    y = grid.axes[0]
    cfg = SingularQuadConfig(exclusion_radius=16.0, extrapolation_levels=3,
                             relative=True)
    val = _sip(grid, np.ones_like(y), y, cfg)
    assert abs(val - (-2.0)) < 3e-6


@pytest.fixture(scope="module")
def gauss_grid():
    return uniform_grid_1d(8.0, 1e-3)


def test_gaussian_log_absolute(gauss_grid):
    y = gauss_grid.axes[0]
    w = np.exp(-y * y)
    cfg = SingularQuadConfig(exclusion_radius=0.05, extrapolation_levels=3)
    val = _sip(gauss_grid, w, y, cfg)
    assert abs(val - GAUSS_LOG) < 1e-3


def test_gaussian_log_extrapolation_pays(gauss_grid):
    y = gauss_grid.axes[0]
    w = np.exp(-y * y)
    cfg3 = SingularQuadConfig(exclusion_radius=0.05, extrapolation_levels=3)
    cfg2 = SingularQuadConfig(exclusion_radius=0.05, extrapolation_levels=2)
    err3 = abs(_sip(gauss_grid, w, y, cfg3) - GAUSS_LOG)
    err2 = abs(_sip(gauss_grid, w, y, cfg2) - GAUSS_LOG)
    assert err3 * 10.0 < err2


def test_gaussian_log_relative_band(gauss_grid):
    y = gauss_grid.axes[0]
    w = np.exp(-y * y)
    cfg = SingularQuadConfig(exclusion_radius=16.0, extrapolation_levels=3,
                             relative=True)
    val = _sip(gauss_grid, w, y, cfg)
    assert abs(val - GAUSS_LOG) < 1e-4


def test_silent_sign_noise_is_ignored(gauss_grid):
    # beyond |y| = 6 the weight is ~1e-16 of its peak; alternating-sign
    # noise planted there must be treated as quadrature silence, not as
    # a forest of zero crossings
    y = gauss_grid.axes[0]
    w = np.exp(-y * y)
    a = y.copy()
    mask = np.abs(y) > 6.0
    alt = np.where(np.arange(y.size) % 2 == 0, 1e-13, -1e-13)
    a[mask] = alt[mask]
    cfg = SingularQuadConfig(exclusion_radius=0.05, extrapolation_levels=3)
    val = _sip(gauss_grid, w, a, cfg)
    assert abs(val - GAUSS_LOG) < 1.5e-3


def test_non_isolated_crossings_raise(gauss_grid):
    y = gauss_grid.axes[0]
    w = np.exp(-y * y)
    a = np.sin(y / 4e-4)  # crossings ~1.26 cells apart
    cfg = SingularQuadConfig(exclusion_radius=0.05)
    with pytest.raises(ValueError, match="isolated"):
        _sip(gauss_grid, w, a, cfg)


def test_band_swallowing_mass_raises(gauss_grid):
    y = gauss_grid.axes[0]
    w = np.exp(-y * y)
    cfg = SingularQuadConfig(exclusion_radius=4.0, extrapolation_levels=3)
    with pytest.raises(ValueError, match="exclusion band still holds"):
        _sip(gauss_grid, w, y, cfg)


def test_zero_weight_is_zero(gauss_grid):
    y = gauss_grid.axes[0]
    cfg = SingularQuadConfig(exclusion_radius=0.05)
    assert _sip(gauss_grid, np.zeros_like(y), y, cfg) == 0.0


def test_crossing_free_relative_band_is_plain_sum(gauss_grid):
    y = gauss_grid.axes[0]
    w = np.exp(-y * y)
    a = 2.0 + np.sin(y)
    cfg = SingularQuadConfig(exclusion_radius=16.0, relative=True)
    val = _sip(gauss_grid, w, a, cfg)
    plain = float(np.sum(quadrature_weights(gauss_grid) * w * np.log(a)))
    assert math.isclose(val, plain, rel_tol=1e-12)


def test_band_missing_log_argument_is_plain_sum(gauss_grid):
    y = gauss_grid.axes[0]
    w = np.exp(-y * y)
    a = 1.0 + y * y  # stays above twice the coarsest band radius
    cfg = SingularQuadConfig(exclusion_radius=0.05, extrapolation_levels=3)
    val = _sip(gauss_grid, w, a, cfg)
    plain = float(np.sum(quadrature_weights(gauss_grid) * w * np.log(a)))
    assert math.isclose(val, plain, rel_tol=1e-12)


def test_growing_corrections_raise():
    with pytest.raises(ValueError, match="grow"):
        branching._extrapolate([8.0, 4.0, 2.0], [0.0, 1e-3, 9e-3], ref=0.5)


def test_growing_noise_below_reference_passes():
    # corrections at rounding scale relative to the weight mass must not
    # trip the growing-corrections guard (integrals that vanish by
    # symmetry produce exactly this pattern)
    val = branching._extrapolate([8.0, 4.0, 2.0], [1e-19, 2e-19, 9e-18],
                                 ref=1.0)
    assert abs(val) < 1e-16


# ----------------------------------------------------------------------
# Distances to the zero set
# ----------------------------------------------------------------------

def test_distance_cells_line_1d():
    arr = np.linspace(0.0, 1.0, 11) - 0.35  # crossing at cell 3.5
    dist = branching._distance_cells(arr, UNIFORM_1D, 8.0)
    expect = np.abs(np.arange(11, dtype=float) - 3.5)
    assert np.allclose(dist, expect, atol=1e-12)


def test_crossing_points_linear_column():
    arr = np.tile((np.arange(6, dtype=float) - 2.3)[:, None], (1, 5))
    pts = branching._crossing_points(arr)
    assert pts.shape == (5, 2)
    assert np.allclose(pts[:, 0], 2.3)
    assert np.array_equal(np.sort(pts[:, 1]), np.arange(5, dtype=float))


@pytest.mark.skipif(not _accel.HAVE_NUMBA, reason="single lane available")
def test_nearest_distance_lanes_agree(monkeypatch):
    rng = np.random.default_rng(3)
    shape = (73, 61)
    px = rng.uniform(0, shape[0] - 1, 500)
    py = rng.uniform(0, shape[1] - 1, 500)
    qi, qj = np.meshgrid(np.arange(shape[0]), np.arange(shape[1]),
                         indexing="ij")
    qi, qj = qi.ravel(), qj.ravel()
    monkeypatch.setattr(_accel, "USE_NUMBA", True)
    d_nb = _accel.nearest_dist_2d(px, py, qi, qj, shape, 120.0)
    monkeypatch.setattr(_accel, "USE_NUMBA", False)
    d_np = _accel.nearest_dist_2d(px, py, qi, qj, shape, 120.0)
    assert np.max(np.abs(d_nb - d_np)) < 1e-12


# ----------------------------------------------------------------------
# First-order correction recovery: elimination identities
# ----------------------------------------------------------------------

def test_dipole_correction_solves_summed_pair():
    rng = np.random.default_rng(11)
    p = rng.standard_normal((2, 2))
    sys_d = DipoleSystem(A=0.0, B=0.0, C=0.0, pmat=p, sigma=3.0 / 16.0,
                         log_terms=lambda c2: (0.4 + 0.1 * c2,
                                               -0.2 + 0.05 * c2 * c2))
    for c2 in rng.uniform(0.0, 1.0, 8):
        mu = sys_d.mu_of(float(c2))
        e1, e2 = sys_d.residual_raw(float(c2), mu)
        assert abs(e1 + e2) < 1e-13


def test_triple_correction_elimination_and_fallback():
    rng = np.random.default_rng(12)
    p = rng.standard_normal((3, 3))
    sys_t = TripleSystem(
        conics=(ConicCoeffs(A=1.0, B=1.0), ConicCoeffs(A=1.0, B=-1.0)),
        pmat=p, sigma=0.25,
        log_terms=lambda c2, c3: (0.3 + 0.1 * c2, -0.1 + 0.2 * c3,
                                  0.05 * (c2 + c3)))
    for _ in range(8):
        c2, c3 = rng.uniform(0.0, 1.0, 2)
        if abs(c3 - c2) < 1e-3:
            c3 += 0.1
        mu, method = sys_t.mu_of(float(c2), float(c3))
        assert method == "elimination"
        r = sys_t.residual_raw(float(c2), float(c3), mu)
        # elimination kills the difference of the last two equations
        assert abs(r[1] - r[2]) < 1e-12
    mu, method = sys_t.mu_of(0.37, 0.37)
    assert method == "least-squares"
    r = np.array(sys_t.residual_raw(0.37, 0.37, mu))
    delta = np.array([1.0 - 0.74, 0.37, 0.37])
    # least squares leaves the residual orthogonal to the direction
    assert abs(float(delta @ r)) < 1e-12


# ----------------------------------------------------------------------
# Synthetic level-1 systems: root finding on known polynomials
# ----------------------------------------------------------------------

def test_synthetic_dipole_two_roots():
    sys_d = DipoleSystem(A=1.0, B=-1.0, C=3.0 / 16.0)
    sols = solve_dipole(sys_d)
    roots = sorted(s.coefficients[(0, 1)] for s in sols)
    assert np.allclose(roots, [0.25, 0.75], atol=1e-9)
    cond = sols[0].meta["conditions"]
    assert cond["a"] and cond["b"] and cond["c"] and cond["controlled"]
    assert cond["expected_roots"] == "exactly 2"
    assert cond["root_count"] == 2
    assert all(s.mu_first is None for s in sols)
    assert all(abs(sum(s.coefficients.values()) - 1.0) < 1e-12 for s in sols)


def test_synthetic_dipole_double_root():
    sys_d = DipoleSystem(A=1.0, B=-2.0, C=1.0)
    sols = solve_dipole(sys_d)
    roots = sorted(s.coefficients[(0, 1)] for s in sols)
    assert len(roots) == 1
    assert abs(roots[0] - 1.0) < 1e-6
    assert sols[0].meta["conditions"]["expected_roots"] == "at least 1"


def test_synthetic_dipole_linear_fallback_warns():
    sys_d = DipoleSystem(A=0.0, B=1.0, C=-0.3)
    with pytest.warns(UserWarning, match="linear"):
        sols = solve_dipole(sys_d)
    roots = [s.coefficients[(0, 1)] for s in sols]
    assert any(abs(r - 0.3) < 1e-9 for r in roots)
    assert sols[0].meta["conditions"]["linear_fallback"]


def test_synthetic_dipole_perturbed_roots_shift():
    sys_d = DipoleSystem(A=1.0, B=-1.0, C=3.0 / 16.0,
                         omega=lambda c2: 1e-3)
    sols = solve_dipole(sys_d)
    roots = sorted(s.coefficients[(0, 1)] for s in sols)
    disc = math.sqrt(1.0 - 4.0 * (3.0 / 16.0 + 1e-3))
    assert np.allclose(roots, [(1 - disc) / 2, (1 + disc) / 2], atol=1e-9)
    cond = sols[0].meta["conditions"]
    assert cond["controlled"] and cond["expected_roots"] == "exactly 2"


def test_degenerate_pairing_gap_raises():
    sys_d = DipoleSystem(A=1.0, B=-1.0, C=3.0 / 16.0, nondegeneracy=1e-12)
    with pytest.raises(ValueError, match="degenerate"):
        solve_dipole(sys_d)


# ----------------------------------------------------------------------
# Synthetic level-2 systems
# ----------------------------------------------------------------------

def test_synthetic_triple_single_root():
    sys_t = TripleSystem(conics=(
        ConicCoeffs(A=0.0, B=0.0, C=1.0, D=0.0, F=-0.3),
        ConicCoeffs(A=0.0, B=0.0, C=0.0, D=1.0, F=-0.4)))
    sols = solve_triple(sys_t)
    assert len(sols) == 1
    s = sols[0]
    assert abs(s.coefficients[(1, 1)] - 0.3) < 1e-9
    assert abs(s.coefficients[(0, 2)] - 0.4) < 1e-9
    assert abs(s.coefficients[(2, 0)] - 0.3) < 1e-9
    assert s.meta["mu_recovery"] == "unavailable"


def test_synthetic_triple_two_roots():
    sys_t = TripleSystem(conics=(
        ConicCoeffs(A=1.0, B=0.0, C=-0.9, D=0.0, F=0.1625),
        ConicCoeffs(A=0.0, B=0.0, C=0.0, D=1.0, F=-0.2)))
    sols = solve_triple(sys_t)
    pts = sorted((s.coefficients[(1, 1)], s.coefficients[(0, 2)])
                 for s in sols)
    assert len(pts) == 2
    assert np.allclose(pts, [(0.25, 0.2), (0.65, 0.2)], atol=1e-8)


# ----------------------------------------------------------------------
# Conic classification and intersection
# ----------------------------------------------------------------------

@pytest.mark.parametrize("conic, label", [
    (ConicCoeffs(A=1.0, B=1.0, F=-1.0), "circle"),
    (ConicCoeffs(A=2.0, B=1.0, F=-1.0), "ellipse"),
    (ConicCoeffs(A=1.0, B=-1.0, F=-1.0), "hyperbola"),
    (ConicCoeffs(A=0.0, B=1.0, C=-1.0), "parabola"),
    (ConicCoeffs(A=1.0, B=1.0, E=2.0, C=1.0, D=1.0), "degenerate"),
    (ConicCoeffs(A=0.0, B=0.0, C=1.0, D=1.0, F=-1.0), "degenerate"),
])
def test_classify_conic_examples(conic, label):
    assert classify_conic(conic).kind == label


def test_intersect_two_circles():
    c1 = ConicCoeffs(A=1.0, B=1.0, F=-1.0)
    c2 = ConicCoeffs(A=1.0, B=1.0, C=-2.0, F=0.0)
    pts = intersect_conics(c1, c2)
    assert len(pts) == 2
    expect = sorted([(0.5, -math.sqrt(3.0) / 2.0),
                     (0.5, math.sqrt(3.0) / 2.0)])
    for (x, y), (ex, ey) in zip(pts, expect):
        assert abs(x - ex) < 1e-10 and abs(y - ey) < 1e-10


def test_intersect_two_ellipses_four_points():
    c1 = ConicCoeffs(A=1.0, B=4.0, F=-1.0)
    c2 = ConicCoeffs(A=4.0, B=1.0, F=-1.0)
    pts = intersect_conics(c1, c2)
    assert len(pts) == 4
    t = 1.0 / math.sqrt(5.0)
    expect = sorted([(sx * t, sy * t) for sx in (-1, 1) for sy in (-1, 1)])
    for (x, y), (ex, ey) in zip(pts, expect):
        assert abs(x - ex) < 1e-10 and abs(y - ey) < 1e-10


def test_intersect_lines_linear_path():
    c1 = ConicCoeffs(A=0.0, B=0.0, C=1.0, D=1.0, F=-1.0)   # x + y = 1
    c2 = ConicCoeffs(A=0.0, B=0.0, C=1.0, D=-1.0)          # x - y = 0
    pts = intersect_conics(c1, c2)
    assert len(pts) == 1
    assert abs(pts[0][0] - 0.5) < 1e-12 and abs(pts[0][1] - 0.5) < 1e-12


def test_intersect_concentric_circles_empty():
    c1 = ConicCoeffs(A=1.0, B=1.0, F=-1.0)
    c2 = ConicCoeffs(A=1.0, B=1.0, F=-4.0)
    assert intersect_conics(c1, c2) == []


def test_intersect_shared_component_raises():
    c = ConicCoeffs(A=1.0, B=1.0, F=-1.0)
    scaled = ConicCoeffs(A=2.0, B=2.0, F=-2.0)
    with pytest.raises(ValueError, match="common component"):
        intersect_conics(c, scaled)


# ----------------------------------------------------------------------
# Level-0 correction
# ----------------------------------------------------------------------

@pytest.fixture(scope="module")
def line_pairs():
    model = build_kernel(1, 2, max_deriv=4)
    return model, build_eigenpairs(model, 0, uniform_grid_1d(10.0, 0.05))


def test_k0_line_anchor(line_pairs):
    model, pairs = line_pairs
    val = assemble_k0(model, pairs)
    assert abs(val - (-1.0 / 16.0)) < 0.02 * (1.0 / 16.0)


def test_k0_scale_invariance(line_pairs):
    model, pairs = line_pairs
    base = assemble_k0(model, pairs)
    scaled = assemble_k0(model, pairs, eigenfunction_scale=3.0)
    # exact invariance rests on a mass integral that vanishes only in
    # the continuum; the residue is that integral's quadrature error
    assert abs(base - scaled) < 5e-9


# ----------------------------------------------------------------------
# Assembled planar systems (session fixtures; several minutes)
# ----------------------------------------------------------------------

def test_dipole_pairing_swap_symmetry(dipole_system):
    p = dipole_system.pmat
    assert abs(p[0, 0] - p[1, 1]) < 1e-10
    assert abs(p[0, 1] - p[1, 0]) < 1e-10
    assert abs(p[0, 0] - (-3.0)) < 1e-3
    assert abs(dipole_system.nondegeneracy - (-3.0)) < 1e-3


def test_dipole_polynomial_part_vanishes(dipole_system):
    # the polynomial coefficients are pairing differences that cancel
    # identically for a radially symmetric kernel
    s = dipole_system
    assert max(abs(s.A), abs(s.B), abs(s.C)) < 1e-10


def test_dipole_log_sum_oracle(dipole_system):
    for c2 in (0.2, 0.3):
        l1, l2 = dipole_system.log_terms(c2)
        assert abs((l1 + l2) - LOG_SUM_ORACLE) < 5e-3


def test_dipole_log_terms_mirror_exactly(dipole_system):
    lt = dipole_system.log_terms
    l1a, l2a = lt(0.7)
    l1b, l2b = lt(0.3)
    assert l1a == l2b and l2a == l1b  # same cached evaluation, swapped
    w03 = dipole_system.equation(0.3) - dipole_system.quadratic(0.3)
    w07 = dipole_system.equation(0.7) - dipole_system.quadratic(0.7)
    assert abs(w03 + w07) < 1e-13


def test_dipole_correction_oracle(dipole_system):
    assert abs(dipole_system.mu_of(0.3) - MU1_ORACLE) < 5e-3
    assert abs(dipole_system.mu_of(0.5) - MU1_ORACLE) < 5e-3


def test_dipole_roots_closed_and_converged(dipole_solutions):
    assert dipole_solutions, "no level-1 roots found"
    cs = sorted(s.coefficients[(0, 1)] for s in dipole_solutions)
    for c in cs:
        assert min(abs((1.0 - c) - other) for other in cs) < 1e-8
    for s in dipole_solutions:
        assert s.residual < 1e-8
        assert abs(s.mu_first - MU1_ORACLE) < 1e-2
    cond = dipole_solutions[0].meta["conditions"]
    assert cond["root_count"] == len(dipole_solutions)
    if cond["expected_roots"] == "exactly 2":
        assert len(dipole_solutions) == 2
    else:
        assert len(dipole_solutions) >= 1


def test_dipole_raw_residuals_small(dipole_solutions, dipole_system):
    for s in dipole_solutions[:3]:
        c2 = s.coefficients[(0, 1)]
        e1, e2 = dipole_system.residual_raw(c2, s.mu_first)
        assert abs(e1) < 1e-8 and abs(e2) < 1e-8


def test_triple_pairing_swap_symmetry(triple_system):
    p = triple_system.pmat
    perm = [2, 1, 0]
    assert np.max(np.abs(p - p[perm][:, perm])) < 1e-10
    assert np.max(np.abs(np.diag(p) - (-4.0))) < 1e-3
    assert abs(triple_system.nondegeneracy - 16.0) < 1e-3


def test_triple_conics_near_degenerate(triple_system):
    # same cancellation as the level-1 polynomial part, up to the
    # discretization-error differences between the three pairings
    for con in triple_system.conics:
        assert con.scale() < 1e-4


def test_triple_log_terms_mirror_exactly(triple_system):
    lt = triple_system.log_terms
    for (c2, c3) in ((0.2, 0.3), (0.1, 0.6)):
        la = lt(c2, c3)
        lb = lt(c2, 1.0 - c2 - c3)
        for i in range(3):
            assert abs(la[i] - lb[2 - i]) < 1e-13


def test_triple_roots_closed_and_converged(triple_solutions):
    assert triple_solutions, "no level-2 roots found"
    pts = [(s.coefficients[(1, 1)], s.coefficients[(0, 2)])
           for s in triple_solutions]
    for (x, y) in pts:
        xm, ym = x, 1.0 - x - y
        assert min(math.hypot(xm - u, ym - v) for u, v in pts) < 1e-8
    for s in triple_solutions:
        assert s.residual < 1e-8
        assert s.meta["mu_recovery"] in ("elimination", "least-squares")
        assert abs(sum(s.coefficients.values()) - 1.0) < 1e-12
