"""Evolution module: moments, dual evolution paths, decay rates.

Checks are cross-path (expansion vs convolution), against closed decay
rates e^{-|beta| tau / 4}, and against exactly-known moment values.
"""

import math

import numpy as np
import pytest

from simfilm import kernel, semigroup, spectral
from simfilm.fields import SampledField, integrate, uniform_grid_1d


@pytest.fixture(scope="module")
def model():
    return kernel.build_kernel(1, 2, max_deriv=8)


@pytest.fixture(scope="module")
def ygrid():
    return uniform_grid_1d(40.0, 0.05)


@pytest.fixture(scope="module")
def pairs(model, ygrid):
    return spectral.build_eigenpairs(model, 8, ygrid)


@pytest.fixture(scope="module")
def bump_grid():
    return uniform_grid_1d(1.5, 0.005)


# ----------------------------------------------------------------------
# Moments
# ----------------------------------------------------------------------

def test_momentum_of_kernel(model):
    g = uniform_grid_1d(32.0, 0.01)
    f = kernel.eval_kernel(model, g)
    assert abs(semigroup.momentum(f, (0,)) - 1.0) < 1e-8
    assert abs(semigroup.momentum(f, (1,))) < 1e-10


def test_momentum_matches_direct_sum(bump_grid):
    u0 = semigroup.default_bump(bump_grid)
    got = semigroup.momentum(u0, (2,))
    z = bump_grid.axes[0]
    ref = np.trapezoid(z ** 2 * u0.values, z) / math.sqrt(2.0)
    assert abs(got - ref) < 1e-10


def test_momentum_rejects_boundary_support(model):
    g = uniform_grid_1d(3.0, 0.05)
    f = kernel.eval_kernel(model, g)
    with pytest.raises(ValueError):
        semigroup.momentum(f, (0,))


def test_moment_set_mass(bump_grid):
    from simfilm.fields import multi_indices
    u0 = semigroup.default_bump(bump_grid)
    ms = semigroup.moment_set(u0, multi_indices(1, 2), source="bump")
    assert abs(ms.values[(0,)] - 1.0) < 1e-12


# ----------------------------------------------------------------------
# Convolution path
# ----------------------------------------------------------------------

def test_convolution_rejects_tau_zero(model, bump_grid):
    u0 = semigroup.default_bump(bump_grid)
    with pytest.raises(ValueError):
        semigroup.evolve_convolution(model, u0, 0.0)


def test_convolution_linearity_bitwise(model, bump_grid, ygrid):
    u0 = semigroup.default_bump(bump_grid)
    w1 = semigroup.evolve_convolution(model, u0, 1.0, ygrid)
    u2 = u0.copy_with(2.0 * u0.values)
    w2 = semigroup.evolve_convolution(model, u2, 1.0, ygrid)
    assert np.array_equal(w2.values, 2.0 * w1.values)


def test_mass_invariance(model, bump_grid, ygrid):
    u0 = semigroup.default_bump(bump_grid)
    for tau in (1.0, 2.0, 4.0):
        w = semigroup.evolve_convolution(model, u0, tau, ygrid)
        assert abs(semigroup.momentum(w, (0,)) - 1.0) < 1e-8, tau


def test_long_time_limit_is_kernel(model, bump_grid, ygrid):
    u0 = semigroup.default_bump(bump_grid)
    tau = 4.0 * math.log(10.0)
    w = semigroup.evolve_convolution(model, u0, tau, ygrid)
    f = kernel.eval_kernel(model, ygrid)
    diff = SampledField(ygrid, (w.values - f.values) ** 2)
    assert math.sqrt(integrate(diff)) < 1e-3


# ----------------------------------------------------------------------
# Expansion path and agreement
# ----------------------------------------------------------------------

def test_expansion_agrees_with_convolution(model, pairs, bump_grid, ygrid):
    u0 = semigroup.default_bump(bump_grid)
    for tau in (1.0, 2.0, 4.0):
        we = semigroup.evolve_expansion(pairs, u0, tau, truncation=8)
        wc = semigroup.evolve_convolution(model, u0, tau, ygrid)
        cmpres = semigroup.compare(we, wc)
        assert cmpres.l2_error < 1e-4, (tau, cmpres.l2_error)
        assert cmpres.truncation == 8
        assert cmpres.tau == tau


def test_expansion_error_decreases_with_truncation(pairs, bump_grid, ygrid):
    u0 = semigroup.default_bump(bump_grid)
    proj = semigroup.evolve_convolution(pairs.model, u0, 1.0, ygrid)
    errs = []
    for k in (0, 2, 4, 8):
        we = semigroup.evolve_expansion(pairs, u0, 1.0, truncation=k)
        errs.append(semigroup.compare(we, proj).l2_error)
    assert errs[3] < errs[2] < errs[1] < errs[0]


def test_truncation_remainder_slope(model, pairs, ygrid):
    # off-center bump: all moments nonzero, so the K=4 remainder decays
    # like e^{-5 tau / 4}
    g = uniform_grid_1d(1.5, 0.005)
    u0 = semigroup.default_bump(g, center=0.3)
    taus = [1.0, 2.0, 3.0, 4.0]
    errs = []
    for tau in taus:
        we = semigroup.evolve_expansion(pairs, u0, tau, truncation=4)
        wc = semigroup.evolve_convolution(model, u0, tau, ygrid)
        errs.append(semigroup.compare(we, wc).l2_error)
    slope = semigroup.decay_slope(taus, errs)
    assert slope <= -5.0 / 4.0 + 0.05, slope


def test_decay_slope_mass_zero_data(model, ygrid):
    g = uniform_grid_1d(1.5, 0.005)
    bp = semigroup.default_bump(g, center=0.3)
    bm = semigroup.default_bump(g, center=-0.3)
    u0 = SampledField(g, 0.5 * (bp.values - bm.values))
    assert abs(semigroup.momentum(u0, (0,))) < 1e-14
    assert abs(semigroup.momentum(u0, (1,))) > 0.1
    taus = [4.0, 5.0, 6.0, 7.0]
    norms = [semigroup.l2_norm(semigroup.evolve_convolution(model, u0, t,
                                                            ygrid))
             for t in taus]
    slope = semigroup.decay_slope(taus, norms)
    assert abs(slope + 0.25) / 0.25 < 0.05, slope


def test_zero_through_order_two_data_slope(model, pairs, ygrid):
    # subtract the first three expansion terms; remaining moments vanish
    # through order 2 and the evolved norm decays like e^{-3 tau / 4}.
    # The subtracted eigenfunctions have slow tails, so the data grid must
    # be wide enough for them to die off.
    g = uniform_grid_1d(30.0, 0.005)
    bump = semigroup.default_bump(g, center=0.2)
    u0 = semigroup.remove_moments(model, bump, 2)
    for k in range(3):
        assert abs(semigroup.momentum(u0, (k,))) < 1e-12
    taus = [2.0, 3.0, 4.0, 5.0]
    norms = [semigroup.l2_norm(semigroup.evolve_convolution(model, u0, t,
                                                            ygrid))
             for t in taus]
    slope = semigroup.decay_slope(taus, norms)
    assert slope <= -0.75 + 0.05, slope
