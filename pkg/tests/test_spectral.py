"""Spectral pairs: exact coefficient identities and quadrature checks.

Hand-derived oracles frozen here:
  * Delta^2 y^4 = 24, Delta^2 y^5 = 120 y, Delta^2 y^8 = 1680 y^4,
    Delta^4 y^8 = 40320 (one variable);
  * Delta^2 (y1^2 y2^2) = 8 (two variables);
  * probabilists' Hermite: He_2 = x^2 - 1, He_4 = x^4 - 6x^2 + 3,
    giving brackets y^2 - 2 and y^4 - 12 y^2 + 12 after the y/sqrt(2)
    substitution;
  * Gaussian moments: int y^2 F = 2, int y^4 F = 12 for m = 1.
"""

import math
from fractions import Fraction

import numpy as np
import pytest

from simfilm import kernel, spectral
from simfilm.fields import (MultiIndex, SampledField, integrate, radial_grid,
                            tensor_grid_2d, uniform_grid_1d)

GRAM_H = 2.6
GRAM_L = 59.8


@pytest.fixture(scope="module")
def model_m2():
    return kernel.build_kernel(1, 2, max_deriv=8)


@pytest.fixture(scope="module")
def model_m1():
    return kernel.build_kernel(1, 1, max_deriv=8)


# ----------------------------------------------------------------------
# Eigenvalues
# ----------------------------------------------------------------------

def test_eigenvalues_exact():
    assert spectral.eigenvalue((0,)) == 0
    assert spectral.eigenvalue((1, 1)) == Fraction(-1, 2)
    assert spectral.eigenvalue((4,)) == Fraction(-1)
    assert spectral.eigenvalue((3, 2)) == Fraction(-5, 4)
    assert spectral.eigenvalue((2,), order=1) == Fraction(-1)
    assert isinstance(spectral.eigenvalue((1,)), Fraction)


# ----------------------------------------------------------------------
# Adjoint polynomials: exact brackets
# ----------------------------------------------------------------------

def test_adjoint_simple_cases():
    a0 = spectral.adjoint_polynomial((0,))
    assert a0.bracket.coeffs == {(0,): Fraction(1)}
    assert a0.norm_square == 1

    a2 = spectral.adjoint_polynomial((2,))
    assert a2.bracket.coeffs == {(2,): Fraction(1)}
    assert a2.norm_square == 2

    a4 = spectral.adjoint_polynomial((4,))
    assert a4.bracket.coeffs == {(4,): Fraction(1), (0,): Fraction(24)}
    assert a4.norm_square == 24

    a5 = spectral.adjoint_polynomial((5,))
    assert a5.bracket.coeffs == {(5,): Fraction(1), (1,): Fraction(120)}

    a8 = spectral.adjoint_polynomial((8,))
    assert a8.bracket.coeffs == {(8,): Fraction(1), (4,): Fraction(1680),
                                 (0,): Fraction(20160)}
    assert a8.norm_square == math.factorial(8)


def test_adjoint_two_dims():
    a = spectral.adjoint_polynomial((2, 2))
    assert a.bracket.coeffs == {(2, 2): Fraction(1), (0, 0): Fraction(8)}
    assert a.norm_square == 4
    b = spectral.adjoint_polynomial((4, 0))
    assert b.bracket.coeffs == {(4, 0): Fraction(1), (0, 0): Fraction(24)}
    c = spectral.adjoint_polynomial((1, 1))
    assert c.bracket.coeffs == {(1, 1): Fraction(1)}


def test_adjoint_degree_and_leading():
    for parts in [(0,), (3,), (7,), (2, 1), (4, 4), (0, 5)]:
        a = spectral.adjoint_polynomial(parts)
        assert a.degree() == sum(parts)
        assert a.bracket.coeffs[parts] == 1


def test_adjoint_hermite_m1():
    a2 = spectral.adjoint_polynomial((2,), order=1)
    assert a2.bracket.coeffs == {(2,): Fraction(1), (0,): Fraction(-2)}
    a4 = spectral.adjoint_polynomial((4,), order=1)
    assert a4.bracket.coeffs == {(4,): Fraction(1), (2,): Fraction(-12),
                                 (0,): Fraction(12)}
    # product structure in two variables
    a = spectral.adjoint_polynomial((2, 1), order=1)
    assert a.bracket.coeffs == {(2, 1): Fraction(1), (0, 1): Fraction(-2)}


def test_adjoint_eigenrelation_exact_m2():
    for dim in (1, 2):
        idx = [(k,) for k in range(9)] if dim == 1 else \
            [(i, j) for i in range(7) for j in range(7 - i)]
        for parts in idx:
            a = spectral.adjoint_polynomial(parts)
            lhs = spectral.apply_B_star(a)
            lam = spectral.eigenvalue(parts)
            rhs = a.bracket.scaled(lam)
            assert lhs.bracket.coeffs == rhs.coeffs, parts


def test_adjoint_eigenrelation_exact_m1():
    for dim in (1, 2):
        idx = [(k,) for k in range(7)] if dim == 1 else \
            [(i, j) for i in range(5) for j in range(5 - i)]
        for parts in idx:
            a = spectral.adjoint_polynomial(parts, order=1)
            lhs = spectral.apply_B_star(a, order=1)
            lam = spectral.eigenvalue(parts, order=1)
            rhs = a.bracket.scaled(lam)
            assert lhs.bracket.coeffs == rhs.coeffs, parts


# ----------------------------------------------------------------------
# Eigenfunctions
# ----------------------------------------------------------------------

def test_eigenfunction_m1_first(model_m1):
    g = uniform_grid_1d(8.0, 0.05)
    psi1 = spectral.eigenfunction(model_m1, (1,), g)
    y = g.axes[0]
    ref = (y / 2.0) * np.exp(-y * y / 4.0) / math.sqrt(4.0 * math.pi)
    assert np.max(np.abs(psi1.values - ref)) < 1e-8


def test_eigenfunction_moments_vanish(model_m2):
    g = uniform_grid_1d(60.0, 0.5)
    for k in range(1, 5):
        psi = spectral.eigenfunction(model_m2, (k,), g)
        assert abs(integrate(psi)) < 1e-8, k


def test_eigen_residual_m2(model_m2):
    g = uniform_grid_1d(8.0, 0.125)
    for k in range(5):
        psi = spectral.eigenfunction(model_m2, (k,), g)
        bpsi = spectral.apply_B(model_m2, psi)
        lam = float(spectral.eigenvalue((k,)))
        resid = np.max(np.abs(bpsi.values - lam * psi.values))
        assert resid < 1e-5, (k, resid)


def test_eigen_residual_m1(model_m1):
    g = uniform_grid_1d(8.0, 0.125)
    for k in range(4):
        psi = spectral.eigenfunction(model_m1, (k,), g)
        bpsi = spectral.apply_B(model_m1, psi)
        lam = float(spectral.eigenvalue((k,), order=1))
        resid = np.max(np.abs(bpsi.values - lam * psi.values))
        assert resid < 1e-8, (k, resid)


def test_eigen_residual_2d():
    model = kernel.build_kernel(2, 2, max_deriv=6)
    g = tensor_grid_2d(4.0, 0.25)
    for parts in [(0, 0), (1, 0), (1, 1), (2, 0)]:
        psi = spectral.eigenfunction(model, parts, g)
        bpsi = spectral.apply_B(model, psi)
        lam = float(spectral.eigenvalue(parts))
        resid = np.max(np.abs(bpsi.values - lam * psi.values))
        assert resid < 1e-5, (parts, resid)


def test_kernel_nullvector_radial():
    model = kernel.build_kernel(2, 2, max_deriv=4)
    g = radial_grid(10.0, 0.05)
    f = kernel.eval_kernel(model, g)
    bf = spectral.apply_B(model, f)
    assert np.max(np.abs(bf.values)) < 1e-6


def test_apply_B_requires_metadata(model_m2):
    g = uniform_grid_1d(4.0, 0.5)
    bare = SampledField(g, np.zeros(g.shape))
    with pytest.raises(ValueError):
        spectral.apply_B(model_m2, bare)


# ----------------------------------------------------------------------
# Gram matrices
# ----------------------------------------------------------------------

def test_gram_m2_identity_and_refinement(model_m2):
    g = uniform_grid_1d(GRAM_L, GRAM_H)
    pairs = spectral.build_eigenpairs(model_m2, 4, g)
    res = spectral.gram_matrix(pairs, refine_check=True)
    n = len(res.indices)
    err = np.max(np.abs(res.matrix - np.eye(n)))
    err_fine = np.max(np.abs(res.refined_matrix - np.eye(n)))
    assert err < 1e-6
    assert err_fine < 1e-7
    assert err / err_fine >= 10.0
    assert not res.under_resolved


def test_gram_flags_coarse_grid(model_m2):
    g = uniform_grid_1d(57.2, 5.2)
    pairs = spectral.build_eigenpairs(model_m2, 4, g)
    res = spectral.gram_matrix(pairs, refine_check=True)
    assert res.under_resolved


def test_gram_m1_hermite_identity(model_m1):
    g = uniform_grid_1d(16.0, 0.5)
    pairs = spectral.build_eigenpairs(model_m1, 4, g)
    res = spectral.gram_matrix(pairs, refine_check=False)
    n = len(res.indices)
    assert np.max(np.abs(res.matrix - np.eye(n))) < 1e-8


def test_gram_ordering_graded_lex():
    model = kernel.build_kernel(2, 2, max_deriv=2)
    g = tensor_grid_2d(4.0, 2.0)
    pairs = spectral.build_eigenpairs(model, 2, g)
    got = [b.parts for b in pairs.indices]
    assert got == [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]
    assert pairs.level_count(1) == 2
    assert pairs.level_count(2) == 3
