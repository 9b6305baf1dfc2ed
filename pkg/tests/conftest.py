"""Session-scoped planar fixtures shared across test modules.

Building the two-variable eigenfunction tables and assembling the level
systems costs tens of seconds, and solving them minutes; every module
that needs them (branching unit tests and the acceptance suite) shares
one instance.
"""

import warnings

import pytest

from simfilm import branching
from simfilm.fields import tensor_grid_2d
from simfilm.kernel import build_kernel
from simfilm.spectral import build_eigenpairs


@pytest.fixture(scope="session")
def planar_model():
    return build_kernel(2, 2)


@pytest.fixture(scope="session")
def planar_pairs(planar_model):
    return build_eigenpairs(planar_model, 2, tensor_grid_2d(28.0, 0.04))


@pytest.fixture(scope="session")
def dipole_system(planar_model, planar_pairs):
    return branching.assemble_dipole(planar_model, planar_pairs)


@pytest.fixture(scope="session")
def dipole_solutions(dipole_system):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return branching.solve_dipole(dipole_system)


@pytest.fixture(scope="session")
def triple_system(planar_model, planar_pairs):
    return branching.assemble_triple(planar_model, planar_pairs)


@pytest.fixture(scope="session")
def triple_solutions(triple_system):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return branching.solve_triple(triple_system)
