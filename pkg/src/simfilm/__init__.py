"""Tools for self-similar analysis of fourth-order thin-film dynamics.

Subpackages cover: fundamental kernel construction (``kernel``),
polynomial eigenfunctions and adjoints of the rescaled operator
(``spectral``), linear semigroup evolution (``semigroup``), branching
systems with singular integrals and conic classification (``branching``),
nonlinear profile iteration (``profile``), a regularized fourth-order
PDE integrator (``homotopy``), and a command line front end (``cli``).
"""

__version__ = "0.1.0"
