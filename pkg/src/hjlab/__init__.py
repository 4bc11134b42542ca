"""Numerical laboratory for Hamilton-Jacobi equations with convex Hamiltonians.

Solve u_t + H(x, D u) = 0 by semi-Lagrangian dynamic programming, trace
characteristics, measure regularity of solutions against a-priori bounds,
estimate epsilon-entropy of solution sets in W^{1,1}, and reconstruct
initial data that reach a prescribed profile.
"""
from .errors import HJError
from .grid import GridFunction
from .hamiltonian import HamiltonianSpec, Lagrangian, preset, validate_structure
from .solver import SolverConfig, solve

__version__ = "0.1.0"

__all__ = [
    "GridFunction",
    "HJError",
    "HamiltonianSpec",
    "Lagrangian",
    "SolverConfig",
    "preset",
    "solve",
    "validate_structure",
    "__version__",
]
