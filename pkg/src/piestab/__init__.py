"""Stability analysis of linear 1-D PDEs through partial-integral (PI) operators.

A PDE with boundary conditions is converted to a PIE ``T x_f' = A x_f`` on
the boundary-free fundamental state; stability is certified by a linear
PI inequality solved as a semidefinite program, and cross-checked with a
spectral collocation oracle.
"""

from .convert import PIESystem, convert
from .fixtures import fixture_spec
from .lpi import (LPIProblem, StabilityCertificate, assemble, bisect_parameter, certify,
                  solve, verify_certificate)
from .model import PDESpec, check_admissibility, validate
from .numeric import DiscretizedPIE, simulate, spectrum
from .pialg import GramBasis, PIOperator, adjoint, apply, compose, gram_operator, kernel_equal
from .polyalg import MatPoly1, MatPoly2

__all__ = [
    "DiscretizedPIE", "GramBasis", "LPIProblem", "MatPoly1", "MatPoly2", "PDESpec",
    "PIESystem", "PIOperator", "StabilityCertificate", "adjoint", "apply", "assemble",
    "bisect_parameter", "certify", "check_admissibility", "compose", "convert",
    "fixture_spec", "gram_operator", "kernel_equal", "simulate", "solve", "spectrum",
    "validate", "verify_certificate",
]
