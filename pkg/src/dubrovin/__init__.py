"""Reflectionless KdV-hierarchy solutions from Dubrovin-type flows on Dirichlet data.

The gap set fixes the spectrum, one angle per gap fixes the Dirichlet data,
and two commuting vector fields carry the angles along x and along the
n-th hierarchy time.  The potential is recovered by the trace formula.
"""
from .dirichlet import DirichletState, dist, parse_phi
from .flows import jacobian_bounds, lipschitz_estimate, psi, xi
from .hierarchy import DiffPoly, fhat, kdv_rhs, zero_curvature_residual
from .integrator import FlowSheet, flow, solve_sheet, verify_commute, verify_pde
from .moments import r_m, trace_q
from .spectrum import (CraigReport, DivergenceError, Gap, GapSet, GapSetError, TailModel,
                       check_craig, load_spectrum, validate_gapset)
from .weyl import M_matrix, WeylMatrix, evolve_M, green_diag, green_dx

__all__ = [
    "CraigReport", "DiffPoly", "DirichletState", "DivergenceError", "FlowSheet", "Gap",
    "GapSet", "GapSetError", "M_matrix", "TailModel", "WeylMatrix", "check_craig", "dist",
    "evolve_M", "fhat", "flow", "green_diag", "green_dx", "jacobian_bounds", "kdv_rhs",
    "lipschitz_estimate", "load_spectrum", "parse_phi", "psi", "r_m", "solve_sheet",
    "trace_q", "validate_gapset", "verify_commute", "verify_pde", "xi",
    "zero_curvature_residual",
]
