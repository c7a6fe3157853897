"""Radial flux-limited Keller-Segel: blow-up subsolutions, certification, simulation."""
from .problem import ProblemSetup, RadialState, accumulate, make_setup, reconstruct_u_v, total_mass
from .profile import PhiProfile, make_profile, psi_bound
from .subsolution import SubsolutionParams, coeffs, make_params, w_lower
from .feasibility import FeasibilityReport, select_params
from .residual import CertReport, certify_subsolution, eval_P_subsolution
from .solver import RunReport, SolverConfig, init_from_threshold, make_grid, run, step

__all__ = [
    "ProblemSetup", "RadialState", "accumulate", "make_setup", "reconstruct_u_v", "total_mass",
    "PhiProfile", "make_profile", "psi_bound",
    "SubsolutionParams", "coeffs", "make_params", "w_lower",
    "FeasibilityReport", "select_params",
    "CertReport", "certify_subsolution", "eval_P_subsolution",
    "RunReport", "SolverConfig", "init_from_threshold", "make_grid", "run", "step",
]
