"""Eigenvalue problems for -y'' + q y = lam y with transmission conditions at
an interior point and a spectral-parameter-dependent right boundary condition."""

from .errors import *  # noqa: F401,F403
from .model import (CaseTag, DeterminantSet, Potential, ProblemSpec, classify_case,
                    compute_determinants, eval_q, load_problem, validate)
from .integrate import DEFAULT_OPTIONS, IntegratorOptions, StateVector, Trace, integrate_ivp
from .solutions import PiecewiseSolution, phi, psi, boundary_residuals

__version__ = "0.1.0"
