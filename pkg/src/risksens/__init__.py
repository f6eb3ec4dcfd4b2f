"""Risk-sensitive control on finite and truncated countable state spaces:
multiplicative Bellman eigenproblems, truncation sweeps, and simulation."""

from .eigen import EigenSolution, SolverOptions, policy_eigen, solve_eigen
from .limits import LimitReport, check_A3, check_A4, full_residual, solve_sequence
from .model import (
    ControlledModel,
    check_accessibility_max,
    check_accessibility_min,
    check_dominance_bound,
    load_model,
    validate,
)
from .oracles import HarmonicSpec, harmonic_closed_form, harmonic_model, perron_root_oracle
from .policy import PolicySolution, SimulationEstimate, exass_diagnostic, extract_policy, simulate
from .truncation import TruncatedModel, TruncationScheme, build_truncated

__version__ = "0.1.0"
