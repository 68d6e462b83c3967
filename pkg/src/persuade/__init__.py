"""Multi-receiver Bayesian persuasion: feasibility of belief distributions,
grid LPs, transport, one-state solvers, supermodular reductions and dual
certificates."""
from .belief_core import (
    ConditionalBeliefFamily,
    FiniteSupportDistribution,
    InformationStructure,
    PersuasionProblem,
    PreconditionError,
    Prior,
    StateSpace,
    ValidationError,
    binary_belief,
    canonicalize,
)
from .certificates import (
    AlphaCertificate,
    VerificationOptions,
    beta_max_search,
    check_fullinfo_noinfo,
    check_fullinfo_partialinfo,
    polarization_alpha,
    retailer_alpha,
    verify_certificate,
)
from .feasibility import build_information_structure, check_family, check_one_state_marginal
from .grid_persuasion import make_grid, solve_dual_grid, solve_dual_grid_binary, solve_primal_grid
from .lp_engine import LinearProgram, solve
from .one_state import OneStateInstance, OneStateOptions, solve_one_state
from .reductions import SupermodularProblem, cav_1d, public_signal_value, supermodular_reduce
from .transport import TransportInstance, assortative, solve_mk
from .utilities import builtin_problem

__version__ = "0.1.0"
