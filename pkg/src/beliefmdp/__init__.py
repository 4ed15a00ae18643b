"""Belief-MDP reduction of finite POMDPs, with solvers and continuity diagnostics."""

from .belief import (
    BeliefBranchSet,
    Branch,
    bayes_posterior,
    belief_kernel_q,
    expected_cost,
    filter_beliefs,
    initial_belief,
    joint_R,
    obs_marginal,
    predict,
)
from .continuity import (
    ContinuityReport,
    ProofTerms,
    equicontinuity_report,
    proof_term_decomposition,
    q_weak_continuity_report,
    tv_modulus_kernel,
)
from .errors import (
    AssumptionViolation,
    BeliefMDPError,
    BudgetExceeded,
    CoverageError,
    DomainError,
    EvaluationError,
    NumericalError,
    PolicyError,
    SchemaError,
    UnobservableEvidence,
)
from .filtration import (
    ControlSystem,
    GaussianNoise,
    Grid,
    LinearGaussianInstance,
    compare_filters,
    discretize,
    kalman_filter,
    simulate,
)
from .measures import FiniteMeasure, integrate, lp_distance, sup_set_discrepancy, tv_distance
from .model import (
    FinitePOMDP,
    ParametricKernelFamily,
    ParametricPOMDP,
    check_cost_assumptions,
    kernel_at,
    load_model,
    validate_model,
)
from .solver import (
    GridBellmanOperator,
    bellman_backup,
    shift_costs,
    simplex_grid,
    solve_finite_horizon,
    solve_infinite_horizon,
)

__version__ = "0.1.0"
