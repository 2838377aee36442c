"""Hard rigid-body contact with friction gradients and online friction identification."""
from .contact_solver import CLAMPING, OPEN, SLIDING, ContactProblem, ContactSolution, solve_contacts, step_dynamics
from .gradients import (
    FINITE_DIFF,
    NONSMOOTH,
    RAND_FIRST,
    RAND_ZEROTH,
    SMOOTHED,
    ImpulseGradient,
    nonsmooth_impulse_gradient,
    randomized_gradient,
    smoothed_impulse_gradient,
    state_gradient,
)
from .identifier import (
    BufferEntry,
    DataBuffer,
    EstimateState,
    FrictionIdentifier,
    IdentifierConfig,
    confidence_score,
    rejection_scores,
    residual_and_jacobian,
    solve_identification,
    update_estimate,
)
from .rigid_model import GeneralizedState, RobotModel, build_box_model, build_monoped_model, evaluate, integrate

__version__ = "0.1.0"
