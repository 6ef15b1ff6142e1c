"""Max-min-fair joint communications and sensing beamforming.

A library and CLI for designing transmit precoders and receive combiners
that maximize the weighted sum of the worst user rate and worst sensing
mutual information: an alternating optimizer with quadratic-transform
auxiliaries and projected gradient precoder updates, an unfolded variant
with trainable per-layer step sizes, a Rician channel simulator, and an
experiment harness.
"""

from .errors import (
    BeamformingError,
    DimensionMismatch,
    FormatError,
    MissingCheckpoint,
    NonFiniteError,
    NonPositiveDistance,
    NotPositiveDefinite,
    ScheduleMismatch,
    SeparationInfeasible,
    ZeroCombiner,
    ZeroTheta,
)
from .metrics import (
    AuxState,
    BeamformerState,
    RateVector,
    rates,
    scnr_sense,
    sinr_comm,
    softmin_weights,
    surrogate_objective,
    surrogate_terms,
    utility_h,
)
from .numerics import fro_inner, fro_norm, hermitian_solve, max_generalized_eigvec
from .optimizer import (
    BacktrackingConfig,
    GradientPieces,
    IterTrace,
    SolverConfig,
    g_value,
    grad_W,
    gradient_pieces,
    init_state,
    pgd_step,
    project_S,
    solve,
    update_aux,
    update_combiner,
)
from .scenario import (
    Dataset,
    Scenario,
    SystemConfig,
    generate_scenario,
    load_dataset,
    make_dataset,
    make_response_matrix,
    make_user_channel,
    path_gain,
    save_dataset,
    steering_vector,
)
from .training import (
    TrainConfig,
    UnfoldedParams,
    default_params,
    estimate_gradient,
    load_checkpoint,
    save_checkpoint,
    train,
    training_loss,
)
from .harness import (
    ExperimentSpec,
    ResultRow,
    ResultTable,
    desk_spec,
    full_spec,
    run_benchmark,
    run_convergence,
    run_delta_sweep,
    run_k_sweep,
)
from .cli import cli_main

__version__ = "0.1.0"
