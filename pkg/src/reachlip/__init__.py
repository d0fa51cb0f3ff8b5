"""reachlip: black-box reachability and robustness verification of
Lipschitz-continuous networks via nested sawtooth optimization."""

from .nnkit import (
    ContractError,
    DimensionError,
    FormatError,
    Layer,
    Model,
    UnsupportedStructureError,
    forward,
    forward_batch,
    load_model,
    sampled_lipschitz,
    save_model,
    unroll_rnn,
)
from .perturb import BoxFunction, Objective, PerturbationSpec, eval_count, make_box_function
from .lipopt import (
    BoundsTrace,
    OptResult,
    SolverConfig,
    maximize_nested,
    minimize_1d,
    minimize_nested,
    update_lipschitz,
)
from .verify import (
    RadiusReport,
    ReachInterval,
    SafetyVerdict,
    WitnessNotFoundError,
    check_safety,
    ground_truth_adversarial,
    max_safe_radius,
    reach,
)
from .oracle import GridSpec, grid_extrema, grid_flip_radius

__version__ = "0.1.0"
