"""Time-fractional subdiffusion: P1/L1 direct solver and L2-TV inverse source reconstruction."""
from .fem import (
    Mesh,
    SolverError,
    assemble_mass,
    assemble_stiffness,
    build_interval_mesh,
    build_unit_square_mesh,
    gradient,
    gradient_adjoint,
    solve_spd,
)
from .mittag_leffler import EvaluationError, mittag_leffler
from .primal_dual import (
    PDParams,
    StepConditionError,
    StoppingReason,
    add_noise,
    estimate_norms,
    run_inversion,
)
from .subdiffusion import SubdiffusionOperator, TimeGrid, l1_weights
from .tv import canonical_dual, dual_pairing, project_ball, tv_value

__version__ = "0.1.0"
