"""Velocity-independent forces from non-standard Hamiltonians.

Taylor-jet evaluation of Hamiltonians, constructive family builders,
permissible canonical transformations, numerical verification of the
velocity-independence conditions, trajectory integration and a CLI.
"""
from .canonical import (
    Type1Transform,
    Type2Transform,
    apply_type1,
    apply_type2,
    shift_to_zero_momentum,
)
from .errors import *  # noqa: F401,F403
from .expr import parse
from .families import (
    OneDFamily,
    QuadraticFamily,
    SeesawA,
    SeesawB,
    build_1d,
    build_quadratic,
    build_seesaw_a,
    build_seesaw_b,
    build_separable,
)
from .hamiltonian import (
    HamiltonianSpec,
    PhasePoint,
    StatePoint,
    energy,
    force,
    metric,
    momentum_of_velocity,
    velocity,
)
from .integrate import Trajectory, conservation_report, integrate, newtonian_check
from .jet import Jet
from .timedep import TimeDepSpec, check_timedep_conditions, separable_blowup
from .verify import (
    SampleGrid,
    VerificationReport,
    affine_span,
    check_g_properties,
    check_regular,
    check_velocity_independence,
    classify_T,
    solve_pseudo_metric,
)

__version__ = "0.1.0"
