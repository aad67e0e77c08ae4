"""ibckit: in-block controllable regions for affine systems.

Construction and LP-based verification of controllable safe sets,
piecewise-linear safety feedback, robot models reducing to double
integrators, and deterministic closed-loop simulation.
"""

__version__ = "0.1.0"

from .geometry import (
    Membership,
    Polytope,
    Triangulation,
    box,
    contains,
    hull_from_points,
    is_simplicial,
    max_inscribed_scale,
    scale,
    tangent_cone,
    triangulate_with_origin,
)
from .ibc import (
    IBCCertificate,
    InputSet,
    UNBOUNDED,
    Verdict,
    backward_invariance_lp,
    check_ibc,
    cone_dip_lp,
    construct_ibc_polytope,
    invariance_lp,
    rescale_velocity_axes,
)
from .linsys import (
    AffineSystem,
    LinearSystem,
    decompose,
    equilibrium_set,
    is_controllable,
    shift_to_linear,
)
from .feedback import (
    PWLController,
    assign_vertex_controls,
    build_pwl,
    dini_derivative,
    eval_pwl,
    gramian_steering,
    lyapunov_V,
)
from .models import (
    ArmParams,
    AxisProfile,
    AxisSpec,
    QuadrotorParams,
    UnicycleParams,
    safe_speed_profile,
)
from .sim import (
    ObstacleTrace,
    Trajectory,
    integrate,
    obstacle_avoidance_run,
    reference_feasibility,
    safe_steer,
    unicycle_mission,
)
