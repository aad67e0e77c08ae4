"""Plant models, their feedback linearizations, and safe speed profiles.

Each model reduces to decoupled double integrators through an input
transformation; the per-axis profile builder then turns position,
velocity, and input bounds into a verified controllable region plus the
piecewise-linear feedback that certifies it.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import geometry as geo
from .feedback import PWLController, build_pwl, eval_pwl, eval_pwl_cone
from .geometry import Membership, Polytope
from .ibc import DEFAULT_LAMBDA_GRID, InputSet, rescale_velocity_axes
from .linsys import LinearSystem


class SingularLinearization(Exception):
    """The unicycle decoupling matrix is singular near zero speed."""


def double_integrator() -> LinearSystem:
    return LinearSystem(np.array([[0.0, 1.0], [0.0, 0.0]]), np.array([[0.0], [1.0]]))


# ---------------------------------------------------------------------------
# one-link arm


@dataclass(frozen=True)
class ArmParams:
    inertia: float = 1.0  # kg m^2
    mass: float = 1.0  # kg
    length: float = 0.5  # m
    gravity: float = 10.0  # m/s^2
    torque_bound: float = 10.0  # N m
    angle_bound: float = math.pi / 2  # rad
    speed_bound: float = 1.0  # rad/s

    def __post_init__(self):
        if min(self.inertia, self.mass, self.length, self.gravity) <= 0:
            raise ValueError("physical arm parameters must be positive")
        if self.torque_bound <= self.gravity_torque_max:
            raise ValueError("torque bound leaves no authority beyond gravity")

    @property
    def gravity_torque_max(self) -> float:
        return self.mass * self.gravity * self.length

    def linear_input_bound(self) -> float:
        """Largest |u| so the linearizing torque stays within bounds."""
        return (self.torque_bound - self.gravity_torque_max) / self.inertia

    def axis_spec(self, alpha: float = 1.2) -> "AxisSpec":
        b = self.linear_input_bound()
        half = self.angle_bound / alpha
        return AxisSpec(
            pos=(-half, half),
            vel=(-self.speed_bound, self.speed_bound),
            input=(-b, b),
            alpha=alpha,
        )


def arm_dynamics(p: ArmParams, state, tau: float) -> np.ndarray:
    theta, omega = state
    return np.array(
        [omega, (-p.gravity_torque_max * math.sin(theta) + tau) / p.inertia]
    )


def arm_fblin(p: ArmParams, state, u: float) -> float:
    """Torque realizing theta_ddot = u exactly."""
    theta = state[0]
    return p.gravity_torque_max * math.sin(theta) + p.inertia * u


# ---------------------------------------------------------------------------
# unicycle with acceleration limits


@dataclass(frozen=True)
class UnicycleParams:
    accel_bound: float = 10.0  # |u1|, m/s^2
    steer_bound: float = 5.0  # |u2|, rad/s
    v_bound: float = 5.0  # per-axis linearized input, m/s^2
    speed_cutoff: float = math.sqrt(2.0)  # m/s, below it the decoupling is off
    pos_bound: float = 30.0  # m per axis
    vel_bound: float = 7.0  # m/s per axis
    box_halfwidth: float = 20.0  # seed box for the profile
    alpha: float = 1.5

    def __post_init__(self):
        if self.speed_cutoff <= 0:
            raise ValueError("speed cutoff must be positive")

    def axis_spec(self) -> "AxisSpec":
        return AxisSpec(
            pos=(-self.box_halfwidth, self.box_halfwidth),
            vel=(-self.vel_bound, self.vel_bound),
            input=(-self.v_bound, self.v_bound),
            alpha=self.alpha,
        )


def unicycle_dynamics(state, u) -> np.ndarray:
    x1, x2, heading, speed = state
    return np.array(
        [speed * math.cos(heading), speed * math.sin(heading), u[1], u[0]]
    )


def unicycle_fblin(state, v, cutoff: float = math.sqrt(2.0)) -> np.ndarray:
    """Invert the decoupling matrix: accelerations v -> (u1, u2).

    Valid only away from zero speed; raises SingularLinearization when
    |speed| drops below the cutoff.
    """
    heading, speed = state[2], state[3]
    if abs(speed) < cutoff:
        raise SingularLinearization(f"speed {speed} below cutoff {cutoff}")
    c, s = math.cos(heading), math.sin(heading)
    u1 = v[0] * c + v[1] * s
    u2 = (-v[0] * s + v[1] * c) / speed
    return np.array([u1, u2])


def unicycle_cartesian(state) -> np.ndarray:
    """Observable (x1, x2, x1_dot, x2_dot) from the unicycle state."""
    x1, x2, heading, speed = state
    return np.array(
        [x1, x2, speed * math.cos(heading), speed * math.sin(heading)]
    )


# ---------------------------------------------------------------------------
# planar quadrotor (constant height, zero yaw)


@dataclass(frozen=True)
class QuadrotorParams:
    gravity: float = 9.81  # m/s^2
    pitch_limit: float = 0.32  # rad
    roll_limit: float = 0.32  # rad
    v_bound: float = 3.247  # m/s^2 per axis, keeps the angle commands in range
    pos_bound: float = 2.0  # m per axis
    vel_bound: float = 2.0  # m/s per axis
    hover_height: float = 1.5  # m

    def __post_init__(self):
        for lim in (self.pitch_limit, self.roll_limit):
            if not 0.0 < lim < math.pi / 2:
                raise ValueError("angle limits must lie in (0, pi/2)")
        if self.v_bound > self.max_v_for_angles() + 1e-9:
            raise ValueError("acceleration bound exceeds the angle limits")

    def max_v_for_angles(self) -> float:
        return self.gravity * math.tan(self.pitch_limit)

    def axis_spec(self, pos_lo: float | None = None, pos_hi: float | None = None) -> "AxisSpec":
        lo = -self.pos_bound if pos_lo is None else pos_lo
        hi = self.pos_bound if pos_hi is None else pos_hi
        return margin_axis_spec(lo, hi, self.vel_bound, self.v_bound)


def quad_planar_dynamics(state, angles, gravity: float = 9.81) -> np.ndarray:
    """(x, y, x_dot, y_dot) under pitch/roll angles at constant height."""
    theta, phi = angles
    ax = gravity * math.tan(theta)
    ay = -gravity * math.tan(phi) / math.cos(theta)
    return np.array([state[2], state[3], ax, ay])


def quad_angle_map(v, gravity: float = 9.81) -> np.ndarray:
    """Pitch/roll commands realizing accelerations (v1, v2) exactly."""
    theta = math.atan2(v[0], gravity)
    phi = math.atan(-v[1] * math.cos(theta) / gravity)
    return np.array([theta, phi])


def rotation_zyx(psi: float, theta: float, phi: float) -> np.ndarray:
    """Body-to-world rotation R_z(psi) R_y(theta) R_x(phi)."""
    cps, sps = math.cos(psi), math.sin(psi)
    ct, st = math.cos(theta), math.sin(theta)
    cph, sph = math.cos(phi), math.sin(phi)
    Rz = np.array([[cps, -sps, 0], [sps, cps, 0], [0, 0, 1]])
    Ry = np.array([[ct, 0, st], [0, 1, 0], [-st, 0, ct]])
    Rx = np.array([[1, 0, 0], [0, cph, -sph], [0, sph, cph]])
    return Rz @ Ry @ Rx


# ---------------------------------------------------------------------------
# per-axis safe speed profiles


@dataclass(frozen=True)
class AxisSpec:
    """Seed box and input bound for one double-integrator axis."""

    pos: tuple[float, float]
    vel: tuple[float, float]
    input: tuple[float, float]
    alpha: float

    def __post_init__(self):
        if self.alpha <= 1.0:
            raise ValueError("alpha must exceed 1")
        if not (self.vel[0] < 0.0 < self.vel[1]):
            raise ValueError("velocity interval must contain 0")
        if not (self.input[0] < 0.0 < self.input[1]):
            raise ValueError("input interval must contain 0")

    @property
    def center(self) -> float:
        return 0.5 * (self.pos[0] + self.pos[1])

    def to_dict(self) -> dict:
        return {
            "pos": list(self.pos),
            "vel": list(self.vel),
            "input": list(self.input),
            "alpha": self.alpha,
        }

    @staticmethod
    def from_dict(d: dict) -> "AxisSpec":
        return AxisSpec(
            pos=tuple(d["pos"]),
            vel=tuple(d["vel"]),
            input=tuple(d["input"]),
            alpha=float(d["alpha"]),
        )


def margin_axis_spec(
    pos_lo: float,
    pos_hi: float,
    vel_ext: float,
    input_bound: float,
    speed_frac: float = 0.9,
    width_frac: float = 0.975,
) -> AxisSpec:
    """Axis spec with the seed half-width set by the strict-LP margin rule.

    The corner (x_b, v) of the seed box is strictly certifiable iff
    v^2 < (L - x_b) * u_max, so x_b is placed a fixed fraction inside that
    bound; the speed extent is trimmed first when the corridor is narrow.
    """
    L = 0.5 * (pos_hi - pos_lo)
    if L <= 0:
        raise ValueError("empty position interval")
    v = min(vel_ext, speed_frac * math.sqrt(L * input_bound))
    xb_max = L - v * v / input_bound
    xb = width_frac * xb_max
    return AxisSpec(
        pos=(pos_lo + (L - xb), pos_hi - (L - xb)),
        vel=(-v, v),
        input=(-input_bound, input_bound),
        alpha=L / xb,
    )


@dataclass(frozen=True)
class AxisProfile:
    """Safe speed profile of one axis: region + feedback, both about the
    interval center (exact for a double integrator)."""

    region: Polytope  # centered coordinates
    controller: PWLController
    center: float
    lam: float
    spec: AxisSpec

    def centered(self, pos: float, vel: float) -> np.ndarray:
        return np.array([pos - self.center, vel])

    def membership(self, pos: float, vel: float) -> Membership:
        return geo.contains(self.region, self.centered(pos, vel))

    def feedback(self, pos: float, vel: float) -> float:
        return float(eval_pwl(self.controller, self.centered(pos, vel))[0])

    def feedback_extended(self, pos: float, vel: float) -> float:
        return float(eval_pwl_cone(self.controller, self.centered(pos, vel))[0])

    def absolute_region(self) -> Polytope:
        off = np.array([self.center, 0.0])
        return Polytope(
            self.region.vertices + off,
            self.region.normals,
            self.region.offsets + self.region.normals @ off,
        )


def safe_speed_profile(
    spec: AxisSpec, lam_grid=DEFAULT_LAMBDA_GRID
) -> AxisProfile:
    """Construct and certify the position-speed region for one axis.

    Builds the seed box about the interval center, grows it along the
    position axis, then trims the speed extent down the grid until the
    strict vertex conditions hold under the input bound, and synthesizes
    the piecewise-linear feedback on the result.
    """
    from .ibc import construct_ibc_polytope  # local to avoid cycle at import

    sys = double_integrator()
    c = spec.center
    P = geo.box(
        [spec.pos[0] - c, spec.vel[0]],
        [spec.pos[1] - c, spec.vel[1]],
    )
    U = InputSet.box([spec.input[0]], [spec.input[1]])
    X = construct_ibc_polytope(sys, P, spec.alpha)
    Xs, lam = rescale_velocity_axes(sys, X, U, axes=(1,), grid=lam_grid)
    ctrl = build_pwl(sys, Xs, U)
    return AxisProfile(region=Xs, controller=ctrl, center=c, lam=lam, spec=spec)
