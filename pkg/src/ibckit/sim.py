"""Closed-loop integration, scripted maneuvers, and dynamic replanning.

Everything here is deterministic: fixed-step RK4 with the policy held
over each step (zero-order hold), scripted phase machines for the
composite maneuvers, and a fixed-rate replanning loop that rebuilds the
per-axis safe speed profile whenever a predicted obstacle corridor cuts
into the ego position bounds.
"""

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from .feedback import OutsideDomain, PWLController, eval_pwl, gramian_steering
from .geometry import Membership, Polytope
from .linsys import LinearSystem, equilibrium_set
from .models import (
    AxisProfile,
    QuadrotorParams,
    UnicycleParams,
    margin_axis_spec,
    quad_angle_map,
    quad_planar_dynamics,
    safe_speed_profile,
    unicycle_cartesian,
    unicycle_dynamics,
    unicycle_fblin,
)
from .tolerances import END_TOL, GEO_TOL, SWITCH_DIST

PD_KP = 4.0
PD_KD = 4.0
POS_TOL = 0.1
VEL_TOL = 0.05


class SimulationError(Exception):
    pass


class PolicyDomainError(SimulationError):
    def __init__(self, t, x, msg=""):
        super().__init__(f"policy domain violated at t={t}: x={x} {msg}")
        self.t = t
        self.x = np.asarray(x)


class SteeringFailed(SimulationError):
    def __init__(self, msg, t=None, x=None, phase=None):
        super().__init__(msg)
        self.t = t
        self.x = None if x is None else np.asarray(x)
        self.phase = phase


class ReplanInfeasible(SimulationError):
    def __init__(self, tick, msg=""):
        super().__init__(f"replanning infeasible at tick {tick} {msg}")
        self.tick = tick


@dataclass
class Trajectory:
    t: np.ndarray
    x: np.ndarray  # (K, n)
    u: np.ndarray  # (K, m)
    V: np.ndarray  # (K,), NaN when no region attached
    violation: np.ndarray  # (K,) bool
    dt: float
    metadata: dict = field(default_factory=dict)

    def endpoint(self) -> np.ndarray:
        return self.x[-1]

    def concat(self, other: "Trajectory") -> "Trajectory":
        """Join a follow-on segment; its first sample repeats our last."""
        md = dict(self.metadata)
        md.update(other.metadata)
        return Trajectory(
            t=np.concatenate([self.t, other.t[1:]]),
            x=np.vstack([self.x, other.x[1:]]),
            u=np.vstack([self.u, other.u[1:]]),
            V=np.concatenate([self.V, other.V[1:]]),
            violation=np.concatenate([self.violation, other.violation[1:]]),
            dt=self.dt,
            metadata=md,
        )

    def to_csv(self, path) -> None:
        n, m = self.x.shape[1], self.u.shape[1]
        header = (
            "t,"
            + ",".join(f"x{i+1}" for i in range(n))
            + ","
            + ",".join(f"u{j+1}" for j in range(m))
            + ",V,violation"
        )
        data = np.column_stack(
            [self.t, self.x, self.u, self.V, self.violation.astype(float)]
        )
        np.savetxt(path, data, delimiter=",", header=header, comments="", fmt="%.17g")

    @staticmethod
    def from_csv(path) -> "Trajectory":
        with open(path) as f:
            names = f.readline().strip().split(",")
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        n = sum(1 for s in names if s.startswith("x"))
        m = sum(1 for s in names if s.startswith("u"))
        t = data[:, 0]
        dt = float(t[1] - t[0]) if len(t) > 1 else 0.0
        return Trajectory(
            t=t,
            x=data[:, 1 : 1 + n],
            u=data[:, 1 + n : 1 + n + m],
            V=data[:, 1 + n + m],
            violation=data[:, 2 + n + m] > 0.5,
            dt=dt,
        )


def annotate(traj: Trajectory, region: Polytope | None) -> Trajectory:
    """Fill the V and violation columns against a region."""
    if region is None:
        traj.V[:] = np.nan
        traj.violation[:] = False
        return traj
    worst = (traj.x @ region.normals.T - region.offsets).max(axis=1)
    traj.violation = worst > GEO_TOL * region.scale
    try:
        N = region.normalized_normals
        traj.V = (traj.x @ N.T).max(axis=1)
    except geo.OriginNotInterior:
        traj.V[:] = np.nan
    return traj


def integrate(
    field_fn,
    policy,
    x0,
    dt: float,
    T: float,
    region: Polytope | None = None,
    t0: float = 0.0,
    until=None,
    metadata: dict | None = None,
) -> Trajectory:
    """Fixed-step RK4 with the input held over each step.

    The policy sees (t, x) once per step at the step start; `until`
    stops the run early at the first sample satisfying it. V and
    violation are annotated against `region` when given.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    steps = int(round(T / dt))
    x = np.array(x0, dtype=float)
    xs = np.empty((steps + 1, len(x)))
    us = None
    stop = steps
    for k in range(steps + 1):
        t = t0 + k * dt
        try:
            u = np.atleast_1d(np.asarray(policy(t, x), dtype=float))
        except OutsideDomain as e:
            raise PolicyDomainError(t, x, str(e)) from e
        if us is None:
            us = np.empty((steps + 1, len(u)))
        xs[k] = x
        us[k] = u
        if until is not None and until(t, x):
            stop = k
            break
        if k == steps:
            break
        k1 = field_fn(x, u)
        k2 = field_fn(x + 0.5 * dt * k1, u)
        k3 = field_fn(x + 0.5 * dt * k2, u)
        k4 = field_fn(x + dt * k3, u)
        x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    K = stop + 1
    traj = Trajectory(
        t=t0 + dt * np.arange(K),
        x=xs[:K],
        u=us[:K],
        V=np.full(K, np.nan),
        violation=np.zeros(K, dtype=bool),
        dt=dt,
        metadata=metadata or {},
    )
    return annotate(traj, region)


def linear_field(sys: LinearSystem):
    def f(x, u):
        return sys.A @ x + sys.B @ u

    return f


def safe_steer(
    sys: LinearSystem,
    region: Polytope,
    ctrl: PWLController,
    x0,
    xf,
    t_f: float,
    dt: float = 1e-3,
) -> Trajectory:
    """Brake with the piecewise-linear feedback, then steer open loop.

    Phase 1 applies the safety feedback until the state is within
    SWITCH_DIST of the equilibrium subspace; phase 2 runs the Gramian
    transfer to xf over the remaining horizon. Fails loudly if any
    sample leaves the region or the endpoint misses.
    """
    x0 = np.asarray(x0, dtype=float)
    xf = np.asarray(xf, dtype=float)
    for point, name in ((x0, "x0"), (xf, "xf")):
        if geo.contains(region, point) is Membership.OUTSIDE:
            raise ValueError(f"{name} outside the region")
    O = equilibrium_set(sys)

    def dist_eq(x):
        return float(np.linalg.norm(x - O @ (O.T @ x)))

    fld = linear_field(sys)
    phase1 = integrate(
        fld,
        lambda t, x: eval_pwl(ctrl, x),
        x0,
        dt,
        t_f,
        region=region,
        until=lambda t, x: dist_eq(x) <= SWITCH_DIST,
        metadata={"policy": "pwl+gramian"},
    )
    t1 = float(phase1.t[-1])
    if t_f - t1 < 10 * dt:
        raise SteeringFailed("deceleration consumed the horizon", t=t1, phase="brake")
    plan = gramian_steering(sys, phase1.x[-1], xf, t_f - t1)
    phase2 = integrate(
        fld, plan.as_policy(dt, t0=t1), phase1.x[-1], dt, t_f - t1, region=region, t0=t1
    )
    traj = phase1.concat(phase2)
    traj.metadata["switch_time"] = t1
    if traj.violation.any():
        k = int(np.argmax(traj.violation))
        raise SteeringFailed(
            "steering left the region", t=float(traj.t[k]), x=traj.x[k], phase="gramian"
        )
    err = float(np.linalg.norm(traj.x[-1] - xf))
    traj.metadata["endpoint_error"] = err
    if err > END_TOL:
        raise SteeringFailed(f"endpoint error {err:.2e}", t=t_f, phase="gramian")
    return traj


# ---------------------------------------------------------------------------
# unicycle mission


def _wrap_angle(a: float) -> float:
    return (a + math.pi) % (2.0 * math.pi) - math.pi


def _rk4(fn, x, u, dt):
    k1 = fn(x, u)
    k2 = fn(x + 0.5 * dt * k1, u)
    k3 = fn(x + 0.5 * dt * k2, u)
    k4 = fn(x + dt * k3, u)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def unicycle_bounds_region(p: UnicycleParams) -> Polytope:
    b, v = p.pos_bound, p.vel_bound
    return geo.box([-b, -b, -v, -v], [b, b, v, v])


def unicycle_mission(
    p: UnicycleParams,
    profiles: tuple[AxisProfile, AxisProfile],
    x0,
    xf,
    dt: float = 1e-3,
    max_time: float = 60.0,
) -> Trajectory:
    """Four-phase transfer between Cartesian states (x, y, x_dot, y_dot).

    1. Decelerate per axis with the safety feedback through the
       linearizing input map while the speed is above the cutoff.
    2. Brake straight to rest.
    3. Rotate in place toward the goal position.
    4. Drive straight with a trapezoidal speed schedule and stop.

    The recorded trajectory holds the Cartesian observables; violations
    are judged against the position/velocity box.
    """
    x0 = np.asarray(x0, dtype=float)
    xf = np.asarray(xf, dtype=float)
    prof_x, prof_y = profiles
    for prof, (pos, vel) in ((prof_x, x0[[0, 2]]), (prof_y, x0[[1, 3]])):
        if prof.membership(pos, vel) is Membership.OUTSIDE:
            raise ValueError("x0 outside the per-axis safe region")
    speed0 = math.hypot(x0[2], x0[3])
    heading0 = math.atan2(x0[3], x0[2]) if speed0 > 1e-12 else 0.0
    state = np.array([x0[0], x0[1], heading0, speed0])

    ts, states, inputs, phases = [], [], [], []
    t = 0.0
    switch = {}

    def record(u):
        ts.append(t)
        states.append(state.copy())
        inputs.append(np.asarray(u, dtype=float))

    def step(u):
        nonlocal state, t
        record(u)
        state = _rk4(unicycle_dynamics, state, np.asarray(u, dtype=float), dt)
        t += dt
        if t > max_time:
            raise SteeringFailed("mission exceeded the time budget", t=t, phase=phase)

    phase = "decelerate"
    while abs(state[3]) >= p.speed_cutoff:
        cart = unicycle_cartesian(state)
        v = np.array(
            [
                np.clip(prof_x.feedback(cart[0], cart[2]), -p.v_bound, p.v_bound),
                np.clip(prof_y.feedback(cart[1], cart[3]), -p.v_bound, p.v_bound),
            ]
        )
        step(unicycle_fblin(state, v, cutoff=p.speed_cutoff))
    switch["brake"] = t

    phase = "brake"
    while abs(state[3]) > 0.02:
        step([np.clip(-5.0 * state[3], -p.accel_bound, p.accel_bound), 0.0])
    switch["rotate"] = t

    phase = "rotate"
    while True:
        target_heading = math.atan2(xf[1] - state[1], xf[0] - state[0])
        err = _wrap_angle(target_heading - state[2])
        if abs(err) <= 2e-4:
            break
        step(
            [
                np.clip(-5.0 * state[3], -p.accel_bound, p.accel_bound),
                np.clip(4.0 * err, -p.steer_bound, p.steer_bound),
            ]
        )
    switch["drive"] = t

    phase = "drive"
    hvec = np.array([math.cos(state[2]), math.sin(state[2])])
    cruise = min(5.0, p.v_bound)
    a_dec, k_v = 2.0, 5.0
    while True:
        d_along = float((xf[:2] - state[:2]) @ hvec)
        if d_along <= 0.03 and abs(state[3]) <= VEL_TOL * 0.9:
            break
        d_pos = max(d_along, 0.0)
        # trapezoid far out, proportional creep-free approach near the goal
        s_cmd = min(cruise, math.sqrt(2.0 * a_dec * d_pos), 2.0 * d_pos)
        step([np.clip(k_v * (s_cmd - state[3]), -p.accel_bound, p.accel_bound), 0.0])
    record([0.0, 0.0])

    pos_err = float(np.linalg.norm(xf[:2] - state[:2]))
    if pos_err > POS_TOL or abs(state[3]) > VEL_TOL:
        raise SteeringFailed(
            f"missed the goal: pos err {pos_err:.3f}, speed {state[3]:.3f}",
            t=t,
            phase="drive",
        )
    K = len(ts)
    traj = Trajectory(
        t=np.asarray(ts),
        x=np.array([unicycle_cartesian(s) for s in states]),
        u=np.vstack(inputs),
        V=np.full(K, np.nan),
        violation=np.zeros(K, dtype=bool),
        dt=dt,
        metadata={"policy": "unicycle-mission", "switch_times": switch},
    )
    return annotate(traj, unicycle_bounds_region(p))


def pd_baseline_unicycle(
    p: UnicycleParams, x0, xf, dt: float = 1e-3, T: float = 30.0
) -> Trajectory:
    """Per-axis saturated PD on the linearized model, for comparison only."""
    x0 = np.asarray(x0, dtype=float)
    xf = np.asarray(xf, dtype=float)

    def fld(x, u):
        return np.array([x[2], x[3], u[0], u[1]])

    def policy(t, x):
        v = -PD_KP * (x[:2] - xf[:2]) - PD_KD * (x[2:] - xf[2:])
        return np.clip(v, -p.v_bound, p.v_bound)

    return integrate(
        fld,
        policy,
        x0,
        dt,
        T,
        region=unicycle_bounds_region(p),
        metadata={"policy": "pd-baseline", "kp": PD_KP, "kd": PD_KD},
    )


# ---------------------------------------------------------------------------
# obstacle avoidance


@dataclass(frozen=True)
class ObstacleTrace:
    t: np.ndarray
    xy: np.ndarray  # (K, 2)

    def position(self, time_s: float) -> np.ndarray:
        return np.array(
            [np.interp(time_s, self.t, self.xy[:, 0]), np.interp(time_s, self.t, self.xy[:, 1])]
        )

    def velocity(self, time_s: float) -> np.ndarray:
        """Finite difference of the two samples bracketing time_s."""
        i = int(np.searchsorted(self.t, time_s, side="right"))
        i = min(max(i, 1), len(self.t) - 1)
        dt = self.t[i] - self.t[i - 1]
        return (self.xy[i] - self.xy[i - 1]) / dt

    def to_csv(self, path) -> None:
        np.savetxt(
            path,
            np.column_stack([self.t, self.xy]),
            delimiter=",",
            header="t,x,y",
            comments="",
            fmt="%.17g",
        )

    @staticmethod
    def from_csv(path) -> "ObstacleTrace":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return ObstacleTrace(t=data[:, 0], xy=data[:, 1:3])


@dataclass(frozen=True)
class ReferenceTrajectory:
    t: np.ndarray
    pos: np.ndarray  # (K, 2)
    vel: np.ndarray  # (K, 2)

    def sample(self, time_s: float):
        p = [np.interp(time_s, self.t, self.pos[:, a]) for a in range(2)]
        v = [np.interp(time_s, self.t, self.vel[:, a]) for a in range(2)]
        return np.array(p), np.array(v)


def crossing_sinusoids(
    amplitude: float = 1.5,
    freq: float = 0.1,
    phase_gap: float = 0.3,
    T: float = 20.0,
    fs: float = 280.0,
):
    """The two-vehicle conflict: the ego tracks a y-sinusoid, the obstacle
    an x-sinusoid at the same rate, phased so their zero crossings nearly
    coincide while the run starts far apart."""
    ts = np.arange(0.0, T + 1.0 / fs, 1.0 / fs)
    w = 2.0 * math.pi * freq
    ego_pos = np.column_stack(
        [np.zeros_like(ts), amplitude * np.sin(w * ts + math.pi / 2 + phase_gap)]
    )
    ego_vel = np.column_stack(
        [np.zeros_like(ts), amplitude * w * np.cos(w * ts + math.pi / 2 + phase_gap)]
    )
    obs_xy = np.column_stack(
        [amplitude * np.sin(w * ts + math.pi / 2), np.zeros_like(ts)]
    )
    return ReferenceTrajectory(ts, ego_pos, ego_vel), ObstacleTrace(ts, obs_xy)


def _choose_cut(
    base_lo, base_hi, ego_pos, pt, obs_vel, excl, reach=0.5, min_width=0.05
):
    """Pick the axis to shrink and the shrunk interval.

    Cuts place the bound `excl` away from the predicted obstacle point on
    the ego's side. A cut is usable when its interval is wide enough and
    the ego is inside it or within `reach` of it (the recovery push can
    cover that before the conflict). Among usable cuts, the axis along
    which the obstacle moves slowest wins (that separation stays valid as
    the obstacle advances); the predicted penetration breaks ties.
    """
    options = []
    for a in range(2):
        if ego_pos[a] >= pt[a]:
            lo, hi = max(base_lo[a], pt[a] + excl), base_hi[a]
        else:
            lo, hi = base_lo[a], min(base_hi[a], pt[a] - excl)
        gap = max(lo - ego_pos[a], ego_pos[a] - hi, 0.0)
        if (hi - lo) < min_width or gap > reach:
            continue
        pen = excl - abs(ego_pos[a] - pt[a])
        options.append((abs(obs_vel[a]), gap, -pen, a, (lo, hi)))
    if not options:
        return None
    options.sort()
    return options[0][3], options[0][4]


def _axis_command(prof: AxisProfile, pos, vel, ref_p, ref_v, vmax):
    """Per-axis input: PD tracking inside the profile, the homogeneous
    safety feedback when the speed exceeds it, and a position push-in
    when the position itself left the profile's range (after a cut)."""
    ext = float(np.abs(prof.region.vertices[:, 0]).max())
    lo_abs, hi_abs = prof.center - ext, prof.center + ext
    if pos < lo_abs or pos > hi_abs:
        inset = 0.15 * (hi_abs - lo_abs)
        target = min(max(pos, lo_abs + inset), hi_abs - inset)
        return float(np.clip(PD_KP * (target - pos) - PD_KD * vel, -vmax, vmax))
    if prof.membership(pos, vel) is Membership.OUTSIDE:
        return float(np.clip(prof.feedback_extended(pos, vel), -vmax, vmax))
    return float(np.clip(PD_KP * (ref_p - pos) + PD_KD * (ref_v - vel), -vmax, vmax))


def obstacle_avoidance_run(
    p: QuadrotorParams,
    reference: ReferenceTrajectory,
    obstacle: ObstacleTrace,
    safety_radius: float = 0.64,
    T: float = 20.0,
    tick: float = 1.0 / 70.0,
    replan: bool = True,
    slack: float = 0.2,
    horizon: float = 1.0,
):
    """Track the reference at a fixed control rate, shrinking the position
    bounds and rebuilding the safe speed profile whenever the predicted
    obstacle corridor comes near, and engaging the profile's feedback when
    the state falls outside the current profile.

    Returns (trajectory, minimum planar distance to the obstacle).
    """
    excl = safety_radius + slack
    trigger = excl + p.vel_bound**2 / (2.0 * p.v_bound) + 0.05
    base_lo = [-p.pos_bound, -p.pos_bound]
    base_hi = [p.pos_bound, p.pos_bound]
    default_profile = safe_speed_profile(p.axis_spec())
    profiles = [default_profile, default_profile]

    pos0, vel0 = reference.sample(0.0)
    state = np.concatenate([pos0, vel0])
    steps = int(round(T / tick))
    xs = np.empty((steps + 1, 4))
    us = np.empty((steps + 1, 2))
    rebuild_times: list[float] = []
    corridor_s = np.linspace(0.0, horizon, 15)

    for k in range(steps + 1):
        t = k * tick
        obs_pos = obstacle.position(t)
        cut = None
        if replan:
            obs_vel = obstacle.velocity(t)
            corridor = obs_pos[None, :] + corridor_s[:, None] * obs_vel[None, :]
            dists = np.linalg.norm(corridor - state[:2], axis=1)
            if float(dists.min()) <= trigger:
                pt = corridor[int(np.argmin(dists))]
                cut = _choose_cut(base_lo, base_hi, state[:2], pt, obs_vel, excl)
                if cut is None:
                    raise ReplanInfeasible(k)
        profiles = [default_profile, default_profile]
        if cut is not None:
            axis, (lo, hi) = cut
            t0 = time.perf_counter()
            profiles[axis] = safe_speed_profile(
                margin_axis_spec(lo, hi, p.vel_bound, p.v_bound)
            )
            rebuild_times.append(time.perf_counter() - t0)

        ref_pos, ref_vel = reference.sample(t)
        v = np.array(
            [
                _axis_command(
                    profiles[a], state[a], state[2 + a], ref_pos[a], ref_vel[a], p.v_bound
                )
                for a in range(2)
            ]
        )
        angles = quad_angle_map(v, p.gravity)
        xs[k] = state
        us[k] = angles
        if k == steps:
            break
        state = _rk4(
            lambda x, a_: quad_planar_dynamics(x, a_, p.gravity), state, angles, tick
        )

    ts = tick * np.arange(steps + 1)
    obs_at = np.array([obstacle.position(tt) for tt in ts])
    dmin = float(np.linalg.norm(xs[:, :2] - obs_at, axis=1).min())
    region = geo.box(
        [-p.pos_bound, -p.pos_bound, -p.vel_bound, -p.vel_bound],
        [p.pos_bound, p.pos_bound, p.vel_bound, p.vel_bound],
    )
    traj = Trajectory(
        t=ts,
        x=xs,
        u=us,
        V=np.full(steps + 1, np.nan),
        violation=np.zeros(steps + 1, dtype=bool),
        dt=tick,
        metadata={
            "policy": "avoid" if replan else "track",
            "min_distance": dmin,
            "rebuild_times": rebuild_times,
            "safety_radius": safety_radius,
        },
    )
    return annotate(traj, region), dmin


def reference_feasibility(profiles, pos, vel) -> dict:
    """Check sampled per-axis (position, velocity) references against the
    safe regions; reports the first violating sample index."""
    pos = np.atleast_2d(np.asarray(pos, dtype=float))
    vel = np.atleast_2d(np.asarray(vel, dtype=float))
    if pos.shape[1] != len(profiles):
        raise ValueError("one profile per reference axis required")
    for k in range(pos.shape[0]):
        for a, prof in enumerate(profiles):
            if prof.membership(pos[k, a], vel[k, a]) is Membership.OUTSIDE:
                return {"feasible": False, "first_violation": int(k)}
    return {"feasible": True, "first_violation": None}
