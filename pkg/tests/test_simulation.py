import math

import numpy as np
import pytest

from ibckit.feedback import build_pwl, eval_pwl
from ibckit.models import QuadrotorParams, UnicycleParams
from ibckit.sim import (
    ObstacleTrace,
    PolicyDomainError,
    ReferenceTrajectory,
    ReplanInfeasible,
    Trajectory,
    crossing_sinusoids,
    integrate,
    linear_field,
    obstacle_avoidance_run,
    pd_baseline_unicycle,
    reference_feasibility,
    safe_steer,
    unicycle_mission,
)

@pytest.fixture(scope="module")
def avoid_runs():
    q = QuadrotorParams()
    ref, trace = crossing_sinusoids()
    on, dmin_on = obstacle_avoidance_run(q, ref, trace, replan=True)
    off, dmin_off = obstacle_avoidance_run(q, ref, trace, replan=False)
    return on, dmin_on, off, dmin_off, ref, trace


class TestIntegrate:
    def test_constant_field(self):
        traj = integrate(lambda x, u: np.zeros(2), lambda t, x: [0.0], [1.0, 2.0], 0.1, 1.0)
        assert np.allclose(traj.x, [1.0, 2.0])
        assert len(traj.t) == 11

    def test_harmonic_oscillator_period(self):
        fld = lambda x, u: np.array([x[1], -x[0]])
        period = 2.0 * math.pi
        traj = integrate(fld, lambda t, x: [0.0], [1.0, 0.0], period / 8192, period)
        assert np.linalg.norm(traj.x[-1] - [1.0, 0.0]) <= 1e-6

    def test_fourth_order_convergence(self):
        fld = lambda x, u: np.array([x[1], -x[0]])
        period = 2.0 * math.pi

        def endpoint_err(steps):
            traj = integrate(fld, lambda t, x: [0.0], [1.0, 0.0], period / steps, period)
            return np.linalg.norm(traj.x[-1] - [1.0, 0.0])

        ratio = endpoint_err(256) / endpoint_err(512)
        assert 8.0 <= ratio <= 32.0

    def test_determinism_bit_identical(self, di, hexagon):
        ctrl = build_pwl(di, hexagon)
        runs = [
            integrate(
                linear_field(di), lambda t, x: eval_pwl(ctrl, x), [0.5, 0.5], 1e-3, 2.0,
                region=hexagon,
            )
            for _ in range(2)
        ]
        assert np.array_equal(runs[0].x, runs[1].x)
        assert np.array_equal(runs[0].u, runs[1].u)

    def test_pwl_run_stays_inside(self, di, hexagon):
        ctrl = build_pwl(di, hexagon)
        traj = integrate(
            linear_field(di), lambda t, x: eval_pwl(ctrl, x), [0.79, 0.99], 1e-3, 10.0,
            region=hexagon,
        )
        assert not traj.violation.any()
        assert np.diff(traj.V).max() <= 1e-6

    def test_policy_domain_error(self, di, hexagon):
        ctrl = build_pwl(di, hexagon)
        with pytest.raises(PolicyDomainError):
            integrate(linear_field(di), lambda t, x: eval_pwl(ctrl, x), [5.0, 5.0], 1e-3, 1.0)

    def test_until_stops_early(self):
        traj = integrate(
            lambda x, u: np.array([1.0]),
            lambda t, x: [0.0],
            [0.0],
            0.1,
            10.0,
            until=lambda t, x: x[0] >= 0.5,
        )
        assert traj.t[-1] == pytest.approx(0.5)

    def test_csv_round_trip(self, tmp_path, di, hexagon):
        ctrl = build_pwl(di, hexagon)
        traj = integrate(
            linear_field(di), lambda t, x: eval_pwl(ctrl, x), [0.3, 0.2], 1e-2, 1.0,
            region=hexagon,
        )
        path = tmp_path / "traj.csv"
        traj.to_csv(path)
        back = Trajectory.from_csv(path)
        assert np.array_equal(back.x, traj.x)
        assert np.array_equal(back.u, traj.u)
        assert np.array_equal(back.violation, traj.violation)


class TestSafeSteer:
    def test_arm_blue_trajectory(self, di, arm_profile):
        traj = safe_steer(
            di, arm_profile.region, arm_profile.controller,
            [5 * math.pi / 12, 0.95], [0.0, 0.0], 10.0,
        )
        assert not traj.violation.any()
        assert traj.metadata["endpoint_error"] <= 1e-3

    def test_near_trivial_maneuver(self, di, arm_profile):
        traj = safe_steer(
            di, arm_profile.region, arm_profile.controller, [0.01, 0.0], [0.0, 0.0], 2.0
        )
        assert not traj.violation.any()
        assert traj.metadata["endpoint_error"] <= 1e-3

    def test_rejects_outside_start(self, di, arm_profile):
        with pytest.raises(ValueError):
            safe_steer(
                di, arm_profile.region, arm_profile.controller, [3.0, 0.0], [0.0, 0.0], 5.0
            )


class TestUnicycleMission:
    def test_corner_to_corner_transfer(self, uni_profile):
        p = UnicycleParams()
        traj = unicycle_mission(p, (uni_profile, uni_profile), [22.0, 22.0, 5.0, 5.0], [-25.0, 25.0, 0.0, 0.0])
        assert not traj.violation.any()
        assert np.linalg.norm(traj.x[-1, :2] - [-25.0, 25.0]) <= 0.1
        assert math.hypot(traj.x[-1, 2], traj.x[-1, 3]) <= 0.05

    def test_degenerate_already_there(self, uni_profile):
        p = UnicycleParams()
        traj = unicycle_mission(p, (uni_profile, uni_profile), [3.0, -2.0, 0.0, 0.0], [3.0, -2.0, 0.0, 0.0])
        assert not traj.violation.any()
        assert traj.t[-1] <= 0.5

    def test_pd_baseline_violates(self):
        p = UnicycleParams()
        traj = pd_baseline_unicycle(p, [22.0, 22.0, 5.0, 5.0], [-25.0, 25.0, 0.0, 0.0])
        assert traj.violation.sum() >= 1
        assert np.abs(traj.x[:, 2:]).max() > p.vel_bound


class TestAvoidance:
    def test_replanning_keeps_distance(self, avoid_runs):
        on, dmin_on, *_ = avoid_runs
        assert dmin_on > 0.64
        assert not on.violation.any()

    def test_without_replanning_conflict(self, avoid_runs):
        _, _, _, dmin_off, _, _ = avoid_runs
        assert dmin_off < 0.5

    def test_far_obstacle_matches_tracking(self, avoid_runs):
        _, _, off, _, ref, trace = avoid_runs
        q = QuadrotorParams()
        far = ObstacleTrace(t=trace.t, xy=trace.xy + 100.0)
        far_run, dmin = obstacle_avoidance_run(q, ref, far, replan=True)
        assert np.allclose(far_run.x, off.x, atol=1e-12)
        assert dmin > 100.0

    def test_rebuild_timings_recorded(self, avoid_runs):
        on, *_ = avoid_runs
        times = on.metadata["rebuild_times"]
        assert len(times) > 100
        assert float(np.median(times)) < 0.01

    def test_boxed_in_raises(self):
        q = QuadrotorParams()
        ts = np.arange(0.0, 3.0, 1.0 / 140.0)
        # obstacle charges straight at an ego pinned into the corner
        xy = np.column_stack([1.9 - 1.2 * ts, np.full_like(ts, 1.9)])
        trace = ObstacleTrace(t=ts, xy=xy)
        pos = np.column_stack([np.full_like(ts, 1.9), np.full_like(ts, 1.9)])
        ref = ReferenceTrajectory(t=ts, pos=pos, vel=np.zeros_like(pos))
        with pytest.raises(ReplanInfeasible):
            obstacle_avoidance_run(q, ref, trace, T=2.5)


class TestReferenceFeasibility:
    @pytest.mark.parametrize(
        "freq,expect", [(0.1, True), (0.2, True), (0.4, False)]
    )
    def test_circle_frequencies(self, quad_profile, freq, expect):
        w = 2.0 * math.pi * freq
        ts = np.linspace(0.0, 1.0 / freq, 1000)
        pos = 1.5 * np.column_stack([np.sin(w * ts), np.sin(w * ts + math.pi / 2)])
        vel = 1.5 * w * np.column_stack([np.cos(w * ts), np.cos(w * ts + math.pi / 2)])
        res = reference_feasibility([quad_profile, quad_profile], pos, vel)
        assert res["feasible"] is expect
        if not expect:
            assert res["first_violation"] is not None


class TestObstacleTrace:
    def test_interp_and_velocity(self):
        trace = ObstacleTrace(t=np.array([0.0, 1.0, 2.0]), xy=np.array([[0.0, 0], [1, 0], [1, 1]]))
        assert np.allclose(trace.position(0.5), [0.5, 0.0])
        assert np.allclose(trace.velocity(0.5), [1.0, 0.0])
        assert np.allclose(trace.velocity(1.5), [0.0, 1.0])

    def test_csv_round_trip(self, tmp_path):
        trace = ObstacleTrace(t=np.linspace(0, 1, 11), xy=np.random.default_rng(0).normal(size=(11, 2)))
        path = tmp_path / "obs.csv"
        trace.to_csv(path)
        back = ObstacleTrace.from_csv(path)
        assert np.array_equal(back.t, trace.t)
        assert np.array_equal(back.xy, trace.xy)
