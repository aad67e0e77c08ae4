import math

import numpy as np
import pytest

from conftest import HEX_POINTS, same_vertex_set
from ibckit import box, hull_from_points, scale
from ibckit.geometry import tangent_cone
from ibckit.ibc import (
    AlphaTooSmall,
    InputSet,
    NoFeasibleScale,
    NotControllable,
    Verdict,
    backward_invariance_lp,
    check_ibc,
    cone_dip_lp,
    construct_ibc_polytope,
    equilibrium_input,
    invariance_lp,
    rescale_velocity_axes,
)
from ibckit.linsys import DecompositionFails, LinearSystem, spans_state_space
from ibckit.models import double_integrator

ARM_HALF = 5.0 * math.pi / 12.0


def arm_region():
    sys = double_integrator()
    P = box([-ARM_HALF, -1.0], [ARM_HALF, 1.0])
    return sys, construct_ibc_polytope(sys, P, 1.2)


def check_witness(sys, X, v, rec, backward=False):
    cone = tangent_cone(X, v)
    f = sys.A @ cone.vertex + sys.B @ rec.u
    if backward:
        f = -f
    assert np.all(cone.normals @ f <= -rec.margin + 1e-7)


class TestInvarianceLP:
    def test_equilibrium_vertex_neutral(self, di, hexagon):
        rec = invariance_lp(di, hexagon, [1.0, 0.0])
        assert rec.feasible
        assert rec.margin == pytest.approx(0.0, abs=1e-9)

    def test_arm_vertex_strict_fails_tight_input(self):
        sys, X = arm_region()
        rec = invariance_lp(sys, X, [ARM_HALF, 1.0], InputSet.box([-3], [3]), strict=True)
        assert not rec.feasible
        assert rec.margin < 0

    def test_arm_vertex_strict_ok_full_input(self):
        sys, X = arm_region()
        for strictly, v in ((True, [ARM_HALF, 1.0]), (True, [-ARM_HALF, -1.0])):
            rec = invariance_lp(sys, X, v, InputSet.box([-5], [5]), strict=strictly)
            assert rec.feasible and rec.strict
            check_witness(sys, X, v, rec)

    def test_hand_computed_bound(self):
        # at (arm_half, 1) the slanted facet needs u < -(12/pi), so the
        # strict margin flips sign exactly when the box crosses that value
        sys, X = arm_region()
        tight = invariance_lp(sys, X, [ARM_HALF, 1.0], InputSet.box([-12 / math.pi + 0.01], [5]))
        loose = invariance_lp(sys, X, [ARM_HALF, 1.0], InputSet.box([-12 / math.pi - 0.01], [5]))
        assert tight.margin < 0 < loose.margin


class TestBackwardLP:
    def test_equilibrium_vertex(self, di, hexagon):
        rec = backward_invariance_lp(di, hexagon, [-1.0, 0.0])
        assert rec.feasible

    def test_off_equilibrium_vertex_feasible(self, di, hexagon):
        fwd = invariance_lp(di, hexagon, [-0.8, -1.0])
        bwd = backward_invariance_lp(di, hexagon, [0.8, 1.0])
        assert fwd.feasible and bwd.feasible
        check_witness(di, hexagon, [0.8, 1.0], bwd, backward=True)
        # central symmetry pairs the two backward problems exactly
        bwd2 = backward_invariance_lp(di, hexagon, [-0.8, -1.0])
        assert bwd.margin == pytest.approx(bwd2.margin, abs=1e-9)

    def test_arm_prime_strict_under_tight_input(self, arm_profile_tight):
        sys = double_integrator()
        X = arm_profile_tight.region
        rec = backward_invariance_lp(
            sys, X, [ARM_HALF, 0.75], InputSet.box([-3], [3]), strict=True
        )
        assert rec.feasible and rec.strict


class TestConeDip:
    def test_top_vertex_dips(self, di, hexagon):
        rec = cone_dip_lp(di, hexagon, [0.8, 1.0])
        assert rec.feasible
        assert rec.b[0] == pytest.approx(0.0, abs=1e-12)
        assert rec.b[1] < 0

    def test_equilibrium_vertex_no_dip(self, di, hexagon):
        assert not cone_dip_lp(di, hexagon, [1.0, 0.0]).feasible

    def test_facet_parallel_input_span(self, di):
        sq = box([-1, -1], [1, 1])
        assert not cone_dip_lp(di, sq, [1.0, 1.0]).feasible


class TestCheckIBC:
    def test_box_not_ibc_names_corner(self, di, pbox):
        cert = check_ibc(di, pbox)
        assert cert.verdict is Verdict.NOT_IBC
        failing = [pbox.vertices[i] for i in cert.failing]
        assert any(np.allclose(v, [0.8, 1.0]) for v in failing)

    def test_hexagon_ibc_geometric_route(self, di, hexagon):
        cert = check_ibc(di, hexagon)
        assert cert.verdict is Verdict.IBC
        assert cert.route == "equilibrium-cone"
        assert cert.controllable and cert.simplicial

    def test_scaled_hexagon_ibc(self, di, hexagon):
        cert = check_ibc(di, scale(hexagon, 0.3))
        assert cert.verdict is Verdict.IBC

    @pytest.mark.parametrize("lam", [0.1, 2.0, 5.0])
    def test_scaling_invariance(self, di, hexagon, pbox, lam):
        assert check_ibc(di, scale(hexagon, lam)).verdict is Verdict.IBC
        assert check_ibc(di, scale(pbox, lam)).verdict is Verdict.NOT_IBC

    def test_uncontrollable_not_ibc(self, hexagon):
        sys = LinearSystem(np.eye(2), np.array([[0.0], [1.0]]))
        assert check_ibc(sys, hexagon).verdict is Verdict.NOT_IBC

    def test_witness_validity_all_records(self, di, hexagon):
        cert = check_ibc(di, hexagon)
        for rec in cert.records:
            check_witness(di, hexagon, rec.vertex, rec.invariance)
            check_witness(di, hexagon, rec.vertex, rec.backward, backward=True)

    def test_bounded_input_strict_route(self, di, hexagon):
        cert = check_ibc(di, hexagon, InputSet.box([-20], [20]))
        assert cert.verdict is Verdict.IBC

    def test_bounded_input_too_small_not_ibc(self, di, hexagon):
        cert = check_ibc(di, hexagon, InputSet.box([-1e-6], [1e-6]))
        assert cert.verdict is Verdict.NOT_IBC

    def test_bounded_marginal_is_necessary_only(self, di):
        # seed half-width exactly at the strict-feasibility boundary:
        # non-strict conditions hold, strict ones do not
        xb = 30.0 - 49.0 / 5.0
        X = hull_from_points(
            np.array([[xb, 7.0], [xb, -7.0], [-xb, 7.0], [-xb, -7.0], [30.0, 0.0], [-30.0, 0.0]])
        )
        U = InputSet.box([-5], [5])
        cert = check_ibc(di, X, U)
        assert cert.verdict is Verdict.NECESSARY_ONLY
        assert check_ibc(di, X, U, assume_input_mild=True).verdict is Verdict.IBC

    def test_monotone_in_input_set(self, di, hexagon):
        small = check_ibc(di, hexagon, InputSet.box([-6], [6]))
        large = check_ibc(di, hexagon, InputSet.box([-30], [30]))
        for rs, rl in zip(small.records, large.records):
            if rs.invariance.strict:
                assert rl.invariance.strict
            if rs.backward.strict:
                assert rl.backward.strict

    def test_certificate_json(self, di, hexagon):
        doc = check_ibc(di, hexagon).to_dict()
        assert doc["verdict"] == "IBC"
        assert len(doc["vertices"]) == 6


class TestConstruct:
    def test_example_polytope(self, di, pbox):
        X = construct_ibc_polytope(di, pbox, 1.25)
        assert same_vertex_set(X.vertices, HEX_POINTS)

    def test_arm_pushed_vertices(self, di):
        X = construct_ibc_polytope(di, box([-ARM_HALF, -1], [ARM_HALF, 1]), 1.2)
        assert any(np.allclose(v, [math.pi / 2, 0.0], atol=1e-12) for v in X.vertices)
        assert any(np.allclose(v, [-math.pi / 2, 0.0], atol=1e-12) for v in X.vertices)

    def test_alpha_validation(self, di, pbox):
        with pytest.raises(AlphaTooSmall):
            construct_ibc_polytope(di, pbox, 1.0)

    def test_not_controllable(self, pbox):
        sys = LinearSystem(np.eye(2), np.array([[0.0], [1.0]]))
        with pytest.raises(NotControllable):
            construct_ibc_polytope(sys, pbox, 1.25)

    def test_decomposition_failure_propagates(self):
        # triple integrator: controllable, but the equilibria plus the
        # input span cover only a plane of R^3
        A = np.array([[0.0, 1, 0], [0, 0, 1], [0, 0, 0]])
        sys = LinearSystem(A, np.array([[0.0], [0], [1]]))
        assert sys.controllable and not spans_state_space(sys)
        with pytest.raises(DecompositionFails):
            construct_ibc_polytope(sys, box([-1, -1, -1], [1, 1, 1]), 1.25)

    def test_square_b_degenerates_to_seed(self):
        # with m = n every state is an equilibrium and the pushed points
        # collapse to the origin, so the hull returns the seed box
        sys = LinearSystem(np.array([[1.0, 2.0], [3.0, 4.0]]), np.eye(2))
        P = box([-1, -1], [1, 1])
        X = construct_ibc_polytope(sys, P, 1.5)
        assert same_vertex_set(X.vertices, P.vertices)
        assert check_ibc(sys, X).verdict is Verdict.IBC

    def test_vertex_decomposition_identity(self, di, pbox):
        # each seed vertex splits as v = b_v + o_bar with b_v in Im(B)
        from ibckit.linsys import decompose

        dec = decompose(di)
        Qb = di.b_span
        for v in pbox.vertices:
            o_bar = dec.project_to_equilibria(v)
            bv = v - o_bar
            assert np.linalg.norm(bv - Qb @ (Qb.T @ bv)) <= 1e-9


class TestRandomSoundness:
    def test_fifty_random_systems(self):
        rng = np.random.default_rng(42)
        alphas = [1.1, 1.5, 3.0]
        built = 0
        while built < 50:
            A = rng.normal(size=(2, 2))
            B = rng.normal(size=(2, 1))
            if np.linalg.norm(B) < 0.3:
                continue
            sys = LinearSystem(A, B)
            if not (sys.controllable and spans_state_space(sys)):
                continue
            half = rng.uniform(0.3, 2.0, size=2)
            P = box(-half, half)
            X = construct_ibc_polytope(sys, P, alphas[built % 3])
            cert = check_ibc(sys, X)
            assert cert.verdict is Verdict.IBC, f"system {built}: {cert.verdict}"
            for rec in cert.records:
                check_witness(sys, X, rec.vertex, rec.invariance)
                check_witness(sys, X, rec.vertex, rec.backward, backward=True)
            built += 1


class TestRescale:
    def test_arm_hits_three_quarters(self, di):
        _, X = arm_region()
        Xs, lam = rescale_velocity_axes(di, X, InputSet.box([-3], [3]))
        assert lam == 0.75
        assert np.abs(Xs.vertices[:, 1]).max() == pytest.approx(0.75)
        want = np.array(
            [
                [-ARM_HALF, -0.75],
                [ARM_HALF, -0.75],
                [ARM_HALF, 0.75],
                [-ARM_HALF, 0.75],
                [math.pi / 2, 0.0],
                [-math.pi / 2, 0.0],
            ]
        )
        assert same_vertex_set(Xs.vertices, want, tol=1e-9)

    def test_no_rescale_needed_with_full_authority(self, di):
        _, X = arm_region()
        Xs, lam = rescale_velocity_axes(di, X, InputSet.box([-5], [5]))
        assert lam == 1.0
        assert same_vertex_set(Xs.vertices, X.vertices)

    def test_vanishing_authority(self, di):
        _, X = arm_region()
        with pytest.raises(NoFeasibleScale):
            rescale_velocity_axes(di, X, InputSet.box([-1e-6], [1e-6]))

    def test_result_passes_plain_strict_lps(self, di):
        # the worst-case-speed certificate implies the plain strict one
        _, X = arm_region()
        Xs, _ = rescale_velocity_axes(di, X, InputSet.box([-3], [3]))
        U = InputSet.box([-3], [3])
        for v in Xs.vertices:
            if abs(v[1]) < 1e-9:
                continue
            assert invariance_lp(di, Xs, v, U, strict=True).strict
            assert backward_invariance_lp(di, Xs, v, U, strict=True).strict

    def test_equilibrium_input_helper(self, di):
        u = equilibrium_input(di, [0.7, 0.0])
        assert np.allclose(di.A @ [0.7, 0.0] + di.B @ u, 0.0, atol=1e-12)
