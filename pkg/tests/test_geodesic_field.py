import math

import numpy as np
import numpy.testing as npt
import pytest

from app.errors import (
    ConfigError,
    DomainError,
    NoProgressError,
    NonConstantHamiltonianError,
    NotStrictlyConvexError,
    OutOfDomainError,
    ZeroCovectorError,
)
from app.services.asym_norm import ControlDescriptor, SupportFace, euclidean_norm, hexagon_norm
from app.services.definitions import resolve_field, shifted_hexagon_norm
from app.services.finsler_field import ChartDomain, ConstantField
from app.services.geodesic_field import (
    CotangentState,
    FaceSelection,
    IntegrationOptions,
    PhaseVelocity,
    Trajectory,
    extended_field,
    hamiltonian,
    integrate_batch,
    integrate_extended,
    integrate_spray_product,
    max_hamiltonian,
    normalize_covector,
    path_length,
    reparameterize_to_unit,
    reverse_trajectory,
)
from app.services.qh_plane import LN2, SQRT3, hexagon_geodesic_spec

H = SQRT3 / 2.0


class TestFieldEvaluation:
    def test_max_hamiltonian_on_face(self):
        result = max_hamiltonian(resolve_field("qh_hexagon"), (0.0, 1.0), (1.0, 0.0))
        assert result.value == pytest.approx(H)
        assert isinstance(result.support, SupportFace)

    def test_hamiltonian_of_a_control(self):
        field = resolve_field("qh_euclidean")
        # X_u at (0, 2) is u / F(u) = 2 u / |u|
        assert hamiltonian(field, (0.0, 2.0), (1.0, 0.0), (3.0, 4.0)) == pytest.approx(1.2)

    def test_extended_field_is_set_valued_on_faces(self):
        value = extended_field(resolve_field("qh_hexagon"), CotangentState.of((0.0, 1.0), (1.0, 0.0)))
        assert isinstance(value, FaceSelection)
        assert value.controls == (ControlDescriptor("vertex", 0), ControlDescriptor("vertex", 1))
        npt.assert_allclose(value.velocities[0].dx, (H, -0.5))
        npt.assert_allclose(value.velocities[1].dx, (H, 0.5))

    def test_extended_field_on_smooth_plane(self):
        value = extended_field(resolve_field("qh_euclidean"), CotangentState.of((0.0, 2.0), (3.0, 4.0)))
        assert isinstance(value, PhaseVelocity)
        npt.assert_allclose(value.dx, (1.2, 1.6))
        # alpha(y*) = F* = 10, d_hF(x, y*) = (0, -F(y*) / x2) = (0, -1/2)
        npt.assert_allclose(value.dalpha, (0.0, -5.0))

    def test_invalid_states(self):
        field = resolve_field("qh_hexagon")
        with pytest.raises(ZeroCovectorError):
            extended_field(field, CotangentState.of((0.0, 1.0), (0.0, 0.0)))
        with pytest.raises(OutOfDomainError):
            extended_field(field, CotangentState.of((0.0, -1.0), (1.0, 0.0)))

    def test_normalize_covector(self):
        field = resolve_field("qh_se")
        state = normalize_covector(field, CotangentState.of((0.3, 1.7), (2.0, -5.0)))
        assert field.dual_eval(state.x, state.alpha) == pytest.approx(1.0)


class TestIntegration:
    def test_hexagon_switches_at_two_ln_two(self):
        field = resolve_field("qh_hexagon")
        traj = integrate_extended(field, CotangentState.of((0.0, 1.0), (1.0, SQRT3)), (0.0, 3.0))
        switches = traj.switch_times()
        assert switches[0] == pytest.approx(2.0 * LN2, abs=1e-6)
        assert traj.pieces[0].control == "vertex:1"
        assert traj.pieces[1].control == "vertex:0"
        assert traj.max_drift < 1e-6

    def test_hexagon_matches_closed_form(self):
        field = resolve_field("qh_hexagon")
        x0, alpha0 = (-0.3, 0.8), (1.5, 0.4)
        spec = hexagon_geodesic_spec(x0, alpha0)
        for t1 in (2.5, -2.5):
            end = integrate_extended(field, CotangentState.of(x0, alpha0), (0.0, t1))
            state = end.final_state() if t1 > 0 else end.initial_state()
            exact = spec.state_at(t1)
            npt.assert_allclose(state.x, exact.x, atol=1e-6)
            npt.assert_allclose(state.alpha, exact.alpha, atol=1e-6)

    def test_backward_integration_keeps_time_order(self):
        field = resolve_field("qh_euclidean")
        traj = integrate_extended(field, CotangentState.of((0.0, 2.0), (0.0, 0.5)), (0.0, -LN2))
        assert traj.t_start == pytest.approx(-LN2)
        assert traj.t_end == pytest.approx(0.0)
        npt.assert_allclose(traj.initial_state().x, (0.0, 1.0), atol=1e-9)
        npt.assert_allclose(traj.final_state().x, (0.0, 2.0))

    def test_face_policy(self):
        field = resolve_field("qh_hexagon")
        state = CotangentState.of((0.0, 1.0), (1.0, SQRT3))
        with pytest.raises(ConfigError):
            integrate_extended(field, state, (0.0, 1.0), options=IntegrationOptions(face_policy="sideways"))
        with pytest.raises(ConfigError):
            integrate_extended(field, state, (0.0, 1.0), options=IntegrationOptions(face_policy=4))

    def test_stuck_on_face_without_sliding(self):
        field = ConstantField(hexagon_norm(), name="constant_hexagon")
        state = CotangentState.of((0.0, 0.0), (1.0, 0.0))
        with pytest.raises(NoProgressError):
            integrate_extended(field, state, (0.0, 1.0))

        traj = integrate_extended(field, state, (0.0, 1.0), options=IntegrationOptions(allow_face_sliding=True))
        npt.assert_allclose(traj.final_state().x, (H, -0.5), atol=1e-12)
        assert traj.c0 == pytest.approx(H)

    def test_domain_exit_truncates(self):
        domain = ChartDomain(lower=(-1.0, -1.0), upper=(1.0, 1.0))
        field = ConstantField(euclidean_norm(), domain=domain)
        traj = integrate_extended(field, CotangentState.of((0.0, 0.0), (1.0, 0.0)), (0.0, 2.0))
        assert traj.events[-1].kind == "domain_exit"
        assert traj.events[-1].t == pytest.approx(1.0, abs=1e-6)
        assert traj.final_state().x[0] < 1.0

    def test_step_must_be_positive(self):
        with pytest.raises(ConfigError):
            integrate_extended(resolve_field("qh_euclidean"), CotangentState.of((0.0, 1.0), (1.0, 0.0)),
                               (0.0, 1.0), step=-1e-3)

    def test_fiber_scaling(self):
        field = resolve_field("qh_se")
        base = integrate_extended(field, CotangentState.of((0.2, 1.1), (0.3, 1.0)), (0.0, 1.0)).final_state()
        scaled = integrate_extended(field, CotangentState.of((0.2, 1.1), (3.0, 10.0)), (0.0, 1.0)).final_state()
        npt.assert_allclose(scaled.x, base.x, atol=1e-9)
        npt.assert_allclose(scaled.alpha / 10.0, base.alpha, atol=1e-9)

    def test_batch_keeps_input_order(self, rng):
        field = resolve_field("qh_euclidean")
        states = [CotangentState.of((x1, 1.0), (1.0, a2)) for x1, a2 in rng.uniform(-1.0, 1.0, size=(4, 2))]
        batch = integrate_batch(field, states, (0.0, 0.5), max_workers=2)
        for state, traj in zip(states, batch):
            single = integrate_extended(field, state, (0.0, 0.5))
            npt.assert_allclose(traj.final_state().x, single.final_state().x)


class TestDerivedCurves:
    def test_spray_needs_strict_convexity(self):
        with pytest.raises(NotStrictlyConvexError):
            integrate_spray_product(resolve_field("qh_hexagon"), CotangentState.of((0.0, 1.0), (1.0, 1.0)),
                                    (0.0, 1.0))

    def test_reparameterized_spray_matches_extended(self):
        field = resolve_field("riemannian_hyperbolic")
        state = CotangentState.of((0.0, 1.0), (2.0, 0.0))
        spray = integrate_spray_product(field, state, (0.0, 0.5))
        assert spray.c0 == pytest.approx(2.0)
        unit = reparameterize_to_unit(field, spray)
        assert unit.t_end == pytest.approx(1.0)
        extended = integrate_extended(field, state, (0.0, 1.0))
        npt.assert_allclose(unit.final_state().x, extended.final_state().x, atol=1e-8)

    def test_reparameterize_rejects_drifting_dual(self):
        field = resolve_field("qh_euclidean")
        traj = integrate_extended(field, CotangentState.of((0.0, 1.0), (1.0, 0.0)), (0.0, 0.1))
        traj.pieces[-1].alphas[-1] *= 2.0
        with pytest.raises(NonConstantHamiltonianError):
            reparameterize_to_unit(field, traj)

    def test_path_length_of_vertical_geodesic(self):
        field = resolve_field("qh_euclidean")
        traj = integrate_extended(field, CotangentState.of((0.0, 1.0), (0.0, 1.0)), (0.0, LN2))
        npt.assert_allclose(traj.final_state().x, (0.0, 2.0), atol=1e-9)
        assert path_length(field, traj) == pytest.approx(LN2, rel=1e-6)

    def test_reverse_trajectory(self):
        field = resolve_field("qh_euclidean")
        traj = integrate_extended(field, CotangentState.of((0.0, 1.0), (1.0, 0.5)), (0.0, 1.0))
        reversed_traj = reverse_trajectory(field, traj)
        assert isinstance(reversed_traj, Trajectory)
        npt.assert_allclose(reversed_traj.initial_state().x, traj.final_state().x)
        npt.assert_allclose(reversed_traj.initial_state().alpha, -traj.final_state().alpha)
        npt.assert_allclose(reversed_traj.final_state().x, traj.initial_state().x)
        # The reversed state generates the reversed curve
        again = integrate_extended(field, reversed_traj.initial_state(), (0.0, 1.0))
        npt.assert_allclose(again.final_state().x, traj.initial_state().x, atol=1e-8)

    def test_reverse_needs_symmetric_field(self):
        field = ConstantField(shifted_hexagon_norm(), name="shifted")
        traj = integrate_extended(field, CotangentState.of((0.0, 0.0), (1.0, 1.0)), (0.0, 1.0))
        with pytest.raises(DomainError):
            reverse_trajectory(field, traj)


def test_summary_is_serializable():
    traj = integrate_extended(resolve_field("qh_hexagon"), CotangentState.of((0.0, 1.0), (1.0, SQRT3)), (0.0, 3.0))
    summary = traj.summary()
    assert summary.pieces == len(traj.pieces)
    assert [e.kind for e in summary.events] == ["switch"] * len(traj.switch_times())
    assert math.isfinite(summary.max_drift)
    assert '"kind":"extended"' in summary.model_dump_json()


INVARIANT_CASES = [
    ("qh_hexagon", (-0.3, 0.8), (1.5, 0.4)),
    ("qh_hexagon", (0.2, 0.7), (-2.0, 1.0)),
    ("qh_euclidean", (0.0, 1.0), (1.0, 0.5)),
    ("qh_se", (0.2, 1.1), (0.3, 1.0)),
]

SWITCHING_CASES = [case for case in INVARIANT_CASES if case[0] == "qh_hexagon"] + [
    ("qh_hexagon", (0.0, 1.0), (1.0, SQRT3)),
]


def _interior(piece, trim=2):
    """Samples of a piece away from its event states."""
    keep = slice(trim, len(piece.times) - trim)
    return piece.times[keep], piece.xs[keep], piece.alphas[keep]


class TestTrajectoryInvariants:
    @pytest.mark.parametrize("name, x0, alpha0", INVARIANT_CASES)
    def test_unit_speed(self, name, x0, alpha0):
        field = resolve_field(name)
        traj = integrate_extended(field, CotangentState.of(x0, alpha0), (0.0, 2.0))
        for piece in traj.pieces:
            if len(piece.times) < 8:
                continue
            velocities = np.gradient(piece.xs, piece.times, axis=0)
            _, xs, _ = _interior(piece)
            speeds = [field.field_eval(x, v) for x, v in zip(xs, velocities[2:len(piece.times) - 2])]
            npt.assert_allclose(speeds, 1.0, atol=1e-6)

    @pytest.mark.parametrize("name, x0, alpha0", SWITCHING_CASES)
    def test_state_is_continuous_at_switches(self, name, x0, alpha0):
        traj = integrate_extended(resolve_field(name), CotangentState.of(x0, alpha0), (0.0, 3.0))
        switches = [e for e in traj.events if e.kind == "switch"]
        assert switches
        assert len(traj.pieces) > 1
        for before, after in zip(traj.pieces, traj.pieces[1:]):
            t_event = after.times[0]
            assert before.times[-1] == t_event
            npt.assert_allclose(after.xs[0], before.xs[-1], atol=1e-12)
            npt.assert_allclose(after.alphas[0], before.alphas[-1], atol=1e-12)
            assert any(e.t == t_event and e.to_control == after.control for e in switches)

    @pytest.mark.parametrize("name, x0, alpha0", INVARIANT_CASES)
    def test_quasi_hyperbolic_covector_equations(self, name, x0, alpha0):
        field = resolve_field(name)
        traj = integrate_extended(field, CotangentState.of(x0, alpha0), (0.0, 2.0))
        c0 = traj.c0
        _, _, alphas = traj.samples()
        npt.assert_allclose(alphas[:, 0], alpha0[0], atol=1e-10)
        for piece in traj.pieces:
            if len(piece.times) < 8:
                continue
            rates = np.gradient(piece.alphas[:, 1], piece.times)[2:len(piece.times) - 2]
            _, xs, _ = _interior(piece)
            npt.assert_allclose(rates, -c0 / xs[:, 1], rtol=1e-6)
            for x, alpha in zip(xs[::50], piece.alphas[2::50]):
                value = extended_field(field, CotangentState.of(x, alpha))
                if isinstance(value, PhaseVelocity):
                    assert value.dalpha[0] == 0.0
                    assert value.dalpha[1] == pytest.approx(-c0 / x[1], rel=1e-8)

    def test_spray_step_must_be_positive(self):
        with pytest.raises(ConfigError):
            integrate_spray_product(resolve_field("riemannian_hyperbolic"), CotangentState.of((0.0, 1.0), (1.0, 0.0)),
                                    (0.0, 1.0), step=-1e-3)
