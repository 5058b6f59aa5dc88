"""Extended geodesic field on the slit cotangent bundle and its integrators.

For a state (x, alpha) with alpha != 0, let y* be the unit vector at x that
maximizes alpha. The extended field is

    dx/dt = y*,    dalpha/dt = alpha(y*) * d_hF(x, y*)

and its maximized Hamiltonian F*(x, alpha) stays constant along integral
curves. When y* is not unique (a flat polygon face) the field is set valued;
the integrator then follows one extreme vertex at a time and switches vertex
when alpha crosses into a neighbouring normal cone.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import simpson
from scipy.optimize import bisect

from app.config import settings
from app.errors import (
    ConfigError,
    DomainError,
    NoProgressError,
    NonConstantHamiltonianError,
    NotStrictlyConvexError,
    ZeroCovectorError,
)
from app.models.schemas import EventRecord, TrajectorySummary
from app.services.asym_norm import ControlDescriptor, SupportSet, as_vector
from app.services.finsler_field import FinslerField

logger = logging.getLogger(__name__)

FACE_POLICIES = ("clockwise", "counterclockwise", "probe")


@dataclass(frozen=True, eq=False)
class CotangentState:
    """Point x with a nonzero covector alpha."""

    x: np.ndarray
    alpha: np.ndarray

    @classmethod
    def of(cls, x: Sequence[float], alpha: Sequence[float]) -> "CotangentState":
        return cls(np.asarray(x, dtype=float).copy(), np.asarray(alpha, dtype=float).copy())


@dataclass(frozen=True, eq=False)
class PhaseVelocity:
    dx: np.ndarray
    dalpha: np.ndarray


@dataclass(frozen=True, eq=False)
class FaceSelection:
    """Set-valued field on a face: the two extreme controls and their velocities."""

    face: ControlDescriptor
    controls: Tuple[ControlDescriptor, ControlDescriptor]
    velocities: Tuple[PhaseVelocity, PhaseVelocity]


@dataclass(frozen=True, eq=False)
class MaxHamiltonian:
    value: float
    support: SupportSet


@dataclass(frozen=True)
class TrajectoryEvent:
    t: float
    kind: str
    from_control: Optional[str] = None
    to_control: Optional[str] = None


@dataclass(eq=False)
class TrajectoryPiece:
    """Samples of one smooth branch, ordered by increasing time."""

    t_a: float
    t_b: float
    control: str
    times: np.ndarray
    xs: np.ndarray
    alphas: np.ndarray
    hamiltonian: np.ndarray


@dataclass(eq=False)
class Trajectory:
    """Piecewise phase curve with switching and domain-exit events."""

    pieces: List[TrajectoryPiece]
    events: List[TrajectoryEvent]
    c0: float
    kind: str = "extended"
    max_drift: float = 0.0
    length: Optional[float] = None

    @property
    def t_start(self) -> float:
        return float(self.pieces[0].t_a)

    @property
    def t_end(self) -> float:
        return float(self.pieces[-1].t_b)

    def samples(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """All (times, xs, alphas), dropping duplicated joint samples."""
        times, xs, alphas = [], [], []
        for i, piece in enumerate(self.pieces):
            start = 1 if i > 0 and times and math.isclose(piece.times[0], times[-1][-1], abs_tol=1e-15) else 0
            times.append(piece.times[start:])
            xs.append(piece.xs[start:])
            alphas.append(piece.alphas[start:])
        return np.concatenate(times), np.concatenate(xs), np.concatenate(alphas)

    def initial_state(self) -> CotangentState:
        return CotangentState.of(self.pieces[0].xs[0], self.pieces[0].alphas[0])

    def final_state(self) -> CotangentState:
        return CotangentState.of(self.pieces[-1].xs[-1], self.pieces[-1].alphas[-1])

    def switch_times(self) -> List[float]:
        return [e.t for e in self.events if e.kind == "switch"]

    def summary(self) -> TrajectorySummary:
        final = self.final_state()
        return TrajectorySummary(
            kind=self.kind,
            c0=self.c0,
            t_start=self.t_start,
            t_end=self.t_end,
            pieces=len(self.pieces),
            events=[EventRecord(t=e.t, kind=e.kind, from_control=e.from_control, to_control=e.to_control)
                    for e in self.events],
            max_drift=self.max_drift,
            final_x=final.x.tolist(),
            final_alpha=final.alpha.tolist(),
            length=self.length,
        )


@dataclass
class IntegrationOptions:
    """Knobs of the event-driven integrator.

    ``face_policy`` picks the extreme vertex when the initial support set is a
    face: ``clockwise`` (the endpoint first in counter-clockwise order),
    ``counterclockwise``, ``probe`` (the endpoint the flow moves towards) or a
    vertex index.
    """

    face_policy: Union[str, int] = "clockwise"
    allow_face_sliding: bool = False
    max_switches: Optional[int] = None
    initial_control: Optional[ControlDescriptor] = None
    drift_tol: Optional[float] = None
    event_xtol: Optional[float] = None
    record_every: int = 1


def _validated_state(field: FinslerField, state: CotangentState) -> Tuple[np.ndarray, np.ndarray]:
    x = field.domain.require(state.x)
    alpha = as_vector(state.alpha, field.dimension)
    if not np.any(alpha):
        raise ZeroCovectorError("Covector must be nonzero on the slit cotangent bundle")
    return x, alpha


def hamiltonian(field: FinslerField, x: Sequence[float], alpha: Sequence[float], u: Sequence[float]) -> float:
    """H_u(x, alpha) = alpha(X_u(x))."""
    return float(as_vector(alpha, field.dimension) @ field.unit_vector(x, u))


def max_hamiltonian(field: FinslerField, x: Sequence[float], alpha: Sequence[float]) -> MaxHamiltonian:
    """Maximum of alpha over the unit sphere at x, with the maximizing set."""
    x, alpha = _validated_state(field, CotangentState.of(x, alpha))
    norm = field.norm_at(x)
    return MaxHamiltonian(value=norm.dual_eval(alpha), support=norm.support_set(alpha))


def phase_velocity(field: FinslerField, x: np.ndarray, alpha: np.ndarray, control: ControlDescriptor) -> PhaseVelocity:
    """Velocity of the Hamiltonian flow for a fixed control, without validation."""
    y = field.norm_at(x).control_point(control, alpha)
    return PhaseVelocity(dx=y, dalpha=float(alpha @ y) * field.horizontal_derivative_raw(x, y))


def extended_field(field: FinslerField, state: CotangentState) -> Union[PhaseVelocity, FaceSelection]:
    """Evaluate the extended geodesic field at a state."""
    x, alpha = _validated_state(field, state)
    norm = field.norm_at(x)
    control = norm.control_descriptor(alpha)
    if control.kind == "face":
        first, second = norm.face_controls(control)
        return FaceSelection(
            face=control,
            controls=(first, second),
            velocities=(phase_velocity(field, x, alpha, first), phase_velocity(field, x, alpha, second)),
        )
    return phase_velocity(field, x, alpha, control)


def normalize_covector(field: FinslerField, state: CotangentState) -> CotangentState:
    """Rescale alpha so that F*(x, alpha) = 1."""
    x, alpha = _validated_state(field, state)
    return CotangentState.of(x, alpha / field.dual_eval(x, alpha))


class _EventIntegrator:
    """Fixed-step RK4 with the control frozen per step and bisected switch events."""

    def __init__(self, field: FinslerField, step: float, options: IntegrationOptions, scale_by_dual: bool):
        self.field = field
        self.step = step
        self.options = options
        self.scale_by_dual = scale_by_dual
        self.epsilon = 10.0 * step * settings.probe_factor
        self.xtol = options.event_xtol or settings.event_xtol
        self.guard = max(settings.face_tol, 100.0 * self.xtol)

    def rhs(self, x: np.ndarray, alpha: np.ndarray, control: ControlDescriptor) -> Tuple[np.ndarray, np.ndarray]:
        v = phase_velocity(self.field, x, alpha, control)
        if self.scale_by_dual:
            scale = self.field.norm_at(x).dual_eval(alpha)
            return scale * v.dx, scale * v.dalpha
        return v.dx, v.dalpha

    def advance(self, x, alpha, h, control) -> Optional[Tuple[np.ndarray, np.ndarray]]:
        """One RK4 step; None when a stage leaves the domain."""
        try:
            k1x, k1a = self.rhs(x, alpha, control)
            k2x, k2a = self.rhs(x + 0.5 * h * k1x, alpha + 0.5 * h * k1a, control)
            k3x, k3a = self.rhs(x + 0.5 * h * k2x, alpha + 0.5 * h * k2a, control)
            k4x, k4a = self.rhs(x + h * k3x, alpha + h * k3a, control)
        except (DomainError, ValueError):
            return None
        x_new = x + h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        a_new = alpha + h / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a)
        if not self.field.domain.contains(x_new):
            return None
        return x_new, a_new

    def margin(self, x, alpha, control) -> float:
        return self.field.norm_at(x).control_margin(control, alpha)

    def hamiltonian(self, x, alpha, control) -> float:
        return float(alpha @ self.field.norm_at(x).control_point(control, alpha))

    def probe_control(self, x, alpha, control, direction) -> ControlDescriptor:
        """Control active a little after an event, found by a one-sided probe."""
        norm = self.field.norm_at(x)
        _, dalpha = self.rhs(x, alpha, control)
        probed = norm.control_descriptor(alpha + direction * self.epsilon * dalpha)
        if probed.kind == "face" or probed == control:
            return norm.adjacent_control(control, alpha)
        return probed

    def initial_control(self, x, alpha, direction) -> ControlDescriptor:
        if self.options.initial_control is not None:
            return self.options.initial_control
        norm = self.field.norm_at(x)
        control = norm.control_descriptor(alpha)
        if control.kind != "face":
            return control

        first, second = norm.face_controls(control)
        policy = self.options.face_policy
        if isinstance(policy, str) and policy.lstrip("-").isdigit():
            policy = int(policy)
        if isinstance(policy, int):
            for candidate in (first, second):
                if candidate.index == policy:
                    return candidate
            raise ConfigError(f"Vertex {policy} is not an endpoint of {control.label}")
        if policy == "clockwise":
            chosen = first
        elif policy == "counterclockwise":
            chosen = second
        elif policy == "probe":
            def probed_margin(candidate: ControlDescriptor) -> float:
                _, dalpha = self.rhs(x, alpha, candidate)
                return norm.control_margin(candidate, alpha + direction * self.epsilon * dalpha)

            chosen = max((first, second), key=probed_margin)
        else:
            raise ConfigError(f"Unknown face policy {policy!r}; expected one of {FACE_POLICIES} or a vertex index")
        logger.debug(f"Initial covector on {control.label}; policy {policy!r} selects {chosen.label}")
        return chosen

    def exit_point(self, x, alpha, h, control) -> Tuple[float, Optional[Tuple[np.ndarray, np.ndarray]]]:
        """Bisect the largest fraction of ``h`` that stays inside the domain."""
        lo, hi = 0.0, 1.0
        best = None
        while (hi - lo) * abs(h) > self.xtol:
            mid = 0.5 * (lo + hi)
            result = self.advance(x, alpha, mid * h, control)
            if result is None:
                hi = mid
            else:
                lo, best = mid, result
        return lo * h, best

    def run(self, state0: CotangentState, t_span: Tuple[float, float], kind: str) -> Trajectory:
        x, alpha = _validated_state(self.field, state0)
        t0, t1 = float(t_span[0]), float(t_span[1])
        direction = 1.0 if t1 >= t0 else -1.0
        c0 = self.field.norm_at(x).dual_eval(alpha)
        control = self.initial_control(x, alpha, direction)

        pieces: List[TrajectoryPiece] = []
        events: List[TrajectoryEvent] = []
        t = t0
        buffer = _PieceBuffer(control.label)
        buffer.add(t, x, alpha, self.hamiltonian(x, alpha, control))
        switches = 0
        steps = 0

        while abs(t1 - t) > 1e-12 * max(1.0, abs(t1)):
            h = direction * min(self.step, abs(t1 - t))
            m0 = self.margin(x, alpha, control)
            result = self.advance(x, alpha, h, control)

            if result is None:
                dt, last = self.exit_point(x, alpha, h, control)
                if last is not None:
                    x, alpha = last
                    t += dt
                    buffer.add(t, x, alpha, self.hamiltonian(x, alpha, control))
                events.append(TrajectoryEvent(t=t, kind="domain_exit", from_control=control.label))
                logger.warning(f"Trajectory left the domain at t={t:.12g}; truncated")
                break

            x_new, a_new = result
            m1 = self.margin(x_new, a_new, control)

            if abs(m0) <= settings.face_tol and abs(m1) <= settings.face_tol and not self.options.allow_face_sliding:
                raise NoProgressError(
                    f"Covector stays on the boundary of {control.label} for a full step at t={t:.12g}; "
                    "enable face sliding to follow the extreme vertex"
                )

            if m1 < 0 and m0 < 0:
                if m1 <= m0 or m0 < -self.guard:
                    # Moving away from the active region: the control is wrong
                    fresh = self.probe_control(x, alpha, control, direction)
                    if fresh == control or (events and events[-1].t == t and events[-1].to_control == fresh.label):
                        raise NoProgressError(f"Cannot select a consistent control at t={t:.12g}")
                    events.append(TrajectoryEvent(t=t, kind="switch", from_control=control.label, to_control=fresh.label))
                    pieces.append(buffer.close())
                    control = fresh
                    buffer = _PieceBuffer(control.label)
                    buffer.add(t, x, alpha, self.hamiltonian(x, alpha, control))
                    continue

            elif m1 < 0 <= m0:
                s = bisect(
                    lambda frac: self._margin_after(x, alpha, direction * frac, control),
                    0.0, abs(h), xtol=self.xtol,
                )
                event = self.advance(x, alpha, direction * s, control) if s > 0 else (x, alpha)
                if event is None:
                    event = (x, alpha)
                x, alpha = event
                t += direction * s
                buffer.add(t, x, alpha, self.hamiltonian(x, alpha, control))
                fresh = self.probe_control(x, alpha, control, direction)
                if s == 0 and events and events[-1].t == t:
                    raise NoProgressError(f"Repeated switching without progress at t={t:.12g}")
                events.append(TrajectoryEvent(t=t, kind="switch", from_control=control.label, to_control=fresh.label))
                logger.debug(f"Switch {control.label} -> {fresh.label} at t={t:.12g}")
                pieces.append(buffer.close())
                control = fresh
                buffer = _PieceBuffer(control.label)
                buffer.add(t, x, alpha, self.hamiltonian(x, alpha, control))
                switches += 1
                if self.options.max_switches is not None and switches >= self.options.max_switches:
                    break
                continue

            x, alpha = x_new, a_new
            t += h
            steps += 1
            if steps % self.options.record_every == 0 or abs(t1 - t) <= 1e-12 * max(1.0, abs(t1)):
                buffer.add(t, x, alpha, self.hamiltonian(x, alpha, control))

        pieces.append(buffer.close())
        pieces = [p for p in pieces if p.times.shape[0] >= 2] or pieces[:1]
        if direction < 0:
            pieces = [_reversed_piece(p) for p in reversed(pieces)]
            events = list(reversed(events))

        drift = max(float(np.max(np.abs(p.hamiltonian - c0))) for p in pieces) / c0
        trajectory = Trajectory(pieces=pieces, events=events, c0=c0, kind=kind, max_drift=drift)
        tol = self.options.drift_tol or settings.drift_tol
        if drift > tol:
            logger.warning(f"Hamiltonian drift {drift:.3e} exceeds tolerance {tol:.1e}")
        logger.info(
            f"Integrated {kind} trajectory on {self.field.name}: {len(pieces)} pieces, "
            f"{len(events)} events, drift {drift:.3e}"
        )
        return trajectory

    def _margin_after(self, x, alpha, h, control) -> float:
        result = self.advance(x, alpha, h, control)
        if result is None:
            return -math.inf
        return self.margin(result[0], result[1], control)


class _PieceBuffer:
    def __init__(self, label: str):
        self.label = label
        self.times: List[float] = []
        self.xs: List[np.ndarray] = []
        self.alphas: List[np.ndarray] = []
        self.hamiltonian: List[float] = []

    def add(self, t, x, alpha, h):
        if self.times and self.times[-1] == t:
            return
        self.times.append(t)
        self.xs.append(np.array(x, dtype=float))
        self.alphas.append(np.array(alpha, dtype=float))
        self.hamiltonian.append(h)

    def close(self) -> TrajectoryPiece:
        times = np.array(self.times)
        return TrajectoryPiece(
            t_a=float(times.min()),
            t_b=float(times.max()),
            control=self.label,
            times=times,
            xs=np.array(self.xs),
            alphas=np.array(self.alphas),
            hamiltonian=np.array(self.hamiltonian),
        )


def _reversed_piece(piece: TrajectoryPiece) -> TrajectoryPiece:
    return replace(
        piece,
        times=piece.times[::-1].copy(),
        xs=piece.xs[::-1].copy(),
        alphas=piece.alphas[::-1].copy(),
        hamiltonian=piece.hamiltonian[::-1].copy(),
    )


def integrate_extended(
    field: FinslerField,
    state0: CotangentState,
    t_span: Tuple[float, float],
    step: Optional[float] = None,
    options: Optional[IntegrationOptions] = None,
) -> Trajectory:
    """Integrate the extended geodesic field from ``state0`` over ``t_span``.

    Args:
        field: Finsler field to integrate on
        state0: Initial point and nonzero covector, used as given
        t_span: (t0, t1); t1 < t0 integrates backwards
        step: Fixed RK4 step, defaults to ``settings.step``
        options: Face policy, switching limits and tolerances

    Returns:
        Trajectory whose pieces each follow one control, with switch and
        domain-exit events

    Raises:
        OutOfDomainError: If x0 is outside the domain
        ZeroCovectorError: If alpha0 is zero
        NoProgressError: If the covector stays on a face and sliding is off
    """
    step = step or settings.step
    if step <= 0:
        raise ConfigError(f"Step must be positive, got {step}")
    integrator = _EventIntegrator(field, step, options or IntegrationOptions(), scale_by_dual=False)
    return integrator.run(state0, t_span, kind="extended")


def integrate_spray_product(
    field: FinslerField,
    state0: CotangentState,
    t_span: Tuple[float, float],
    step: Optional[float] = None,
    options: Optional[IntegrationOptions] = None,
) -> Trajectory:
    """Integrate F*(x, alpha) times the extended field.

    On fiberwise strictly convex fields this is the cotangent geodesic spray;
    projected curves have constant speed C0 instead of 1.
    """
    if not field.is_strictly_convex:
        raise NotStrictlyConvexError(f"{field.name} is not fiberwise strictly convex")
    step = step or settings.step
    if step <= 0:
        raise ConfigError(f"Step must be positive, got {step}")
    integrator = _EventIntegrator(field, step, options or IntegrationOptions(), scale_by_dual=True)
    return integrator.run(state0, t_span, kind="spray")


def integrate_batch(
    field: FinslerField,
    states: Sequence[CotangentState],
    t_span: Tuple[float, float],
    step: Optional[float] = None,
    options: Optional[IntegrationOptions] = None,
    max_workers: Optional[int] = None,
) -> List[Trajectory]:
    """Integrate many initial states concurrently; results keep the input order."""
    workers = max_workers or settings.max_workers
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda s: integrate_extended(field, s, t_span, step, options), states))


def reparameterize_to_unit(field: FinslerField, traj: Trajectory, tol: Optional[float] = None) -> Trajectory:
    """Turn an F*-scaled trajectory into the unit-speed extended-field curve.

    With F* = C0 constant along ``traj``, the extended curve at time s is the
    scaled curve at time s / C0, so sample times are stretched by C0 around
    the start time and covectors are kept.

    Raises:
        NonConstantHamiltonianError: If F* drifts more than ``tol`` relative to C0
    """
    tol = tol or settings.drift_tol
    _, xs, alphas = traj.samples()
    duals = np.array([field.dual_eval(x, a) for x, a in zip(xs, alphas)])
    drift = float(np.max(np.abs(duals - traj.c0))) / traj.c0
    if drift > tol:
        raise NonConstantHamiltonianError(f"Dual norm drifts by {drift:.3e} (tolerance {tol:.1e})")

    origin = traj.t_start
    pieces = [
        replace(
            p,
            t_a=origin + traj.c0 * (p.t_a - origin),
            t_b=origin + traj.c0 * (p.t_b - origin),
            times=origin + traj.c0 * (p.times - origin),
        )
        for p in traj.pieces
    ]
    events = [replace(e, t=origin + traj.c0 * (e.t - origin)) for e in traj.events]
    return Trajectory(pieces=pieces, events=events, c0=traj.c0, kind="extended", max_drift=drift, length=traj.length)


def path_length(field: FinslerField, traj: Trajectory) -> float:
    """Finsler length of the x-projection by composite Simpson per piece."""
    total = 0.0
    for piece in traj.pieces:
        count = piece.times.shape[0]
        if count < 2:
            continue
        edge_order = 2 if count >= 3 else 1
        velocities = np.gradient(piece.xs, piece.times, axis=0, edge_order=edge_order)
        speeds = field.eval_many(piece.xs, velocities)
        total += float(simpson(speeds, x=piece.times))
    return total


def reverse_trajectory(field: FinslerField, traj: Trajectory) -> Trajectory:
    """Map (x(t), alpha(t)) to (x(T - t), -alpha(T - t)) on symmetric fields."""
    if not field.is_symmetric:
        raise DomainError(f"{field.name} is not fiberwise symmetric; reversed curves are not geodesics")
    total = traj.t_start + traj.t_end
    pieces = [
        TrajectoryPiece(
            t_a=total - p.t_b,
            t_b=total - p.t_a,
            control=f"-{p.control}",
            times=(total - p.times)[::-1].copy(),
            xs=p.xs[::-1].copy(),
            alphas=-p.alphas[::-1],
            hamiltonian=p.hamiltonian[::-1].copy(),
        )
        for p in reversed(traj.pieces)
    ]
    events = [
        TrajectoryEvent(
            t=total - e.t,
            kind=e.kind,
            from_control=None if e.to_control is None else f"-{e.to_control}",
            to_control=None if e.from_control is None else f"-{e.from_control}",
        )
        for e in reversed(traj.events)
    ]
    return Trajectory(pieces=pieces, events=events, c0=traj.c0, kind=traj.kind,
                      max_drift=traj.max_drift, length=traj.length)


def assemble_trajectory(pieces: Sequence[TrajectoryPiece], c0: float, kind: str) -> Trajectory:
    """Join consecutive analytic pieces, recording a switch at every joint."""
    pieces = [p for p in pieces if p.times.shape[0] >= 2]
    events = [
        TrajectoryEvent(t=prev.t_b, kind="switch", from_control=prev.control, to_control=nxt.control)
        for prev, nxt in zip(pieces, pieces[1:])
    ]
    drift = max(float(np.max(np.abs(p.hamiltonian - c0))) for p in pieces) / c0
    return Trajectory(pieces=list(pieces), events=events, c0=c0, kind=kind, max_drift=drift)
