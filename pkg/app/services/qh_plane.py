"""Closed-form geodesics on quasi-hyperbolic planes.

The plane is the upper half-plane with F(x, y) = F_e(y) / x2. Two base norms
have explicit solutions:

* the regular hexagon, whose geodesic traces are halves of regular hexagons
  centred on the x1-axis (vertical walls, then two slanted sides);
* the rounded square ``S_e`` (four arcs of radius sqrt(5)), which moves
  straight while alpha stays in a corner cone and along curved transitions
  otherwise.

The Euclidean base gives the classical hyperbolic plane; it serves as a
reference with known circles and distances.
"""
import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from app.config import settings
from app.errors import (
    DomainError,
    IdenticalPointsError,
    NoProgressError,
    OutOfDomainError,
    VerticalGeodesicError,
    ZeroCovectorError,
)
from app.models.schemas import HexagonTraceGeometry, HyperbolicCircle
from app.services.asym_norm import ArcComposite, ControlDescriptor, euclidean_norm, hexagon_norm, se_norm
from app.services.finsler_field import QuasiHyperbolicField
from app.services.geodesic_field import (
    CotangentState,
    IntegrationOptions,
    Trajectory,
    TrajectoryPiece,
    assemble_trajectory,
    integrate_extended,
)

logger = logging.getLogger(__name__)

SQRT3 = math.sqrt(3.0)
LN2 = math.log(2.0)

# Arclength marks (from the left vertex) where hexagon geodesics switch vertex
HEXAGON_SWITCH_MARKS = (0.0, 2.0 * LN2, 4.0 * LN2)
# Hexagon vertex followed before, between and after the marks, for alpha1 > 0
HEXAGON_VERTEX_SEQUENCE = (2, 1, 0, 5)
HEXAGON_PIECE_KINDS = ("vertical-up", "side-up", "side-down", "vertical-down")


def _mirror_vertex(j: int) -> int:
    """Hexagon vertex index under x1 -> -x1."""
    return (4 - j) % 6


def _check_state(x0: Sequence[float], alpha0: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x0, dtype=float)
    alpha = np.asarray(alpha0, dtype=float)
    if x.shape != (2,) or not x[1] > settings.domain_margin:
        raise OutOfDomainError(f"Point {list(x)} is not in the upper half-plane")
    if not np.any(alpha):
        raise ZeroCovectorError("Covector must be nonzero")
    return x, alpha


def _samples_between(t_a: float, t_b: float, step: float) -> np.ndarray:
    count = max(2, int(math.ceil(abs(t_b - t_a) / step - 1e-9)) + 1)
    return np.linspace(t_a, t_b, count)


@dataclass(frozen=True)
class HexagonGeodesicSpec:
    """Exact geodesic of the hexagon quasi-hyperbolic plane.

    Non-vertical solutions are described in a frame where alpha1 > 0 (mirrored
    through x1 -> -x1 otherwise) by the centre abscissa ``center``, the
    side length ``side`` and the arclength ``s0`` of the initial point measured
    from the left vertex of the half hexagon.
    """

    x0: Tuple[float, float]
    alpha0: Tuple[float, float]
    c0: float
    side: float = 0.0
    center: float = 0.0
    s0: float = 0.0
    alpha1: float = 0.0
    mirrored: bool = False
    vertical: Optional[str] = None

    def switch_times(self) -> List[float]:
        if self.vertical:
            return []
        return [mark - self.s0 for mark in HEXAGON_SWITCH_MARKS]

    def piece_index(self, t: float) -> int:
        if self.vertical:
            return 0 if self.vertical == "up" else 3
        return int(np.searchsorted(HEXAGON_SWITCH_MARKS, self.s0 + t, side="right"))

    def vertex_at(self, t: float) -> int:
        j = HEXAGON_VERTEX_SEQUENCE[self.piece_index(t)]
        return _mirror_vertex(j) if self.mirrored else j

    def states(self, ts: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Exact (x, alpha) at every time in ``ts``."""
        ts = np.asarray(ts, dtype=float)
        x1_0, x2_0 = self.x0
        if self.vertical:
            sign = 1.0 if self.vertical == "up" else -1.0
            x2 = x2_0 * np.exp(sign * ts)
            xs = np.column_stack([np.full_like(ts, x1_0), x2])
            alphas = np.column_stack([np.zeros_like(ts), self.alpha0[1] * np.exp(-sign * ts)])
            return xs, alphas

        L, c, c0, a1 = self.side, self.center, self.c0, self.alpha1
        s = self.s0 + ts
        piece = np.searchsorted(HEXAGON_SWITCH_MARKS, s, side="right")
        x2 = np.select(
            [piece == 0, piece == 1, piece == 2],
            [0.5 * L * np.exp(s), 0.5 * L * np.exp(0.5 * s), L * np.exp(-0.5 * (s - 2.0 * LN2))],
            0.5 * L * np.exp(-(s - 4.0 * LN2)),
        )
        x1 = np.select(
            [piece == 0, piece == 1, piece == 2],
            [np.full_like(s, c - 0.5 * SQRT3 * L), c - SQRT3 * (L - x2), c + SQRT3 * (L - x2)],
            c + 0.5 * SQRT3 * L,
        )
        alpha2 = np.select(
            [piece == 0, piece == 1, piece == 2],
            [c0 / x2, 2.0 * c0 / x2 - SQRT3 * a1, SQRT3 * a1 - 2.0 * c0 / x2],
            -c0 / x2,
        )
        sign = -1.0 if self.mirrored else 1.0
        xs = np.column_stack([sign * x1, x2])
        alphas = np.column_stack([np.full_like(s, sign * a1), alpha2])
        return xs, alphas

    def state_at(self, t: float) -> CotangentState:
        xs, alphas = self.states(np.array([t]))
        return CotangentState.of(xs[0], alphas[0])

    def trace_geometry(self) -> HexagonTraceGeometry:
        if self.vertical:
            raise VerticalGeodesicError("Vertical geodesics do not trace a hexagon")
        L = self.side
        c = -self.center if self.mirrored else self.center
        h = 0.5 * SQRT3 * L
        vertices = [
            [c + h, -0.5 * L], [c + h, 0.5 * L], [c, L],
            [c - h, 0.5 * L], [c - h, -0.5 * L], [c, -L],
        ]
        return HexagonTraceGeometry(center=c, side=L, vertices=vertices)

    def sample(self, t_span: Tuple[float, float], step: Optional[float] = None) -> Trajectory:
        """Analytic trajectory on ``t_span``, with exact samples at switch times."""
        step = step or settings.step
        lo, hi = sorted(float(t) for t in t_span)
        # Switches within rounding of the span ends do not open a piece
        edge = 1e-12 * max(1.0, abs(lo), abs(hi))
        cuts = [lo] + [t for t in self.switch_times() if lo + edge < t < hi - edge] + [hi]
        pieces = []
        for t_a, t_b in zip(cuts, cuts[1:]):
            ts = _samples_between(t_a, t_b, step)
            xs, alphas = self.states(ts)
            vertex = self.vertex_at(0.5 * (t_a + t_b))
            pieces.append(TrajectoryPiece(
                t_a=t_a, t_b=t_b, control=f"vertex:{vertex}", times=ts, xs=xs, alphas=alphas,
                hamiltonian=np.full(ts.shape, self.c0),
            ))
        return assemble_trajectory(pieces, self.c0, kind="hexagon-analytic")


def hexagon_geodesic_spec(x0: Sequence[float], alpha0: Sequence[float]) -> HexagonGeodesicSpec:
    """Classify the initial state and compute the closed-form constants."""
    x, alpha = _check_state(x0, alpha0)
    c0 = float(x[1] * hexagon_norm().dual_eval(alpha))

    if alpha[0] == 0.0:
        return HexagonGeodesicSpec(
            x0=tuple(x), alpha0=tuple(alpha), c0=c0, vertical="up" if alpha[1] > 0 else "down"
        )

    mirrored = alpha[0] < 0
    x1 = -x[0] if mirrored else x[0]
    x2 = x[1]
    a1 = abs(alpha[0])
    a2 = alpha[1]
    L = 2.0 * c0 / (SQRT3 * a1)

    if a2 >= SQRT3 * a1:
        s0, center = math.log(2.0 * x2 / L), x1 + 0.5 * SQRT3 * L
    elif a2 >= 0.0:
        s0, center = 2.0 * math.log(2.0 * x2 / L), x1 + SQRT3 * (L - x2)
    elif a2 > -SQRT3 * a1:
        s0, center = 2.0 * LN2 + 2.0 * math.log(L / x2), x1 - SQRT3 * (L - x2)
    else:
        s0, center = 4.0 * LN2 + math.log(L / (2.0 * x2)), x1 - 0.5 * SQRT3 * L

    return HexagonGeodesicSpec(
        x0=tuple(x), alpha0=tuple(alpha), c0=c0, side=L, center=center, s0=s0,
        alpha1=a1, mirrored=mirrored,
    )


def hexagon_geodesic(
    x0: Sequence[float],
    alpha0: Sequence[float],
    t_span: Tuple[float, float] = (0.0, 1.0),
    step: Optional[float] = None,
) -> Trajectory:
    """Exact piecewise geodesic of the hexagon plane sampled on ``t_span``."""
    return hexagon_geodesic_spec(x0, alpha0).sample(t_span, step)


def hexagon_trace(x0: Sequence[float], alpha0: Sequence[float]) -> HexagonTraceGeometry:
    """Regular hexagon whose upper half contains the geodesic trace."""
    return hexagon_geodesic_spec(x0, alpha0).trace_geometry()


# Pieces of a half hexagon in travel order (alpha1 > 0)
_LEFT_WALL, _UP_SIDE, _DOWN_SIDE, _RIGHT_WALL = range(4)


def _on_piece(point: np.ndarray, piece: int, c: float, L: float, tol: float) -> bool:
    x1, x2 = point
    if piece in (_LEFT_WALL, _RIGHT_WALL):
        wall = c - 0.5 * SQRT3 * L if piece == _LEFT_WALL else c + 0.5 * SQRT3 * L
        return abs(x1 - wall) <= tol and x2 <= 0.5 * L + tol
    side = c - SQRT3 * (L - x2) if piece == _UP_SIDE else c + SQRT3 * (L - x2)
    return abs(x1 - side) <= tol and 0.5 * L - tol <= x2 <= L + tol


def _arclength(point: np.ndarray, piece: int, L: float) -> float:
    x2 = point[1]
    if piece == _LEFT_WALL:
        return math.log(2.0 * x2 / L)
    if piece == _UP_SIDE:
        return 2.0 * math.log(2.0 * x2 / L)
    if piece == _DOWN_SIDE:
        return 2.0 * LN2 + 2.0 * math.log(L / x2)
    return 4.0 * LN2 + math.log(L / (2.0 * x2))


def _half_hexagon_candidates(p: np.ndarray, q: np.ndarray, tol: float):
    """(piece of p, piece of q, centre, side) for every placement of p before q."""
    (p1, p2), (q1, q2) = p, q
    d = q1 - p1
    candidates = []

    L = 2.0 * (q2 - d / SQRT3)
    candidates.append((_LEFT_WALL, _UP_SIDE, p1 + 0.5 * SQRT3 * L, L))
    L = (2.0 / 3.0) * (q2 + d / SQRT3)
    candidates.append((_LEFT_WALL, _DOWN_SIDE, p1 + 0.5 * SQRT3 * L, L))
    L = d / SQRT3
    candidates.append((_LEFT_WALL, _RIGHT_WALL, p1 + 0.5 * SQRT3 * L, L))
    L = d / (2.0 * SQRT3) + 0.5 * (p2 + q2)
    candidates.append((_UP_SIDE, _DOWN_SIDE, p1 + SQRT3 * (L - p2), L))
    L = (2.0 / 3.0) * (p2 + d / SQRT3)
    candidates.append((_UP_SIDE, _RIGHT_WALL, q1 - 0.5 * SQRT3 * L, L))
    L = 2.0 * (p2 - d / SQRT3)
    candidates.append((_DOWN_SIDE, _RIGHT_WALL, q1 - 0.5 * SQRT3 * L, L))
    # Both points on one slanted side: the geodesic is the straight segment
    if abs(d - SQRT3 * (q2 - p2)) <= tol:
        candidates.append((_UP_SIDE, _UP_SIDE, q1, q2))
    if abs(d - SQRT3 * (p2 - q2)) <= tol:
        candidates.append((_DOWN_SIDE, _DOWN_SIDE, p1, p2))
    return candidates


def connect_hexagon(p: Sequence[float], q: Sequence[float], step: Optional[float] = None) -> Trajectory:
    """Geodesic of the hexagon plane from p to q, normalized to C0 = 1.

    Points on one vertical are joined by the vertical segment. Otherwise the
    trace is the unique half hexagon through p and q, solved from its centre
    abscissa and side length.

    Raises:
        IdenticalPointsError: If p and q coincide
        OutOfDomainError: If a point is not in the upper half-plane
    """
    p, _ = _check_state(p, (1.0, 0.0))
    q, _ = _check_state(q, (1.0, 0.0))
    scale = max(1.0, float(np.max(np.abs(np.concatenate([p, q])))))
    tol = 1e-9 * scale
    if np.allclose(p, q, rtol=0.0, atol=1e-14 * scale):
        raise IdenticalPointsError(f"Cannot connect {list(p)} to itself")

    if abs(p[0] - q[0]) <= tol:
        up = q[1] > p[1]
        alpha = np.array([0.0, (1.0 if up else -1.0) / p[1]])
        duration = abs(math.log(q[1] / p[1]))
    else:
        mirrored = p[0] > q[0]
        pc = np.array([-p[0], p[1]]) if mirrored else p
        qc = np.array([-q[0], q[1]]) if mirrored else q
        chosen = None
        for piece_p, piece_q, c, L in _half_hexagon_candidates(pc, qc, tol):
            if not L > 0:
                continue
            if not (_on_piece(pc, piece_p, c, L, tol) and _on_piece(qc, piece_q, c, L, tol)):
                continue
            s_p, s_q = _arclength(pc, piece_p, L), _arclength(qc, piece_q, L)
            if s_q >= s_p - tol:
                chosen = (piece_p, c, L, s_q - s_p)
                break
        if chosen is None:
            raise DomainError(f"No half hexagon joins {list(p)} and {list(q)}")

        piece_p, c, L, duration = chosen
        a1 = 2.0 / (SQRT3 * L)
        a2 = {
            _LEFT_WALL: 1.0 / pc[1],
            _UP_SIDE: 2.0 / pc[1] - SQRT3 * a1,
            _DOWN_SIDE: SQRT3 * a1 - 2.0 / pc[1],
            _RIGHT_WALL: -1.0 / pc[1],
        }[piece_p]
        alpha = np.array([-a1 if mirrored else a1, a2])
        logger.debug(f"Half hexagon centre {(-c if mirrored else c):.12g}, side {L:.12g}")

    trajectory = hexagon_geodesic_spec(p, alpha).sample((0.0, duration), step)
    trajectory.length = duration
    return trajectory


@dataclass(frozen=True)
class SeThresholds:
    """Ratios alpha2/alpha1 where the corners (0,1) and (1,0) start maximizing."""

    k1: float
    k2: float


def se_thresholds(norm: Optional[ArcComposite] = None) -> SeThresholds:
    """Read k1 and k2 off the normal cones at the corners (0,1) and (1,0)."""
    norm = norm or se_norm()
    north_lower, _ = norm.control_region(ControlDescriptor("corner", 1))
    _, east_upper = norm.control_region(ControlDescriptor("corner", 0))
    return SeThresholds(k1=math.tan(north_lower), k2=math.tan(east_upper))


def confirm_se_thresholds(samples: int = 100_000, norm: Optional[ArcComposite] = None) -> SeThresholds:
    """Recover k1 and k2 from a brute-force argmax over a dense boundary sample.

    Each arc contributes ``samples / 4`` points, corners included. The ratio at
    which the argmax jumps onto the corner is bisected.
    """
    norm = norm or se_norm()
    per_arc = samples // len(norm.arcs)
    chunks = []
    for j in range(len(norm.arcs)):
        phis = np.linspace(norm.starts[j], norm.ends[j], per_arc, endpoint=False)
        chunks.append(norm.centers[j] + norm.radii[j] * np.column_stack([np.cos(phis), np.sin(phis)]))
    points = np.vstack(chunks)
    # Sample 0 of arc j is corner j
    north, east = per_arc, 0

    def argmax_is(index: int, ratio: float) -> bool:
        return int(np.argmax(points @ np.array([1.0, ratio]))) == index

    def boundary(index: int, inside: float, outside: float) -> float:
        for _ in range(60):
            mid = 0.5 * (inside + outside)
            if argmax_is(index, mid):
                inside = mid
            else:
                outside = mid
        return 0.5 * (inside + outside)

    return SeThresholds(k1=boundary(north, 10.0, 1.0), k2=boundary(east, 0.0, 1.0))


def _is_vertical(vertex: np.ndarray) -> bool:
    """Corners of S_e sit on the axes up to rounding."""
    return abs(vertex[0]) < abs(vertex[1])


def _corner_states(vertex: np.ndarray, x0: np.ndarray, alpha0: np.ndarray, taus: np.ndarray):
    """Exact flow while a single axis-aligned corner stays active."""
    if _is_vertical(vertex):
        v2 = vertex[1]
        xs = np.column_stack([np.full_like(taus, x0[0]), x0[1] * np.exp(v2 * taus)])
        alphas = np.column_stack([np.full_like(taus, alpha0[0]), alpha0[1] * np.exp(-v2 * taus)])
    else:
        v1 = vertex[0]
        xs = np.column_stack([x0[0] + v1 * x0[1] * taus, np.full_like(taus, x0[1])])
        alphas = np.column_stack([np.full_like(taus, alpha0[0]), alpha0[1] - v1 * alpha0[0] * taus])
    return xs, alphas


def _corner_exit(norm: ArcComposite, corner: ControlDescriptor, x0, alpha0, direction: float) -> float:
    """Time (signed) until alpha leaves the corner's normal cone, inf if never."""
    vertex = norm.corners[corner.index]
    a1, a2 = alpha0
    best = math.inf
    for angle in norm.control_region(corner):
        n1, n2 = math.cos(angle), math.sin(angle)
        if abs(n1) < 1e-15 or a1 / n1 <= 0:
            continue
        target = a1 * n2 / n1
        if _is_vertical(vertex):
            if a2 == 0.0 or target / a2 <= 0:
                continue
            tau = -math.log(target / a2) / vertex[1]
        else:
            tau = (a2 - target) / (vertex[0] * a1)
        if direction * tau > 1e-12 and abs(tau) < abs(best):
            best = tau
    return best


def _se_regime(field: QuasiHyperbolicField, x: np.ndarray, alpha: np.ndarray, direction: float) -> ControlDescriptor:
    """Active control of the S_e plane, probing ahead when alpha sits on a cone boundary."""
    base = field.base
    control = base.control_descriptor(alpha)
    if base.control_margin(control, alpha) > 1e-9:
        return control
    y = field.norm_at(x).control_point(control, alpha)
    dalpha = float(alpha @ y) * field.horizontal_derivative_raw(x, y)
    return base.control_descriptor(alpha + direction * 1e-6 * dalpha / max(np.linalg.norm(dalpha), 1e-300))


def se_geodesic(
    x0: Sequence[float],
    alpha0: Sequence[float],
    t_span: Tuple[float, float] = (0.0, 1.0),
    step: Optional[float] = None,
) -> Trajectory:
    """Geodesic of the S_e plane: closed form in corner regimes, integrated elsewhere.

    While alpha stays in the normal cone of a corner the path is a vertical
    exponential or a horizontal line; between corners the integrator follows
    the arc and stops at the next switch, where the closed form takes over.
    """
    x, alpha = _check_state(x0, alpha0)
    step = step or settings.step
    field = QuasiHyperbolicField(se_norm(), name="qh_se")
    norm = field.base
    t0, t1 = float(t_span[0]), float(t_span[1])
    direction = 1.0 if t1 >= t0 else -1.0
    c0 = float(x[1] * norm.dual_eval(alpha))

    pieces: List[TrajectoryPiece] = []
    t = t0
    stalls = 0
    while direction * (t1 - t) > 1e-12 * max(1.0, abs(t1)):
        control = _se_regime(field, x, alpha, direction)
        if control.kind == "corner":
            tau = _corner_exit(norm, control, x, alpha, direction)
            t_next = t1 if abs(tau) >= abs(t1 - t) else t + tau
            taus = _samples_between(0.0, t_next - t, step)
            xs, alphas = _corner_states(norm.corners[control.index], x, alpha, taus)
            piece = TrajectoryPiece(
                t_a=min(t, t_next), t_b=max(t, t_next), control=control.label,
                times=t + taus, xs=xs, alphas=alphas, hamiltonian=np.full(taus.shape, c0),
            )
            pieces.append(piece if direction > 0 else _flip(piece))
            x, alpha, t_reached = xs[-1], alphas[-1], t_next
        else:
            options = IntegrationOptions(max_switches=1, initial_control=control)
            traj = integrate_extended(field, CotangentState.of(x, alpha), (t, t1), step, options)
            ordered = traj.pieces if direction > 0 else list(reversed(traj.pieces))
            pieces.extend(ordered)
            end = traj.final_state() if direction > 0 else traj.initial_state()
            x, alpha = end.x, end.alpha
            t_reached = traj.t_end if direction > 0 else traj.t_start
            if any(e.kind == "domain_exit" for e in traj.events):
                logger.warning(f"S_e geodesic left the domain at t={t_reached:.12g}")
                break

        stalls = stalls + 1 if abs(t_reached - t) <= 1e-12 else 0
        if stalls > 2:
            raise NoProgressError(f"S_e geodesic makes no progress at t={t:.12g}")
        t = t_reached

    if direction < 0:
        pieces = list(reversed(pieces))
    return assemble_trajectory(pieces, c0, kind="se")


def _flip(piece: TrajectoryPiece) -> TrajectoryPiece:
    return TrajectoryPiece(
        t_a=piece.t_a, t_b=piece.t_b, control=piece.control,
        times=piece.times[::-1].copy(), xs=piece.xs[::-1].copy(),
        alphas=piece.alphas[::-1].copy(), hamiltonian=piece.hamiltonian[::-1].copy(),
    )


def qh_euclidean_field() -> QuasiHyperbolicField:
    """Quasi-hyperbolic plane with Euclidean base, i.e. the hyperbolic plane."""
    return QuasiHyperbolicField(euclidean_norm(), name="qh_euclidean")


def hyperbolic_reference(
    x0: Sequence[float],
    alpha0: Sequence[float],
    duration: float = 5.0,
    step: Optional[float] = None,
) -> HyperbolicCircle:
    """Circle centred on the x1-axis carrying the hyperbolic geodesic of (x0, alpha0).

    The residual is the largest distance from the integrated trajectory
    (over ``duration`` time units) to that circle.
    """
    x, alpha = _check_state(x0, alpha0)
    if alpha[0] == 0.0:
        raise VerticalGeodesicError("Covector with alpha1 = 0 gives a vertical geodesic")
    center = float(x[0] + x[1] * alpha[1] / alpha[0])
    radius = float(math.hypot(x[0] - center, x[1]))
    traj = integrate_extended(qh_euclidean_field(), CotangentState.of(x, alpha), (0.0, duration), step)
    _, xs, _ = traj.samples()
    residual = float(np.max(np.abs(np.hypot(xs[:, 0] - center, xs[:, 1]) - radius)))
    return HyperbolicCircle(center=center, radius=radius, residual=residual)


def hyperbolic_circle_through(p: Sequence[float], q: Sequence[float]) -> Tuple[float, float]:
    """Centre abscissa and radius of the x1-centred circle through p and q."""
    (p1, p2), (q1, q2) = p, q
    if math.isclose(p1, q1, abs_tol=1e-14):
        raise VerticalGeodesicError("Points on one vertical are joined by a vertical line")
    center = ((q1 ** 2 + q2 ** 2) - (p1 ** 2 + p2 ** 2)) / (2.0 * (q1 - p1))
    return center, math.hypot(p1 - center, p2)


def connect_hyperbolic(p: Sequence[float], q: Sequence[float], step: Optional[float] = None) -> Trajectory:
    """Hyperbolic geodesic from p to q, integrated from the circle tangent at p."""
    p, _ = _check_state(p, (1.0, 0.0))
    q, _ = _check_state(q, (1.0, 0.0))
    if np.allclose(p, q, rtol=0.0, atol=1e-14):
        raise IdenticalPointsError(f"Cannot connect {list(p)} to itself")
    distance = hyperbolic_distance(p, q)
    if math.isclose(p[0], q[0], abs_tol=1e-14):
        direction = np.array([0.0, 1.0 if q[1] > p[1] else -1.0])
    else:
        center, _ = hyperbolic_circle_through(p, q)
        radial = np.array([p[0] - center, p[1]])
        tangent = np.array([-radial[1], radial[0]])
        direction = tangent if tangent[0] * (q[0] - p[0]) > 0 else -tangent
    # Unit covector at p along the direction: alpha = g(direction) / |direction|_g
    alpha = direction / np.linalg.norm(direction) / p[1]
    traj = integrate_extended(qh_euclidean_field(), CotangentState.of(p, alpha), (0.0, distance), step)
    traj.length = distance
    return traj


def hyperbolic_distance(p: Sequence[float], q: Sequence[float]) -> float:
    """Classical distance arccosh(1 + |p - q|^2 / (2 p2 q2))."""
    (p1, p2), (q1, q2) = p, q
    if not (p2 > 0 and q2 > 0):
        raise OutOfDomainError("Hyperbolic distance needs points in the upper half-plane")
    return float(math.acosh(1.0 + ((p1 - q1) ** 2 + (p2 - q2) ** 2) / (2.0 * p2 * q2)))
