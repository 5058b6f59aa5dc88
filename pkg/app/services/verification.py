"""Named verification scenarios with measured values per criterion."""
import logging
import math
import time
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.config import settings
from app.errors import UnknownScenarioError
from app.models.schemas import VerificationCriterion, VerificationReport
from app.services.asym_norm import ControlDescriptor, se_norm
from app.services.definitions import resolve_field, resolve_norm
from app.services.finsler_field import Window, invariance_check, lipschitz_constants_report, spray_cotangent
from app.services.geodesic_field import (
    CotangentState,
    Trajectory,
    integrate_batch,
    integrate_extended,
    phase_velocity,
)
from app.services.metric_oracle import certify_pair
from app.services.norm_analysis import check_strong_convexity, strong_convexity_constant
from app.services.qh_plane import (
    LN2,
    SQRT3,
    confirm_se_thresholds,
    connect_hexagon,
    connect_hyperbolic,
    hexagon_geodesic_spec,
    hyperbolic_distance,
    hyperbolic_reference,
    se_thresholds,
)

logger = logging.getLogger(__name__)

ScenarioFn = Callable[[np.random.Generator], List[VerificationCriterion]]

HEXAGON_PAIRS = [
    ((-1.0, 1.0), (1.0, 1.0)),
    ((0.0, 1.0), (0.0, 2.0)),
    ((0.0, 1.0), (1.0, 1.5)),
    ((0.5, 2.0), (-0.5, 1.0)),
    ((-1.0, 1.5), (0.5, 0.75)),
]
HYPERBOLIC_PAIRS = [
    ((-1.0, 1.0), (1.0, 1.0)),
    ((0.0, 1.0), (0.0, 2.0)),
    ((0.0, 1.0), (1.0, 2.0)),
    ((-0.5, 1.5), (0.5, 1.0)),
    ((1.0, 2.0), (-1.0, 1.0)),
]


def _criterion(
    name: str,
    measured: float,
    threshold: float,
    detail: Optional[str] = None,
    passed: Optional[bool] = None,
) -> VerificationCriterion:
    """Criterion that passes when ``measured <= threshold`` unless ``passed`` is given."""
    ok = measured <= threshold if passed is None else passed
    return VerificationCriterion(name=name, measured=float(measured), threshold=float(threshold),
                                 passed=bool(ok), detail=detail)


def _random_covectors(rng: np.random.Generator, count: int) -> np.ndarray:
    angles = rng.uniform(0.0, 2.0 * math.pi, count)
    radii = rng.uniform(0.1, 10.0, count)
    return radii[:, None] * np.column_stack([np.cos(angles), np.sin(angles)])


def _random_states(rng: np.random.Generator, count: int, lower=(-1.0, 0.5), upper=(1.0, 2.0)) -> List[CotangentState]:
    xs = rng.uniform(lower, upper, size=(count, 2))
    return [CotangentState.of(x, a) for x, a in zip(xs, _random_covectors(rng, count))]


def scenario_fenchel(rng: np.random.Generator) -> List[VerificationCriterion]:
    criteria = []
    exact = settings.closed_form_tol
    for name, tol in (("euclidean", exact), ("diag41", exact), ("hexagon", exact),
                      ("shifted_hexagon", exact), ("se", settings.iterative_tol)):
        norm = resolve_norm(name)
        errors = [abs(norm.fenchel_conjugate_sq(a) - 0.25 * norm.dual_eval(a) ** 2)
                  for a in _random_covectors(rng, 1000)]
        criteria.append(_criterion(f"fenchel identity {name}", max(errors), tol))
    return criteria


def scenario_fundamental(rng: np.random.Generator) -> List[VerificationCriterion]:
    criteria = []
    for name, tol in (("euclidean", 1e-8), ("diag41", 1e-8), ("se", 1e-4)):
        norm = resolve_norm(name)
        errors = [abs(norm.eval(norm.grad_dual_sq(a)) - 2.0 * norm.dual_eval(a)) / norm.dual_eval(a)
                  for a in _random_covectors(rng, 1000)]
        criteria.append(_criterion(f"F(dF*^2) = 2F* for {name}", max(errors), tol))
    return criteria


def _closed_form_deviation(traj: Trajectory, spec) -> float:
    times, xs, _ = traj.samples()
    exact, _ = spec.states(times)
    return float(np.max(np.linalg.norm(xs - exact, axis=1) / np.maximum(1.0, np.linalg.norm(exact, axis=1))))


def scenario_hexagon_switching(rng: np.random.Generator) -> List[VerificationCriterion]:
    field = resolve_field("qh_hexagon")
    x0, alpha0 = (0.0, 1.0), (1.0, SQRT3)
    traj = integrate_extended(field, CotangentState.of(x0, alpha0), (0.0, 3.0))
    switches = traj.switch_times()
    first = switches[0] if switches else math.inf
    criteria = [_criterion("switch at 2 ln 2", abs(first - 2.0 * LN2), 1e-6, detail=f"switches at {switches}")]

    spec = hexagon_geodesic_spec(x0, alpha0)
    side = next(p for p in traj.pieces if p.t_a <= 1e-12 and p.t_b > 1.0)
    exact_x, exact_a = spec.states(side.times)
    side_error = max(float(np.max(np.abs(side.xs - exact_x))), float(np.max(np.abs(side.alphas - exact_a))))
    criteria.append(_criterion("side piece matches closed form", side_error, 1e-6))

    deviation = 0.0
    for state in _random_states(rng, 20):
        spec = hexagon_geodesic_spec(state.x, state.alpha)
        for span in ((0.0, 5.0), (0.0, -5.0)):
            deviation = max(deviation, _closed_form_deviation(integrate_extended(field, state, span), spec))
    criteria.append(_criterion("closed form vs integrated on [-5, 5]", deviation, 1e-5, detail="20 random states"))
    return criteria


def scenario_hamiltonian(rng: np.random.Generator) -> List[VerificationCriterion]:
    criteria = []
    for name in ("qh_hexagon", "qh_euclidean", "qh_se", "riemannian_hyperbolic", "constant_hexagon"):
        field = resolve_field(name)
        trajectories = integrate_batch(field, _random_states(rng, 20), (0.0, 1.0), step=1e-3)
        drift = max(t.max_drift for t in trajectories)
        criteria.append(_criterion(f"Hamiltonian drift on {name}", drift, 1e-6))
    return criteria


def scenario_spray(rng: np.random.Generator) -> List[VerificationCriterion]:
    field = resolve_field("riemannian_hyperbolic")
    worst = 0.0
    for state in _random_states(rng, 100):
        dx, dalpha = spray_cotangent(field, state.x, state.alpha)
        dual = field.dual_eval(state.x, state.alpha)
        velocity = phase_velocity(field, state.x, state.alpha, ControlDescriptor("smooth", 0))
        gap = np.concatenate([dx - dual * velocity.dx, dalpha - dual * velocity.dalpha])
        worst = max(worst, float(np.linalg.norm(gap)))
    return [_criterion("spray equals F* times extended field", worst, 1e-6, detail="100 random states")]


def scenario_hyperbolic(rng: np.random.Generator) -> List[VerificationCriterion]:
    residual = 0.0
    for _ in range(10):
        angle = rng.uniform(-0.45 * math.pi, 0.45 * math.pi) + (math.pi if rng.random() < 0.5 else 0.0)
        circle = hyperbolic_reference((0.0, 1.0), (math.cos(angle), math.sin(angle)))
        residual = max(residual, circle.residual)
    criteria = [_criterion("circle fit residual", residual, 1e-4, detail="10 covectors from (0, 1)")]

    apex = hyperbolic_reference((0.0, 1.0), (1.0, 0.0))
    criteria.append(_criterion("apex circle (centre 0, radius 1)",
                               max(abs(apex.center), abs(apex.radius - 1.0)), settings.closed_form_tol))

    gap = 0.0
    for p, q in HYPERBOLIC_PAIRS:
        traj = connect_hyperbolic(p, q)
        reached = float(np.linalg.norm(traj.final_state().x - np.asarray(q)))
        gap = max(gap, reached)
    criteria.append(_criterion("integrated geodesics reach their endpoints", gap, settings.iterative_tol))
    return criteria


def scenario_oracle_hexagon(rng: np.random.Generator) -> List[VerificationCriterion]:
    field = resolve_field("qh_hexagon")
    criteria = []
    for p, q in HEXAGON_PAIRS:
        report = certify_pair(field, connect_hexagon, p, q, aspect=2.0 / SQRT3)
        criteria.append(_criterion(
            f"oracle gap {p} -> {q}", report.relative_gap, settings.certify_gap_high, passed=report.passed,
            detail=f"length {report.geodesic_length:.6f}, oracle {report.oracle_distance:.6f}",
        ))
    return criteria


def scenario_oracle_hyperbolic(rng: np.random.Generator) -> List[VerificationCriterion]:
    field = resolve_field("riemannian_hyperbolic")
    criteria = []
    for p, q in HYPERBOLIC_PAIRS:
        report = certify_pair(field, connect_hyperbolic, p, q, aspect=1.0, reference=hyperbolic_distance)
        criteria.append(_criterion(
            f"oracle gap {p} -> {q}", report.relative_gap, settings.certify_gap_high, passed=report.passed,
            detail=f"length {report.geodesic_length:.6f}, oracle {report.oracle_distance:.6f}",
        ))
        closed_gap = abs(report.oracle_distance - report.reference_distance) / report.reference_distance
        criteria.append(_criterion(f"oracle vs closed form {p} -> {q}", closed_gap, settings.certify_gap_high))
    return criteria


def scenario_strong_convexity(rng: np.random.Generator) -> List[VerificationCriterion]:
    euclidean = check_strong_convexity(resolve_norm("euclidean"), 1.0, rng=rng)
    hexagon = check_strong_convexity(resolve_norm("hexagon"), 0.1, rng=rng)
    se = strong_convexity_constant(resolve_norm("se"), triples=10_000, rng=rng)
    return [
        _criterion("euclidean with c = 1", -euclidean.worst_margin, 1e-9, passed=euclidean.passed),
        _criterion(
            "hexagon fails with a witness", hexagon.worst_margin, 0.0,
            passed=not hexagon.passed and hexagon.witness is not None,
            detail=None if hexagon.witness is None else f"y={hexagon.witness.y}, z={hexagon.witness.z}",
        ),
        _criterion("se bisected constant", se.c, settings.strong_convexity_c_min,
                   passed=se.passed and se.c > settings.strong_convexity_c_min),
    ]


def _transformed_gap(field, state: CotangentState, shift: float, scale: float) -> float:
    base = integrate_extended(field, state, (0.0, 1.0)).final_state()
    moved_state = CotangentState.of((scale * state.x[0] + shift, scale * state.x[1]), state.alpha)
    moved = integrate_extended(field, moved_state, (0.0, 1.0)).final_state()
    expected = np.array([scale * base.x[0] + shift, scale * base.x[1]])
    return max(float(np.linalg.norm(moved.x - expected)) / max(1.0, float(np.linalg.norm(expected))),
               float(np.linalg.norm(moved.alpha - base.alpha)) / float(np.linalg.norm(base.alpha)))


def scenario_affine_symmetry(rng: np.random.Generator) -> List[VerificationCriterion]:
    criteria = []
    for name in ("qh_hexagon", "qh_se"):
        field = resolve_field(name)
        worst = 0.0
        invariant = True
        for state in _random_states(rng, 10):
            shift, scale = float(rng.uniform(-1.0, 1.0)), float(rng.uniform(0.5, 2.0))
            worst = max(worst, _transformed_gap(field, state, shift, scale))
            invariant &= invariance_check(field, (shift, scale), rng=rng)
        criteria.append(_criterion(f"translated solutions on {name}", worst, 1e-6))
        criteria.append(_criterion(f"F invariant under the group on {name}", 0.0 if invariant else 1.0, 0.0))
    return criteria


def scenario_se_thresholds(rng: np.random.Generator) -> List[VerificationCriterion]:
    analytic = se_thresholds()
    swept = confirm_se_thresholds()
    norm = se_norm()
    north = ControlDescriptor("corner", 1)
    jump = (norm.control_descriptor((1.0, analytic.k1 + 1e-6)) == north
            and norm.control_descriptor((1.0, analytic.k1 - 1e-6)) != north)
    return [
        _criterion("k1 = 2", abs(analytic.k1 - 2.0), settings.closed_form_tol),
        _criterion("k2 = 1/2", abs(analytic.k2 - 0.5), settings.closed_form_tol),
        _criterion("k1 brute-force sweep", abs(swept.k1 - analytic.k1), 1e-4),
        _criterion("k2 brute-force sweep", abs(swept.k2 - analytic.k2), 1e-4),
        _criterion("support jumps onto (0, 1) at k1", 0.0 if jump else 1.0, 0.0),
    ]


def scenario_fiber_scaling(rng: np.random.Generator) -> List[VerificationCriterion]:
    criteria = []
    for name in ("qh_hexagon", "qh_se", "qh_euclidean"):
        field = resolve_field(name)
        worst = 0.0
        for state in _random_states(rng, 5):
            base = integrate_extended(field, state, (0.0, 1.0)).final_state()
            for factor in (0.1, 3.0, 10.0):
                scaled = integrate_extended(field, CotangentState.of(state.x, factor * state.alpha), (0.0, 1.0))
                end = scaled.final_state()
                worst = max(
                    worst,
                    float(np.linalg.norm(end.x - base.x)) / max(1.0, float(np.linalg.norm(base.x))),
                    float(np.linalg.norm(end.alpha / factor - base.alpha)) / float(np.linalg.norm(base.alpha)),
                )
        criteria.append(_criterion(f"fiber scaling on {name}", worst, 1e-8))
    return criteria


def scenario_lipschitz(rng: np.random.Generator) -> List[VerificationCriterion]:
    window = Window(lower=(-1.0, 0.5), upper=(1.0, 2.0))
    report = lipschitz_constants_report(resolve_field("qh_euclidean"), window)
    return [
        _criterion("C1 on the hyperbolic plane", abs(report.c1 - 1.0), settings.closed_form_tol,
                   detail=f"C1={report.c1:.12g}"),
        _criterion("C2 = max x2 on the window", abs(report.c2 - 2.0), settings.closed_form_tol,
                   detail=f"C2={report.c2:.12g}"),
    ]


SCENARIOS: Dict[str, Tuple[str, ScenarioFn]] = {
    "fenchel": ("Fenchel identity (F^2)* = F*^2 / 4", scenario_fenchel),
    "fundamental": ("F(dF*^2(alpha)) = 2 F*(alpha) on strictly convex norms", scenario_fundamental),
    "hexagon-switching": ("Hexagon switch times and closed form agreement", scenario_hexagon_switching),
    "hamiltonian": ("Hamiltonian constancy along integrated trajectories", scenario_hamiltonian),
    "spray": ("Riemannian spray equals F* times the extended field", scenario_spray),
    "hyperbolic": ("Hyperbolic plane circles and endpoints", scenario_hyperbolic),
    "oracle-hexagon": ("Grid oracle certification on the hexagon plane", scenario_oracle_hexagon),
    "oracle-hyperbolic": ("Grid oracle certification on the hyperbolic plane", scenario_oracle_hyperbolic),
    "strong-convexity": ("Strong convexity of the Euclidean, hexagon and S_e norms", scenario_strong_convexity),
    "affine-symmetry": ("Affine group symmetry of quasi-hyperbolic solutions", scenario_affine_symmetry),
    "se-thresholds": ("S_e corner thresholds k1 and k2", scenario_se_thresholds),
    "fiber-scaling": ("Fiber scaling invariance of the extended field", scenario_fiber_scaling),
    "lipschitz": ("Lipschitz constants of the hyperbolic plane", scenario_lipschitz),
}


def scenario_names() -> List[str]:
    return list(SCENARIOS)


def run_scenario(name: str, seed: Optional[int] = None) -> VerificationReport:
    """Run one scenario with a seeded generator.

    Raises:
        UnknownScenarioError: If no scenario has this name
    """
    if name not in SCENARIOS:
        raise UnknownScenarioError(f"Unknown scenario {name!r}; available: {', '.join(SCENARIOS)}")
    _, fn = SCENARIOS[name]
    rng = np.random.default_rng(settings.random_seed if seed is None else seed)
    started = time.perf_counter()
    criteria = fn(rng)
    elapsed = time.perf_counter() - started
    report = VerificationReport(
        scenario=name, passed=all(c.passed for c in criteria), criteria=criteria, elapsed_seconds=elapsed
    )
    logger.info(f"Scenario {name}: {'pass' if report.passed else 'FAIL'} in {elapsed:.2f}s")
    return report


def run_scenarios(names: Sequence[str], seed: Optional[int] = None) -> List[VerificationReport]:
    return [run_scenario(name, seed) for name in names]
