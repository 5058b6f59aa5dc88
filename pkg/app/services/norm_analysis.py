"""Sampled convexity and Lipschitz checks for asymmetric norms."""
import logging
import math
from typing import List, Optional, Tuple

import numpy as np

from app.config import settings
from app.errors import NotStrictlyConvexError
from app.models.schemas import LipschitzReport, StrongConvexityReport, WitnessTriple
from app.services.asym_norm import ArcComposite, AsymNorm, Polyhedral, Quadratic, Scaled

logger = logging.getLogger(__name__)

# Extra subgradients tested strictly between the extreme rays of a normal cone
CONE_INTERIOR_SAMPLES = 8
# Tolerance on the normalized margin relative to c^2, absorbs rounding in exact cases
MARGIN_TOL = 1e-9


def _cone_normals(lower: float, upper: float) -> np.ndarray:
    span = (upper - lower) % (2.0 * math.pi)
    angles = lower + np.linspace(0.0, span, CONE_INTERIOR_SAMPLES + 2)
    return np.column_stack([np.cos(angles), np.sin(angles)])


def boundary_with_normals(norm: AsymNorm, count: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """Sample unit-sphere points paired with outward normals of the unit ball.

    Corners and vertices are always included, each with the extreme rays of
    its normal cone and a few rays in between.

    Returns:
        (points, normals), both of shape (m, 2)
    """
    points: List[np.ndarray] = []
    normals: List[np.ndarray] = []

    if isinstance(norm, Scaled):
        inner_points, inner_normals = boundary_with_normals(norm.inner, count, rng)
        return norm.factor * inner_points, inner_normals

    if isinstance(norm, Polyhedral):
        k = norm.size
        for j in range(k):
            for n in _cone_normals(norm.normal_angles[(j - 1) % k], norm.normal_angles[j]):
                points.append(norm.vertices[j])
                normals.append(n)
        per_face = max(count // k, 1)
        for i in range(k):
            ts = rng.uniform(0.0, 1.0, per_face)
            seg = norm.vertices[(i + 1) % k] - norm.vertices[i]
            for t in ts:
                points.append(norm.vertices[i] + t * seg)
                normals.append(norm.normals[i])
    elif isinstance(norm, ArcComposite):
        m = len(norm.arcs)
        for j in range(m):
            for n in _cone_normals(norm.ends[(j - 1) % m], norm.starts[j]):
                points.append(norm.corners[j])
                normals.append(n)
        per_arc = max(count // m, 1)
        for j in range(m):
            phis = rng.uniform(norm.starts[j], norm.ends[j], per_arc)
            dirs = np.column_stack([np.cos(phis), np.sin(phis)])
            points.extend(norm.centers[j] + norm.radii[j] * dirs)
            normals.extend(dirs)
    elif isinstance(norm, Quadratic):
        if norm.dimension != 2:
            raise ValueError("Boundary sampling is implemented for planar norms")
        angles = rng.uniform(0.0, 2.0 * math.pi, count)
        ys = norm.boundary_points(angles)
        points.extend(ys)
        normals.extend(ys @ norm.matrix)
    else:
        raise TypeError(f"Unsupported norm type {type(norm).__name__}")

    return np.asarray(points, dtype=float), np.asarray(normals, dtype=float)


def _sample_triples(norm: AsymNorm, triples: int, rng: np.random.Generator):
    """Build (y, z, alpha) samples with alpha a subgradient of F^2 at y."""
    points, normals = boundary_with_normals(norm, max(triples // 4, 16), rng)
    idx = rng.integers(0, points.shape[0], triples)
    ys = points[idx]
    ns = normals[idx]
    # alpha = 2 F(y) n / n(y) with F(y) = 1 on the sphere
    alphas = 2.0 * ns / np.einsum("ij,ij->i", ns, ys)[:, None]

    angles = rng.uniform(0.0, 2.0 * math.pi, triples)
    dirs = np.column_stack([np.cos(angles), np.sin(angles)])
    near = rng.random(triples) < 0.5
    lengths = np.where(near, rng.uniform(1e-3, 0.2, triples), rng.uniform(0.05, 3.0, triples))
    zs = np.where(near[:, None], ys + lengths[:, None] * dirs, lengths[:, None] * dirs)

    if isinstance(norm, (Polyhedral, Scaled)) and not norm.is_strictly_convex:
        # Pairs on the same face carry no curvature at all
        base = norm.inner if isinstance(norm, Scaled) else norm
        factor = norm.factor if isinstance(norm, Scaled) else 1.0
        k = base.size
        for i in range(k):
            start, end = factor * base.vertices[i], factor * base.vertices[(i + 1) % k]
            y = start + 0.25 * (end - start)
            z = start + 0.75 * (end - start)
            n = base.normals[i]
            ys = np.vstack([ys, y])
            zs = np.vstack([zs, z])
            alphas = np.vstack([alphas, 2.0 * n / (n @ y) * norm.eval(y)])
    return ys, zs, alphas


def _normalized_margins(norm: AsymNorm, ys: np.ndarray, zs: np.ndarray, alphas: np.ndarray) -> np.ndarray:
    """(F^2(z) - F^2(y) - alpha(z - y)) / |z - y|^2 for every triple."""
    diff = zs - ys
    gap = norm.eval_many(zs) ** 2 - norm.eval_many(ys) ** 2 - np.einsum("ij,ij->i", alphas, diff)
    return gap / np.einsum("ij,ij->i", diff, diff)


def _report(c: float, quotients: np.ndarray, ys, zs, alphas) -> StrongConvexityReport:
    margins = quotients - c * c
    worst = int(np.argmin(margins))
    passed = bool(margins[worst] >= -MARGIN_TOL * c * c)
    return StrongConvexityReport(
        passed=passed,
        c=c,
        worst_margin=float(margins[worst]),
        samples=int(margins.shape[0]),
        witness=None if passed else WitnessTriple(
            y=ys[worst].tolist(), z=zs[worst].tolist(), alpha=alphas[worst].tolist()
        ),
    )


def check_strong_convexity(
    norm: AsymNorm,
    c: float,
    triples: int = 10_000,
    rng: Optional[np.random.Generator] = None,
) -> StrongConvexityReport:
    """Sample F^2(z) >= F^2(y) + alpha(z - y) + c^2 |z - y|^2.

    The reference norm is ``c`` times the Euclidean norm.

    Args:
        norm: Planar norm to check
        c: Positive strong-convexity constant
        triples: Number of (y, z, alpha) samples
        rng: Random generator; seeded from settings when omitted

    Returns:
        Report with the smallest normalized margin and, on failure, its witness
    """
    if c <= 0:
        raise ValueError(f"Strong-convexity constant must be positive, got {c}")
    rng = rng if rng is not None else np.random.default_rng(settings.random_seed)
    ys, zs, alphas = _sample_triples(norm, triples, rng)
    return _report(c, _normalized_margins(norm, ys, zs, alphas), ys, zs, alphas)


def strong_convexity_constant(
    norm: AsymNorm,
    triples: int = 10_000,
    rng: Optional[np.random.Generator] = None,
) -> StrongConvexityReport:
    """Bisect the largest c in [c_min, c_max] that passes on a fixed sample."""
    rng = rng if rng is not None else np.random.default_rng(settings.random_seed)
    ys, zs, alphas = _sample_triples(norm, triples, rng)
    quotients = _normalized_margins(norm, ys, zs, alphas)

    def passes(c: float) -> bool:
        return bool(np.min(quotients) >= (1.0 - MARGIN_TOL) * c * c)

    lo, hi = settings.strong_convexity_c_min, settings.strong_convexity_c_max
    if not passes(lo):
        logger.info(f"Strong convexity fails already at c={lo} for {norm!r}")
        return _report(lo, quotients, ys, zs, alphas)
    if passes(hi):
        return _report(hi, quotients, ys, zs, alphas)
    for _ in range(settings.strong_convexity_bisections):
        mid = 0.5 * (lo + hi)
        if passes(mid):
            lo = mid
        else:
            hi = mid
    logger.info(f"Strong convexity constant c={lo:.6g} for {norm!r}")
    return _report(lo, quotients, ys, zs, alphas)


def lipschitz_report_grad_dual(
    norm: AsymNorm,
    samples: int = 5000,
    c: Optional[float] = None,
    rng: Optional[np.random.Generator] = None,
) -> LipschitzReport:
    """Largest sampled difference quotient of dF*^2 on the annulus 0.5 <= |alpha| <= 2.

    When a strong-convexity constant ``c`` is given, the quotient is compared
    against the bound 2/c^2.
    """
    if not norm.is_strictly_convex:
        raise NotStrictlyConvexError(f"{norm!r} has a non-differentiable dual")
    rng = rng if rng is not None else np.random.default_rng(settings.random_seed)

    radii = rng.uniform(0.5, 2.0, samples)
    angles = rng.uniform(0.0, 2.0 * math.pi, samples)
    steps = rng.uniform(1e-3, 1e-1, samples)
    turns = rng.uniform(0.0, 2.0 * math.pi, samples)

    best = 0.0
    for r, a, s, t in zip(radii, angles, steps, turns):
        alpha1 = r * np.array([math.cos(a), math.sin(a)])
        delta = s * np.array([math.cos(t), math.sin(t)])
        diff = norm.grad_dual_sq(alpha1 + delta) - norm.grad_dual_sq(alpha1)
        best = max(best, float(np.linalg.norm(diff) / s))

    bound = 2.0 / (c * c) if c else None
    return LipschitzReport(
        max_quotient=best,
        samples=samples,
        bound=bound,
        within_bound=None if bound is None else best <= bound * (1.0 + 1e-9),
    )
