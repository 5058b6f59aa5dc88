"""Fields of asymmetric norms over a single chart domain.

A ``FinslerField`` assigns an ``AsymNorm`` to every point of an open box in
R^n. Three families are implemented:

* ``QuasiHyperbolicField``: F(x, y) = F_e(y) / x2 on the upper half-plane,
  left invariant under the affine group acting by x -> (b x1 + a, b x2).
* ``ConstantField``: the same norm everywhere.
* ``RiemannianField``: F(x, y) = sqrt(y^T g(x) y) with closed-form partials of g.
"""
import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from app.config import settings
from app.errors import (
    InvalidGroupElementError,
    NotStrictlyConvexError,
    OutOfDomainError,
    ZeroControlError,
    ZeroCovectorError,
)
from app.models.schemas import DualGradientLipschitzReport, LipschitzConstantsReport
from app.services.asym_norm import AsymNorm, Quadratic, Scaled, SupportSet, as_vector

logger = logging.getLogger(__name__)

# Metric callback: x of shape (..., n) -> (g of shape (..., n, n), dg of shape (..., n, n, n))
# with dg[..., i, :, :] the partial derivative of g along x_i.
MetricFn = Callable[[np.ndarray], Tuple[np.ndarray, np.ndarray]]


@dataclass(frozen=True)
class Window:
    """Compact box [lower, upper] used for sampling and grid oracles."""

    lower: Tuple[float, ...]
    upper: Tuple[float, ...]

    def __post_init__(self):
        if len(self.lower) != len(self.upper):
            raise ValueError("Window bounds must have the same dimension")
        if any(lo >= hi for lo, hi in zip(self.lower, self.upper)):
            raise ValueError(f"Window bounds must satisfy lower < upper, got {self.lower} {self.upper}")

    def contains(self, x: Sequence[float], tol: float = 1e-12) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= np.asarray(self.lower) - tol) and np.all(x <= np.asarray(self.upper) + tol))


@dataclass(frozen=True)
class ChartDomain:
    """Open box, optionally cut down by a constraint predicate."""

    lower: Tuple[float, ...]
    upper: Tuple[float, ...]
    constraint: Optional[Callable[[np.ndarray], bool]] = None
    margin: float = settings.domain_margin

    @property
    def dimension(self) -> int:
        return len(self.lower)

    def contains(self, x: Sequence[float]) -> bool:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dimension,) or not np.all(np.isfinite(x)):
            return False
        inside = np.all(x > np.asarray(self.lower) + self.margin) and np.all(x < np.asarray(self.upper) - self.margin)
        return bool(inside and (self.constraint is None or self.constraint(x)))

    def require(self, x: Sequence[float]) -> np.ndarray:
        """Return x as an array, raising OutOfDomainError when outside."""
        if not self.contains(x):
            raise OutOfDomainError(f"Point {list(np.asarray(x, dtype=float))} is outside the chart domain")
        return np.asarray(x, dtype=float)

    def contains_window(self, window: Window) -> bool:
        corners = np.array(np.meshgrid(*zip(window.lower, window.upper))).reshape(self.dimension, -1).T
        return all(self.contains(c) for c in corners)


UPPER_HALF_PLANE = ChartDomain(lower=(-math.inf, 0.0), upper=(math.inf, math.inf))
WHOLE_PLANE = ChartDomain(lower=(-math.inf, -math.inf), upper=(math.inf, math.inf))


class FinslerField(ABC):
    """A continuous field x -> F(x, .) of asymmetric norms."""

    name: str = "field"
    domain: ChartDomain

    @abstractmethod
    def norm_at(self, x: np.ndarray) -> AsymNorm:
        """Norm of the tangent space at x (x assumed inside the domain)."""

    @abstractmethod
    def horizontal_derivative_raw(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """d_hF(x, y) without domain validation."""

    @abstractmethod
    def eval_many(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        """F(x_k, y_k) for matching rows of ``xs`` and ``ys``."""

    @property
    def dimension(self) -> int:
        return self.domain.dimension

    @property
    def is_strictly_convex(self) -> bool:
        return self.norm_at(self.sample_point()).is_strictly_convex

    @property
    def is_symmetric(self) -> bool:
        return self.norm_at(self.sample_point()).is_symmetric()

    def sample_point(self) -> np.ndarray:
        """A point guaranteed to be in the domain."""
        lower = np.asarray(self.domain.lower, dtype=float)
        upper = np.asarray(self.domain.upper, dtype=float)
        has_lower, has_upper = np.isfinite(lower), np.isfinite(upper)
        lo = np.where(has_lower, lower, 0.0)
        hi = np.where(has_upper, upper, 0.0)
        mid = np.where(has_lower & has_upper, 0.5 * (lo + hi), 0.0)
        mid = np.where(has_lower & ~has_upper, lo + 1.0, mid)
        return np.where(~has_lower & has_upper, hi - 1.0, mid)

    def field_eval(self, x: Sequence[float], y: Sequence[float]) -> float:
        """Return F(x, y)."""
        x = self.domain.require(x)
        return self.norm_at(x).eval(as_vector(y, self.dimension))

    def unit_vector(self, x: Sequence[float], u: Sequence[float]) -> np.ndarray:
        """Return X_u(x) = u / F(x, u)."""
        x = self.domain.require(x)
        u = as_vector(u, self.dimension)
        if not np.any(u):
            raise ZeroControlError("Control vector must be nonzero")
        return u / self.norm_at(x).eval(u)

    def horizontal_derivative(self, x: Sequence[float], y: Sequence[float]) -> np.ndarray:
        """Return the covector of partials dF/dx_i at (x, y)."""
        x = self.domain.require(x)
        return self.horizontal_derivative_raw(x, as_vector(y, self.dimension))

    def dual_eval(self, x: Sequence[float], alpha: Sequence[float]) -> float:
        """Return F*(x, alpha), the dual norm at x."""
        x = self.domain.require(x)
        return self.norm_at(x).dual_eval(as_vector(alpha, self.dimension))

    def support_set(self, x: Sequence[float], alpha: Sequence[float]) -> SupportSet:
        """Unit vectors at x that maximize alpha."""
        x = self.domain.require(x)
        return self.norm_at(x).support_set(as_vector(alpha, self.dimension))


class QuasiHyperbolicField(FinslerField):
    """Left-invariant structure F(x, y) = F_e(y) / x2 on the upper half-plane."""

    def __init__(self, base: AsymNorm, name: str = "quasi_hyperbolic"):
        if base.dimension != 2:
            raise ValueError("Quasi-hyperbolic fields live on the plane")
        self.base = base
        self.name = name
        self.domain = UPPER_HALF_PLANE

    def __repr__(self) -> str:
        return f"QuasiHyperbolicField(base={self.base!r})"

    def norm_at(self, x):
        if not x[1] > 0:
            raise OutOfDomainError(f"Quasi-hyperbolic fields need x2 > 0, got {x[1]}")
        return Scaled(self.base, float(x[1]))

    def horizontal_derivative_raw(self, x, y):
        return np.array([0.0, -self.base.eval(y) / x[1] ** 2])

    def eval_many(self, xs, ys):
        return self.base.eval_many(ys) / np.asarray(xs, dtype=float)[:, 1]


class ConstantField(FinslerField):
    """The same norm at every point of a box domain."""

    def __init__(self, norm: AsymNorm, domain: Optional[ChartDomain] = None, name: str = "constant"):
        self.norm = norm
        self.name = name
        dim = norm.dimension
        self.domain = domain or ChartDomain(lower=(-math.inf,) * dim, upper=(math.inf,) * dim)

    def __repr__(self) -> str:
        return f"ConstantField(norm={self.norm!r})"

    def norm_at(self, x):
        return self.norm

    def horizontal_derivative_raw(self, x, y):
        return np.zeros(self.dimension)

    def eval_many(self, xs, ys):
        return self.norm.eval_many(ys)


class RiemannianField(FinslerField):
    """F(x, y) = sqrt(y^T g(x) y) for a metric with closed-form first partials."""

    def __init__(self, metric: MetricFn, domain: ChartDomain, name: str = "riemannian"):
        self.metric = metric
        self.domain = domain
        self.name = name

    def __repr__(self) -> str:
        return f"RiemannianField(name={self.name!r})"

    def norm_at(self, x):
        g, _ = self.metric(np.asarray(x, dtype=float))
        return Quadratic(g)

    @property
    def is_strictly_convex(self) -> bool:
        return True

    @property
    def is_symmetric(self) -> bool:
        return True

    def horizontal_derivative_raw(self, x, y):
        g, dg = self.metric(x)
        norm = math.sqrt(y @ g @ y)
        return np.einsum("j,ijk,k->i", y, dg, y) / (2.0 * norm)

    def eval_many(self, xs, ys):
        g, _ = self.metric(np.asarray(xs, dtype=float))
        return np.sqrt(np.einsum("mi,mij,mj->m", ys, g, ys))


def hyperbolic_metric(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """g = I / x2^2 on the upper half-plane, vectorised over leading axes."""
    x = np.asarray(x, dtype=float)
    h = x[..., 1]
    eye = np.eye(2)
    g = eye / (h ** 2)[..., None, None]
    dg = np.zeros(x.shape[:-1] + (2, 2, 2))
    dg[..., 1, :, :] = -2.0 * eye / (h ** 3)[..., None, None]
    return g, dg


def euclidean_metric(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    g = np.broadcast_to(np.eye(n), x.shape[:-1] + (n, n)).copy()
    return g, np.zeros(x.shape[:-1] + (n, n, n))


def hyperbolic_field() -> RiemannianField:
    return RiemannianField(hyperbolic_metric, UPPER_HALF_PLANE, name="riemannian_hyperbolic")


def euclidean_field(dimension: int = 2) -> RiemannianField:
    domain = ChartDomain(lower=(-math.inf,) * dimension, upper=(math.inf,) * dimension)
    return RiemannianField(euclidean_metric, domain, name="riemannian_euclidean")


def fundamental_tensor(field: RiemannianField, x: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    """Return (g_ij(x), g^ij(x))."""
    x = field.domain.require(x)
    g, _ = field.metric(x)
    return g, np.linalg.inv(g)


def spray_cotangent(field: RiemannianField, x: Sequence[float], alpha: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    """Cotangent geodesic spray of a Riemannian field.

    dx^i/dt = g^ik alpha_k and dalpha_i/dt = -1/2 alpha_j alpha_k d_i g^jk, with
    d_i g^-1 = -g^-1 (d_i g) g^-1.
    """
    x = field.domain.require(x)
    alpha = as_vector(alpha, field.dimension)
    if not np.any(alpha):
        raise ZeroCovectorError("Covector must be nonzero")
    g, dg = field.metric(x)
    g_inv = np.linalg.inv(g)
    dx = g_inv @ alpha
    d_inv = -np.einsum("jl,ilm,mk->ijk", g_inv, dg, g_inv)
    dalpha = -0.5 * np.einsum("j,ijk,k->i", alpha, d_inv, alpha)
    return dx, dalpha


def _unit_circle(count: int) -> np.ndarray:
    angles = np.linspace(0.0, 2.0 * math.pi, count, endpoint=False)
    return np.column_stack([np.cos(angles), np.sin(angles)])


def _window_grid(window: Window, per_axis: int) -> np.ndarray:
    axes = [np.linspace(lo, hi, per_axis) for lo, hi in zip(window.lower, window.upper)]
    return np.array(np.meshgrid(*axes)).reshape(len(axes), -1).T


def lipschitz_constants_report(
    field: FinslerField,
    window: Window,
    per_axis: int = 21,
    directions: int = 180,
) -> LipschitzConstantsReport:
    """Empirical C1 = sup |d_hF| / F^2 and C2 = sup 1 / F over window x unit circle.

    Directions are taken on the Euclidean unit circle.
    """
    if not field.domain.contains_window(window):
        raise OutOfDomainError(f"Window {window} is not inside the domain of {field.name}")
    c1 = 0.0
    c2 = 0.0
    ys = _unit_circle(directions)
    for x in _window_grid(window, per_axis):
        xs = np.broadcast_to(x, ys.shape)
        values = field.eval_many(xs, ys)
        grads = np.array([field.horizontal_derivative_raw(x, y) for y in ys])
        c1 = max(c1, float(np.max(np.linalg.norm(grads, axis=1) / values ** 2)))
        c2 = max(c2, float(np.max(1.0 / values)))
    samples = per_axis ** len(window.lower) * directions
    logger.info(f"Lipschitz constants for {field.name}: C1={c1:.6g}, C2={c2:.6g} over {samples} samples")
    return LipschitzConstantsReport(c1=c1, c2=c2, samples=samples)


def dual_gradient_lipschitz_report(
    field: FinslerField,
    window: Window,
    samples: int = 500,
    rng: Optional[np.random.Generator] = None,
) -> DualGradientLipschitzReport:
    """Sampled difference quotients of d_vF*^2(x, alpha) in x and in alpha."""
    if not field.is_strictly_convex:
        raise NotStrictlyConvexError(f"{field.name} is not fiberwise strictly convex")
    if not field.domain.contains_window(window):
        raise OutOfDomainError(f"Window {window} is not inside the domain of {field.name}")
    rng = rng if rng is not None else np.random.default_rng(settings.random_seed)
    lower, upper = np.asarray(window.lower), np.asarray(window.upper)

    horizontal = 0.0
    vertical = 0.0
    for _ in range(samples):
        x = rng.uniform(lower, upper)
        angle = rng.uniform(0.0, 2.0 * math.pi)
        alpha = rng.uniform(0.5, 2.0) * np.array([math.cos(angle), math.sin(angle)])
        base = field.norm_at(x).grad_dual_sq(alpha)

        dx = rng.normal(size=x.shape)
        dx *= rng.uniform(1e-4, 1e-2) / np.linalg.norm(dx)
        x2 = np.clip(x + dx, lower, upper)
        if np.any(x2 != x):
            moved = field.norm_at(x2).grad_dual_sq(alpha)
            horizontal = max(horizontal, float(np.linalg.norm(moved - base) / np.linalg.norm(x2 - x)))

        da = rng.normal(size=alpha.shape)
        da *= rng.uniform(1e-3, 1e-1) / np.linalg.norm(da)
        turned = field.norm_at(x).grad_dual_sq(alpha + da)
        vertical = max(vertical, float(np.linalg.norm(turned - base) / np.linalg.norm(da)))

    return DualGradientLipschitzReport(horizontal_quotient=horizontal, vertical_quotient=vertical, samples=samples)


def group_action(g: Tuple[float, float], x: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Left translation of the affine group (a, b) acting on (x, y).

    Points and vectors may be single rows or stacked along the first axis.
    """
    a, b = g
    if not b > 0:
        raise InvalidGroupElementError(f"Group element needs b > 0, got {g}")
    x = np.asarray(x, dtype=float)
    return np.stack([b * x[..., 0] + a, b * x[..., 1]], axis=-1), b * np.asarray(y, dtype=float)


def invariance_check(
    field: QuasiHyperbolicField,
    g: Tuple[float, float],
    samples: int = 200,
    rng: Optional[np.random.Generator] = None,
    tol: float = 1e-12,
) -> bool:
    """Check F(g.x, b y) = F(x, y) on random samples in the upper half-plane."""
    rng = rng if rng is not None else np.random.default_rng(settings.random_seed)
    xs = np.column_stack([rng.uniform(-5.0, 5.0, samples), rng.uniform(0.1, 5.0, samples)])
    ys = rng.normal(size=(samples, 2))
    moved_x, moved_y = group_action(g, xs, ys)
    before = field.eval_many(xs, ys)
    after = field.eval_many(moved_x, moved_y)
    return bool(np.all(np.abs(after - before) <= tol * np.maximum(1.0, np.abs(before))))
