"""Asymmetric norms on finite-dimensional real vector spaces.

Three concrete representations are supported, plus a positive rescaling of any
of them:

* ``Polyhedral``: a convex polygon around the origin (n=2), given by its
  vertices in counter-clockwise order.
* ``Quadratic``: F(y) = sqrt(y^T A y) for a symmetric positive-definite A.
* ``ArcComposite``: a closed convex curve made of circular arcs (n=2).
* ``Scaled``: F = inner / factor.

Besides evaluation, duals, Fenchel conjugates and support sets, every norm
exposes a small *control interface* used by the geodesic integrator. A control
descriptor names the part of the unit sphere that maximizes a covector
(a vertex, an arc, a corner or the smooth sphere); ``control_margin`` measures
how deep a covector sits inside the normal-cone region of that descriptor.
"""
import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import minimize_scalar

from app.config import settings
from app.errors import NotStrictlyConvexError, ZeroCovectorError

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi


def wrap_angle(angle):
    """Wrap an angle (or array of angles) into [-pi, pi)."""
    return (np.asarray(angle) + math.pi) % TWO_PI - math.pi


def as_vector(values: Sequence[float], dimension: Optional[int] = None) -> np.ndarray:
    """Convert a sequence to a float vector, checking dimension and finiteness."""
    vec = np.asarray(values, dtype=float).reshape(-1)
    if dimension is not None and vec.shape[0] != dimension:
        raise ValueError(f"Expected a vector of dimension {dimension}, got {vec.shape[0]}")
    if not np.all(np.isfinite(vec)):
        raise ValueError(f"Vector has non-finite entries: {vec}")
    return vec


def _angle_margin(theta: float, lower: float, upper: float) -> float:
    """Signed angular distance of ``theta`` to the boundary of [lower, upper].

    Positive inside the region, negative outside. Regions are narrower than pi.
    """
    return float(min(wrap_angle(theta - lower), wrap_angle(upper - theta)))


@dataclass(frozen=True)
class ControlDescriptor:
    """Identifies the active part of a unit sphere.

    ``kind`` is one of ``vertex``, ``face``, ``arc``, ``corner`` or ``smooth``.
    """

    kind: str
    index: int = 0

    @property
    def label(self) -> str:
        return f"{self.kind}:{self.index}"


@dataclass(frozen=True, eq=False)
class SupportPoint:
    """Single unit-sphere maximizer."""

    point: np.ndarray

    def members(self) -> List[np.ndarray]:
        return [self.point]

    def same_as(self, other: "SupportSet", atol: float = 1e-12) -> bool:
        return isinstance(other, SupportPoint) and np.allclose(self.point, other.point, atol=atol)


@dataclass(frozen=True, eq=False)
class SupportFace:
    """Closed segment of unit-sphere maximizers (flat polygon face)."""

    endpoints: Tuple[np.ndarray, np.ndarray]
    index: int

    def members(self) -> List[np.ndarray]:
        return list(self.endpoints)

    def same_as(self, other: "SupportSet", atol: float = 1e-12) -> bool:
        return (
            isinstance(other, SupportFace)
            and self.index == other.index
            and all(np.allclose(a, b, atol=atol) for a, b in zip(self.endpoints, other.endpoints))
        )


SupportSet = Union[SupportPoint, SupportFace]


class AsymNorm(ABC):
    """Common interface of all asymmetric norm representations."""

    dimension: int = 2

    @abstractmethod
    def eval(self, y: Sequence[float]) -> float:
        """Return F(y)."""

    @abstractmethod
    def eval_many(self, ys: np.ndarray) -> np.ndarray:
        """Return F for each row of ``ys``."""

    @abstractmethod
    def dual_eval(self, alpha: Sequence[float]) -> float:
        """Return F*(alpha), the supremum of alpha over the unit ball."""

    @abstractmethod
    def fenchel_conjugate_sq(self, alpha: Sequence[float]) -> float:
        """Return (F^2)*(alpha) = sup_y {alpha(y) - F(y)^2}."""

    @abstractmethod
    def support_set(self, alpha: Sequence[float]) -> SupportSet:
        """Return the unit-sphere points attaining F*(alpha)."""

    @abstractmethod
    def grad_dual_sq(self, alpha: Sequence[float]) -> np.ndarray:
        """Return the gradient of F*^2 at alpha."""

    @property
    @abstractmethod
    def is_strictly_convex(self) -> bool:
        """Whether the unit ball has no flat pieces."""

    @abstractmethod
    def control_descriptor(self, alpha: Sequence[float]) -> ControlDescriptor:
        """Descriptor of the part of the sphere that maximizes alpha."""

    @abstractmethod
    def control_point(self, descriptor: ControlDescriptor, alpha: Sequence[float]) -> np.ndarray:
        """Unit vector selected by ``descriptor`` for the covector alpha."""

    @abstractmethod
    def control_margin(self, descriptor: ControlDescriptor, alpha: Sequence[float]) -> float:
        """Signed angular depth of alpha inside the region of ``descriptor``."""

    @abstractmethod
    def adjacent_control(self, descriptor: ControlDescriptor, alpha: Sequence[float]) -> ControlDescriptor:
        """Neighbouring descriptor across the region boundary closest to alpha."""

    def face_controls(self, face: ControlDescriptor) -> Tuple[ControlDescriptor, ControlDescriptor]:
        """Extreme controls of a face, in counter-clockwise order."""
        raise NotStrictlyConvexError(f"{type(self).__name__} has no faces")

    def preferred_directions(self) -> np.ndarray:
        """Extreme points of the unit ball that are not on a smooth piece."""
        return np.zeros((0, self.dimension))

    def is_symmetric(self, samples: int = 64) -> bool:
        """Check F(y) = F(-y) on directions spread over the circle."""
        angles = np.linspace(0.0, TWO_PI, samples, endpoint=False)
        dirs = np.column_stack([np.cos(angles), np.sin(angles)])
        return bool(np.allclose(self.eval_many(dirs), self.eval_many(-dirs), rtol=1e-12, atol=1e-14))

    def boundary_points(self, angles: np.ndarray) -> np.ndarray:
        """Unit-sphere points along the rays at the given origin angles (n=2)."""
        dirs = np.column_stack([np.cos(angles), np.sin(angles)])
        return dirs / self.eval_many(dirs)[:, None]

    def _require_nonzero(self, alpha: Sequence[float]) -> np.ndarray:
        a = as_vector(alpha, self.dimension)
        if not np.any(a):
            raise ZeroCovectorError("Covector must be nonzero")
        return a


class Polyhedral(AsymNorm):
    """Polygonal unit ball with vertices listed counter-clockwise.

    Face ``i`` runs from vertex ``i`` to vertex ``i+1``. Vertex ``j`` maximizes
    every covector whose angle lies between the outward normals of faces
    ``j-1`` and ``j``.
    """

    def __init__(self, vertices: Sequence[Sequence[float]]):
        v = np.asarray(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 3:
            raise ValueError("Polyhedral norms need at least three planar vertices")
        edges = np.roll(v, -1, axis=0) - v
        turns = edges[:, 0] * np.roll(edges, -1, axis=0)[:, 1] - edges[:, 1] * np.roll(edges, -1, axis=0)[:, 0]
        if np.any(turns <= 0):
            raise ValueError("Vertices must form a strictly convex polygon in counter-clockwise order")
        normals = np.column_stack([edges[:, 1], -edges[:, 0]])
        normals /= np.linalg.norm(normals, axis=1)[:, None]
        offsets = np.einsum("ij,ij->i", normals, v)
        if np.any(offsets <= 0):
            raise ValueError("The origin must lie strictly inside the polygon")

        self.vertices = v
        self.normals = normals
        self.offsets = offsets
        self.normal_angles = np.arctan2(normals[:, 1], normals[:, 0])
        # Angles of face normals measured from face 0, increasing for a convex polygon
        self._relative = (self.normal_angles - self.normal_angles[0]) % TWO_PI
        self._relative[0] = 0.0

    def __repr__(self) -> str:
        return f"Polyhedral(vertices={self.vertices.tolist()})"

    @property
    def size(self) -> int:
        return self.vertices.shape[0]

    @property
    def is_strictly_convex(self) -> bool:
        return False

    def eval(self, y):
        y = as_vector(y, 2)
        if not np.any(y):
            return 0.0
        return float(max(np.max(self.normals @ y / self.offsets), 0.0))

    def eval_many(self, ys):
        ys = np.asarray(ys, dtype=float)
        return np.maximum((ys @ self.normals.T / self.offsets).max(axis=1), 0.0)

    def dual_eval(self, alpha):
        return float(np.max(self.vertices @ as_vector(alpha, 2)))

    def fenchel_conjugate_sq(self, alpha):
        # On the ray through y, alpha(r y) - r^2 F(y)^2 peaks at alpha(y)^2 / (4 F(y)^2)
        # when alpha(y) > 0, and alpha is linear on each face, so a vertex ray wins
        a = as_vector(alpha, 2)
        heights = np.maximum(self.vertices @ a, 0.0) / self.eval_many(self.vertices)
        return float(0.25 * np.max(heights ** 2))

    def _locate(self, alpha: np.ndarray) -> Tuple[int, float, float]:
        """Return (face j, depth past face j normal, distance to face j+1 normal)."""
        theta = math.atan2(alpha[1], alpha[0])
        rel = (theta - self.normal_angles[0]) % TWO_PI
        j = int(np.searchsorted(self._relative, rel, side="right")) - 1
        upper = self._relative[j + 1] if j + 1 < self.size else TWO_PI
        return j, rel - self._relative[j], upper - rel

    def support_set(self, alpha):
        descriptor = self.control_descriptor(alpha)
        if descriptor.kind == "face":
            i = descriptor.index
            return SupportFace(
                endpoints=(self.vertices[i].copy(), self.vertices[(i + 1) % self.size].copy()),
                index=i,
            )
        return SupportPoint(self.vertices[descriptor.index].copy())

    def grad_dual_sq(self, alpha):
        raise NotStrictlyConvexError("The dual of a polyhedral norm is not differentiable on face normals")

    def control_descriptor(self, alpha):
        a = self._require_nonzero(alpha)
        j, past_lower, before_upper = self._locate(a)
        if past_lower <= settings.face_tol:
            return ControlDescriptor("face", j)
        if before_upper <= settings.face_tol:
            return ControlDescriptor("face", (j + 1) % self.size)
        return ControlDescriptor("vertex", (j + 1) % self.size)

    def face_controls(self, face):
        i = face.index
        return ControlDescriptor("vertex", i), ControlDescriptor("vertex", (i + 1) % self.size)

    def control_point(self, descriptor, alpha):
        if descriptor.kind != "vertex":
            raise ValueError(f"Polyhedral norms select vertices, got {descriptor.label}")
        return self.vertices[descriptor.index % self.size].copy()

    def _vertex_region(self, j: int) -> Tuple[float, float]:
        return self.normal_angles[(j - 1) % self.size], self.normal_angles[j % self.size]

    def control_margin(self, descriptor, alpha):
        a = as_vector(alpha, 2)
        if descriptor.kind == "face":
            return 0.0
        lower, upper = self._vertex_region(descriptor.index)
        return _angle_margin(math.atan2(a[1], a[0]), lower, upper)

    def adjacent_control(self, descriptor, alpha):
        a = as_vector(alpha, 2)
        lower, upper = self._vertex_region(descriptor.index)
        theta = math.atan2(a[1], a[0])
        step = 1 if abs(wrap_angle(upper - theta)) < abs(wrap_angle(theta - lower)) else -1
        return ControlDescriptor("vertex", (descriptor.index + step) % self.size)

    def preferred_directions(self):
        return self.vertices.copy()


class Quadratic(AsymNorm):
    """Norm F(y) = sqrt(y^T A y) of a symmetric positive-definite matrix."""

    def __init__(self, matrix: Sequence[Sequence[float]]):
        a = np.asarray(matrix, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("Quadratic norms need a square matrix")
        if not np.allclose(a, a.T, atol=1e-12):
            raise ValueError("Quadratic norm matrix must be symmetric")
        try:
            np.linalg.cholesky(a)
        except np.linalg.LinAlgError as e:
            raise ValueError("Quadratic norm matrix must be positive definite") from e
        self.matrix = a
        self.inverse = np.linalg.inv(a)
        self.dimension = a.shape[0]

    def __repr__(self) -> str:
        return f"Quadratic(matrix={self.matrix.tolist()})"

    @property
    def is_strictly_convex(self) -> bool:
        return True

    def eval(self, y):
        y = as_vector(y, self.dimension)
        return float(math.sqrt(max(y @ self.matrix @ y, 0.0)))

    def eval_many(self, ys):
        ys = np.asarray(ys, dtype=float)
        return np.sqrt(np.maximum(np.einsum("mi,ij,mj->m", ys, self.matrix, ys), 0.0))

    def dual_eval(self, alpha):
        a = as_vector(alpha, self.dimension)
        return float(math.sqrt(max(a @ self.inverse @ a, 0.0)))

    def fenchel_conjugate_sq(self, alpha):
        a = as_vector(alpha, self.dimension)
        y = 0.5 * self.inverse @ a
        return float(a @ y - y @ self.matrix @ y)

    def support_set(self, alpha):
        a = self._require_nonzero(alpha)
        return SupportPoint(self.inverse @ a / self.dual_eval(a))

    def grad_dual_sq(self, alpha):
        a = self._require_nonzero(alpha)
        return 2.0 * self.inverse @ a

    def control_descriptor(self, alpha):
        self._require_nonzero(alpha)
        return ControlDescriptor("smooth", 0)

    def control_point(self, descriptor, alpha):
        a = as_vector(alpha, self.dimension)
        return self.inverse @ a / self.dual_eval(a)

    def control_margin(self, descriptor, alpha):
        return math.inf

    def adjacent_control(self, descriptor, alpha):
        return descriptor

    def is_symmetric(self, samples: int = 64) -> bool:
        return True


@dataclass(frozen=True)
class Arc:
    """Circular arc; angles are measured around ``center``, counter-clockwise."""

    center: Tuple[float, float]
    radius: float
    start_angle: float
    end_angle: float

    def point(self, angle: float) -> np.ndarray:
        return np.asarray(self.center, dtype=float) + self.radius * np.array([math.cos(angle), math.sin(angle)])


class ArcComposite(AsymNorm):
    """Convex unit sphere assembled from circular arcs (n=2).

    Arcs are listed counter-clockwise; the end of arc ``j`` is the start of arc
    ``j+1``. Corner ``j`` is the start point of arc ``j``. Each arc bulges
    outward, so a ray from the origin leaves the unit ball where it leaves the
    arc's disc.
    """

    def __init__(self, arcs: Sequence[Arc], joint_tol: float = 1e-9):
        arcs = [a if isinstance(a, Arc) else Arc(*a) for a in arcs]
        if len(arcs) < 2:
            raise ValueError("ArcComposite norms need at least two arcs")
        self.arcs = arcs
        self.centers = np.array([a.center for a in arcs], dtype=float)
        self.radii = np.array([a.radius for a in arcs], dtype=float)
        self.starts = np.array([a.start_angle for a in arcs], dtype=float)
        self.ends = np.array([a.end_angle for a in arcs], dtype=float)
        m = len(arcs)

        if np.any(self.radii <= 0):
            raise ValueError("Arc radii must be positive")
        spans = self.ends - self.starts
        if np.any(spans <= 0) or np.any(spans >= math.pi):
            raise ValueError("Each arc must span a positive angle below pi")
        if np.any(np.linalg.norm(self.centers, axis=1) >= self.radii):
            raise ValueError("The origin must lie inside every arc's disc")

        self.corners = np.array([a.point(a.start_angle) for a in arcs])
        ends = np.array([a.point(a.end_angle) for a in arcs])
        gaps = np.linalg.norm(ends - np.roll(self.corners, -1, axis=0), axis=1)
        if np.any(gaps > joint_tol):
            raise ValueError(f"Arcs do not join continuously (max gap {gaps.max():.3e})")
        turns = wrap_angle(np.roll(self.starts, -1) - self.ends)
        if np.any(turns < -1e-12):
            raise ValueError("Arc curve is not convex at a corner")

        self.corner_angles = np.arctan2(self.corners[:, 1], self.corners[:, 0])
        self._relative = (self.corner_angles - self.corner_angles[0]) % TWO_PI
        self._relative[0] = 0.0
        if np.any(np.diff(self._relative) <= 0):
            raise ValueError("Arcs must wind once counter-clockwise around the origin")
        self._size = m

    def __repr__(self) -> str:
        return f"ArcComposite(arcs={self.arcs!r})"

    @property
    def is_strictly_convex(self) -> bool:
        return True

    def _arc_index(self, thetas: np.ndarray) -> np.ndarray:
        rel = (thetas - self.corner_angles[0]) % TWO_PI
        return np.searchsorted(self._relative, rel, side="right") - 1

    def eval_many(self, ys):
        ys = np.asarray(ys, dtype=float)
        lengths = np.linalg.norm(ys, axis=1)
        out = np.zeros(ys.shape[0])
        nonzero = lengths > 0
        if not np.any(nonzero):
            return out
        dirs = ys[nonzero] / lengths[nonzero, None]
        j = self._arc_index(np.arctan2(dirs[:, 1], dirs[:, 0]))
        c = self.centers[j]
        b = np.einsum("ij,ij->i", dirs, c)
        reach = b + np.sqrt(b * b - np.einsum("ij,ij->i", c, c) + self.radii[j] ** 2)
        out[nonzero] = lengths[nonzero] / reach
        return out

    def eval(self, y):
        return float(self.eval_many(as_vector(y, 2)[None, :])[0])

    def _candidates(self, alpha: np.ndarray) -> np.ndarray:
        """Per-arc maximizers that fall inside their arc, plus every corner."""
        unit = alpha / np.linalg.norm(alpha)
        angle = math.atan2(unit[1], unit[0])
        inside = (angle - self.starts) % TWO_PI <= self.ends - self.starts
        arc_points = self.centers[inside] + self.radii[inside, None] * unit
        return np.vstack([arc_points, self.corners])

    def dual_eval(self, alpha):
        a = as_vector(alpha, 2)
        if not np.any(a):
            return 0.0
        return float(np.max(self._candidates(a) @ a))

    def support_set(self, alpha):
        a = self._require_nonzero(alpha)
        candidates = self._candidates(a)
        return SupportPoint(candidates[int(np.argmax(candidates @ a))].copy())

    def boundary_argmax(self, alpha: np.ndarray) -> Tuple[float, np.ndarray]:
        """Maximize alpha over the unit sphere by a one-dimensional angle search.

        A coarse sweep over ``angle_search_samples`` origin angles brackets the
        maximum; a bounded scalar minimization refines it to ``angle_search_xtol``.
        """
        samples = settings.angle_search_samples
        step = TWO_PI / samples
        angles = np.arange(samples) * step
        values = self.boundary_points(angles) @ alpha
        i = int(np.argmax(values))

        def objective(theta: float) -> float:
            return -float(self.boundary_points(np.array([theta]))[0] @ alpha)

        result = minimize_scalar(
            objective,
            bounds=(angles[i] - step, angles[i] + step),
            method="bounded",
            options={"xatol": settings.angle_search_xtol},
        )
        theta = result.x if -result.fun >= values[i] else angles[i]
        point = self.boundary_points(np.array([theta]))[0]
        return float(point @ alpha), point

    def fenchel_conjugate_sq(self, alpha):
        a = as_vector(alpha, 2)
        if not np.any(a):
            return 0.0
        best, _ = self.boundary_argmax(a)
        return 0.25 * best * best if best > 0 else 0.0

    def grad_dual_sq(self, alpha):
        a = self._require_nonzero(alpha)
        value, point = self.boundary_argmax(a)
        return 2.0 * value * point

    def control_region(self, descriptor: ControlDescriptor) -> Tuple[float, float]:
        j = descriptor.index % self._size
        if descriptor.kind == "arc":
            return self.starts[j], self.ends[j]
        return self.ends[(j - 1) % self._size], self.starts[j]

    def control_descriptor(self, alpha):
        a = self._require_nonzero(alpha)
        options = [ControlDescriptor(kind, j) for j in range(self._size) for kind in ("arc", "corner")]
        return max(options, key=lambda d: self.control_margin(d, a))

    def control_point(self, descriptor, alpha):
        j = descriptor.index % self._size
        if descriptor.kind == "corner":
            return self.corners[j].copy()
        a = as_vector(alpha, 2)
        return self.centers[j] + self.radii[j] * a / np.linalg.norm(a)

    def control_margin(self, descriptor, alpha):
        a = as_vector(alpha, 2)
        lower, upper = self.control_region(descriptor)
        return _angle_margin(math.atan2(a[1], a[0]), lower, upper)

    def adjacent_control(self, descriptor, alpha):
        a = as_vector(alpha, 2)
        lower, upper = self.control_region(descriptor)
        theta = math.atan2(a[1], a[0])
        forward = abs(wrap_angle(upper - theta)) < abs(wrap_angle(theta - lower))
        j = descriptor.index % self._size
        if descriptor.kind == "arc":
            return ControlDescriptor("corner", (j + 1) % self._size if forward else j)
        return ControlDescriptor("arc", j if forward else (j - 1) % self._size)

    def preferred_directions(self):
        return self.corners.copy()


class Scaled(AsymNorm):
    """The norm inner(y) / factor; its unit ball is ``factor`` times larger."""

    def __init__(self, inner: AsymNorm, factor: float):
        if not factor > 0 or not math.isfinite(factor):
            raise ValueError(f"Scale factor must be positive, got {factor}")
        self.inner = inner
        self.factor = float(factor)
        self.dimension = inner.dimension

    def __repr__(self) -> str:
        return f"Scaled(inner={self.inner!r}, factor={self.factor})"

    @property
    def is_strictly_convex(self) -> bool:
        return self.inner.is_strictly_convex

    def eval(self, y):
        return self.inner.eval(y) / self.factor

    def eval_many(self, ys):
        return self.inner.eval_many(ys) / self.factor

    def dual_eval(self, alpha):
        return self.factor * self.inner.dual_eval(alpha)

    def fenchel_conjugate_sq(self, alpha):
        return self.factor ** 2 * self.inner.fenchel_conjugate_sq(alpha)

    def support_set(self, alpha):
        inner = self.inner.support_set(alpha)
        if isinstance(inner, SupportFace):
            return SupportFace(endpoints=tuple(self.factor * e for e in inner.endpoints), index=inner.index)
        return SupportPoint(self.factor * inner.point)

    def grad_dual_sq(self, alpha):
        return self.factor ** 2 * self.inner.grad_dual_sq(alpha)

    def control_descriptor(self, alpha):
        return self.inner.control_descriptor(alpha)

    def face_controls(self, face):
        return self.inner.face_controls(face)

    def control_point(self, descriptor, alpha):
        return self.factor * self.inner.control_point(descriptor, alpha)

    def control_margin(self, descriptor, alpha):
        return self.inner.control_margin(descriptor, alpha)

    def adjacent_control(self, descriptor, alpha):
        return self.inner.adjacent_control(descriptor, alpha)

    def preferred_directions(self):
        return self.factor * self.inner.preferred_directions()

    def is_symmetric(self, samples: int = 64) -> bool:
        return self.inner.is_symmetric(samples)


def hexagon_norm() -> Polyhedral:
    """Regular hexagon with vertices ±(0,1), ±(√3/2, 1/2), ±(√3/2, -1/2)."""
    h = math.sqrt(3.0) / 2.0
    return Polyhedral([(h, -0.5), (h, 0.5), (0.0, 1.0), (-h, 0.5), (-h, -0.5), (0.0, -1.0)])


def euclidean_norm(dimension: int = 2) -> Quadratic:
    return Quadratic(np.eye(dimension))


def se_norm() -> ArcComposite:
    """Four arcs of radius √5 centred at (±1, ±1), one per quadrant.

    Arc 0 lies in the first quadrant (centre (-1,-1)) and the rest follow
    counter-clockwise, so corners 0..3 are (1,0), (0,1), (-1,0), (0,-1).
    """
    r = math.sqrt(5.0)
    near, far = math.atan2(1.0, 2.0), math.atan2(2.0, 1.0)
    return ArcComposite([
        Arc((-1.0, -1.0), r, near, far),
        Arc((1.0, -1.0), r, math.pi - far, math.pi - near),
        Arc((1.0, 1.0), r, -math.pi + near, -math.pi + far),
        Arc((-1.0, 1.0), r, -far, -near),
    ])
