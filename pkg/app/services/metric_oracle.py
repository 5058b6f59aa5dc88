"""Grid shortest-path oracle for certifying geodesic lengths.

A window of the chart is covered by an N1 x N2 lattice. Each node is joined to
the nodes at the stencil offsets by a directed edge weighted with the Finsler
length of the straight step (midpoint rule). Dijkstra on this graph gives an
upper estimate of the Finsler distance, up to snapping and directional
quantization.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.sparse import coo_matrix, csr_matrix
from scipy.sparse.csgraph import dijkstra

from app.config import settings
from app.errors import ConfigError, OutOfDomainError, OutOfWindowError, UnreachableError
from app.models.schemas import CertificationReport, SnapInfo
from app.services.finsler_field import FinslerField, Window
from app.services.geodesic_field import Trajectory, path_length

logger = logging.getLogger(__name__)

_AXIS_MOVES = [(1, 0), (-1, 0), (0, 1), (0, -1)]
_DIAGONAL_MOVES = [(1, 1), (1, -1), (-1, 1), (-1, -1)]
_KNIGHT_MOVES = [(1, 2), (2, 1), (-1, 2), (-2, 1), (1, -2), (2, -1), (-1, -2), (-2, -1)]

STENCILS = {
    4: _AXIS_MOVES,
    8: _AXIS_MOVES + _DIAGONAL_MOVES,
    16: _AXIS_MOVES + _DIAGONAL_MOVES + _KNIGHT_MOVES,
}


def stencil_offsets(size: int) -> List[Tuple[int, int]]:
    """Integer offsets of the 4-, 8- or 16-direction neighbourhood."""
    if size not in STENCILS:
        raise ConfigError(f"Stencil must be one of {sorted(STENCILS)}, got {size}")
    return list(STENCILS[size])


@dataclass(eq=False)
class GridOracle:
    """Directed weighted lattice over a planar window."""

    window: Window
    shape: Tuple[int, int]
    spacing: Tuple[float, float]
    stencil: int
    graph: csr_matrix
    field_name: str = ""

    @property
    def node_count(self) -> int:
        return self.shape[0] * self.shape[1]

    @property
    def edge_count(self) -> int:
        return int(self.graph.nnz)

    def index(self, i: int, j: int) -> int:
        return i * self.shape[1] + j

    def node(self, index: int) -> np.ndarray:
        i, j = divmod(int(index), self.shape[1])
        return np.array([
            self.window.lower[0] + i * self.spacing[0],
            self.window.lower[1] + j * self.spacing[1],
        ])

    def snap(self, point: Sequence[float]) -> Tuple[int, SnapInfo]:
        """Nearest node to ``point``.

        Raises:
            OutOfWindowError: If the point is outside the window
        """
        p = np.asarray(point, dtype=float)
        if not self.window.contains(p, tol=1e-9 * max(1.0, float(np.max(np.abs(p))))):
            raise OutOfWindowError(f"Point {p.tolist()} is outside the oracle window")
        i = int(np.clip(round((p[0] - self.window.lower[0]) / self.spacing[0]), 0, self.shape[0] - 1))
        j = int(np.clip(round((p[1] - self.window.lower[1]) / self.spacing[1]), 0, self.shape[1] - 1))
        idx = self.index(i, j)
        node = self.node(idx)
        return idx, SnapInfo(requested=p.tolist(), node=node.tolist(), error=float(np.linalg.norm(node - p)))

    def edge_weight(self, source: Tuple[int, int], offset: Tuple[int, int]) -> float:
        """Weight of the edge from lattice position ``source`` along ``offset``."""
        a = self.index(*source)
        b = self.index(source[0] + offset[0], source[1] + offset[1])
        return float(self.graph[a, b])


@dataclass
class ShortestPath:
    distance: float
    nodes: np.ndarray
    snap_p: SnapInfo
    snap_q: SnapInfo


def build_grid(
    field: FinslerField,
    window: Window,
    n: Union[int, Tuple[int, int], None] = None,
    stencil: Optional[int] = None,
) -> GridOracle:
    """Build the directed lattice graph of ``field`` over ``window``.

    Args:
        field: Planar Finsler field
        window: Box that must lie inside the field's domain
        n: Nodes per axis, or a (n1, n2) pair; defaults to settings.oracle_resolution
        stencil: 4, 8 or 16 directions; defaults to settings.oracle_stencil

    Returns:
        The oracle with a CSR adjacency matrix

    Raises:
        ConfigError: On fewer than two nodes per axis or an unknown stencil
        OutOfDomainError: If the window leaves the domain
    """
    n = n if n is not None else settings.oracle_resolution
    n1, n2 = (n, n) if isinstance(n, int) else (int(n[0]), int(n[1]))
    stencil = stencil or settings.oracle_stencil
    offsets = stencil_offsets(stencil)

    if min(n1, n2) < 2:
        raise ConfigError(f"Grid needs at least 2 nodes per axis, got {(n1, n2)}")
    if min(n1, n2) < settings.oracle_min_resolution_warning:
        logger.warning(
            f"Grid resolution {(n1, n2)} is below {settings.oracle_min_resolution_warning}; "
            "distances will be coarse"
        )
    if field.dimension != 2:
        raise ConfigError("The grid oracle works on planar fields only")
    if not field.domain.contains_window(window):
        raise OutOfDomainError(f"Window {window} is not inside the domain of {field.name}")

    lower = np.asarray(window.lower, dtype=float)
    upper = np.asarray(window.upper, dtype=float)
    h1 = (upper[0] - lower[0]) / (n1 - 1)
    h2 = (upper[1] - lower[1]) / (n2 - 1)
    ii, jj = np.meshgrid(np.arange(n1), np.arange(n2), indexing="ij")
    ii, jj = ii.ravel(), jj.ravel()

    rows, cols, weights = [], [], []
    for a, b in offsets:
        ti, tj = ii + a, jj + b
        valid = (ti >= 0) & (ti < n1) & (tj >= 0) & (tj < n2)
        si, sj = ii[valid], jj[valid]
        step = np.array([a * h1, b * h2])
        mids = np.column_stack([lower[0] + (si + 0.5 * a) * h1, lower[1] + (sj + 0.5 * b) * h2])
        w = field.eval_many(mids, np.broadcast_to(step, mids.shape))
        if not (np.all(np.isfinite(w)) and np.all(w > 0)):
            raise OutOfDomainError(f"Non-positive or non-finite edge weight along offset {(a, b)}")
        rows.append(si * n2 + sj)
        cols.append(ti[valid] * n2 + tj[valid])
        weights.append(w)

    count = n1 * n2
    graph = coo_matrix(
        (np.concatenate(weights), (np.concatenate(rows), np.concatenate(cols))), shape=(count, count)
    ).tocsr()
    oracle = GridOracle(
        window=window, shape=(n1, n2), spacing=(h1, h2), stencil=stencil, graph=graph,
        field_name=getattr(field, "name", ""),
    )
    logger.info(f"Built {n1}x{n2} grid on {oracle.field_name}: {oracle.node_count} nodes, {oracle.edge_count} edges")
    return oracle


def shortest_path(oracle: GridOracle, p: Sequence[float], q: Sequence[float]) -> ShortestPath:
    """Exact directed shortest path between the nodes nearest to p and q.

    Raises:
        OutOfWindowError: If p or q lies outside the window
        UnreachableError: If no directed path exists
    """
    src, snap_p = oracle.snap(p)
    dst, snap_q = oracle.snap(q)
    if src == dst:
        return ShortestPath(distance=0.0, nodes=np.array([src]), snap_p=snap_p, snap_q=snap_q)

    distances, predecessors = dijkstra(oracle.graph, directed=True, indices=src, return_predecessors=True)
    distance = float(distances[dst])
    if not math.isfinite(distance):
        raise UnreachableError(f"No grid path from {snap_p.node} to {snap_q.node}")

    path = [dst]
    while path[-1] != src:
        path.append(int(predecessors[path[-1]]))
    logger.debug(f"Grid path with {len(path)} nodes, distance {distance:.12g}")
    return ShortestPath(distance=distance, nodes=np.array(path[::-1]), snap_p=snap_p, snap_q=snap_q)


def shortest_path_batch(
    oracle: GridOracle,
    pairs: Iterable[Tuple[Sequence[float], Sequence[float]]],
    max_workers: Optional[int] = None,
) -> List[ShortestPath]:
    """Run independent queries on the shared graph, results in input order."""
    pairs = list(pairs)
    with ThreadPoolExecutor(max_workers=max_workers or settings.max_workers) as pool:
        return list(pool.map(lambda pair: shortest_path(oracle, *pair), pairs))


def certify(
    field: FinslerField,
    traj: Trajectory,
    oracle: GridOracle,
    reference_distance: Optional[float] = None,
) -> CertificationReport:
    """Compare a geodesic's length with the oracle distance between its endpoints.

    The gap (oracle - length) / length must lie within
    [settings.certify_gap_low, settings.certify_gap_high].

    Raises:
        OutOfWindowError: If an endpoint of the trajectory is outside the window
    """
    p = traj.initial_state().x
    q = traj.final_state().x
    length = traj.length if traj.length is not None else path_length(field, traj)
    result = shortest_path(oracle, p, q)
    gap = (result.distance - length) / length
    passed = settings.certify_gap_low <= gap <= settings.certify_gap_high
    report = CertificationReport(
        field=oracle.field_name or getattr(field, "name", ""),
        p=p.tolist(),
        q=q.tolist(),
        geodesic_length=float(length),
        oracle_distance=result.distance,
        relative_gap=float(gap),
        passed=bool(passed),
        resolution=list(oracle.shape),
        stencil=oracle.stencil,
        snap_p=result.snap_p,
        snap_q=result.snap_q,
        reference_distance=reference_distance,
    )
    logger.info(
        f"Certification on {report.field}: length {length:.6f}, oracle {result.distance:.6f}, "
        f"gap {gap:+.3e} ({'pass' if passed else 'FAIL'})"
    )
    return report


def _aligned_spacing(span: float, delta: float, n: int, cover: bool = False) -> float:
    """Cell size near span/(n-1) that divides ``delta`` exactly when delta is nonzero.

    With ``cover`` the cell never shrinks below span/(n-1), so n nodes still
    span the whole interval.
    """
    nominal = span / (n - 1)
    if abs(delta) < 1e-12:
        return nominal
    ratio = abs(delta) / nominal
    if cover:
        return abs(delta) / math.floor(ratio) if ratio >= 1.0 else nominal
    cells = max(1, round(ratio))
    return abs(delta) / cells


def _fixed_aspect_spacing(span: np.ndarray, delta: np.ndarray, n: int, aspect: float) -> np.ndarray:
    """Spacing (h1, aspect*h1) whose n nodes cover ``span`` on both axes.

    The lattice is aligned with ``delta`` along x1, or along x2 when the
    endpoints share their x1 coordinate.
    """
    h1 = max(span[0] / (n - 1), span[1] / ((n - 1) * aspect))
    covered = h1 * (n - 1)
    if abs(delta[0]) >= 1e-12:
        h1 = _aligned_spacing(covered, delta[0], n, cover=True)
    elif abs(delta[1]) >= 1e-12:
        h1 = _aligned_spacing(covered * aspect, delta[1], n, cover=True) / aspect
    return np.array([h1, h1 * aspect])


def oracle_window(
    points: np.ndarray,
    anchor: Sequence[float],
    target: Optional[Sequence[float]] = None,
    n: Optional[int] = None,
    pad: float = 0.2,
    aspect: Optional[float] = None,
    min_x2: Optional[float] = None,
) -> Window:
    """Window around ``points`` whose lattice passes through ``anchor``.

    With ``target`` given, the spacing is chosen so the target is a node too
    (both axes when ``aspect`` is None; along one axis when the cell aspect
    h2/h1 is fixed, with both extents still covering the padded points).
    ``min_x2`` keeps the window inside a half-plane.
    """
    n = n or settings.oracle_resolution
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    anchor = np.asarray(anchor, dtype=float)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    margin = pad * max(float(np.max(hi - lo)), 1e-6)
    lo, hi = lo - margin, hi + margin
    delta = np.zeros(2) if target is None else np.asarray(target, dtype=float) - anchor

    if aspect:
        spacing = _fixed_aspect_spacing(hi - lo, delta, n, aspect)
    else:
        spacing = np.array([_aligned_spacing(hi[i] - lo[i], delta[i], n) for i in range(2)])
    h2 = spacing[1]
    extent = (n - 1) * spacing
    center = 0.5 * (lo + hi)
    lower = anchor - np.round((anchor - (center - 0.5 * extent)) / spacing) * spacing
    if min_x2 is not None and lower[1] < min_x2:
        lower[1] += math.ceil((min_x2 - lower[1]) / h2) * h2
    return Window(lower=tuple(lower), upper=tuple(lower + extent))


Connector = Callable[[Sequence[float], Sequence[float]], Trajectory]


def certify_pair(
    field: FinslerField,
    connect: Connector,
    p: Sequence[float],
    q: Sequence[float],
    n: Optional[int] = None,
    stencil: Optional[int] = None,
    aspect: Optional[float] = None,
    reference: Optional[Callable[[np.ndarray, np.ndarray], float]] = None,
    pad: float = 0.2,
    window: Optional[Window] = None,
) -> CertificationReport:
    """Certify the geodesic that ``connect`` builds between p and q.

    Unless a window is given, it is fitted around a first geodesic and
    anchored at p. Both endpoints are then snapped to lattice nodes and the
    geodesic between the nodes is certified; the snapping of the requested
    points is reported.
    """
    if window is None:
        _, xs, _ = connect(p, q).samples()
        min_x2 = None
        floor = field.domain.lower[1]
        if math.isfinite(floor):
            min_x2 = floor + 0.5 * (float(xs[:, 1].min()) - floor)
        window = oracle_window(xs, anchor=p, target=q, n=n, pad=pad, aspect=aspect, min_x2=min_x2)
    oracle = build_grid(field, window, n, stencil)

    _, snap_p = oracle.snap(p)
    _, snap_q = oracle.snap(q)
    node_p, node_q = np.array(snap_p.node), np.array(snap_q.node)
    traj = connect(node_p, node_q)
    ref = reference(node_p, node_q) if reference is not None else None
    report = certify(field, traj, oracle, reference_distance=ref)
    report.snap_p = snap_p
    report.snap_q = snap_q
    return report
