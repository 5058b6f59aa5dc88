import math

import numpy as np
import numpy.testing as npt
import pytest

from app.errors import ConfigError, OutOfDomainError, OutOfWindowError
from app.services.definitions import resolve_field, shifted_hexagon_norm
from app.services.finsler_field import ConstantField, Window
from app.services.geodesic_field import CotangentState, integrate_extended
from app.services.metric_oracle import (
    build_grid,
    certify,
    certify_pair,
    oracle_window,
    shortest_path,
    shortest_path_batch,
    stencil_offsets,
)
from app.services.qh_plane import SQRT3, connect_hexagon, connect_hyperbolic, hyperbolic_distance

SQUARE = Window(lower=(0.0, 0.0), upper=(4.0, 4.0))


@pytest.fixture(scope="module")
def euclidean_grid():
    return build_grid(resolve_field("constant_euclidean"), SQUARE, n=41, stencil=16)


def test_stencil_sizes():
    assert len(stencil_offsets(4)) == 4
    assert len(stencil_offsets(8)) == 8
    assert len(stencil_offsets(16)) == 16
    with pytest.raises(ConfigError):
        stencil_offsets(6)


def test_edge_weights():
    grid = build_grid(resolve_field("constant_euclidean"), Window((0.0, 0.0), (2.0, 2.0)), n=3, stencil=8)
    assert grid.node_count == 9
    assert grid.edge_weight((0, 0), (1, 0)) == pytest.approx(1.0)
    assert grid.edge_weight((0, 0), (1, 1)) == pytest.approx(math.sqrt(2.0))


def test_quasi_hyperbolic_weight_uses_midpoint():
    grid = build_grid(resolve_field("qh_euclidean"), Window((0.0, 1.0), (1.0, 2.0)), n=3, stencil=4)
    # Step of 0.5 from x2 = 1 to 1.5, midpoint 1.25
    assert grid.edge_weight((0, 0), (0, 1)) == pytest.approx(0.4)
    assert grid.edge_weight((0, 0), (1, 0)) == pytest.approx(0.5)


def test_grid_validation(caplog):
    field = resolve_field("qh_euclidean")
    with pytest.raises(ConfigError):
        build_grid(field, Window((0.0, 1.0), (1.0, 2.0)), n=1)
    with pytest.raises(OutOfDomainError):
        build_grid(field, Window((0.0, -1.0), (1.0, 2.0)), n=5)
    with caplog.at_level("WARNING"):
        build_grid(field, Window((0.0, 1.0), (1.0, 2.0)), n=5)
    assert "below" in caplog.text


def test_euclidean_distance_within_quantization(euclidean_grid):
    result = shortest_path(euclidean_grid, (0.0, 0.0), (3.0, 4.0))
    assert result.distance == pytest.approx(5.0, rel=0.03)
    assert result.distance >= 5.0 - 1e-9
    npt.assert_allclose(euclidean_grid.node(result.nodes[0]), (0.0, 0.0))
    npt.assert_allclose(euclidean_grid.node(result.nodes[-1]), (3.0, 4.0), atol=1e-12)


def test_same_node_has_zero_distance(euclidean_grid):
    result = shortest_path(euclidean_grid, (1.0, 1.0), (1.01, 0.99))
    assert result.distance == 0.0
    assert result.snap_q.error == pytest.approx(math.hypot(0.01, 0.01))


def test_snap_outside_window(euclidean_grid):
    with pytest.raises(OutOfWindowError):
        shortest_path(euclidean_grid, (0.0, 0.0), (5.0, 1.0))


def test_distance_decreases_with_stencil():
    field = resolve_field("constant_euclidean")
    distances = [
        shortest_path(build_grid(field, SQUARE, n=21, stencil=s), (0.0, 0.0), (3.0, 4.0)).distance
        for s in (4, 8, 16)
    ]
    assert distances[0] == pytest.approx(7.0)
    assert distances[0] >= distances[1] >= distances[2] >= 5.0


def test_asymmetric_distances():
    norm = shifted_hexagon_norm()
    grid = build_grid(ConstantField(norm, name="shifted"), Window((0.0, 0.0), (1.0, 1.0)), n=11, stencil=8)
    there = shortest_path(grid, (0.0, 0.5), (1.0, 0.5)).distance
    back = shortest_path(grid, (1.0, 0.5), (0.0, 0.5)).distance
    assert there == pytest.approx(norm.eval((1.0, 0.0)))
    assert back == pytest.approx(norm.eval((-1.0, 0.0)))
    assert there > back


def test_batch_matches_single_queries(euclidean_grid):
    pairs = [((0.0, 0.0), (3.0, 4.0)), ((4.0, 4.0), (0.0, 1.0)), ((2.0, 0.0), (2.0, 4.0))]
    batch = shortest_path_batch(euclidean_grid, pairs, max_workers=2)
    for (p, q), result in zip(pairs, batch):
        assert result.distance == pytest.approx(shortest_path(euclidean_grid, p, q).distance)


def test_oracle_window_aligns_endpoints():
    points = np.array([[0.0, 1.0], [0.7, 1.9], [1.3, 1.2]])
    window = oracle_window(points, anchor=(0.0, 1.0), target=(1.3, 1.2), n=51)
    grid = build_grid(resolve_field("qh_euclidean"), window, n=51, stencil=8)
    assert grid.snap((0.0, 1.0))[1].error == pytest.approx(0.0, abs=1e-9)
    assert grid.snap((1.3, 1.2))[1].error == pytest.approx(0.0, abs=1e-9)
    assert window.contains(points[1])


def test_oracle_window_fixed_aspect_keeps_half_plane():
    points = np.array([[-1.0, 0.1], [1.0, 1.0]])
    window = oracle_window(points, anchor=(-1.0, 1.0), target=(1.0, 1.0), n=41, aspect=2.0 / SQRT3, min_x2=0.05)
    h1 = (window.upper[0] - window.lower[0]) / 40
    h2 = (window.upper[1] - window.lower[1]) / 40
    assert h2 / h1 == pytest.approx(2.0 / SQRT3)
    assert window.lower[1] >= 0.05


def test_certify_euclidean_segment(euclidean_grid):
    field = resolve_field("constant_euclidean")
    traj = integrate_extended(field, CotangentState.of((0.0, 0.0), (1.0, 0.0)), (0.0, 3.0))
    report = certify(field, traj, euclidean_grid)
    assert report.passed
    assert report.relative_gap == pytest.approx(0.0, abs=1e-9)
    assert report.resolution == [41, 41]


def test_certify_hexagon_pair():
    report = certify_pair(resolve_field("qh_hexagon"), connect_hexagon, (-1.0, 1.0), (1.0, 1.0),
                          n=121, aspect=2.0 / SQRT3)
    assert report.passed, report.model_dump_json()
    assert report.snap_p.requested == [-1.0, 1.0]


@pytest.mark.slow
@pytest.mark.parametrize("p, q", [((-1.0, 1.0), (1.0, 1.0)), ((0.0, 1.0), (1.0, 2.0))])
def test_certify_hyperbolic_full_resolution(p, q):
    report = certify_pair(resolve_field("riemannian_hyperbolic"), connect_hyperbolic, p, q,
                          aspect=1.0, reference=hyperbolic_distance)
    assert report.passed, report.model_dump_json()
    assert report.resolution == [301, 301]
    assert abs(report.oracle_distance - report.reference_distance) / report.reference_distance <= 0.03


def test_oracle_window_fixed_aspect_covers_vertical_pair():
    points = np.array([[0.0, 1.0], [0.0, 1.5], [0.0, 2.0]])
    window = oracle_window(points, anchor=(0.0, 1.0), target=(0.0, 2.0), n=41, aspect=2.0 / SQRT3)
    assert window.contains((0.0, 1.0))
    assert window.contains((0.0, 2.0))
    h1 = (window.upper[0] - window.lower[0]) / 40
    h2 = (window.upper[1] - window.lower[1]) / 40
    assert h2 / h1 == pytest.approx(2.0 / SQRT3)
    # x2 lattice is aligned with the pair
    assert (1.0 / h2) == pytest.approx(round(1.0 / h2), abs=1e-9)


@pytest.mark.parametrize("name, connect, aspect", [
    ("qh_hexagon", connect_hexagon, 2.0 / SQRT3),
    ("riemannian_hyperbolic", connect_hyperbolic, 1.0),
])
def test_certify_vertical_pair(name, connect, aspect):
    report = certify_pair(resolve_field(name), connect, (0.0, 1.0), (0.0, 2.0), n=41, aspect=aspect)
    assert report.passed, report.model_dump_json()
    assert report.snap_p.error == pytest.approx(0.0, abs=1e-9)
    assert report.snap_q.error == pytest.approx(0.0, abs=1e-9)
    assert abs(report.relative_gap) <= 1e-3
