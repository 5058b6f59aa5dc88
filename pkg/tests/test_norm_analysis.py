import numpy as np
import pytest

from app.config import settings
from app.errors import NotStrictlyConvexError
from app.services.asym_norm import Quadratic, euclidean_norm, hexagon_norm, se_norm
from app.services.norm_analysis import (
    boundary_with_normals,
    check_strong_convexity,
    lipschitz_report_grad_dual,
    strong_convexity_constant,
)


def test_euclidean_is_strongly_convex_with_unit_constant(rng):
    report = check_strong_convexity(euclidean_norm(), 1.0, triples=2000, rng=rng)
    assert report.passed
    assert report.witness is None
    assert report.worst_margin == pytest.approx(0.0, abs=1e-9)


def test_euclidean_fails_above_unit_constant(rng):
    report = check_strong_convexity(euclidean_norm(), 1.1, triples=2000, rng=rng)
    assert not report.passed
    assert report.witness is not None


def test_hexagon_fails_with_witness(rng):
    report = check_strong_convexity(hexagon_norm(), 0.1, triples=2000, rng=rng)
    assert not report.passed
    assert report.worst_margin < 0
    y, z = np.array(report.witness.y), np.array(report.witness.z)
    assert hexagon_norm().eval(y) == pytest.approx(1.0)
    assert np.linalg.norm(z - y) > 0


def test_strong_convexity_rejects_non_positive_constant():
    with pytest.raises(ValueError):
        check_strong_convexity(euclidean_norm(), 0.0)


def test_se_constant_is_bisected(rng):
    report = strong_convexity_constant(se_norm(), triples=4000, rng=rng)
    assert report.passed
    assert settings.strong_convexity_c_min < report.c < settings.strong_convexity_c_max


def test_hexagon_constant_bottoms_out(rng):
    report = strong_convexity_constant(hexagon_norm(), triples=1000, rng=rng)
    assert report.c == settings.strong_convexity_c_min
    assert not report.passed


def test_boundary_samples_lie_on_unit_sphere(rng):
    for norm in (hexagon_norm(), se_norm(), Quadratic(np.diag([4.0, 1.0]))):
        points, normals = boundary_with_normals(norm, 200, rng)
        assert points.shape == normals.shape
        np.testing.assert_allclose(norm.eval_many(points), 1.0, rtol=1e-9)
        # Every normal supports the unit ball at its point
        values = np.einsum("ij,ij->i", normals, points)
        duals = np.array([norm.dual_eval(n) for n in normals])
        np.testing.assert_allclose(values, duals, rtol=1e-9)


def test_lipschitz_of_euclidean_dual_gradient(rng):
    report = lipschitz_report_grad_dual(euclidean_norm(), samples=200, c=1.0, rng=rng)
    assert report.max_quotient == pytest.approx(2.0)
    assert report.bound == pytest.approx(2.0)
    assert report.within_bound


def test_lipschitz_needs_strict_convexity():
    with pytest.raises(NotStrictlyConvexError):
        lipschitz_report_grad_dual(hexagon_norm(), samples=10)
