import math
import warnings

import numpy as np
import numpy.testing as npt
import pytest
from scipy.integrate import solve_ivp

from app.errors import (
    InvalidGroupElementError,
    NotStrictlyConvexError,
    OutOfDomainError,
    ZeroControlError,
)
from app.services.asym_norm import SupportFace, hexagon_norm
from app.services.definitions import resolve_field
from app.services.finsler_field import (
    ChartDomain,
    ConstantField,
    Window,
    dual_gradient_lipschitz_report,
    euclidean_field,
    fundamental_tensor,
    group_action,
    hyperbolic_field,
    invariance_check,
    lipschitz_constants_report,
    spray_cotangent,
)


def test_quasi_hyperbolic_eval_divides_by_height():
    field = resolve_field("qh_hexagon")
    # F_hex(1, 0) = 2 / sqrt(3)
    assert field.field_eval((0.0, 2.0), (1.0, 0.0)) == pytest.approx(1.0 / math.sqrt(3.0))
    assert field.dual_eval((0.0, 2.0), (1.0, 0.0)) == pytest.approx(math.sqrt(3.0))


def test_quasi_hyperbolic_domain():
    field = resolve_field("qh_euclidean")
    with pytest.raises(OutOfDomainError):
        field.field_eval((0.0, 0.0), (1.0, 0.0))
    with pytest.raises(OutOfDomainError):
        field.dual_eval((0.0, -1.0), (1.0, 0.0))


def test_unit_vector():
    field = resolve_field("qh_hexagon")
    u = field.unit_vector((1.0, 3.0), (2.0, 1.0))
    assert field.field_eval((1.0, 3.0), u) == pytest.approx(1.0)
    with pytest.raises(ZeroControlError):
        field.unit_vector((1.0, 3.0), (0.0, 0.0))


def test_support_set_scales_with_height():
    support = resolve_field("qh_hexagon").support_set((0.0, 2.0), (1.0, 0.0))
    assert isinstance(support, SupportFace)
    npt.assert_allclose(support.endpoints[1], 2.0 * hexagon_norm().vertices[1])


def test_horizontal_derivative_of_quasi_hyperbolic_plane():
    field = resolve_field("qh_euclidean")
    npt.assert_allclose(field.horizontal_derivative((0.0, 2.0), (3.0, 4.0)), (0.0, -5.0 / 4.0))


def test_riemannian_hyperbolic_matches_quasi_hyperbolic_euclidean(rng):
    riemannian = hyperbolic_field()
    qh = resolve_field("qh_euclidean")
    for _ in range(20):
        x = np.array([rng.uniform(-2.0, 2.0), rng.uniform(0.2, 3.0)])
        y = rng.normal(size=2)
        assert riemannian.field_eval(x, y) == pytest.approx(qh.field_eval(x, y))
        npt.assert_allclose(riemannian.horizontal_derivative(x, y), qh.horizontal_derivative(x, y), atol=1e-12)


def test_fundamental_tensor_of_hyperbolic_plane():
    g, g_inv = fundamental_tensor(hyperbolic_field(), (0.0, 2.0))
    npt.assert_allclose(g, np.eye(2) / 4.0)
    npt.assert_allclose(g_inv, 4.0 * np.eye(2))


def test_spray_on_euclidean_plane_is_straight():
    dx, dalpha = spray_cotangent(euclidean_field(), (1.0, 2.0), (3.0, -1.0))
    npt.assert_allclose(dx, (3.0, -1.0))
    npt.assert_allclose(dalpha, (0.0, 0.0))


def test_lipschitz_constants_of_hyperbolic_plane():
    window = Window(lower=(-1.0, 0.5), upper=(1.0, 2.0))
    report = lipschitz_constants_report(resolve_field("qh_euclidean"), window, per_axis=5, directions=36)
    assert report.c1 == pytest.approx(1.0)
    assert report.c2 == pytest.approx(2.0)
    assert report.samples == 25 * 36


def test_lipschitz_window_must_fit_domain():
    window = Window(lower=(-1.0, -0.5), upper=(1.0, 2.0))
    with pytest.raises(OutOfDomainError):
        lipschitz_constants_report(resolve_field("qh_euclidean"), window)


def test_dual_gradient_quotients(rng):
    window = Window(lower=(-1.0, -1.0), upper=(1.0, 1.0))
    report = dual_gradient_lipschitz_report(euclidean_field(), window, samples=50, rng=rng)
    assert report.horizontal_quotient == pytest.approx(0.0, abs=1e-12)
    assert report.vertical_quotient == pytest.approx(2.0)
    with pytest.raises(NotStrictlyConvexError):
        dual_gradient_lipschitz_report(resolve_field("qh_hexagon"), Window((-1.0, 1.0), (1.0, 2.0)))


def test_group_action_and_invariance(rng):
    x, y = group_action((1.0, 2.0), np.array([0.5, 1.0]), np.array([1.0, -1.0]))
    npt.assert_allclose(x, (2.0, 2.0))
    npt.assert_allclose(y, (2.0, -2.0))
    xs, ys = group_action((1.0, 2.0), np.array([[0.5, 1.0], [0.0, 3.0]]), np.array([[1.0, -1.0], [0.0, 1.0]]))
    npt.assert_allclose(xs, [(2.0, 2.0), (1.0, 6.0)])
    npt.assert_allclose(ys, [(2.0, -2.0), (0.0, 2.0)])
    with pytest.raises(InvalidGroupElementError):
        group_action((0.0, -1.0), np.array([0.0, 1.0]), np.array([1.0, 0.0]))
    for name in ("qh_hexagon", "qh_se", "qh_euclidean"):
        assert invariance_check(resolve_field(name), (0.7, 3.5), rng=rng)
    with pytest.raises(InvalidGroupElementError):
        invariance_check(resolve_field("qh_hexagon"), (0.0, 0.0))


def test_bounded_domain():
    domain = ChartDomain(lower=(-1.0, -1.0), upper=(1.0, 1.0))
    field = ConstantField(hexagon_norm(), domain=domain)
    assert domain.contains((0.0, 0.0))
    assert not domain.contains((1.0, 0.0))
    assert domain.contains_window(Window((-0.5, -0.5), (0.5, 0.5)))
    assert not domain.contains_window(Window((-0.5, -0.5), (1.5, 0.5)))
    with pytest.raises(OutOfDomainError):
        field.field_eval((2.0, 0.0), (1.0, 0.0))


def test_window_rejects_empty_box():
    with pytest.raises(ValueError):
        Window(lower=(0.0, 1.0), upper=(1.0, 1.0))


@pytest.mark.parametrize("name", ["qh_hexagon", "qh_se", "qh_euclidean", "riemannian_hyperbolic"])
def test_horizontal_derivative_matches_finite_differences(name, rng):
    field = resolve_field(name)
    h = 1e-6
    for _ in range(10):
        x = np.array([rng.uniform(-2.0, 2.0), rng.uniform(0.5, 3.0)])
        y = rng.normal(size=2)
        numeric = [
            (field.field_eval(x + h * e, y) - field.field_eval(x - h * e, y)) / (2.0 * h)
            for e in np.eye(2)
        ]
        npt.assert_allclose(field.horizontal_derivative(x, y), numeric, rtol=1e-6, atol=1e-8)


def test_spray_conserves_quadratic_hamiltonian():
    field = hyperbolic_field()

    def energy(x, alpha):
        _, g_inv = fundamental_tensor(field, x)
        return 0.5 * alpha @ g_inv @ alpha

    def rhs(t, z):
        dx, dalpha = spray_cotangent(field, z[:2], z[2:])
        return np.concatenate([dx, dalpha])

    solution = solve_ivp(rhs, (0.0, 2.0), [0.0, 1.0, 1.0, 0.5], rtol=1e-11, atol=1e-12, dense_output=True)
    assert solution.success
    start = energy(solution.y[:2, 0], solution.y[2:, 0])
    drift = max(abs(energy(z[:2], z[2:]) - start) for z in solution.sol(np.linspace(0.0, 2.0, 41)).T)
    assert drift <= 1e-6 * start


def test_sample_point_on_unbounded_domains():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        upper_half = ChartDomain(lower=(-math.inf, 0.0), upper=(math.inf, math.inf))
        half_plane = ConstantField(hexagon_norm(), domain=upper_half)
        npt.assert_allclose(half_plane.sample_point(), (0.0, 1.0))
        assert not half_plane.is_strictly_convex
        left = ConstantField(hexagon_norm(), domain=ChartDomain(lower=(-math.inf, -1.0), upper=(2.0, 1.0)))
        npt.assert_allclose(left.sample_point(), (1.0, 0.0))
        npt.assert_allclose(euclidean_field().sample_point(), (0.0, 0.0))
