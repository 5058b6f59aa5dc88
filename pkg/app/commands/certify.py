"""``certify``: compare a two-point geodesic with the grid oracle."""
import logging

import numpy as np

from app.commands import parse_vector, parse_window, require
from app.errors import ConfigError, VerificationFailure
from app.models.schemas import RunConfig
from app.services.asym_norm import Polyhedral, Quadratic, hexagon_norm
from app.services.definitions import DefinitionRegistry
from app.services.finsler_field import QuasiHyperbolicField, RiemannianField, Window
from app.services.metric_oracle import STENCILS, certify_pair
from app.services.qh_plane import SQRT3, connect_hexagon, connect_hyperbolic, hyperbolic_distance

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("certify", help="Certify a two-point geodesic with the grid oracle")
    parser.add_argument("--field", help="qh_hexagon, qh_euclidean or riemannian_hyperbolic")
    parser.add_argument("--p", type=parse_vector, help="Start point")
    parser.add_argument("--q", type=parse_vector, help="End point")
    parser.add_argument("--grid-n", dest="grid_n", type=int, help="Nodes per axis (default: settings.oracle_resolution)")
    parser.add_argument("--stencil", type=int, choices=sorted(STENCILS), help="Neighbourhood size")
    parser.add_argument("--window", type=parse_window,
                        help="Oracle window x1_lo,x2_lo,x1_hi,x2_hi (default: fitted around the geodesic)")


def _connector(field):
    """Two-point solver, cell aspect and closed-form reference for the field."""
    if isinstance(field, QuasiHyperbolicField):
        base = field.base
        if isinstance(base, Quadratic) and np.allclose(base.matrix, np.eye(2)):
            return connect_hyperbolic, 1.0, hyperbolic_distance
        if isinstance(base, Polyhedral) and base.size == 6 and np.allclose(base.vertices, hexagon_norm().vertices):
            return connect_hexagon, 2.0 / SQRT3, None
    if isinstance(field, RiemannianField) and field.name.endswith("hyperbolic"):
        return connect_hyperbolic, 1.0, hyperbolic_distance
    raise ConfigError(f"No two-point geodesic solver for field {field.name!r}")


def run(config: RunConfig, registry: DefinitionRegistry) -> int:
    require(config, "field", "p", "q")
    field = registry.field(config.field)
    connect, aspect, reference = _connector(field)
    window = None
    if config.window is not None:
        try:
            window = Window(lower=tuple(config.window[0]), upper=tuple(config.window[1]))
        except ValueError as e:
            raise ConfigError(f"--window: {e}")
    report = certify_pair(
        field, connect, config.p, config.q, n=config.grid_n, stencil=config.stencil,
        aspect=aspect, reference=reference, window=window,
    )
    print(report.model_dump_json(indent=2))
    if not report.passed:
        raise VerificationFailure(f"Oracle gap {report.relative_gap:+.3e} outside the accepted range")
    return 0
