"""``integrate``: follow the extended geodesic field from one state."""
import logging

from app.commands import add_state_arguments, require
from app.errors import ConfigError, DomainError
from app.models.schemas import RunConfig
from app.services.definitions import DefinitionRegistry
from app.services.export import write_trajectory_csv, write_trajectory_svg
from app.services.geodesic_field import FACE_POLICIES, CotangentState, IntegrationOptions, integrate_extended

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("integrate", help="Integrate the extended geodesic field")
    parser.add_argument("--field", help="Built-in or definitions-file field name")
    add_state_arguments(parser)
    parser.add_argument("--tol", type=float, help="Relative Hamiltonian drift tolerance")
    parser.add_argument("--face-policy", dest="face_policy",
                        help=f"Vertex chosen on a face start: {', '.join(FACE_POLICIES)} or a vertex index")
    parser.add_argument("--allow-face-sliding", dest="allow_face_sliding", action="store_true",
                        help="Keep following an extreme vertex while the covector stays on a face")
    parser.add_argument("--out-csv", dest="out_csv", help="Trajectory CSV path")
    parser.add_argument("--out-svg", dest="out_svg", help="Trajectory SVG path")


def _face_policy(value: str):
    if value in FACE_POLICIES:
        return value
    if value.lstrip("-").isdigit():
        return int(value)
    raise ConfigError(f"--face-policy must be one of {', '.join(FACE_POLICIES)} or a vertex index, got {value!r}")


def run(config: RunConfig, registry: DefinitionRegistry) -> int:
    require(config, "field", "x0", "alpha0")
    field = registry.field(config.field)
    options = IntegrationOptions(
        face_policy=_face_policy(config.face_policy),
        allow_face_sliding=config.allow_face_sliding,
        drift_tol=config.tol,
    )
    trajectory = integrate_extended(
        field, CotangentState.of(config.x0, config.alpha0), (config.t0, config.t1), config.step, options
    )

    if config.out_csv:
        print(f"csv: {write_trajectory_csv(trajectory, config.out_csv)}")
    if config.out_svg:
        print(f"svg: {write_trajectory_svg(trajectory, config.out_svg, title=f'{field.name} from {config.x0}')}")
    print(trajectory.summary().model_dump_json(indent=2))

    exits = [e for e in trajectory.events if e.kind == "domain_exit"]
    if exits:
        raise DomainError(f"Trajectory left the domain of {field.name} at t={exits[0].t:.12g}")
    return 0
