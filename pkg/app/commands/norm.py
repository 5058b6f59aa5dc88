"""``norm``: evaluate a single asymmetric norm."""
import argparse
import logging

from app.commands import parse_vector, require
from app.errors import ConfigError
from app.models.schemas import RunConfig
from app.services.asym_norm import SupportFace, as_vector
from app.services.definitions import DefinitionRegistry
from app.services.norm_analysis import strong_convexity_constant

logger = logging.getLogger(__name__)

QUERIES = ("eval", "dual", "support", "conjugate", "grad", "strong-convexity", "preferred")


def register(subparsers) -> None:
    parser = subparsers.add_parser("norm", help="Query a norm: eval, dual, support, conjugate, grad, preferred")
    parser.add_argument("--norm", help="Built-in or definitions-file norm name")
    parser.add_argument("--query", choices=QUERIES, help="What to compute")
    parser.add_argument("--argument", type=parse_vector, help="Vector or covector, e.g. 1,0")


def _format(value: float) -> str:
    return repr(float(value))


def run(config: RunConfig, registry: DefinitionRegistry) -> int:
    require(config, "norm", "query")
    norm = registry.norm(config.norm)

    if config.query == "strong-convexity":
        print(strong_convexity_constant(norm).model_dump_json(indent=2))
        return 0

    if config.query == "preferred":
        # One vertex or corner per line; smooth balls print nothing
        for point in norm.preferred_directions():
            print(",".join(_format(v) for v in point))
        return 0

    require(config, "argument")
    try:
        arg = as_vector(config.argument, norm.dimension)
    except ValueError as e:
        raise ConfigError(f"--argument: {e}")

    if config.query == "eval":
        print(_format(norm.eval(arg)))
    elif config.query == "dual":
        print(_format(norm.dual_eval(arg)))
    elif config.query == "conjugate":
        print(_format(norm.fenchel_conjugate_sq(arg)))
    elif config.query == "grad":
        print(",".join(_format(v) for v in norm.grad_dual_sq(arg)))
    else:
        support = norm.support_set(arg)
        kind = "face" if isinstance(support, SupportFace) else "point"
        print(kind)
        for point in support.members():
            print(",".join(_format(v) for v in point))
    logger.debug(f"norm {config.norm} {config.query} at {arg.tolist()}")
    return 0
