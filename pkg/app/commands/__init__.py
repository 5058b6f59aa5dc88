"""Subcommands of the finsler-geodesics command line."""
import argparse
import json
from typing import Any, Dict, List, Optional

from pydantic import ValidationError

from app.errors import ConfigError
from app.models.schemas import RunConfig
from app.services.definitions import DefinitionRegistry, load_definitions
from app.utils.paths import resolve_input_path


def parse_vector(text: str) -> List[float]:
    """Parse ``"a,b,..."`` into floats for argparse."""
    try:
        values = [float(part) for part in text.replace(" ", "").split(",") if part]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("expected at least one number")
    return values


def parse_window(text: str) -> List[List[float]]:
    """Parse ``"x1_lo,x2_lo,x1_hi,x2_hi"`` into [[lower], [upper]]."""
    values = parse_vector(text)
    if len(values) != 4:
        raise argparse.ArgumentTypeError(f"window needs four numbers, got {len(values)}")
    return [values[:2], values[2:]]


def add_state_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--x0", type=parse_vector, help="Initial point, e.g. 0,1")
    parser.add_argument("--alpha0", type=parse_vector, help="Initial covector, e.g. 1,1.732")
    parser.add_argument("--t0", type=float, help="Start time (default: 0)")
    parser.add_argument("--t1", type=float, help="End time (default: 1); below t0 integrates backwards")
    parser.add_argument("--step", type=float, help="Fixed integration step (default: settings.step)")


def read_config_file(path: str) -> Dict[str, Any]:
    """Read a JSON run configuration.

    Raises:
        ConfigError: With line and column on syntax errors
    """
    resolved = resolve_input_path(path)
    try:
        payload = json.loads(resolved.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"{resolved}:{e.lineno}:{e.colno}: invalid JSON: {e.msg}")
    if not isinstance(payload, dict):
        raise ConfigError(f"{resolved}: run configuration must be a JSON object")
    return payload


def build_run_config(args: argparse.Namespace, file_values: Optional[Dict[str, Any]] = None) -> RunConfig:
    """Merge config-file values with command-line flags; flags win.

    Raises:
        ConfigError: With the offending field for invalid values
    """
    merged: Dict[str, Any] = dict(file_values or {})
    for key in RunConfig.model_fields:
        value = getattr(args, key, None)
        if value is not None and value is not False:
            merged[key] = value
    try:
        return RunConfig.model_validate(merged)
    except ValidationError as e:
        problems = "; ".join(
            f"{'.'.join(str(part) for part in err['loc']) or '<root>'}: {err['msg']}" for err in e.errors()
        )
        raise ConfigError(f"Invalid run configuration: {problems}")


def build_registry(config: RunConfig) -> DefinitionRegistry:
    definitions = load_definitions(config.definitions) if config.definitions else None
    return DefinitionRegistry(definitions)


def require(config: RunConfig, *names: str) -> None:
    """Raise ConfigError naming every missing required option."""
    missing = [name for name in names if getattr(config, name) is None]
    if missing:
        flags = ", ".join(f"--{name.replace('_', '-')}" for name in missing)
        raise ConfigError(f"Command {config.command!r} needs {flags}")
