"""Built-in and file-defined norms and fields."""
import json
import logging
import math
from typing import Callable, Dict, List, Optional, Set, Union

import numpy as np
from pydantic import ValidationError

from app.errors import ConfigError
from app.models.schemas import (
    ArcCompositeNormDef,
    ConstantFieldDef,
    DefinitionsFile,
    FieldDef,
    NormDef,
    PolyhedralNormDef,
    QuadraticNormDef,
    QuasiHyperbolicFieldDef,
    RiemannianEuclideanFieldDef,
    RiemannianHyperbolicFieldDef,
    ScaledNormDef,
)
from app.services.asym_norm import (
    Arc,
    ArcComposite,
    AsymNorm,
    Polyhedral,
    Quadratic,
    Scaled,
    euclidean_norm,
    hexagon_norm,
    se_norm,
)
from app.services.finsler_field import (
    ChartDomain,
    ConstantField,
    FinslerField,
    QuasiHyperbolicField,
    euclidean_field,
    hyperbolic_field,
)
from app.utils.paths import resolve_input_path

logger = logging.getLogger(__name__)

# Hexagon whose unit ball is shifted left, so the origin is off-centre
SHIFTED_HEXAGON_OFFSET = (0.3, 0.0)


def shifted_hexagon_norm() -> Polyhedral:
    return Polyhedral(hexagon_norm().vertices - np.array(SHIFTED_HEXAGON_OFFSET))


BUILTIN_NORMS: Dict[str, Callable[[], AsymNorm]] = {
    "euclidean": euclidean_norm,
    "hexagon": hexagon_norm,
    "se": se_norm,
    "diag41": lambda: Quadratic(np.diag([4.0, 1.0])),
    "shifted_hexagon": shifted_hexagon_norm,
}

BUILTIN_FIELDS: Dict[str, Callable[[], FinslerField]] = {
    "qh_hexagon": lambda: QuasiHyperbolicField(hexagon_norm(), name="qh_hexagon"),
    "qh_euclidean": lambda: QuasiHyperbolicField(euclidean_norm(), name="qh_euclidean"),
    "qh_se": lambda: QuasiHyperbolicField(se_norm(), name="qh_se"),
    "constant_euclidean": lambda: ConstantField(euclidean_norm(), name="constant_euclidean"),
    "constant_hexagon": lambda: ConstantField(hexagon_norm(), name="constant_hexagon"),
    "riemannian_hyperbolic": hyperbolic_field,
    "riemannian_euclidean": euclidean_field,
}


def _format_location(loc) -> str:
    return ".".join(str(part) for part in loc) or "<root>"


def parse_definitions(text: str, source: str = "<string>") -> DefinitionsFile:
    """Parse definitions JSON text.

    Raises:
        ConfigError: With line and column for JSON syntax errors, and the
            field location for schema errors
    """
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{source}:{e.lineno}:{e.colno}: invalid JSON: {e.msg}")

    try:
        return DefinitionsFile.model_validate(payload)
    except ValidationError as e:
        problems = "; ".join(f"{_format_location(err['loc'])}: {err['msg']}" for err in e.errors())
        raise ConfigError(f"{source}: invalid definitions: {problems}")


def load_definitions(path: str) -> DefinitionsFile:
    """Read and validate a definitions file.

    Args:
        path: Path to a JSON file with ``norms`` and ``fields`` maps

    Returns:
        The validated definitions

    Raises:
        ConfigError: If the file is missing or malformed
    """
    resolved = resolve_input_path(path)
    definitions = parse_definitions(resolved.read_text(encoding="utf-8"), source=str(resolved))
    logger.info(
        f"Loaded {len(definitions.norms)} norms and {len(definitions.fields)} fields from {resolved}"
    )
    return definitions


class DefinitionRegistry:
    """Resolves norm and field references against built-ins and a definitions file.

    Names in the file shadow built-ins of the same name.
    """

    def __init__(self, definitions: Optional[DefinitionsFile] = None):
        self.definitions = definitions or DefinitionsFile()

    def norm_names(self) -> List[str]:
        return sorted(set(BUILTIN_NORMS) | set(self.definitions.norms))

    def field_names(self) -> List[str]:
        return sorted(set(BUILTIN_FIELDS) | set(self.definitions.fields))

    def norm(self, ref: Union[str, NormDef], _seen: Optional[Set[str]] = None) -> AsymNorm:
        """Build the norm named or described by ``ref``.

        Raises:
            ConfigError: On unknown or cyclic names and on geometrically invalid definitions
        """
        seen = _seen or set()
        if isinstance(ref, str):
            if ref in seen:
                raise ConfigError(f"Norm {ref!r} refers to itself")
            if ref in self.definitions.norms:
                return self.norm(self.definitions.norms[ref], seen | {ref})
            if ref in BUILTIN_NORMS:
                return BUILTIN_NORMS[ref]()
            raise ConfigError(f"Unknown norm {ref!r}; available: {', '.join(self.norm_names())}")

        try:
            if isinstance(ref, PolyhedralNormDef):
                return Polyhedral(ref.vertices)
            if isinstance(ref, QuadraticNormDef):
                return Quadratic(ref.matrix)
            if isinstance(ref, ArcCompositeNormDef):
                return ArcComposite([Arc(tuple(a.center), a.radius, a.start_angle, a.end_angle) for a in ref.arcs])
            if isinstance(ref, ScaledNormDef):
                return Scaled(self.norm(ref.inner, seen), ref.factor)
        except ValueError as e:
            raise ConfigError(f"Invalid {ref.kind} norm: {e}")
        raise ConfigError(f"Unsupported norm definition {type(ref).__name__}")

    def field(self, ref: Union[str, FieldDef], name: Optional[str] = None) -> FinslerField:
        """Build the field named or described by ``ref``.

        Raises:
            ConfigError: On unknown names and invalid definitions
        """
        if isinstance(ref, str):
            if ref in self.definitions.fields:
                return self.field(self.definitions.fields[ref], name=ref)
            if ref in BUILTIN_FIELDS:
                return BUILTIN_FIELDS[ref]()
            raise ConfigError(f"Unknown field {ref!r}; available: {', '.join(self.field_names())}")

        label = name or ref.kind
        try:
            if isinstance(ref, QuasiHyperbolicFieldDef):
                return QuasiHyperbolicField(self.norm(ref.base), name=label)
            if isinstance(ref, ConstantFieldDef):
                norm = self.norm(ref.norm)
                domain = None
                if ref.lower is not None or ref.upper is not None:
                    dim = norm.dimension
                    domain = ChartDomain(
                        lower=tuple(ref.lower or [-math.inf] * dim),
                        upper=tuple(ref.upper or [math.inf] * dim),
                    )
                    if domain.dimension != dim or len(domain.upper) != dim:
                        raise ConfigError(f"Domain bounds of {label!r} must have {dim} entries")
                return ConstantField(norm, domain=domain, name=label)
            if isinstance(ref, RiemannianHyperbolicFieldDef):
                field = hyperbolic_field()
                field.name = label
                return field
            if isinstance(ref, RiemannianEuclideanFieldDef):
                field = euclidean_field(ref.dimension)
                field.name = label
                return field
        except ValueError as e:
            raise ConfigError(f"Invalid field {label!r}: {e}")
        raise ConfigError(f"Unsupported field definition {type(ref).__name__}")


def resolve_norm(ref: Union[str, NormDef], definitions: Optional[DefinitionsFile] = None) -> AsymNorm:
    """Build a norm from a name or inline definition."""
    return DefinitionRegistry(definitions).norm(ref)


def resolve_field(ref: Union[str, FieldDef], definitions: Optional[DefinitionsFile] = None) -> FinslerField:
    """Build a field from a name or inline definition."""
    return DefinitionRegistry(definitions).field(ref)
