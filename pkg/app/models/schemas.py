"""Pydantic models for definition files, run configuration and reports."""
from typing import Annotated, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field


class ArcDef(BaseModel):
    """One circular arc of an arc-composite unit sphere."""
    center: List[float] = Field(min_length=2, max_length=2)
    radius: float = Field(gt=0)
    start_angle: float
    end_angle: float


class PolyhedralNormDef(BaseModel):
    """Polygonal unit ball, vertices counter-clockwise."""
    kind: Literal["polyhedral"] = "polyhedral"
    vertices: List[List[float]] = Field(min_length=3)


class QuadraticNormDef(BaseModel):
    """F(y) = sqrt(y^T A y)."""
    kind: Literal["quadratic"] = "quadratic"
    matrix: List[List[float]]


class ArcCompositeNormDef(BaseModel):
    """Unit sphere made of circular arcs, counter-clockwise."""
    kind: Literal["arc_composite"] = "arc_composite"
    arcs: List[ArcDef] = Field(min_length=2)


class ScaledNormDef(BaseModel):
    """inner / factor."""
    kind: Literal["scaled"] = "scaled"
    inner: "NormRef"
    factor: float = Field(gt=0)


NormDef = Annotated[
    Union[PolyhedralNormDef, QuadraticNormDef, ArcCompositeNormDef, ScaledNormDef],
    Field(discriminator="kind"),
]
# A norm is either a name (built-in or defined in the same file) or inline
NormRef = Union[str, NormDef]


class QuasiHyperbolicFieldDef(BaseModel):
    kind: Literal["quasi_hyperbolic"] = "quasi_hyperbolic"
    base: NormRef


class ConstantFieldDef(BaseModel):
    kind: Literal["constant"] = "constant"
    norm: NormRef
    lower: Optional[List[float]] = None
    upper: Optional[List[float]] = None


class RiemannianHyperbolicFieldDef(BaseModel):
    kind: Literal["riemannian_hyperbolic"] = "riemannian_hyperbolic"


class RiemannianEuclideanFieldDef(BaseModel):
    kind: Literal["riemannian_euclidean"] = "riemannian_euclidean"
    dimension: int = Field(default=2, ge=1)


FieldDef = Annotated[
    Union[
        QuasiHyperbolicFieldDef,
        ConstantFieldDef,
        RiemannianHyperbolicFieldDef,
        RiemannianEuclideanFieldDef,
    ],
    Field(discriminator="kind"),
]


class DefinitionsFile(BaseModel):
    """Top level of a definitions JSON file."""
    model_config = ConfigDict(extra="forbid")

    norms: Dict[str, NormDef] = Field(default_factory=dict)
    fields: Dict[str, FieldDef] = Field(default_factory=dict)


ScaledNormDef.model_rebuild()
QuasiHyperbolicFieldDef.model_rebuild()
ConstantFieldDef.model_rebuild()
DefinitionsFile.model_rebuild()


class RunConfig(BaseModel):
    """Options of one command run, read from --config and overridden by flags."""
    model_config = ConfigDict(extra="forbid")

    command: Optional[str] = None
    definitions: Optional[str] = None
    norm: Optional[str] = None
    field: Optional[str] = None
    query: Optional[Literal["eval", "dual", "support", "conjugate", "grad", "strong-convexity", "preferred"]] = None
    argument: Optional[List[float]] = None
    x0: Optional[List[float]] = None
    alpha0: Optional[List[float]] = None
    t0: float = 0.0
    t1: float = 1.0
    step: Optional[float] = Field(default=None, gt=0)
    tol: Optional[float] = Field(default=None, gt=0)
    out_csv: Optional[str] = None
    out_svg: Optional[str] = None
    out_dir: Optional[str] = None
    grid_n: Optional[int] = Field(default=None, ge=2)
    stencil: Optional[Literal[4, 8, 16]] = None
    face_policy: str = "clockwise"
    allow_face_sliding: bool = False
    scenario: Optional[str] = None
    p: Optional[List[float]] = None
    q: Optional[List[float]] = None
    window: Optional[List[List[float]]] = None


class WitnessTriple(BaseModel):
    """Sample (y, z, alpha) where the strong-convexity margin was smallest."""
    y: List[float]
    z: List[float]
    alpha: List[float]


class StrongConvexityReport(BaseModel):
    passed: bool
    c: float
    worst_margin: float
    samples: int
    witness: Optional[WitnessTriple] = None


class LipschitzReport(BaseModel):
    max_quotient: float
    samples: int
    bound: Optional[float] = None
    within_bound: Optional[bool] = None


class LipschitzConstantsReport(BaseModel):
    c1: float
    c2: float
    samples: int


class DualGradientLipschitzReport(BaseModel):
    horizontal_quotient: float
    vertical_quotient: float
    samples: int


class SnapInfo(BaseModel):
    """Offset between a requested point and the grid node it snapped to."""
    requested: List[float]
    node: List[float]
    error: float


class CertificationReport(BaseModel):
    field: str
    p: List[float]
    q: List[float]
    geodesic_length: float
    oracle_distance: float
    relative_gap: float
    passed: bool
    resolution: List[int]
    stencil: int
    snap_p: SnapInfo
    snap_q: SnapInfo
    reference_distance: Optional[float] = None


class VerificationCriterion(BaseModel):
    name: str
    measured: float
    threshold: float
    passed: bool
    detail: Optional[str] = None


class VerificationReport(BaseModel):
    scenario: str
    passed: bool
    criteria: List[VerificationCriterion]
    elapsed_seconds: float = 0.0


class HyperbolicCircle(BaseModel):
    center: float
    radius: float
    residual: float


class HexagonTraceGeometry(BaseModel):
    """Regular hexagon centred on the x1-axis whose upper half is a geodesic trace."""
    center: float
    side: float
    vertices: List[List[float]]


class EventRecord(BaseModel):
    t: float
    kind: str
    from_control: Optional[str] = None
    to_control: Optional[str] = None


class TrajectorySummary(BaseModel):
    kind: str
    c0: float
    t_start: float
    t_end: float
    pieces: int
    events: List[EventRecord]
    max_drift: float
    final_x: List[float]
    final_alpha: List[float]
    length: Optional[float] = None
