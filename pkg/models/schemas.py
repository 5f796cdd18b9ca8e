from pydantic import (
    BaseModel,
    BeforeValidator,
    ConfigDict,
    Field,
    PlainSerializer,
    field_validator,
    model_validator,
)
from typing import Annotated, Any, Dict, List, Literal, Optional, Union
from enum import Enum

import numpy as np

from models.errors import ConfigError, InvalidIndex, InvalidT, UnsupportedTerm
from settings import settings


def _as_vector(value: Any) -> np.ndarray:
    arr = np.array(value, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"expected a 1-d vector, got shape {arr.shape}")
    return arr


def _as_array(value: Any) -> np.ndarray:
    return np.array(value, dtype=float)


# numpy fields used by the in-memory models (never part of the JSON report contract)
Vector = Annotated[np.ndarray, BeforeValidator(_as_vector), PlainSerializer(lambda a: a.tolist(), return_type=list)]
Array = Annotated[np.ndarray, BeforeValidator(_as_array), PlainSerializer(lambda a: a.tolist(), return_type=list)]


# Enums
class PotentialKind(str, Enum):
    CURVED_HIGGS = "CurvedHiggs"
    CURVED_ANISOTROPIC = "CurvedAnisotropic"
    CURVED_NONLINEAR = "CurvedNonlinear"
    CURVED_KEPLER = "CurvedKepler"
    CURVED_STARK = "CurvedStark"
    CURVED_COS = "CurvedCos"
    CURVED_KEPLER_DEFORMED = "CurvedKeplerDeformed"
    FLAT_OSCILLATOR = "FlatOscillator"
    FLAT_ANISOTROPIC = "FlatAnisotropic"
    FLAT_QUARTIC = "FlatQuartic"
    FLAT_KEPLER = "FlatKepler"
    FLAT_LINEAR = "FlatLinear"
    FLAT_COS = "FlatCos"
    MONOPOLE_CENTRIFUGAL = "MonopoleCentrifugal"


CURVED_KINDS = {
    PotentialKind.CURVED_HIGGS,
    PotentialKind.CURVED_ANISOTROPIC,
    PotentialKind.CURVED_NONLINEAR,
    PotentialKind.CURVED_KEPLER,
    PotentialKind.CURVED_STARK,
    PotentialKind.CURVED_COS,
    PotentialKind.CURVED_KEPLER_DEFORMED,
    PotentialKind.MONOPOLE_CENTRIFUGAL,
}

FLAT_KINDS = {
    PotentialKind.FLAT_OSCILLATOR,
    PotentialKind.FLAT_ANISOTROPIC,
    PotentialKind.FLAT_QUARTIC,
    PotentialKind.FLAT_KEPLER,
    PotentialKind.FLAT_LINEAR,
    PotentialKind.FLAT_COS,
    PotentialKind.MONOPOLE_CENTRIFUGAL,
}

# Terms that need an explicit involution matrix
T_KINDS = {PotentialKind.CURVED_ANISOTROPIC, PotentialKind.CURVED_NONLINEAR}

# Flat terms split the coordinates into two blocks of size p
BLOCK_KINDS = {PotentialKind.FLAT_ANISOTROPIC, PotentialKind.FLAT_QUARTIC}


class GeneratorKind(str, Enum):
    J_ALPHA = "Jalpha"
    L_ALPHABETA = "Lalphabeta"
    HIGGS_TENSOR = "HiggsTensor"
    ANISOTROPIC_INVARIANT = "AnisotropicInvariant"
    NONLINEAR_INVARIANT = "NonlinearInvariant"
    RUNGE_LENZ = "RungeLenz"
    KEPLER_DEFORMED_INVARIANT = "KeplerDeformedInvariant"
    FLAT_RUNGE_LENZ = "FlatRungeLenz"
    FLAT_ANISOTROPIC_INVARIANT = "FlatAnisotropicInvariant"
    FLAT_PARABOLIC_INVARIANT = "FlatParabolicInvariant"
    FLAT_ANGULAR_MOMENTUM = "FlatAngularMomentum"
    ENERGY = "Energy"


FLAT_GENERATORS = {
    GeneratorKind.FLAT_RUNGE_LENZ,
    GeneratorKind.FLAT_ANISOTROPIC_INVARIANT,
    GeneratorKind.FLAT_PARABOLIC_INVARIANT,
    GeneratorKind.FLAT_ANGULAR_MOMENTUM,
}

# Generators whose correction terms carry printed coefficients that may be refitted
FITTABLE_GENERATORS = {
    GeneratorKind.NONLINEAR_INVARIANT,
    GeneratorKind.KEPLER_DEFORMED_INVARIANT,
    GeneratorKind.FLAT_PARABOLIC_INVARIANT,
}


class ReductionKind(str, Enum):
    LEVI_CIVITA = "LeviCivita"
    KS = "KS"


class CommandName(str, Enum):
    SIMULATE = "simulate"
    DRIFT = "drift"
    REDUCE = "reduce"
    GRADCHECK = "gradcheck"
    CLOSURE = "closure"


class Verdict(str, Enum):
    PASS = "pass"
    FAIL = "fail"
    EXPECTED_FAIL = "expected-fail"
    UNEXPECTED_PASS = "unexpected-pass"
    FLAGGED = "flagged"


# Geometry schemas
class SpaceSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    epsilon: Literal[1, -1] = 1
    d: int = Field(3, ge=2)
    r0: float = Field(1.0, gt=0)
    ctol: float = Field(default_factory=lambda: settings.constraint_tol, gt=0)

    @property
    def eta(self) -> np.ndarray:
        """Diagonal of the ambient metric, spatial entries first"""
        return np.append(np.ones(self.d), float(self.epsilon))


class AmbientPoint(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    x: Vector
    x0: float

    @property
    def X(self) -> np.ndarray:
        return np.append(self.x, self.x0)


class PhasePoint(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    q: AmbientPoint
    p: Vector
    p0: float

    @property
    def X(self) -> np.ndarray:
        return self.q.X

    @property
    def P(self) -> np.ndarray:
        return np.append(self.p, self.p0)

    @classmethod
    def from_arrays(cls, X: np.ndarray, P: np.ndarray) -> "PhasePoint":
        return cls(q=AmbientPoint(x=X[:-1], x0=float(X[-1])), p=P[:-1], p0=float(P[-1]))


# Potential schemas
class TMatrix(BaseModel):
    model_config = ConfigDict(frozen=True)

    t: List[List[float]]
    # Skips the involution check; only negative-control experiments set this
    allow_invalid: bool = False

    @model_validator(mode="after")
    def _check_involution(self) -> "TMatrix":
        m = self.matrix
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise InvalidT(f"T must be square, got shape {m.shape}")
        if self.allow_invalid:
            return self
        if np.max(np.abs(m - m.T)) > 1e-12:
            raise InvalidT("T is not eta-symmetric: T^t != T on the spatial block")
        eye = np.eye(m.shape[0])
        if np.max(np.abs(m @ m - eye)) > 1e-10:
            raise InvalidT("T is not an involution (T^2 = Id fails)")
        if np.max(np.abs(m - eye)) <= 1e-10:
            raise InvalidT("T is the identity; an involution T != Id is required")
        return self

    @property
    def matrix(self) -> np.ndarray:
        return np.array(self.t, dtype=float)

    @property
    def dim(self) -> int:
        return len(self.t)

    @classmethod
    def diag(cls, entries: List[float], allow_invalid: bool = False) -> "TMatrix":
        return cls(t=np.diag(np.asarray(entries, dtype=float)).tolist(), allow_invalid=allow_invalid)


class Couplings(BaseModel):
    model_config = ConfigDict(frozen=True)

    omega2: float = Field(0.0, ge=0)
    dOmega2: float = 0.0
    eps_el: float = 0.0
    gamma: float = 0.0
    s: float = 0.0


class PotentialTerm(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: PotentialKind
    couplings: Couplings = Couplings()
    t: Optional[TMatrix] = None
    axis: Optional[int] = None  # defaults to the last spatial index

    @model_validator(mode="after")
    def _requires_t(self) -> "PotentialTerm":
        if self.kind in T_KINDS and self.t is None:
            raise ConfigError(f"{self.kind.value} needs an anisotropy matrix t")
        return self

    def axis_index(self, d: int) -> int:
        axis = d - 1 if self.axis is None else self.axis
        if not 0 <= axis < d:
            raise InvalidIndex(f"axis {axis} outside 0..{d - 1} for {self.kind.value}")
        return axis


class SystemSpec(BaseModel):
    """A sum of potential terms on one space: a curved surface (space set) or flat R^dim"""

    model_config = ConfigDict(frozen=True)

    space: Optional[SpaceSpec] = None
    dim: Optional[int] = Field(None, ge=1)
    terms: List[PotentialTerm] = []

    @model_validator(mode="after")
    def _check_consistency(self) -> "SystemSpec":
        if (self.space is None) == (self.dim is None):
            raise ConfigError("a system needs exactly one of space (curved) or dim (flat)")
        allowed = FLAT_KINDS if self.is_flat else CURVED_KINDS
        d = self.dimension
        for term in self.terms:
            if term.kind not in allowed:
                where = "flat" if self.is_flat else "curved"
                raise UnsupportedTerm(f"{term.kind.value} is not a {where} potential term")
            if term.t is not None and term.t.dim != d:
                raise ConfigError(f"{term.kind.value}: t is {term.t.dim}x{term.t.dim}, space dimension is {d}")
            if term.kind in BLOCK_KINDS and d % 2:
                raise ConfigError(f"{term.kind.value} needs an even dimension 2p, got {d}")
            if term.kind == PotentialKind.MONOPOLE_CENTRIFUGAL and d != 3:
                raise ConfigError("MonopoleCentrifugal is defined in dimension 3")
            if term.kind == PotentialKind.CURVED_KEPLER_DEFORMED and d != 3:
                raise ConfigError("CurvedKeplerDeformed is defined in dimension 3")
            term.axis_index(d)
        if self.is_flat and self.charge != 0.0 and d != 3:
            raise ConfigError("a monopole charge needs dimension 3")
        return self

    @property
    def is_flat(self) -> bool:
        return self.space is None

    @property
    def dimension(self) -> int:
        return self.dim if self.is_flat else self.space.d

    @property
    def charge(self) -> float:
        """Monopole charge s carried by the system (first nonzero s among its terms)"""
        for term in self.terms:
            if term.couplings.s != 0.0:
                return term.couplings.s
        return 0.0


# Dynamics schemas
class IntegratorConfig(BaseModel):
    dt: float = Field(1e-3, gt=0)
    n_steps: int = Field(1000, ge=0)
    newton_tol: float = Field(1e-12, gt=0)
    newton_max_iter: int = Field(50, gt=0)
    record_every: int = Field(1, ge=1)


class Trajectory(BaseModel):
    """Recorded samples stacked row-wise; curved rows hold ambient (X, P), flat rows hold (x, p)"""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    flat: bool = False
    space: Optional[SpaceSpec] = None
    times: Array
    X: Array
    P: Array
    energy: Array
    surface_res: Array
    tangency_res: Array

    def __len__(self) -> int:
        return len(self.times)

    def phase_point(self, i: int) -> PhasePoint:
        if self.flat:
            raise ConfigError("flat trajectories have no ambient phase points")
        return PhasePoint.from_arrays(self.X[i], self.P[i])


# Invariant schemas
class GeneratorSpec(BaseModel):
    kind: GeneratorKind
    indices: List[int] = []  # 0-based: (alpha,) or (alpha, beta)
    couplings: Optional[Couplings] = None  # None: taken from the system under test
    t: Optional[TMatrix] = None
    axis: Optional[int] = None
    # Correction-term coefficients; None selects the printed ones
    coefficients: Optional[List[float]] = None
    label: Optional[str] = None

    @field_validator("indices")
    @classmethod
    def _non_negative(cls, v: List[int]) -> List[int]:
        if any(i < 0 for i in v):
            raise InvalidIndex(f"generator indices must be >= 0, got {v}")
        return v

    @property
    def name(self) -> str:
        if self.label:
            return self.label
        suffix = "".join(str(i + 1) for i in self.indices)
        if self.axis is not None and not self.indices:
            suffix = str(self.axis + 1)
        return f"{self.kind.value}{suffix}"


class CoefficientFit(BaseModel):
    basis: List[str]
    printed: List[float]
    fitted: List[Optional[float]]
    printed_max_rel: float
    fitted_max_rel: float
    flagged: bool = True


class DriftReport(BaseModel):
    generator: GeneratorSpec
    name: str
    initial: float
    max_abs: float = Field(ge=0)
    max_rel: float = Field(ge=0)
    floor: float
    fit: Optional[CoefficientFit] = None


# Reduction schemas
class ReductionSpec(BaseModel):
    kind: ReductionKind = ReductionKind.KS
    energy: Optional[float] = None  # None: measured from the oscillator initial data
    s: float = 0.0
    conformal_factor: float = Field(4.0, gt=0)
    fiber_tol: float = Field(1e-10, gt=0)

    @model_validator(mode="after")
    def _lc_is_monopole_free(self) -> "ReductionSpec":
        if self.kind == ReductionKind.LEVI_CIVITA and self.s != 0.0:
            raise ConfigError("Levi-Civita reduction has no fiber: s must be 0")
        return self

    @property
    def oscillator_dim(self) -> int:
        return 4 if self.kind == ReductionKind.KS else 2

    @property
    def kepler_dim(self) -> int:
        return 3 if self.kind == ReductionKind.KS else 2


class KeplerImage(BaseModel):
    """Kepler-side system obtained by dividing (H_osc - E) by the conformal factor"""

    terms: List[PotentialTerm]
    gamma_eff: float
    kepler_energy: float
    charge: float = 0.0
    conformal_factor: float
    cos_coefficient: Optional[float] = None
    cos_printed_ratio: Optional[float] = None
    linear_coefficient: Optional[float] = None
    axis: int

    def system(self, dim: int) -> SystemSpec:
        return SystemSpec(dim=dim, terms=self.terms)


class MappedTrajectory(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    fictitious_time: Array
    kepler_time: Array
    x: Array
    p: Array
    radius_residual: Array
    fiber_momentum: Array
    kepler_energy: Array
    image: KeplerImage

    def __len__(self) -> int:
        return len(self.fictitious_time)


# Experiment schemas
class InitialCondition(BaseModel):
    x: Optional[List[float]] = None
    p: Optional[List[float]] = None
    seed: Optional[int] = None
    momentum_scale: float = Field(0.5, gt=0)
    # Chart cap: positions drawn with |x| <= cap * R0 (curved) or cap (flat)
    cap: float = Field(0.5, gt=0)

    @model_validator(mode="after")
    def _explicit_or_seeded(self) -> "InitialCondition":
        if (self.x is None) != (self.p is None):
            raise ConfigError("initial data needs both x and p, or neither")
        return self


class OutputSpec(BaseModel):
    dir: Optional[str] = None
    formats: List[Literal["csv", "json"]] = ["csv", "json"]


class Bounds(BaseModel):
    drift: float = Field(1e-6, gt=0)
    energy: float = Field(1e-6, gt=0)
    residual: float = Field(1e-10, gt=0)
    expected_fail_min: float = Field(1e-3, gt=0)
    gradient: float = Field(1e-6, gt=0)
    closure_distance: float = Field(1e-4, gt=0)


class ClosureSpec(BaseModel):
    t_min: float = Field(0.5, ge=0)
    threshold: float = Field(1e-4, gt=0)
    p_scale: Optional[float] = None


class GradcheckSpec(BaseModel):
    n_points: int = Field(100, ge=1)
    kinds: Optional[List[PotentialKind]] = None  # None: every term of the system, or every kind


class ExperimentConfig(BaseModel):
    space: Union[SpaceSpec, str]
    system: List[PotentialTerm] = []
    initial: InitialCondition = InitialCondition()
    integrator: IntegratorConfig = IntegratorConfig()
    generators: List[GeneratorSpec] = []
    reduction: Optional[ReductionSpec] = None
    output: OutputSpec = OutputSpec()
    bounds: Bounds = Bounds()
    expect_fail: bool = False
    closure: ClosureSpec = ClosureSpec()
    gradcheck: GradcheckSpec = GradcheckSpec()
    seed: int = 0

    @field_validator("space")
    @classmethod
    def _parse_flat(cls, v: Union[SpaceSpec, str]) -> Union[SpaceSpec, str]:
        if isinstance(v, str):
            parts = v.split()
            if len(parts) != 2 or parts[0] != "flat" or not parts[1].isdigit():
                raise ConfigError(f"space must be a SpaceSpec object or 'flat <d>', got {v!r}")
        return v

    @model_validator(mode="after")
    def _check_dimensions(self) -> "ExperimentConfig":
        system = self.system_spec()
        d = system.dimension
        if self.initial.x is not None and (len(self.initial.x) != d or len(self.initial.p) != d):
            raise ConfigError(f"initial x and p must have {d} components")
        for g in self.generators:
            if any(i >= d for i in g.indices):
                raise InvalidIndex(f"{g.name}: index outside 0..{d - 1}")
            if g.t is not None and g.t.dim != d:
                raise ConfigError(f"{g.name}: t is {g.t.dim}x{g.t.dim}, space dimension is {d}")
            if (g.kind in FLAT_GENERATORS) != system.is_flat and g.kind != GeneratorKind.ENERGY:
                raise ConfigError(f"{g.name} does not apply to a {'flat' if system.is_flat else 'curved'} system")
        if self.reduction is not None:
            if not system.is_flat or d != self.reduction.oscillator_dim:
                raise ConfigError(
                    f"{self.reduction.kind.value} reduction needs a flat oscillator of dimension "
                    f"{self.reduction.oscillator_dim}"
                )
        return self

    @property
    def is_flat(self) -> bool:
        return isinstance(self.space, str)

    def system_spec(self) -> SystemSpec:
        if isinstance(self.space, str):
            return SystemSpec(dim=int(self.space.split()[1]), terms=self.system)
        return SystemSpec(space=self.space, terms=self.system)


# Report schemas
class ResidualSummary(BaseModel):
    max_surface: float
    max_tangency: float


class EnergySummary(BaseModel):
    initial: float
    max_abs: float
    max_rel: float


class RunEvent(BaseModel):
    type: str
    message: str
    data: Dict[str, Any] = {}


class RunReport(BaseModel):
    command: CommandName
    status: Literal["ok", "error"] = "ok"
    exit_code: int = 0
    seed: int
    config: Dict[str, Any]
    n_samples: int = 0
    energy: Optional[EnergySummary] = None
    residuals: Optional[ResidualSummary] = None
    drift: List[DriftReport] = []
    conventions: Dict[str, Any] = {}
    verdicts: Dict[str, Verdict] = {}
    results: Dict[str, Any] = {}
    error: Optional[str] = None
    events: List[RunEvent] = []
