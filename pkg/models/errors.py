from typing import Any, Dict, List, Optional


class LabError(Exception):
    """Base error: carries the CLI exit code and a human readable detail, like an HTTP status"""

    exit_code: int = 3

    def __init__(self, detail: str, exit_code: Optional[int] = None, step_index: Optional[int] = None):
        super().__init__(detail)
        self.detail = detail
        if exit_code is not None:
            self.exit_code = exit_code
        self.step_index = step_index

    def __str__(self) -> str:
        if self.step_index is None:
            return self.detail
        return f"{self.detail} (step {self.step_index})"


# Configuration errors (exit 2)
class ConfigError(LabError):
    exit_code = 2


class InvalidT(LabError):
    """The anisotropy matrix must be eta-symmetric, an involution (T^2 = Id) and not Id"""

    exit_code = 2


class InvalidIndex(LabError):
    exit_code = 2


class UnsupportedTerm(LabError):
    exit_code = 2


# Numerical errors (exit 3)
class ChartViolation(LabError):
    exit_code = 3


class ConstraintViolation(LabError):
    exit_code = 3


class EquatorSingularity(LabError):
    exit_code = 3


class OriginSingularity(LabError):
    exit_code = 3


class NewtonDivergence(LabError):
    exit_code = 3


class NotFound(LabError):
    """No closed return below threshold; keeps the local minima for the report"""

    exit_code = 3

    def __init__(self, detail: str, minima: Optional[List[Dict[str, float]]] = None):
        super().__init__(detail)
        self.minima = minima or []


# Reduction errors (exit 4)
class FiberViolation(LabError):
    exit_code = 4


# Gradient self-check (exit 5)
class GradientCheckFailed(LabError):
    exit_code = 5

    def __init__(self, detail: str, worst: Optional[Dict[str, Any]] = None):
        super().__init__(detail)
        self.worst = worst or {}


class VerdictFailed(LabError):
    exit_code = 1
