# core/errors.py

from dataclasses import dataclass
from typing import Any, List, Optional


class BGPError(Exception):
    """Base class for every error raised by the solver and its workflows."""

    exit_code = 1


@dataclass(frozen=True)
class ParamIssue:
    code: str  # AsymmetricTau, DiagonalTauNotOne, GammaDiverges, ...
    field: str
    message: str

    def __str__(self) -> str:
        return f"{self.code} [{self.field}]: {self.message}"


class ParamValidationError(BGPError):
    exit_code = 2

    def __init__(self, issues: List[ParamIssue]):
        self.issues = list(issues)
        super().__init__("; ".join(str(i) for i in self.issues))

    @property
    def codes(self) -> List[str]:
        return [i.code for i in self.issues]


class GammaDiverges(ParamValidationError):
    def __init__(self, theta: float, sigma: float):
        super().__init__([ParamIssue(
            "GammaDiverges", "sigma",
            f"theta + 1 - sigma = {theta + 1 - sigma:.6g} must be positive",
        )])


class ConfigError(BGPError):
    exit_code = 2


class FlowTableError(BGPError):
    exit_code = 2


class ZeroDiagonalFlow(FlowTableError):
    def __init__(self, label: str):
        self.label = label
        super().__init__(f"ZeroDiagonalFlow: domestic flow of '{label}' must be strictly positive")


class NegativeFlow(FlowTableError):
    def __init__(self, source: str, dest: str, value: float):
        self.source, self.dest = source, dest
        super().__init__(f"NegativeFlow: {source}->{dest} = {value:.6g}")


class MissingFlowPair(FlowTableError):
    def __init__(self, pairs: List[tuple]):
        self.pairs = pairs
        shown = ", ".join(f"{s}->{d}" for s, d in pairs[:5])
        more = f" (+{len(pairs) - 5} more)" if len(pairs) > 5 else ""
        super().__init__(f"MissingFlowPair: {shown}{more}")


class CountryMismatch(BGPError):
    exit_code = 2


class TauNotUniform(BGPError):
    pass


class SolverError(BGPError):
    """Raised by a loop that could not reach its tolerance; carries the partial trace."""

    exit_code = 3

    def __init__(self, msg: str, trace: Optional[Any] = None):
        self.trace = trace
        super().__init__(msg)


class MaxIterExceeded(SolverError):
    pass


class DivergenceDetected(SolverError):
    pass


class NotConverged(SolverError):
    pass


class SearchFailed(BGPError):
    exit_code = 3

    def __init__(self, msg: str, objective: Optional[float] = None):
        self.objective = objective
        super().__init__(msg)
