from typing import Annotated, Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, field_validator, model_validator

SHARE_TOL = 1e-12
MIN_TOL = np.finfo(float).eps * 1e3


def _to_array(value) -> np.ndarray:
    arr = np.array(value, dtype=float)
    arr.setflags(write=False)
    return arr


Array = Annotated[np.ndarray, BeforeValidator(_to_array)]


def check_column_stochastic(mat: np.ndarray, name: str, tol: float = SHARE_TOL) -> None:
    """Raise ValueError unless every column of `mat` is a probability vector."""
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {mat.shape}")
    if np.any(mat < 0) or not np.all(np.isfinite(mat)):
        raise ValueError(f"{name} has negative or non-finite entries")
    worst = float(np.max(np.abs(mat.sum(axis=0) - 1.0)))
    if worst > tol:
        raise ValueError(f"{name} columns do not sum to one (worst deviation {worst:.3e})")


class Frozen(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)


# --- Parameters ---

class ModelParams(Frozen):
    theta: float
    sigma: float
    alpha: float
    rho: float
    psi: float
    T: Array
    L: Array
    tau: Array  # source row, destination column
    labels: Tuple[str, ...] = ()

    @model_validator(mode="before")
    @classmethod
    def _default_labels(cls, data):
        if isinstance(data, dict) and not data.get("labels"):
            n = np.atleast_1d(np.asarray(data.get("T", []), dtype=float)).size
            data = {**data, "labels": tuple(f"c{i + 1}" for i in range(n))}
        return data

    @property
    def n(self) -> int:
        return int(np.atleast_1d(self.T).size)

    def replace(self, **changes) -> "ModelParams":
        """Copy with some primitives changed; the result must be validated again."""
        data = {name: getattr(self, name) for name in ModelParams.model_fields}
        data.update(changes)
        return ModelParams(**data)


class ValidatedParams(ModelParams):
    eta: float
    gamma: float


# --- Static objects ---

class ShareMatrices(Frozen):
    lambdaF: Array
    lambdaM: Array

    @model_validator(mode="after")
    def _stochastic(self):
        check_column_stochastic(self.lambdaF, "lambdaF")
        check_column_stochastic(self.lambdaM, "lambdaM")
        return self


class PriceSystem(Frozen):
    P: Array
    PM: Array
    pM: Array  # monopolist price of source k's varieties in destination d


class FlowTable(Frozen):
    values: Array
    labels: Tuple[str, ...]

    @model_validator(mode="after")
    def _square(self):
        n = len(self.labels)
        if self.values.shape != (n, n):
            raise ValueError(f"flow matrix shape {self.values.shape} does not match {n} labels")
        return self


# --- Solver ---

class SolverConfig(Frozen):
    tol_inner: float = 1e-12
    tol_mid: float = 1e-11
    tol_outer: float = 1e-10
    max_iter_inner: int = Field(10_000, gt=0)
    max_iter_mid: int = Field(10_000, gt=0)
    max_iter_outer: int = Field(10_000, gt=0)
    damping_inner: float = 1.0
    damping_mid: Optional[float] = None  # None: 1 / (1 + theta (1 - alpha))
    damping_outer: float = 0.5
    outer_method: Literal["newton", "tatonnement"] = "newton"
    fd_step: float = Field(1e-6, gt=0)
    seed: Optional[int] = None

    @field_validator("tol_inner", "tol_mid", "tol_outer")
    @classmethod
    def _tol_floor(cls, v: float) -> float:
        if v < MIN_TOL:
            raise ValueError(f"tolerance {v:g} is below {MIN_TOL:.3g}")
        return v

    @field_validator("damping_inner", "damping_mid", "damping_outer")
    @classmethod
    def _damping_range(cls, v: Optional[float]) -> Optional[float]:
        if v is not None and not (0.0 < v <= 1.0):
            raise ValueError(f"damping {v:g} must lie in (0, 1]")
        return v


class SolveTrace(BaseModel):
    """Per-loop sup-norm deltas; inner and mid keep their most recent run."""

    inner: List[float] = []
    mid: List[float] = []
    outer: List[float] = []
    outer_damping: List[float] = []
    outer_R: List[float] = []  # world real GDP per variety at each measure pass
    inner_calls: int = 0
    inner_iterations: int = 0
    mid_calls: int = 0
    mid_iterations: int = 0
    oscillation: bool = False
    converged: Dict[str, bool] = {}
    wall_time: float = 0.0


class Equilibrium(Frozen):
    params: ValidatedParams
    w: Array
    P: Array
    PM: Array
    M: Array
    pM: Array
    shares: ShareMatrices
    S: Array  # gross final-goods sales
    E: Array  # absorption of final goods
    GDP: Array
    profits: Array
    R_s: Array  # real GDP per variety by country
    R: float
    g_s: Optional[Array] = None
    g: Optional[float] = None
    residuals: Dict[str, float] = {}
    iterations: Dict[str, int] = {}
    converged: bool = True

    @property
    def labels(self) -> Tuple[str, ...]:
        return self.params.labels

    @property
    def n(self) -> int:
        return self.params.n

    @property
    def real_wage(self) -> np.ndarray:
        return self.w / self.P

    @property
    def mp_sum(self) -> float:
        return float(np.sum(self.M * self.P))


# --- Analysis ---

class GrowthDecomposition(Frozen):
    labels: Tuple[str, ...]
    g: Array
    g_common: float
    profit_rate: Array
    ek_factor: Array
    romer_domestic_factor: Array
    labor_part: Array
    labor_part_printed: Array
    labor_part_proof: Array
    romer_global: Array
    printed_rate: Array
    proof_rate: Array
    euler_rate: Array  # psi Pi / (P M) - rho


class StaticSplit(Frozen):
    ek: Array
    romer: Array


class WelfareReport(Frozen):
    labels: Tuple[str, ...]
    transitional: Array
    static: Array
    static_ek: Array
    static_romer: Array
    dynamic: Array
    total: Array
    dynamic_share: Array  # NaN where the total is numerically zero
    consumption_total: Array
    real_wage_change: Array
    real_wage_change_rel_avg: Array  # log change minus the cross-country average
    g_base: float
    g_new: float

    @property
    def delta_g_pp(self) -> float:
        return 100.0 * (self.g_new - self.g_base)


# --- Calibration ---

class CalibrationTargets(Frozen):
    wages: Array
    growth: float
    weights: Tuple[float, float] = (1.0, 1.0)

    @field_validator("wages")
    @classmethod
    def _normalize(cls, v: np.ndarray) -> np.ndarray:
        if v.ndim != 1 or np.any(v <= 0):
            raise ValueError("wage targets must be a positive vector")
        return _to_array(v / v.sum())

    @field_validator("weights")
    @classmethod
    def _weights(cls, v: Tuple[float, float]) -> Tuple[float, float]:
        if min(v) < 0 or max(v) == 0:
            raise ValueError("weights must be nonnegative and not all zero")
        return v


class CalibrationConfig(Frozen):
    sweeps: int = Field(3, gt=0)
    bracket: float = Field(3.0, gt=0)
    xatol: float = Field(1e-8, gt=0)
    threshold: float = Field(1e-6, gt=0)
    max_evaluations: int = Field(2_000, gt=0)


class FitResult(Frozen):
    T: Array
    psi: float
    objective: float
    wage_residuals: Array
    growth_residual: float
    evaluations: int
