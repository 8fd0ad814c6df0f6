# modules/scenario.py

from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from core.errors import ConfigError
from models import ModelParams
from modules.calibration import head_ries_costs
from modules.flows import read_flow_csv


class _Spec(BaseModel):
    model_config = ConfigDict(extra="forbid")


class HeadRiesSpec(_Spec):
    convention: Literal["printed", "gravity"] = "printed"


class ParamsSpec(_Spec):
    theta: float
    sigma: float
    alpha: float
    rho: float
    L: List[float]
    psi: Optional[float] = None
    T: Optional[List[float]] = None
    tau: Optional[List[List[float]]] = None
    tau_offdiag: Optional[float] = None
    flows: Optional[str] = None
    head_ries: HeadRiesSpec = HeadRiesSpec()

    @model_validator(mode="after")
    def _one_tau_source(self):
        given = [k for k in ("tau", "tau_offdiag", "flows") if getattr(self, k) is not None]
        if len(given) != 1:
            raise ValueError(f"exactly one of tau, tau_offdiag, flows is required (got {given or 'none'})")
        return self


class BlockShock(_Spec):
    sources: List[str]
    dests: List[str]
    multiplier: float = Field(gt=0)


class ShockSpec(_Spec):
    tau: Optional[List[List[float]]] = None
    multipliers: Optional[Union[float, List[List[float]]]] = None
    flows: Optional[str] = None
    blocks: Optional[List[BlockShock]] = None

    @model_validator(mode="after")
    def _one_kind(self):
        given = [k for k in ("tau", "multipliers", "flows", "blocks") if getattr(self, k) is not None]
        if len(given) != 1:
            raise ValueError(f"a shock needs exactly one of tau, multipliers, flows, blocks (got {given or 'none'})")
        return self


class TargetsSpec(_Spec):
    wages: List[float]
    growth: float
    weights: Tuple[float, float] = (1.0, 1.0)


class SweepSpec(_Spec):
    start: float = 1.0
    stop: float = 3.0
    step: float = Field(0.1, gt=0)

    def grid(self) -> np.ndarray:
        count = int(np.floor((self.stop - self.start) / self.step + 1e-9)) + 1
        return np.round(self.start + self.step * np.arange(max(count, 1)), 12)


class OutputSpec(_Spec):
    dir: Optional[str] = None
    formats: Optional[List[Literal["csv", "json"]]] = None


class Scenario(_Spec):
    name: Optional[str] = None
    countries: List[str]
    params: ParamsSpec
    shock: Optional[ShockSpec] = None
    targets: Optional[TargetsSpec] = None
    solver: Dict[str, Any] = {}
    calibration: Dict[str, Any] = {}
    sweep: Optional[SweepSpec] = None
    output: OutputSpec = OutputSpec()

    @model_validator(mode="after")
    def _lengths(self):
        n = len(self.countries)
        if len(set(self.countries)) != n:
            raise ValueError("country labels must be unique")
        if len(self.params.L) != n:
            raise ValueError(f"params.L has {len(self.params.L)} entries for {n} countries")
        if self.params.T is not None and len(self.params.T) != n:
            raise ValueError(f"params.T has {len(self.params.T)} entries for {n} countries")
        return self


def _format_validation(err: ValidationError) -> str:
    parts = []
    for e in err.errors():
        where = ".".join(str(x) for x in e["loc"]) or "<root>"
        parts.append(f"{where}: {e['msg']}")
    return "; ".join(parts)


def load_scenario(path: str | Path) -> Tuple[Scenario, Path]:
    """Parse a YAML (or JSON) scenario; returns it with the directory relative paths resolve against."""
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = yaml.safe_load(f)
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    except yaml.YAMLError as err:
        raise ConfigError(f"{path}: malformed YAML: {err}") from err
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected a mapping at the top level")
    try:
        scenario = Scenario(**raw)
    except ValidationError as err:
        raise ConfigError(f"{path}: {_format_validation(err)}") from err
    if scenario.name is None:
        scenario = scenario.model_copy(update={"name": path.stem})
    return scenario, path.parent


def resolve_path(base_dir: Path, rel: str) -> Path:
    p = Path(rel)
    return p if p.is_absolute() else base_dir / p


def base_tau(scenario: Scenario, base_dir: Path, theta: Optional[float] = None) -> np.ndarray:
    """Baseline trade costs; flow tables are inverted with `theta` when given."""
    spec = scenario.params
    n = len(scenario.countries)
    if spec.tau is not None:
        return np.array(spec.tau, dtype=float)
    if spec.tau_offdiag is not None:
        tau = np.full((n, n), float(spec.tau_offdiag))
        np.fill_diagonal(tau, 1.0)
        return tau
    flows = read_flow_csv(resolve_path(base_dir, spec.flows), scenario.countries)
    return head_ries_costs(flows, spec.theta if theta is None else theta, spec.alpha, spec.head_ries.convention)


def build_params(scenario: Scenario, base_dir: Path, require_psi: bool = True,
                 theta: Optional[float] = None) -> ModelParams:
    spec = scenario.params
    if require_psi and spec.psi is None:
        raise ConfigError("params.psi: field required for this command")
    n = len(scenario.countries)
    data = {
        "theta": spec.theta if theta is None else theta,
        "sigma": spec.sigma,
        "alpha": spec.alpha,
        "rho": spec.rho,
        "psi": spec.psi if spec.psi is not None else 1.0,
        "T": spec.T if spec.T is not None else np.ones(n),
        "L": spec.L,
        "tau": base_tau(scenario, base_dir, theta),
        "labels": tuple(scenario.countries),
    }
    return ModelParams(**data)


def shocked_params(scenario: Scenario, params: ModelParams, base_dir: Path) -> ModelParams:
    """Counterfactual primitives: the baseline with its trade costs replaced by the shock."""
    shock = scenario.shock
    if shock is None:
        raise ConfigError("shock: a counterfactual needs a shock block")
    labels = list(scenario.countries)
    tau = np.array(params.tau, dtype=float)

    if shock.tau is not None:
        tau = np.array(shock.tau, dtype=float)
    elif shock.multipliers is not None:
        if np.isscalar(shock.multipliers):
            mult = np.full_like(tau, float(shock.multipliers))
            np.fill_diagonal(mult, 1.0)
        else:
            mult = np.array(shock.multipliers, dtype=float)
        if mult.shape != tau.shape:
            raise ConfigError(f"shock.multipliers: expected shape {tau.shape}, got {mult.shape}")
        tau = tau * mult
    elif shock.flows is not None:
        if scenario.params.flows is None:
            raise ConfigError("shock.flows: only valid when params.flows defines the baseline")
        after = read_flow_csv(resolve_path(base_dir, shock.flows), labels)
        tau = head_ries_costs(after, params.theta, params.alpha, scenario.params.head_ries.convention)
    else:
        index = {c: i for i, c in enumerate(labels)}
        for block in shock.blocks:
            unknown = [c for c in block.sources + block.dests if c not in index]
            if unknown:
                raise ConfigError(f"shock.blocks: unknown countries {unknown}")
            pairs = {frozenset((s, d)) for s in block.sources for d in block.dests if s != d}
            for pair in sorted(pairs, key=sorted):
                i, j = (index[c] for c in sorted(pair))
                tau[i, j] *= block.multiplier
                tau[j, i] *= block.multiplier
    return params.replace(tau=tau)
