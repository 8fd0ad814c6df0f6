# core/context.py

import os
from pathlib import Path
from typing import List, Optional

import yaml
from pydantic import ValidationError

from core.errors import ConfigError
from core.logger import log
from models import MIN_TOL, CalibrationConfig, ModelParams, SolverConfig
from modules.scenario import Scenario, build_params, load_scenario, shocked_params

DEFAULT_PROFILE = Path(__file__).resolve().parent.parent / "config" / "profiles.yaml"


class RunProfile:
    def __init__(self, path: Optional[str | Path] = None):
        path = Path(path) if path else DEFAULT_PROFILE
        with open(path, "r") as f:
            config = yaml.safe_load(f) or {}

        self.name = config.get("profile", {}).get("name", "default")
        self.solver = dict(config.get("solver", {}))
        self.calibration = dict(config.get("calibration", {}))
        output = config.get("output", {})
        self.out_dir = output.get("dir", "out")
        self.digits = int(output.get("digits", 12))
        self.formats = list(output.get("formats", ["csv"]))
        self.log_level = config.get("logging", {}).get("level", "info")

    def __repr__(self):
        return f"<RunProfile {self.name}>"


class RunContext:
    """Scenario, profile and command-line overrides resolved for one command."""

    def __init__(
        self,
        config_path: str | Path,
        out_dir: Optional[str] = None,
        tol: Optional[float] = None,
        max_iter: Optional[int] = None,
        seed: Optional[int] = None,
        formats: Optional[List[str]] = None,
        theta: Optional[float] = None,
        quiet: bool = False,
        profile: Optional[RunProfile] = None,
    ):
        self.profile = profile or RunProfile()
        os.environ.setdefault("BGP_LOG_LEVEL", self.profile.log_level)
        self.scenario, self.base_dir = load_scenario(config_path)
        self.quiet = quiet
        self.theta = theta
        if self.scenario.params.sigma < 1.0 and not quiet:
            log("params", f"sigma = {self.scenario.params.sigma:g} < 1; accepted, it only enters through gamma",
                level="warning")

        sc = self.scenario
        self.out_dir = Path(out_dir or sc.output.dir or Path(self.profile.out_dir) / sc.name)
        self.formats = formats or sc.output.formats or self.profile.formats
        self.digits = self.profile.digits

        overrides = {**self.profile.solver, **sc.solver}
        if tol is not None:
            overrides["tol_outer"] = tol
            overrides["tol_mid"] = max(MIN_TOL, min(overrides.get("tol_mid", 1e-11), tol / 10))
            overrides["tol_inner"] = max(MIN_TOL, min(overrides.get("tol_inner", 1e-12), tol / 100))
        if max_iter is not None:
            for key in ("max_iter_inner", "max_iter_mid", "max_iter_outer"):
                overrides[key] = max_iter
        if seed is not None:
            overrides["seed"] = seed
        try:
            self.solver = SolverConfig(**overrides)
            self.calibration = CalibrationConfig(**{**self.profile.calibration, **sc.calibration})
        except ValidationError as err:
            raise ConfigError(f"solver/calibration settings: {err}") from err

    def params(self, require_psi: bool = True) -> ModelParams:
        return build_params(self.scenario, self.base_dir, require_psi=require_psi, theta=self.theta)

    def shocked(self, params: ModelParams) -> ModelParams:
        return shocked_params(self.scenario, params, self.base_dir)

    @property
    def name(self) -> str:
        return self.scenario.name or "scenario"

    def __repr__(self):
        return f"<RunContext {self.name} out={self.out_dir}>"
