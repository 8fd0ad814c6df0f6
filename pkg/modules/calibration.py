# modules/calibration.py

from typing import Dict, Literal, Optional, Tuple

import numpy as np
from scipy.optimize import minimize_scalar
from tqdm import tqdm

from core.errors import BGPError, CountryMismatch, NegativeFlow, SearchFailed, ZeroDiagonalFlow
from core.logger import log
from core.loop import solve_bgp
from models import CalibrationConfig, CalibrationTargets, FitResult, FlowTable, ModelParams, SolverConfig

Convention = Literal["printed", "gravity"]


def head_ries_exponent(theta: float, alpha: float, convention: Convention = "printed") -> float:
    if convention == "gravity":
        return -1.0 / (2.0 * theta)
    return -1.0 / (2.0 * theta * (1.0 - alpha))


def head_ries_costs(flows: FlowTable, theta: float, alpha: float, convention: Convention = "printed") -> np.ndarray:
    """Symmetric trade costs from bilateral-over-domestic flow ratio products.

    `gravity` inverts the final-goods gravity equation exactly; `printed` keeps
    the (1 - alpha) in the exponent.
    """
    X = np.asarray(flows.values, dtype=float)
    labels = flows.labels
    neg = np.argwhere(X < 0)
    if neg.size:
        s, d = neg[0]
        raise NegativeFlow(labels[s], labels[d], X[s, d])
    dom = np.diag(X)
    for i, value in enumerate(dom):
        if not value > 0:
            raise ZeroDiagonalFlow(labels[i])

    ratio = (X / dom[None, :]) * (X.T / dom[:, None])
    np.fill_diagonal(ratio, 1.0)
    if np.any(ratio == 0):
        log("calibration", "zero bilateral flows imply infinite trade costs", level="warning")
    if np.any(ratio > 1):
        log("calibration", f"{int(np.sum(ratio > 1) // 2)} pair(s) imply tau < 1; clamped to 1", level="warning")
        ratio = np.minimum(ratio, 1.0)

    with np.errstate(divide="ignore"):
        tau = ratio ** head_ries_exponent(theta, alpha, convention)
    np.fill_diagonal(tau, 1.0)
    return tau


def tau_change_matrix(flows_before: FlowTable, flows_after: FlowTable, theta: float, alpha: float,
                      convention: Convention = "printed") -> np.ndarray:
    if tuple(flows_before.labels) != tuple(flows_after.labels):
        raise CountryMismatch(f"flow tables cover different countries: {flows_before.labels} vs {flows_after.labels}")
    before = head_ries_costs(flows_before, theta, alpha, convention)
    after = head_ries_costs(flows_after, theta, alpha, convention)
    return after / before - 1.0


class _Objective:
    """Weighted target distance as a function of log T (first country pinned to T = 1).

    psi only scales growth, g = psi rho R, so it is profiled out exactly for
    every T and then refined by its own line search.
    """

    def __init__(self, params: ModelParams, targets: CalibrationTargets, solver_cfg: SolverConfig,
                 budget: int):
        self.params = params
        self.targets = targets
        self.solver_cfg = solver_cfg
        self.budget = budget
        self.evaluations = 0
        self._cache: Dict[Tuple[float, ...], Optional[Tuple[np.ndarray, float]]] = {}

    def solve(self, log_T: np.ndarray) -> Optional[Tuple[np.ndarray, float]]:
        key = tuple(float(x) for x in log_T)
        if key in self._cache:
            return self._cache[key]
        if self.evaluations >= self.budget:
            raise SearchFailed(f"evaluation budget of {self.budget} solves exhausted")
        self.evaluations += 1
        T = np.exp(np.concatenate([[0.0], log_T]))
        try:
            eq, _ = solve_bgp(self.params.replace(T=T), self.solver_cfg)
        except BGPError as err:
            log("calibration", f"solve failed at T={np.round(T, 6).tolist()}: {err}", level="debug")
            self._cache[key] = None
            return None
        result = (eq.w / eq.w.sum(), eq.R)
        self._cache[key] = result
        return result

    def psi_star(self, R: float) -> float:
        return self.targets.growth / (self.params.rho * R)

    def value(self, log_T: np.ndarray, log_psi: Optional[float] = None) -> float:
        solved = self.solve(log_T)
        if solved is None:
            return np.inf
        wages, R = solved
        psi = self.psi_star(R) if log_psi is None else np.exp(log_psi)
        w_wage, w_growth = self.targets.weights
        wage_gap = wages - self.targets.wages
        growth_gap = psi * self.params.rho * R - self.targets.growth
        return float(w_wage * wage_gap @ wage_gap + w_growth * growth_gap ** 2)


def fit_free_params(params_partial: ModelParams, targets: CalibrationTargets,
                    solver_cfg: Optional[SolverConfig] = None,
                    fit_cfg: Optional[CalibrationConfig] = None,
                    progress: bool = False) -> FitResult:
    """Fit T and psi to normalized wages and a BGP growth rate by coordinate line searches."""
    solver_cfg = solver_cfg or SolverConfig()
    fit_cfg = fit_cfg or CalibrationConfig()
    n = params_partial.n
    if targets.wages.size != n:
        raise CountryMismatch(f"{targets.wages.size} wage targets for {n} countries")
    if targets.growth <= 0:
        raise SearchFailed(
            f"target growth {targets.growth:g} is not positive; "
            "output per variety is positive, so g > 0 on every BGP"
        )

    # psi is irrelevant for prices and wages; any positive value validates.
    base = params_partial.replace(psi=1.0)
    obj = _Objective(base, targets, solver_cfg, fit_cfg.max_evaluations)
    T0 = np.asarray(params_partial.T, dtype=float)
    log_T = np.log(T0[1:] / T0[0]) if np.all(T0 > 0) else np.zeros(n - 1)

    best = obj.value(log_T)
    if not np.isfinite(best):
        raise SearchFailed("the starting point does not solve")
    stop = fit_cfg.threshold * 1e-6

    bar = tqdm(total=fit_cfg.sweeps * (n - 1), desc="calibrate", disable=not progress or n == 1)
    for sweep in range(fit_cfg.sweeps):
        for j in range(n - 1):
            def along(x, j=j):
                trial = log_T.copy()
                trial[j] = x
                return obj.value(trial)

            res = minimize_scalar(along, bounds=(log_T[j] - fit_cfg.bracket, log_T[j] + fit_cfg.bracket),
                                  method="bounded", options={"xatol": fit_cfg.xatol})
            if res.fun < best:
                log_T[j], best = res.x, float(res.fun)
            bar.update(1)
        log("calibration", f"sweep {sweep + 1}: objective {best:.3e} after {obj.evaluations} solves", level="debug")
        if best < stop:
            break
    bar.close()

    wages, R = obj.solve(log_T)
    psi0 = np.log(obj.psi_star(R))
    res = minimize_scalar(lambda lp: obj.value(log_T, lp), bounds=(psi0 - fit_cfg.bracket, psi0 + fit_cfg.bracket),
                          method="bounded", options={"xatol": fit_cfg.xatol})
    log_psi = res.x if res.fun < obj.value(log_T, psi0) else psi0
    psi = float(np.exp(log_psi))
    objective = obj.value(log_T, log_psi)

    if objective > fit_cfg.threshold:
        raise SearchFailed(f"objective {objective:.3e} above threshold {fit_cfg.threshold:.1e} "
                           f"after {obj.evaluations} solves", objective)

    return FitResult(
        T=np.exp(np.concatenate([[0.0], log_T])),
        psi=psi,
        objective=objective,
        wage_residuals=wages - targets.wages,
        growth_residual=float(psi * params_partial.rho * R - targets.growth),
        evaluations=obj.evaluations,
    )
