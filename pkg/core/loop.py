# core/loop.py

import time
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np

from core.errors import DivergenceDetected, MaxIterExceeded
from core.logger import log
from core.strategy import StepSchedule, initial_guess, mid_damping, monotone_tail
from models import Equilibrium, ModelParams, ShareMatrices, SolverConfig, SolveTrace, ValidatedParams
from modules import gravity
from modules.analysis import attach_growth
from modules.params import validate_params

# Largest log step the measure update may take in one pass.
MAX_LOG_STEP = 1.0
# Newton passes without a new best residual before the measure loop gives up.
STALL_WINDOW = 25


@dataclass
class StaticState:
    """Prices, wages and flows at a given measure distribution."""

    M: np.ndarray
    w: np.ndarray
    log_P: np.ndarray
    log_PM: np.ndarray
    lamF: np.ndarray
    lamM: np.ndarray
    S: np.ndarray
    E: np.ndarray
    mid_delta: float

    def real_gdp(self, params: ValidatedParams) -> np.ndarray:
        profits = (params.alpha / params.eta) * self.lamM @ self.S
        return (self.w * params.L + profits) / np.exp(self.log_P)

    def gdp_per_variety(self, params: ValidatedParams) -> np.ndarray:
        return self.real_gdp(params) / self.M

    def world_R(self, params: ValidatedParams) -> float:
        return float(self.real_gdp(params).sum() / self.M.sum())


def _check_finite(name: str, x: np.ndarray, trace: SolveTrace) -> None:
    if not np.all(np.isfinite(x)):
        raise DivergenceDetected(f"{name} iterate became non-finite", trace)


class BGPLoop:
    """Prices innermost, wages in the middle, variety measures outermost."""

    def __init__(self, params: ValidatedParams, cfg: SolverConfig, trace: Optional[SolveTrace] = None):
        self.params = params
        self.cfg = cfg
        self.trace = trace if trace is not None else SolveTrace()

    # === Inner loop: final-good prices ===
    def inner(self, w: np.ndarray, M: np.ndarray, log_P: np.ndarray) -> np.ndarray:
        cfg, p = self.cfg, self.params
        deltas = []
        for it in range(1, cfg.max_iter_inner + 1):
            new = gravity.log_price_map(p, w, M, log_P)
            _check_finite("price", new, self.trace)
            step = new - log_P
            delta = float(np.max(np.abs(step)))
            log_P = log_P + cfg.damping_inner * step
            deltas.append(delta)
            if delta < cfg.tol_inner:
                break
        else:
            self.trace.inner = deltas
            self.trace.converged["inner"] = False
            raise MaxIterExceeded(f"price loop stalled at delta {deltas[-1]:.3e}", self.trace)
        self.trace.inner = deltas
        self.trace.inner_calls += 1
        self.trace.inner_iterations += it
        return log_P

    # === Middle loop: wages ===
    def mid(self, M: np.ndarray, w: np.ndarray, log_P: np.ndarray) -> StaticState:
        cfg, p = self.cfg, self.params
        L = p.L
        schedule = StepSchedule("wage", mid_damping(p, cfg))
        w = w / np.sum(w * L)
        deltas = []
        for it in range(1, cfg.max_iter_mid + 1):
            log_P = self.inner(w, M, log_P)
            log_PM = gravity.log_composite_prices(p, M, log_P)
            lamF, lamM = gravity.share_arrays(p, w, M, log_P, log_PM)
            S, E = gravity.circular_flow_arrays(p, lamF, lamM)
            target = (1.0 - p.alpha) * S / L
            step = np.log(target) - np.log(w)
            _check_finite("wage", step, self.trace)
            delta = float(np.max(np.abs(step)))
            deltas.append(delta)
            if delta < cfg.tol_mid:
                break
            w = w * np.exp(schedule.step * step)
            w = w / np.sum(w * L)
            schedule.update(delta)
        else:
            self.trace.mid = deltas
            self.trace.converged["mid"] = False
            raise MaxIterExceeded(f"wage loop stalled at delta {deltas[-1]:.3e}", self.trace)
        self.trace.mid = deltas
        self.trace.mid_calls += 1
        self.trace.mid_iterations += it
        return StaticState(M=M, w=w, log_P=log_P, log_PM=log_PM, lamF=lamF, lamM=lamM, S=S, E=E, mid_delta=delta)

    def evaluate(self, M: np.ndarray, warm: StaticState) -> StaticState:
        return self.mid(M, warm.w, warm.log_P)

    # === Outer loop: variety measures ===
    def _residual(self, state: StaticState) -> np.ndarray:
        log_R = np.log(state.gdp_per_variety(self.params))
        return log_R - log_R.mean()

    def _jacobian(self, state: StaticState, r: np.ndarray) -> np.ndarray:
        h = self.cfg.fd_step
        x = np.log(state.M)
        J = np.empty((r.size, r.size))
        for j in range(r.size):
            xj = x.copy()
            xj[j] += h
            Mj = np.exp(xj - xj.max())
            shifted = self.evaluate(Mj / Mj.sum(), state)
            J[:, j] = (self._residual(shifted) - r) / h
        return J

    def outer(self, M: np.ndarray, w: np.ndarray, P: np.ndarray) -> Tuple[StaticState, bool]:
        cfg = self.cfg
        newton = cfg.outer_method == "newton"
        schedule = StepSchedule("measure", cfg.damping_outer, ceiling=1.0 if newton else None,
                                grow=2.0 if newton else 1.0)
        state = self.mid(M / M.sum(), w, np.log(P))
        for it in range(1, cfg.max_iter_outer + 1):
            r = self._residual(state)
            _check_finite("output", r, self.trace)
            R = state.world_R(self.params)
            self.trace.outer_R.append(R)
            delta = float(np.max(np.abs(r)))
            self.trace.outer.append(delta)
            self.trace.outer_damping.append(schedule.step)
            if delta < cfg.tol_outer:
                self.trace.converged["outer"] = True
                return state, True
            if newton and it > STALL_WINDOW and min(self.trace.outer[-STALL_WINDOW:]) >= min(self.trace.outer[:-STALL_WINDOW]):
                self.trace.converged["outer"] = False
                raise MaxIterExceeded(f"measure loop stalled at delta {delta:.3e}", self.trace)
            if newton:
                J = self._jacobian(state, r)
                direction = -np.linalg.lstsq(J, r, rcond=None)[0]
            else:
                # M_s grows with its output per variety relative to the world R
                direction = np.log(state.gdp_per_variety(self.params)) - np.log(R)
            direction = direction - direction.mean()
            biggest = float(np.max(np.abs(direction)))
            if biggest > MAX_LOG_STEP:
                direction *= MAX_LOG_STEP / biggest
            x = np.log(state.M) + schedule.step * direction
            M = np.exp(x - x.max())
            M = M / M.sum()
            _check_finite("measure", M, self.trace)
            schedule.update(delta)
            state = self.evaluate(M, state)
        self.trace.converged["outer"] = False
        raise MaxIterExceeded(f"measure loop stalled at delta {self.trace.outer[-1]:.3e}", self.trace)

    def assemble(self, state: StaticState, converged: bool = True) -> Equilibrium:
        p = self.params
        P = np.exp(state.log_P)
        profits = (p.alpha / p.eta) * state.lamM @ state.S
        GDP = state.w * p.L + profits
        R_s = GDP / (P * state.M)
        eq = Equilibrium(
            params=p,
            w=state.w,
            P=P,
            PM=np.exp(state.log_PM),
            M=state.M,
            pM=gravity.monopolist_prices(p, P),
            shares=ShareMatrices(lambdaF=state.lamF, lambdaM=state.lamM),
            S=state.S,
            E=state.E,
            GDP=GDP,
            profits=profits,
            R_s=R_s,
            R=state.world_R(p),
            converged=converged,
            iterations={
                "inner": self.trace.inner_iterations,
                "mid": self.trace.mid_iterations,
                "outer": len(self.trace.outer),
            },
        )
        residuals = {
            "inner": self.trace.inner[-1] if self.trace.inner else 0.0,
            "mid": state.mid_delta,
            "outer": self.trace.outer[-1] if self.trace.outer else 0.0,
            "goods_market": float(np.max(np.abs(gravity.goods_market_residual(p, eq)))),
            "trade_balance": float(np.max(np.abs(gravity.trade_balance_residual(p, eq)))),
        }
        return eq.model_copy(update={"residuals": residuals})


def _prepare(params: ModelParams, cfg: Optional[SolverConfig]) -> Tuple[ValidatedParams, SolverConfig]:
    return validate_params(params), cfg or SolverConfig()


def inner_price_fixed_point(params: ModelParams, w: np.ndarray, M: np.ndarray, P_guess: np.ndarray,
                            cfg: Optional[SolverConfig] = None) -> np.ndarray:
    p, cfg = _prepare(params, cfg)
    loop = BGPLoop(p, cfg)
    return np.exp(loop.inner(np.asarray(w, float), np.asarray(M, float), np.log(P_guess)))


def mid_wage_fixed_point(params: ModelParams, M: np.ndarray, R_guess: Optional[Union[float, np.ndarray]] = None,
                         cfg: Optional[SolverConfig] = None, w_guess: Optional[np.ndarray] = None,
                         P_guess: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Normalized wages (sum w L = 1) and consistent final prices at a fixed measure M.

    Without a wage guess, an output-per-variety guess R_guess seeds wages from
    the labour share of final sales when nominal GDP is P R M.
    """
    p, cfg = _prepare(params, cfg)
    M = np.asarray(M, float)
    loop = BGPLoop(p, cfg)
    w0, _, P0 = initial_guess(p, cfg)
    log_P = np.log(P0 if P_guess is None else np.asarray(P_guess, float))
    if w_guess is not None:
        w = np.asarray(w_guess, float)
    elif R_guess is not None:
        log_P = loop.inner(w0, M, log_P)
        log_PM = gravity.log_composite_prices(p, M, log_P)
        lamF, _ = gravity.share_arrays(p, w0, M, log_P, log_PM)
        spending = (1.0 - p.rho) * np.exp(log_P) * np.asarray(R_guess, float) * M
        w = (1.0 - p.alpha) * (lamF @ spending) / p.L
    else:
        w = w0
    state = loop.mid(M, w, log_P)
    return state.w, np.exp(state.log_P)


def static_equilibrium(params: ModelParams, M: np.ndarray, cfg: Optional[SolverConfig] = None) -> Equilibrium:
    """Price and wage equilibrium at a given measure distribution; M is not re-optimized."""
    p, cfg = _prepare(params, cfg)
    w0, _, P0 = initial_guess(p, cfg)
    loop = BGPLoop(p, cfg)
    state = loop.mid(np.asarray(M, float), w0, np.log(P0))
    return attach_growth(loop.assemble(state))


def outer_measure_fixed_point(params: ModelParams, cfg: Optional[SolverConfig] = None,
                              trace: Optional[SolveTrace] = None) -> Equilibrium:
    p, cfg = _prepare(params, cfg)
    loop = BGPLoop(p, cfg, trace)
    w, M, P = initial_guess(p, cfg)
    state, converged = loop.outer(M, w, P)
    return attach_growth(loop.assemble(state, converged))


def solve_bgp(params: ModelParams, cfg: Optional[SolverConfig] = None) -> Tuple[Equilibrium, SolveTrace]:
    """Balanced-growth-path equilibrium and the trace of all three loops."""
    p, cfg = _prepare(params, cfg)
    trace = SolveTrace()
    start = time.perf_counter()
    try:
        eq = outer_measure_fixed_point(p, cfg, trace)
    finally:
        trace.wall_time = time.perf_counter() - start
    trace.converged.setdefault("inner", True)
    trace.converged.setdefault("mid", True)
    if not monotone_tail(trace.outer):
        trace.oscillation = True
        log("loop", "measure residuals did not decrease monotonically near convergence", level="warning")
    log("loop", f"BGP solved: N={p.n} g*={eq.g:.6g} outer={len(trace.outer)} "
                f"mid={trace.mid_iterations} inner={trace.inner_iterations} in {trace.wall_time:.2f}s",
        level="debug")
    return eq, trace
