# core/strategy.py

from typing import List, Optional, Tuple

import numpy as np

from core.logger import log
from models import SolverConfig, ValidatedParams


def mid_damping(params: ValidatedParams, cfg: SolverConfig) -> float:
    """Wage step; the undamped update overshoots with slope about -theta (1 - alpha)."""
    if cfg.damping_mid is not None:
        return cfg.damping_mid
    return 1.0 / (1.0 + params.theta * (1.0 - params.alpha))


def monotone_tail(deltas: List[float], window: int = 10, slack: float = 0.10) -> bool:
    """True when the last `window` deltas are non-increasing up to a relative slack."""
    tail = deltas[-window:]
    return all(b <= a * (1.0 + slack) for a, b in zip(tail, tail[1:]))


class StepSchedule:
    """Step size for one fixed-point loop.

    A delta that grows by more than `slack` halves the step (down to `floor`);
    a shrinking delta lets it grow back by `grow` up to `ceiling`.
    """

    def __init__(self, loop: str, start: float, ceiling: Optional[float] = None,
                 grow: float = 1.0, floor: float = 1e-4, slack: float = 0.10):
        self.loop = loop
        self.step = start
        self.ceiling = start if ceiling is None else ceiling
        self.grow = grow
        self.floor = floor
        self.slack = slack
        self.last: Optional[float] = None
        self.oscillating = False

    def update(self, delta: float) -> float:
        if self.last is not None:
            if delta > self.last * (1.0 + self.slack):
                self.oscillating = True
                if self.step > self.floor:
                    self.step = max(self.floor, 0.5 * self.step)
                    log("strategy", f"{self.loop} delta rose to {delta:.3e}; step reduced to {self.step:.4g}", level="warning")
            elif delta < self.last:
                self.step = min(self.ceiling, self.step * self.grow)
        self.last = delta
        return self.step


def initial_guess(params: ValidatedParams, cfg: SolverConfig) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Starting (w, M, P): w proportional to 1/L, M proportional to L, P = 1, unless seeded."""
    L = np.asarray(params.L, dtype=float)
    if cfg.seed is None:
        w = 1.0 / L
        M = L.copy()
        P = np.ones_like(L)
    else:
        rng = np.random.default_rng(cfg.seed)
        w, M, P = (rng.uniform(0.5, 1.5, size=L.size) for _ in range(3))
    w = w / np.sum(w * L)
    M = M / M.sum()
    return w, M, P
