from pathlib import Path

import numpy as np
import pytest

from core.loop import solve_bgp
from models import ModelParams, SolverConfig
from modules.params import validate_params

ROOT = Path(__file__).resolve().parent.parent
SCENARIOS = ROOT / "scenarios"

# Two-country parameterization used throughout: L = (1, 1.03), T = (1, 1).
BASE_PARAMS = dict(theta=2.12, sigma=0.77, alpha=1.0 / 3.0, rho=0.03, psi=2.46)


def tau_matrix(n: int, offdiag: float) -> np.ndarray:
    tau = np.full((n, n), float(offdiag))
    np.fill_diagonal(tau, 1.0)
    return tau


def make_params(n: int = 2, tau=1.5, T=None, L=None, labels=(), **overrides):
    fields = {**BASE_PARAMS, **overrides}
    tau = tau_matrix(n, tau) if np.isscalar(tau) else np.asarray(tau, dtype=float)
    return validate_params(ModelParams(
        T=np.ones(n) if T is None else T,
        L=np.ones(n) if L is None else L,
        tau=tau,
        labels=tuple(labels),
        **fields,
    ))


def random_params(rng: np.random.Generator, n: int, tau_range=(1.1, 2.5), **overrides):
    upper = rng.uniform(*tau_range, size=(n, n))
    tau = np.triu(upper, 1)
    tau = tau + tau.T
    np.fill_diagonal(tau, 1.0)
    return make_params(n, tau=tau, T=rng.uniform(0.5, 2.0, n), L=rng.uniform(0.5, 2.0, n), **overrides)


@pytest.fixture
def params_factory():
    return make_params


@pytest.fixture
def cfg():
    return SolverConfig()


@pytest.fixture(scope="module")
def two_country():
    params = make_params(2, tau=1.5, L=[1.0, 1.03])
    eq, trace = solve_bgp(params, SolverConfig())
    return params, eq, trace


@pytest.fixture(scope="module")
def symmetric4():
    params = make_params(4, tau=2.0)
    eq, trace = solve_bgp(params, SolverConfig(seed=3))
    return params, eq, trace
