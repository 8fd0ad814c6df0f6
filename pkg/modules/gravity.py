# modules/gravity.py
#
# Static price and share algebra. Matrices are indexed [source, destination].
# Everything that can under- or overflow at extreme trade costs is evaluated
# in logs; shares are normalized by scipy's softmax, which subtracts the
# column max before exponentiating.

from typing import Tuple

import numpy as np
from scipy.special import logsumexp, softmax

from core.errors import DivergenceDetected
from models import Equilibrium, FlowTable, PriceSystem, ShareMatrices, ValidatedParams


def one_minus_eta(params: ValidatedParams) -> float:
    # exact form of 1 - 1/(1 - alpha)
    return -params.alpha / (1.0 - params.alpha)


# --- log-space kernels used by the solver loops ---

def log_monopolist_prices(params: ValidatedParams, log_P: np.ndarray) -> np.ndarray:
    return np.log(params.tau) + log_P[:, None] - np.log(params.alpha)


def log_composite_prices(params: ValidatedParams, M: np.ndarray, log_P: np.ndarray) -> np.ndarray:
    k = one_minus_eta(params)
    z = np.log(M)[:, None] + k * log_monopolist_prices(params, log_P)
    return logsumexp(z, axis=0) / k


def log_unit_costs(params: ValidatedParams, w: np.ndarray, log_PM: np.ndarray) -> np.ndarray:
    """log of tau_sd * PM_s**alpha * w_s**(1 - alpha)."""
    a = params.alpha
    return np.log(params.tau) + (a * log_PM + (1.0 - a) * np.log(w))[:, None]


def _final_kernel(params: ValidatedParams, w: np.ndarray, log_PM: np.ndarray) -> np.ndarray:
    return np.log(params.T)[:, None] - params.theta * log_unit_costs(params, w, log_PM)


def log_final_price_index(params: ValidatedParams, w: np.ndarray, log_PM: np.ndarray) -> np.ndarray:
    return np.log(params.gamma) - logsumexp(_final_kernel(params, w, log_PM), axis=0) / params.theta


def log_price_map(params: ValidatedParams, w: np.ndarray, M: np.ndarray, log_P: np.ndarray) -> np.ndarray:
    """One pass of the final-price fixed point: P -> P(w, PM(M, P))."""
    return log_final_price_index(params, w, log_composite_prices(params, M, log_P))


def share_arrays(params: ValidatedParams, w: np.ndarray, M: np.ndarray,
                 log_P: np.ndarray, log_PM: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    k = one_minus_eta(params)
    lamF = softmax(_final_kernel(params, w, log_PM), axis=0)
    lamM = softmax(np.log(M)[:, None] + k * log_monopolist_prices(params, log_P), axis=0)
    return lamF, lamM


def shares_from_logs(params: ValidatedParams, w: np.ndarray, M: np.ndarray,
                     log_P: np.ndarray, log_PM: np.ndarray) -> ShareMatrices:
    lamF, lamM = share_arrays(params, w, M, log_P, log_PM)
    return ShareMatrices(lambdaF=lamF, lambdaM=lamM)


# --- public level-space operations ---

def monopolist_prices(params: ValidatedParams, P: np.ndarray) -> np.ndarray:
    return params.tau * np.asarray(P, dtype=float)[:, None] / params.alpha


def composite_intermediate_prices(params: ValidatedParams, M: np.ndarray, P: np.ndarray) -> np.ndarray:
    return np.exp(log_composite_prices(params, np.asarray(M, float), np.log(P)))


def final_price_index(params: ValidatedParams, w: np.ndarray, PM: np.ndarray) -> np.ndarray:
    return np.exp(log_final_price_index(params, np.asarray(w, float), np.log(PM)))


def trade_shares_final(params: ValidatedParams, w: np.ndarray, PM: np.ndarray) -> np.ndarray:
    return softmax(_final_kernel(params, np.asarray(w, float), np.log(PM)), axis=0)


def trade_shares_intermediate(params: ValidatedParams, M: np.ndarray, P: np.ndarray) -> np.ndarray:
    z = np.log(M)[:, None] + one_minus_eta(params) * log_monopolist_prices(params, np.log(P))
    return softmax(z, axis=0)


def price_system(params: ValidatedParams, M: np.ndarray, P: np.ndarray) -> PriceSystem:
    return PriceSystem(
        P=P,
        PM=composite_intermediate_prices(params, M, P),
        pM=monopolist_prices(params, P),
    )


def static_shares(params: ValidatedParams, w: np.ndarray, M: np.ndarray, P: np.ndarray) -> ShareMatrices:
    log_P = np.log(P)
    return shares_from_logs(params, np.asarray(w, float), np.asarray(M, float), log_P,
                            log_composite_prices(params, np.asarray(M, float), log_P))


# --- circular flow and national accounts ---

def sales_operator(params: ValidatedParams, lamF: np.ndarray, lamM: np.ndarray) -> np.ndarray:
    """Column-stochastic map from gross sales to gross sales, S = B S."""
    a = params.alpha
    return lamF @ ((1.0 - a) * np.eye(params.n) + a * lamM)


def stationary_distribution(B: np.ndarray) -> np.ndarray:
    """Perron vector of a column-stochastic matrix by Grassmann-Taksar-Heyman elimination.

    Only sums of nonnegative terms are formed, so the result stays accurate when
    off-diagonal flows are tiny next to the diagonal.
    """
    A = np.array(B.T, dtype=float)
    n = A.shape[0]
    for k in range(n - 1, 0, -1):
        out = A[k, :k].sum()
        if not out > 0.0:
            raise DivergenceDetected("trade network is disconnected; gross sales are indeterminate")
        A[:k, k] /= out
        A[:k, :k] += np.outer(A[:k, k], A[k, :k])
    pi = np.zeros(n)
    pi[0] = 1.0
    for k in range(1, n):
        pi[k] = pi[:k] @ A[:k, k]
    return pi / pi.sum()


def circular_flow_arrays(params: ValidatedParams, lamF: np.ndarray,
                         lamM: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    a = params.alpha
    S = stationary_distribution(sales_operator(params, lamF, lamM)) / (1.0 - a)
    E = (1.0 - a) * S + a * lamM @ S
    return S, E


def circular_flow(params: ValidatedParams, shares: ShareMatrices) -> Tuple[np.ndarray, np.ndarray]:
    """Gross sales S and absorption E consistent with current shares, with sum(S) (1 - alpha) = 1."""
    return circular_flow_arrays(params, shares.lambdaF, shares.lambdaM)


def profits(params: ValidatedParams, shares: ShareMatrices, S: np.ndarray) -> np.ndarray:
    return (params.alpha / params.eta) * shares.lambdaM @ S


def national_accounts(params: ValidatedParams, w: np.ndarray, shares: ShareMatrices) -> dict:
    """Accounts implied by wages alone: S from the labour share, E = wL + IR, GDP = wL + profits."""
    a = params.alpha
    labor = w * params.L
    S = labor / (1.0 - a)
    IR = a * shares.lambdaM @ S
    return {"S": S, "E": labor + IR, "GDP": labor + (1.0 - a) * IR, "IR": IR}


def _equilibrium_shares(params: ValidatedParams, eq: Equilibrium) -> ShareMatrices:
    return static_shares(params, eq.w, eq.M, eq.P)


def goods_market_residual(params: ValidatedParams, eq: Equilibrium) -> np.ndarray:
    """GDP minus payments to labour and profits, per country."""
    sh = _equilibrium_shares(params, eq)
    acc = national_accounts(params, eq.w, sh)
    paid = (1.0 - params.alpha) * sh.lambdaF @ acc["E"] + (params.alpha / params.eta) * sh.lambdaM @ acc["S"]
    return acc["GDP"] - paid


def trade_balance_residual(params: ValidatedParams, eq: Equilibrium) -> np.ndarray:
    """Exports minus imports of final and intermediate goods, per country."""
    a = params.alpha
    sh = _equilibrium_shares(params, eq)
    acc = national_accounts(params, eq.w, sh)
    S, E = acc["S"], acc["E"]
    lamF_off = sh.lambdaF - np.diag(np.diag(sh.lambdaF))
    lamM_off = sh.lambdaM - np.diag(np.diag(sh.lambdaM))
    exports = lamF_off @ E + a * lamM_off @ S
    imports = (1.0 - np.diag(sh.lambdaF)) * E + a * (1.0 - np.diag(sh.lambdaM)) * S
    return exports - imports


def model_flows(eq: Equilibrium) -> FlowTable:
    """Model-implied final-goods expenditure flows, lambdaF_sd * E_d."""
    return FlowTable(values=eq.shares.lambdaF * eq.E[None, :], labels=eq.labels)
