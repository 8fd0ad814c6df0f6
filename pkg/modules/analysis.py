# modules/analysis.py

from typing import Dict

import numpy as np

from core.errors import CountryMismatch, NotConverged, ParamIssue, ParamValidationError, TauNotUniform
from core.logger import log
from models import Equilibrium, GrowthDecomposition, ModelParams, StaticSplit, WelfareReport
from modules.gravity import one_minus_eta
from modules.params import validate_params

# Totals smaller than this make the dynamic share meaningless.
ZERO_TOTAL = 1e-9


# === Growth ===

def growth_rate(params: ModelParams, eq: Equilibrium) -> GrowthDecomposition:
    """Per-country growth g_s = psi * rho * GDP_s / (P_s M_s) and its components.

    GDP per variety splits into labour income and global monopoly profits.
    The labour part is also reported with (printed) and without (proof) the
    alpha ** (1 - eta) factor in place of gamma ** -eta alpha ** (eta - 1).
    The Euler rate psi * profits / (P M) - rho is kept as a diagnostic.
    """
    p = validate_params(params)
    if not eq.converged:
        raise NotConverged("growth rate requested for an unconverged equilibrium")

    a, th, eta = p.alpha, p.theta, p.eta
    PM_real = eq.P * eq.M
    profit_rate = eq.profits / PM_real
    labor_part = eq.w * p.L / PM_real
    romer_global = (a / eta) * (eq.shares.lambdaM @ eq.S) / PM_real
    g = p.psi * p.rho * (labor_part + romer_global)

    ek = (p.T / np.diag(eq.shares.lambdaF)) ** (1.0 / (th * (1.0 - a)))
    romer_dom = 1.0 / np.diag(eq.shares.lambdaM)
    labor_proof = ek * romer_dom * p.L
    labor_printed = a ** (1.0 - eta) * labor_proof
    printed = p.psi * p.rho * (labor_printed + romer_global)
    proof = p.psi * p.rho * (labor_proof + romer_global)

    gap = float(np.max(np.abs(printed - g)))
    log("analysis", f"printed labour constant moves growth by up to {gap:.3e}", level="debug")

    return GrowthDecomposition(
        labels=eq.labels,
        g=g,
        g_common=float(np.mean(g)),
        profit_rate=profit_rate,
        ek_factor=ek,
        romer_domestic_factor=romer_dom,
        labor_part=labor_part,
        labor_part_printed=labor_printed,
        labor_part_proof=labor_proof,
        romer_global=romer_global,
        printed_rate=printed,
        proof_rate=proof,
        euler_rate=p.psi * profit_rate - p.rho,
    )


def attach_growth(eq: Equilibrium) -> Equilibrium:
    dec = growth_rate(eq.params, eq)
    return eq.model_copy(update={"g_s": dec.g, "g": dec.g_common})


def real_wage_decomposition(params: ModelParams, eq: Equilibrium) -> Dict[str, np.ndarray]:
    """w/P = gamma^-eta alpha^(eta-1) (T / lamF_ss)^(1/(theta(1-alpha))) M / lamM_ss."""
    p = validate_params(params)
    ek = (p.T / np.diag(eq.shares.lambdaF)) ** (1.0 / (p.theta * (1.0 - p.alpha)))
    romer = eq.M / np.diag(eq.shares.lambdaM)
    const = p.gamma ** (-p.eta) * p.alpha ** (p.eta - 1.0)
    return {"ek": ek, "romer": romer, "constant": np.full(p.n, const), "real_wage": const * ek * romer}


# === Limit cases ===

def autarky_growth_rate(params: ModelParams, eq_single: Equilibrium, country: int = 0) -> float:
    """Euler rate (alpha psi / eta) Y_s / M_s - rho with Y_s = S_s / P_s."""
    p = validate_params(params)
    s = country
    if p.n > 1:
        leak = max(1.0 - eq_single.shares.lambdaF[s, s], 1.0 - eq_single.shares.lambdaM[s, s])
        if leak > 1e-6:
            log("analysis", f"{p.labels[s]} is not near autarky (foreign share {leak:.2e})", level="warning")
    Y = eq_single.S[s] / eq_single.P[s]
    return float(p.alpha * p.psi / p.eta * Y / eq_single.M[s] - p.rho)


def autarky_growth_closed_form(params: ModelParams, country: int = 0) -> float:
    """Autarky Euler rate from fundamentals alone."""
    p = validate_params(params)
    s = country
    scale = p.psi * p.alpha ** p.eta * p.gamma ** (-p.eta)
    return float(scale * p.T[s] ** (1.0 / (p.theta * (1.0 - p.alpha))) * p.L[s] - p.rho)


def zero_gravity_growth_rate(params: ModelParams, eq: Equilibrium) -> float:
    """World Euler rate under frictionless trade."""
    p = validate_params(params)
    if not np.allclose(p.tau, 1.0, rtol=0.0, atol=1e-12):
        raise TauNotUniform("zero-gravity growth requires tau = 1 everywhere")
    Y = eq.S / eq.P
    return float(p.alpha * p.psi / p.eta * Y.sum() / eq.M.sum() - p.rho)


def zero_gravity_excess_demand(params: ModelParams, w: np.ndarray) -> np.ndarray:
    """Z_s(w) = (lambda_s * sum(w L) - w_s L_s) / w_s under frictionless trade."""
    p = validate_params(params)
    w = np.asarray(w, dtype=float)
    kernel = np.log(p.T) - p.theta * (1.0 - p.alpha) * np.log(w)
    lam = np.exp(kernel - kernel.max())
    lam /= lam.sum()
    labor = w * p.L
    return (lam * labor.sum() - labor) / w


def symmetric_g_of_tau(params_sym: ModelParams, tau_scalar: float) -> float:
    """Closed-form BGP growth of N identical countries facing a common trade cost."""
    p = validate_params(params_sym)
    if np.ptp(p.T) > 1e-12 * p.T.max() or np.ptp(p.L) > 1e-12 * p.L.max():
        raise ParamValidationError([ParamIssue("NotSymmetric", "T,L", "countries must share T and L")])
    n, a, th = p.n, p.alpha, p.theta
    lamF_inv = 1.0 + (n - 1) * tau_scalar ** (-th)
    lamM_inv = 1.0 + (n - 1) * tau_scalar ** one_minus_eta(p)
    scale = p.psi * p.rho * (1.0 + a) * p.gamma ** (-p.eta) * a ** (p.eta - 1.0)
    return float(scale * (p.T[0] * lamF_inv) ** (1.0 / (th * (1.0 - a))) * p.L[0] * lamM_inv)


# === Welfare ===

def consumption_level(params: ModelParams, eq: Equilibrium) -> np.ndarray:
    """Real consumption on the BGP: the share 1 - rho of real GDP not spent on research."""
    p = validate_params(params)
    if not eq.converged:
        raise NotConverged("consumption requested for an unconverged equilibrium")
    return (1.0 - p.rho) * eq.GDP / eq.P


def _check_pair(eq_base: Equilibrium, eq_new: Equilibrium) -> None:
    if tuple(eq_base.labels) != tuple(eq_new.labels):
        raise CountryMismatch(f"country sets differ: {eq_base.labels} vs {eq_new.labels}")


def static_welfare_split(params: ModelParams, eq_base: Equilibrium, eq_new: Equilibrium) -> StaticSplit:
    p = validate_params(params)
    _check_pair(eq_base, eq_new)
    b, n = eq_base, eq_new
    k = one_minus_eta(p)

    T_hat = n.params.T / b.params.T
    lam_hat = np.diag(n.shares.lambdaF) / np.diag(b.shares.lambdaF)
    ek = np.log(T_hat / lam_hat) / (p.rho * (1.0 - p.alpha) * p.theta)

    mu = b.shares.lambdaM
    rel_price = (n.pM / b.pM) / (n.P / b.P)[None, :]
    romer = np.log(np.sum(mu * (n.M / b.M)[:, None] * rel_price ** k, axis=0)) / p.rho
    return StaticSplit(ek=ek, romer=romer)


def welfare_decomposition(params: ModelParams, eq_base: Equilibrium, eq_new: Equilibrium) -> WelfareReport:
    """Transitional, static and dynamic welfare change between two BGPs."""
    p = validate_params(params)
    _check_pair(eq_base, eq_new)
    rho = p.rho

    transitional = np.log(eq_new.M / eq_base.M)
    wage_change = np.log(eq_new.real_wage / eq_base.real_wage)
    static = wage_change / rho
    dg = eq_new.g - eq_base.g
    dynamic = np.full(p.n, dg / rho ** 2)
    total = transitional + static + dynamic
    with np.errstate(divide="ignore", invalid="ignore"):
        share = np.where(np.abs(total) > ZERO_TOTAL, dynamic / total, np.nan)

    split = static_welfare_split(p, eq_base, eq_new)
    c_hat = consumption_level(p, eq_new) / consumption_level(p, eq_base)

    return WelfareReport(
        labels=eq_base.labels,
        transitional=transitional,
        static=static,
        static_ek=split.ek,
        static_romer=split.romer,
        dynamic=dynamic,
        total=total,
        dynamic_share=share,
        consumption_total=np.log(c_hat) / rho + dg / rho ** 2,
        real_wage_change=wage_change,
        real_wage_change_rel_avg=wage_change - wage_change.mean(),
        g_base=eq_base.g,
        g_new=eq_new.g,
    )
