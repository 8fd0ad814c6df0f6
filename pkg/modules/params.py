# modules/params.py

import math
from typing import List

import numpy as np
from scipy.special import gammaln

from core.errors import GammaDiverges, ParamIssue, ParamValidationError
from models import ModelParams, ValidatedParams

TAU_RTOL = 1e-12


def eta_of(alpha: float) -> float:
    return 1.0 / (1.0 - alpha)


def gamma_constant(theta: float, sigma: float) -> float:
    """Price-index constant Gamma((theta + 1 - sigma) / theta) ** (1 / (1 - sigma))."""
    if theta + 1.0 - sigma <= 0.0:
        raise GammaDiverges(theta, sigma)
    if sigma == 1.0:
        raise ParamValidationError([ParamIssue("SigmaEqualsOne", "sigma", "sigma = 1 leaves gamma undefined")])
    return math.exp(gammaln((theta + 1.0 - sigma) / theta) / (1.0 - sigma))


def _shape_issues(p: ModelParams) -> List[ParamIssue]:
    issues = []
    T, L, tau = np.asarray(p.T), np.asarray(p.L), np.asarray(p.tau)
    if T.ndim != 1 or T.size < 1:
        issues.append(ParamIssue("DimensionMismatch", "T", f"expected a non-empty vector, got shape {T.shape}"))
        return issues
    n = T.size
    if L.shape != (n,):
        issues.append(ParamIssue("DimensionMismatch", "L", f"expected length {n}, got shape {L.shape}"))
    if tau.shape != (n, n):
        issues.append(ParamIssue("DimensionMismatch", "tau", f"expected {n}x{n}, got shape {tau.shape}"))
    if len(p.labels) != n:
        issues.append(ParamIssue("DimensionMismatch", "labels", f"expected {n} labels, got {len(p.labels)}"))
    elif len(set(p.labels)) != n:
        issues.append(ParamIssue("DimensionMismatch", "labels", "country labels must be unique"))
    return issues


def validate_params(p: ModelParams) -> ValidatedParams:
    """Check structural assumptions and attach eta and gamma.

    Every problem found is reported at once through ParamValidationError.issues.
    """
    if isinstance(p, ValidatedParams):
        return p

    issues = _shape_issues(p)
    if issues:
        raise ParamValidationError(issues)

    for name in ("theta", "sigma", "rho", "psi"):
        value = getattr(p, name)
        if not (np.isfinite(value) and value > 0):
            issues.append(ParamIssue("NonPositiveParam", name, f"must be positive and finite, got {value!r}"))
    if not (0.0 < p.alpha < 1.0):
        issues.append(ParamIssue("NonPositiveParam", "alpha", f"must lie in (0, 1), got {p.alpha!r}"))
    for name in ("T", "L"):
        vec = getattr(p, name)
        if not np.all(np.isfinite(vec)) or np.any(vec <= 0):
            issues.append(ParamIssue("NonPositiveParam", name, "entries must be positive and finite"))

    tau = p.tau
    if np.any(~np.isfinite(tau)):
        issues.append(ParamIssue("NonPositiveParam", "tau", "entries must be finite"))
    else:
        if not np.allclose(np.diag(tau), 1.0, rtol=0.0, atol=TAU_RTOL):
            issues.append(ParamIssue("DiagonalTauNotOne", "tau", "domestic trade costs must equal 1"))
        if not np.allclose(tau, tau.T, rtol=TAU_RTOL, atol=0.0):
            i, j = np.unravel_index(np.argmax(np.abs(tau - tau.T)), tau.shape)
            issues.append(ParamIssue(
                "AsymmetricTau", "tau",
                f"tau[{p.labels[i]},{p.labels[j]}]={tau[i, j]:.6g} differs from tau[{p.labels[j]},{p.labels[i]}]={tau[j, i]:.6g}",
            ))
        if np.any(tau < 1.0 - TAU_RTOL):
            issues.append(ParamIssue("TauBelowOne", "tau", f"minimum entry {tau.min():.6g} is below 1"))

    if p.sigma == 1.0:
        issues.append(ParamIssue("SigmaEqualsOne", "sigma", "sigma = 1 leaves gamma undefined"))
    elif p.theta + 1.0 - p.sigma <= 0.0:
        issues.append(ParamIssue("GammaDiverges", "sigma", f"theta + 1 - sigma = {p.theta + 1 - p.sigma:.6g} must be positive"))

    if issues:
        raise ParamValidationError(issues)

    data = {name: getattr(p, name) for name in ModelParams.model_fields}
    return ValidatedParams(**data, eta=eta_of(p.alpha), gamma=gamma_constant(p.theta, p.sigma))
