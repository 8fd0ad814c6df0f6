# modules/commands.py

import numpy as np
import pandas as pd
from tqdm import tqdm

from core.context import RunContext
from core.errors import BGPError, ConfigError, SolverError
from core.logger import log
from core.loop import solve_bgp
from models import CalibrationTargets
from modules.analysis import growth_rate, welfare_decomposition
from modules.calibration import fit_free_params, head_ries_costs, tau_change_matrix
from modules.flows import read_flow_csv
from modules.params import validate_params
from modules.report import (
    RunWriter,
    equilibrium_frame,
    equilibrium_summary,
    print_equilibrium,
    print_rows,
    print_welfare,
    welfare_frame,
)
from modules.scenario import SweepSpec, resolve_path


def _writer(ctx: RunContext) -> RunWriter:
    return RunWriter(ctx.out_dir, ctx.formats, ctx.digits)


def _solve(ctx: RunContext, params, writer: RunWriter, tag: str = ""):
    """Solve one leg; on non-convergence write the partial trace before re-raising."""
    name = f"trace{tag}"
    try:
        eq, trace = solve_bgp(params, ctx.solver)
    except SolverError as err:
        if err.trace is not None:
            writer.trace(err.trace, name)
        log("solve", f"no convergence{(' (' + tag.strip('_') + ')') if tag else ''}: {err}", level="error")
        raise
    writer.trace(trace, name)
    return eq, trace


def _write_equilibrium(writer: RunWriter, eq, dec, tag: str = "") -> None:
    writer.table(f"equilibrium{tag}", equilibrium_frame(eq, dec))
    writer.shares(f"lambdaF{tag}", eq.shares.lambdaF, eq.labels)
    writer.shares(f"lambdaM{tag}", eq.shares.lambdaM, eq.labels)


def cmd_solve(ctx: RunContext) -> int:
    params = validate_params(ctx.params())
    writer = _writer(ctx)
    eq, trace = _solve(ctx, params, writer)
    dec = growth_rate(eq.params, eq)
    _write_equilibrium(writer, eq, dec)
    writer.summary({"scenario": ctx.name, "command": "solve", "converged": True,
                    "oscillation": trace.oscillation, **equilibrium_summary(eq)})
    writer.close()
    if not ctx.quiet:
        print_equilibrium(eq, dec)
    return 0


def cmd_counterfactual(ctx: RunContext) -> int:
    if ctx.scenario.shock is None:
        raise ConfigError("shock: the counterfactual command needs a shock block")
    base = validate_params(ctx.params())
    new = validate_params(ctx.shocked(base))
    writer = _writer(ctx)

    eq_base, _ = _solve(ctx, base, writer, "_base")
    eq_new, _ = _solve(ctx, new, writer, "_shock")
    report = welfare_decomposition(base, eq_base, eq_new)

    _write_equilibrium(writer, eq_base, growth_rate(base, eq_base), "_base")
    _write_equilibrium(writer, eq_new, growth_rate(new, eq_new), "_shock")
    writer.matrix("tau_shock", new.tau, new.labels)
    writer.table("welfare", welfare_frame(report))
    writer.summary({
        "scenario": ctx.name,
        "command": "counterfactual",
        "g_base": report.g_base,
        "g_shock": report.g_new,
        "delta_g_pp": report.delta_g_pp,
        "base": equilibrium_summary(eq_base),
        "shock": equilibrium_summary(eq_new),
    })
    writer.close()
    if not ctx.quiet:
        print_welfare(report)
    return 0


def cmd_calibrate(ctx: RunContext) -> int:
    sc = ctx.scenario
    spec = sc.params
    if spec.flows is None:
        raise ConfigError("params.flows: the calibrate command needs a flow table")
    theta = ctx.theta or spec.theta
    convention = spec.head_ries.convention
    writer = _writer(ctx)

    before = read_flow_csv(resolve_path(ctx.base_dir, spec.flows), sc.countries)
    tau = head_ries_costs(before, theta, spec.alpha, convention)
    writer.matrix("tau", tau, before.labels)
    payload = {"scenario": ctx.name, "command": "calibrate", "head_ries_convention": convention}

    if sc.shock is not None and sc.shock.flows is not None:
        after = read_flow_csv(resolve_path(ctx.base_dir, sc.shock.flows), sc.countries)
        change = tau_change_matrix(before, after, theta, spec.alpha, convention)
        writer.matrix("tau_change", change, before.labels)
        off = ~np.eye(len(before.labels), dtype=bool)
        payload["tau_change_range"] = [float(change[off].min()), float(change[off].max())] if off.any() else [0.0, 0.0]

    if sc.targets is not None:
        targets = CalibrationTargets(wages=sc.targets.wages, growth=sc.targets.growth, weights=sc.targets.weights)
        partial = ctx.params(require_psi=False)
        fit = fit_free_params(partial, targets, ctx.solver, ctx.calibration, progress=not ctx.quiet)
        writer.table("fit", pd.DataFrame({
            "country": list(partial.labels),
            "T": fit.T,
            "wage_target": targets.wages,
            "wage_residual": fit.wage_residuals,
        }))
        payload.update({"psi": fit.psi, "objective": fit.objective,
                        "growth_residual": fit.growth_residual, "evaluations": fit.evaluations})
        if not ctx.quiet:
            print_rows(f"Fitted T (psi = {fit.psi:.6g})", ("country", "T", "wage residual"),
                       zip(partial.labels, fit.T, fit.wage_residuals))

    writer.summary(payload)
    writer.close()
    return 0


def cmd_sweep(ctx: RunContext) -> int:
    """g*(tau) over a grid of multipliers on the off-diagonal trade costs."""
    base = validate_params(ctx.params())
    grid = (ctx.scenario.sweep or SweepSpec()).grid()
    off = ~np.eye(base.n, dtype=bool)
    rows = []
    for m in tqdm(grid, desc="sweep", disable=ctx.quiet):
        tau = np.array(base.tau, dtype=float)
        tau[off] *= m
        row = {"multiplier": float(m), "tau_mean": float(tau[off].mean()) if off.any() else 1.0}
        try:
            params = validate_params(base.replace(tau=tau))
            eq, trace = solve_bgp(params, ctx.solver)
            dec = growth_rate(params, eq)
            row.update({"converged": True, "g": eq.g, "outer_iterations": len(trace.outer)})
            for i, c in enumerate(eq.labels):
                row[f"M_{c}"] = eq.M[i]
                row[f"ek_factor_{c}"] = dec.ek_factor[i]
                row[f"romer_domestic_{c}"] = dec.romer_domestic_factor[i]
                row[f"romer_global_{c}"] = dec.romer_global[i]
        except BGPError as err:
            log("sweep", f"multiplier {m:g}: {err}", level="warning")
            row.update({"converged": False, "g": np.nan, "outer_iterations": 0})
        rows.append(row)

    df = pd.DataFrame(rows)
    writer = _writer(ctx)
    writer.table("sweep", df)
    g = df["g"].to_numpy()
    ok = np.isfinite(g)
    writer.summary({
        "scenario": ctx.name,
        "command": "sweep",
        "theta": base.theta,
        "points": len(df),
        "failed": int((~ok).sum()),
        "g_decreasing": bool(np.all(np.diff(g[ok]) < 0)) if ok.sum() > 1 else None,
    })
    writer.close()
    if not ctx.quiet:
        print_rows(f"g*(tau), theta = {base.theta:g}", ("multiplier", "g*"), zip(df["multiplier"], df["g"]))
    return 0


COMMANDS = {
    "solve": cmd_solve,
    "counterfactual": cmd_counterfactual,
    "calibrate": cmd_calibrate,
    "sweep": cmd_sweep,
}
