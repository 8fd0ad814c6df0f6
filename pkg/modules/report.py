# modules/report.py

import json
import math
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
import pandas as pd
from rich.table import Table

from core.logger import console, log
from models import Equilibrium, GrowthDecomposition, SolveTrace, WelfareReport, check_column_stochastic


def _clean(value, digits: int):
    """JSON-safe value with floats rounded to `digits` significant digits."""
    if isinstance(value, dict):
        return {k: _clean(v, digits) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v, digits) for v in value]
    if isinstance(value, np.ndarray):
        return _clean(value.tolist(), digits)
    if isinstance(value, (np.floating, float)):
        x = float(value)
        return None if not math.isfinite(x) else float(f"{x:.{digits}g}")
    if isinstance(value, np.integer):
        return int(value)
    return value


class RunWriter:
    """Writes one run's tables and summary under a single output directory."""

    def __init__(self, out_dir: str | Path, formats: Sequence[str] = ("csv",), digits: int = 12):
        self.out_dir = Path(out_dir)
        self.formats = tuple(formats)
        self.digits = digits
        self.written: list[Path] = []
        self.out_dir.mkdir(parents=True, exist_ok=True)

    def table(self, name: str, df: pd.DataFrame) -> None:
        if "csv" in self.formats:
            path = self.out_dir / f"{name}.csv"
            df.to_csv(path, index=False, float_format=f"%.{self.digits}g", lineterminator="\n")
            self.written.append(path)
        if "json" in self.formats:
            path = self.out_dir / f"{name}.json"
            self._dump(path, df.to_dict(orient="records"))

    def matrix(self, name: str, mat: np.ndarray, labels: Sequence[str]) -> None:
        df = pd.DataFrame(np.asarray(mat), columns=list(labels))
        df.insert(0, "source", list(labels))
        self.table(name, df)

    def shares(self, name: str, mat: np.ndarray, labels: Sequence[str]) -> None:
        check_column_stochastic(np.asarray(mat), name)
        self.matrix(name, mat, labels)

    def summary(self, payload: dict, name: str = "summary") -> None:
        self._dump(self.out_dir / f"{name}.json", payload)

    def _dump(self, path: Path, payload) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(_clean(payload, self.digits), f, indent=2)
            f.write("\n")
        self.written.append(path)

    def trace(self, trace: SolveTrace, name: str = "trace") -> None:
        self._dump(self.out_dir / f"{name}.json", trace.model_dump())

    def close(self) -> None:
        log("report", f"wrote {len(self.written)} file(s) to {self.out_dir}")


# --- table builders ---

def equilibrium_frame(eq: Equilibrium, dec: GrowthDecomposition) -> pd.DataFrame:
    p = eq.params
    return pd.DataFrame({
        "country": list(eq.labels),
        "L": p.L,
        "T": p.T,
        "w": eq.w,
        "P": eq.P,
        "PM": eq.PM,
        "M": eq.M,
        "real_wage": eq.real_wage,
        "sales": eq.S,
        "absorption": eq.E,
        "gdp": eq.GDP,
        "profits": eq.profits,
        "gdp_per_variety": eq.R_s,
        "g": dec.g,
        "ek_factor": dec.ek_factor,
        "romer_domestic_factor": dec.romer_domestic_factor,
        "labor_part": dec.labor_part,
        "labor_part_printed": dec.labor_part_printed,
        "labor_part_proof": dec.labor_part_proof,
        "romer_global": dec.romer_global,
        "printed_rate": dec.printed_rate,
        "proof_rate": dec.proof_rate,
        "euler_rate": dec.euler_rate,
    })


def welfare_frame(rep: WelfareReport) -> pd.DataFrame:
    with np.errstate(divide="ignore", invalid="ignore"):
        ek_share = np.where(np.abs(rep.static) > 1e-12, rep.static_ek / rep.static, np.nan)
    return pd.DataFrame({
        "country": list(rep.labels),
        "transitional": rep.transitional,
        "static": rep.static,
        "static_ek": rep.static_ek,
        "static_romer": rep.static_romer,
        "static_ek_share": ek_share,
        "dynamic": rep.dynamic,
        "total": rep.total,
        "dynamic_share": rep.dynamic_share,
        "consumption_total": rep.consumption_total,
        "real_wage_change": rep.real_wage_change,
        "real_wage_change_rel_avg": rep.real_wage_change_rel_avg,
    })


def equilibrium_summary(eq: Equilibrium) -> dict:
    return {
        "countries": list(eq.labels),
        "g": eq.g,
        "R": eq.R,
        "sum_MP": eq.mp_sum,
        "M": eq.M,
        "w": eq.w,
        "residuals": dict(sorted(eq.residuals.items())),
        "iterations": dict(sorted(eq.iterations.items())),
    }


# --- console ---

def _fmt(x: float, spec: str = ".6g") -> str:
    return "n/a" if x is None or not math.isfinite(x) else format(x, spec)


def print_equilibrium(eq: Equilibrium, dec: GrowthDecomposition, title: Optional[str] = None) -> None:
    table = Table(title=title or f"BGP equilibrium, g* = {_fmt(eq.g)}")
    for col in ("country", "w", "P", "M", "w/P", "g_s", "lamF_ss", "lamM_ss"):
        table.add_column(col, justify="right")
    for i, c in enumerate(eq.labels):
        table.add_row(c, _fmt(eq.w[i]), _fmt(eq.P[i]), _fmt(eq.M[i]), _fmt(eq.real_wage[i]),
                      _fmt(dec.g[i]), _fmt(eq.shares.lambdaF[i, i], ".4f"), _fmt(eq.shares.lambdaM[i, i], ".4f"))
    console.print(table)


def print_welfare(rep: WelfareReport) -> None:
    table = Table(title=f"Welfare change, delta g = {_fmt(rep.delta_g_pp, '.4f')} pp")
    for col in ("country", "transitional", "static", "EK", "Romer", "dynamic", "total", "dyn share",
                "w/P change", "vs avg"):
        table.add_column(col, justify="right")
    for i, c in enumerate(rep.labels):
        table.add_row(c, *(_fmt(v[i], ".4g") for v in (rep.transitional, rep.static, rep.static_ek,
                                                       rep.static_romer, rep.dynamic, rep.total)),
                      _fmt(rep.dynamic_share[i], ".3f"), _fmt(rep.real_wage_change[i], ".4g"),
                      _fmt(rep.real_wage_change_rel_avg[i], ".4g"))
    console.print(table)


def print_rows(title: str, columns: Iterable[str], rows: Iterable[Sequence]) -> None:
    table = Table(title=title)
    for col in columns:
        table.add_column(str(col), justify="right")
    for row in rows:
        table.add_row(*(r if isinstance(r, str) else _fmt(r) for r in row))
    console.print(table)
