# modules/flows.py

from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from core.errors import FlowTableError, MissingFlowPair, NegativeFlow
from models import FlowTable

COLUMNS = ("source", "dest", "value")


def read_flow_csv(path: str | Path, labels: Optional[Sequence[str]] = None) -> FlowTable:
    """Load a long-format `source,dest,value` table; every ordered pair must be present."""
    path = Path(path)
    try:
        df = pd.read_csv(path, dtype={"source": str, "dest": str})
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as err:
        raise FlowTableError(f"cannot read flow table {path}: {err}") from err

    missing_cols = [c for c in COLUMNS if c not in df.columns]
    if missing_cols:
        raise FlowTableError(f"{path}: missing column(s) {', '.join(missing_cols)}")
    df["value"] = pd.to_numeric(df["value"], errors="coerce")
    if df["value"].isna().any():
        bad = df[df["value"].isna()].iloc[0]
        raise FlowTableError(f"{path}: non-numeric value for {bad['source']}->{bad['dest']}")

    dupes = df[df.duplicated(subset=["source", "dest"], keep=False)]
    if not dupes.empty:
        row = dupes.iloc[0]
        raise FlowTableError(f"{path}: duplicate pair {row['source']}->{row['dest']}")

    if labels is None:
        labels = list(dict.fromkeys(list(df["source"]) + list(df["dest"])))
    labels = list(labels)
    unknown = sorted((set(df["source"]) | set(df["dest"])) - set(labels))
    if unknown:
        raise FlowTableError(f"{path}: unknown country label(s) {', '.join(unknown)}")

    wide = df.pivot(index="source", columns="dest", values="value").reindex(index=labels, columns=labels)
    values = wide.to_numpy(dtype=float)
    holes = np.argwhere(np.isnan(values))
    if holes.size:
        raise MissingFlowPair([(labels[s], labels[d]) for s, d in holes])
    neg = np.argwhere(values < 0)
    if neg.size:
        s, d = neg[0]
        raise NegativeFlow(labels[s], labels[d], values[s, d])
    return FlowTable(values=values, labels=tuple(labels))


def flow_frame(table: FlowTable) -> pd.DataFrame:
    n = len(table.labels)
    return pd.DataFrame({
        "source": np.repeat(table.labels, n),
        "dest": np.tile(table.labels, n),
        "value": np.asarray(table.values).ravel(),
    })


def write_flow_csv(table: FlowTable, path: str | Path, digits: int = 12) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    flow_frame(table).to_csv(path, index=False, float_format=f"%.{digits}g", lineterminator="\n")
    return path
