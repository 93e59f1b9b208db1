"""
Report emission: JSON records, result tables in the published layouts, plot-ready data and console output.
"""

import json
import logging
import os
from typing import Any, Dict, Optional

import numpy as np
import pandas as pd
from rich.console import Console
from rich.table import Table

logger = logging.getLogger(__name__)


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, float) and not np.isfinite(value):
        return None
    return value


def write_json(record: Dict[str, Any], path: str) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(_jsonable(record), f, indent=2)
    logger.info(f"Wrote {path}")
    return path


def dumps(record: Dict[str, Any]) -> str:
    return json.dumps(_jsonable(record), indent=2)


def type1_table(frame: pd.DataFrame) -> pd.DataFrame:
    """Rows N, columns (variant, alpha): the layout of a Type I error table."""
    table = frame.pivot_table(index="n_total", columns=["variant", "alpha"], values="rate", aggfunc="first")
    table.columns = [f"{variant} alpha={alpha:g}" for variant, alpha in table.columns]
    return table.reset_index()


def power_x_axis(frame: pd.DataFrame) -> str:
    return "multiplier" if frame["multiplier"].nunique() > 1 else "n_total"


def power_table(frame: pd.DataFrame) -> pd.DataFrame:
    """Rows N (or multiplier), columns (variant, rho_outcome), plus alpha when several levels were run."""
    x = power_x_axis(frame)
    if frame["alpha"].nunique() > 1:
        table = frame.pivot_table(
            index=x, columns=["variant", "rho_outcome", "alpha"], values="rate", aggfunc="first"
        )
        table.columns = [f"{variant} rho={rho:g} alpha={alpha:g}" for variant, rho, alpha in table.columns]
    else:
        table = frame.pivot_table(index=x, columns=["variant", "rho_outcome"], values="rate", aggfunc="first")
        table.columns = [f"{variant} rho={rho:g}" for variant, rho in table.columns]
    return table.reset_index()


def plot_data(frame: pd.DataFrame) -> pd.DataFrame:
    """Long format ``x, rho_outcome, variant, power`` (and ``alpha`` when several) for external plotting."""
    x = power_x_axis(frame)
    data = frame.rename(columns={x: "x", "rate": "power"})
    columns = ["x", "rho_outcome", "variant", "power"]
    if frame["alpha"].nunique() > 1:
        columns.append("alpha")
    return data[columns].assign(x_axis=x)


def print_frame(frame: pd.DataFrame, title: str, console: Optional[Console] = None, digits: int = 3):
    console = console or Console()
    table = Table(title=title)
    for column in frame.columns:
        table.add_column(str(column), justify="right")
    for row in frame.itertuples(index=False):
        table.add_row(*(f"{v:.{digits}f}" if isinstance(v, float) else str(v) for v in row))
    console.print(table)


def print_test_result(record: Dict[str, Any], console: Optional[Console] = None):
    """Human-readable summary of a test record produced by ``TestResult.to_dict``."""
    console = console or Console()
    summary = Table(title="Longitudinal rank-sum test", show_header=False)
    summary.add_column("field")
    summary.add_column("value", justify="right")
    summary.add_row("n_x / n_y", f"{record['n_x']} / {record['n_y']}")
    summary.add_row("visits x outcomes", f"{record['T']} x {record['K']}")
    summary.add_row("Z", f"{record['z']:.4f}")
    summary.add_row("one-sided p", f"{record['p_value']:.4g}")
    if "p_value_two_sided" in record:
        summary.add_row("two-sided p (extension)", f"{record['p_value_two_sided']:.4g}")
    summary.add_row("theta_bar", f"{record['theta_bar']:.4f}")
    summary.add_row("weighted rank difference", f"{record['numerator']:.4f}")
    summary.add_row("standard error", f"{record['standard_error']:.4f}")
    if "reject" in record:
        summary.add_row(f"reject at alpha={record['alpha']:g}", str(record["reject"]))
    console.print(summary)

    effects = Table(title="Relative treatment effects")
    effects.add_column("visit")
    effects.add_column("weight", justify="right")
    for outcome in record["outcomes"]:
        effects.add_column(outcome, justify="right")
    effects.add_column("theta_t", justify="right")
    for t, visit in enumerate(record["visits"]):
        effects.add_row(
            visit,
            f"{record['weights'][t]:.3f}",
            *(f"{v:.4f}" for v in record["theta_tk"][t]),
            f"{record['theta_t'][t]:.4f}",
        )
    console.print(effects)
