"""Coherence table: mean, standard deviation and best value per quantity.

Lineshape fits feed two columns: Michelson (``mi``) fits the above-band
column, resonance scans (``scan``) the resonant one. Lifetime fits
(``tcspc``) add T1 and the Fourier-limited rows to the above-band column.
"Best" is the set of values of the most coherent emitter (longest T2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .core import FitResult, VoigtParams
from .lineshape import coherence_time

__all__ = ["AggregationError", "CoherenceTable", "build_table", "format_table", "LINESHAPE_ROWS", "FT_ROWS"]

LINESHAPE_ROWS = [("gamma_fwhm", "Gamma_FWHM (GHz)"), ("t2", "T2 (ns)"),
                  ("gamma_inhom", "Gamma_inhom (GHz)"), ("gamma_hom", "Gamma_hom (GHz)")]
FT_ROWS = [("t1", "T1 (ns)"), ("gamma_ft", "Gamma_FWHM,FT (GHz)"), ("t2_ft", "T2,FT (ns)")]
COLUMNS = {"mi": "AB", "scan": "RF"}


class AggregationError(ValueError):
    pass


@dataclass
class Cell:
    mean: Optional[float] = None
    std: Optional[float] = None
    best: Optional[float] = None
    n: int = 0

    def as_dict(self):
        return {"mean": self.mean, "std": self.std, "best": self.best, "n": self.n}


@dataclass
class CoherenceTable:
    columns: Dict[str, Dict[str, Cell]] = field(default_factory=dict)
    t2_of_means: Dict[str, Optional[float]] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "columns": {c: {r: cell.as_dict() for r, cell in rows.items()} for c, rows in self.columns.items()},
            "t2_of_mean_widths": dict(self.t2_of_means),
        }


def _value(fit: FitResult, key: str) -> float:
    d = fit.derived.get(key)
    if d is None or d.get("value") is None:
        raise AggregationError(f"{fit.model} fit lacks derived quantity {key!r}")
    return float(d["value"])


def _cell(values: Sequence[float], best: Optional[float]) -> Cell:
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return Cell()
    std = float(v.std(ddof=1)) if v.size > 1 else None
    return Cell(float(v.mean()), std, best, int(v.size))


def build_table(fits: Sequence[FitResult]) -> CoherenceTable:
    """Aggregate per-emitter ``mi``, ``scan`` and ``tcspc`` fits."""
    if not fits:
        raise AggregationError("no fits to aggregate")
    groups: Dict[str, List[FitResult]] = {"mi": [], "scan": [], "tcspc": []}
    for f in fits:
        if f.model not in groups:
            raise AggregationError(f"cannot aggregate {f.model!r} fits into the coherence table")
        groups[f.model].append(f)

    table = CoherenceTable()
    for model, col in COLUMNS.items():
        fs = groups[model]
        if not fs:
            continue
        vals = {k: [_value(f, k) for f in fs] for k, _ in LINESHAPE_ROWS}
        i_best = int(np.argmax(vals["t2"]))
        rows = {k: _cell(vals[k], vals[k][i_best]) for k, _ in LINESHAPE_ROWS}
        table.columns[col] = rows
        gh, gi = float(np.mean(vals["gamma_hom"])), float(np.mean(vals["gamma_inhom"]))
        table.t2_of_means[col] = coherence_time(VoigtParams(gh, gi)) if gh > 0 or gi > 0 else None
    if groups["tcspc"]:
        col = table.columns.setdefault("AB", {k: Cell() for k, _ in LINESHAPE_ROWS})
        for k, _ in FT_ROWS:
            col[k] = _cell([_value(f, k) for f in groups["tcspc"]], None)
    return table


def _fmt(x: Optional[float]) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "-"
    return f"{x:.3g}"


def format_table(table: CoherenceTable, delimiter: str = "\t") -> str:
    """Delimited text: one row per quantity, (mean, std, best) per column."""
    cols = [c for c in ("AB", "RF") if c in table.columns]
    head = ["quantity"] + [f"{c}_{s}" for c in cols for s in ("mean", "std", "best")]
    lines = [delimiter.join(head)]
    for key, label in LINESHAPE_ROWS + FT_ROWS:
        if not any(key in table.columns[c] for c in cols):
            continue
        row = [label]
        for c in cols:
            cell = table.columns[c].get(key, Cell())
            row += [_fmt(cell.mean), _fmt(cell.std), _fmt(cell.best)]
        lines.append(delimiter.join(row))
    return "\n".join(lines) + "\n"
