"""Partition agreement, selection tables and BIC tables in the usual layouts."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

KIND_ORDER = ("DWM", "DM", "CM")
KIND_NAMES = {"CM": "Continuous", "DM": "Discrete", "DWM": "Discrete (repeats)"}


def _comb2(x):
    x = np.asarray(x, dtype=float)
    return x * (x - 1.0) / 2.0


def adjusted_rand_index(a: Sequence, b: Sequence) -> float:
    """Hubert-Arabie adjusted Rand index between two labelings."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("labelings must be 1-d and of equal length")
    if a.size < 2:
        raise ValueError("need at least two items")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1))
    np.add.at(table, (ai, bi), 1)
    index = _comb2(table).sum()
    rows = _comb2(table.sum(axis=1)).sum()
    cols = _comb2(table.sum(axis=0)).sum()
    expected = rows * cols / _comb2(a.size)
    top = (rows + cols) / 2.0
    if top == expected:
        # both partitions trivial (all-in-one or all singletons)
        return 1.0
    return float((index - expected) / (top - expected))


@dataclass
class EvalSummary:
    kind: str
    aris: list[float]
    selected: list[int]
    g_range: tuple[int, int]

    @property
    def mean_ari(self) -> float:
        return float(np.mean(self.aris))

    @property
    def sd_ari(self) -> float:
        return float(np.std(self.aris, ddof=1)) if len(self.aris) > 1 else 0.0

    @property
    def median_ari(self) -> float:
        return float(np.median(self.aris))

    @property
    def histogram(self) -> list[int]:
        lo, hi = self.g_range
        return [self.selected.count(g) for g in range(lo, hi + 1)]


def selection_table(kind: str, selected: Sequence[int], aris: Sequence[float], g_range=(1, 5)) -> EvalSummary:
    if len(selected) != len(aris):
        raise ValueError("one selected G per ARI value")
    lo, hi = g_range
    if any(not lo <= g <= hi for g in selected):
        raise ValueError("selected G outside the swept range")
    return EvalSummary(kind, [float(x) for x in aris], [int(g) for g in selected], (lo, hi))


def _num(x: float) -> str:
    return repr(float(x))


def format_selection_table(rows: Sequence[tuple[str, EvalSummary]]) -> str:
    """Aligned text: setting, model, one count column per G, mean ARI (sd)."""
    if not rows:
        return ""
    lo, hi = rows[0][1].g_range
    header = ["Setting", "Model"] + [f"G={g}" for g in range(lo, hi + 1)] + ["ARI (sd)"]
    body = [
        [setting, KIND_NAMES.get(s.kind, s.kind)]
        + [str(c) for c in s.histogram]
        + [f"{s.mean_ari:.3f}({s.sd_ari:.3f})"]
        for setting, s in rows
    ]
    return _align([header] + body)


def selection_rows(rows: Sequence[tuple[str, EvalSummary]]) -> list[list[str]]:
    if not rows:
        return []
    lo, hi = rows[0][1].g_range
    out = [["setting", "kind"] + [f"G{g}" for g in range(lo, hi + 1)] + ["mean_ari", "sd_ari", "median_ari", "replicates"]]
    for setting, s in rows:
        out.append(
            [setting, s.kind] + [str(c) for c in s.histogram]
            + [_num(s.mean_ari), _num(s.sd_ari), _num(s.median_ari), str(len(s.aris))]
        )
    return out


@dataclass
class BicTable:
    groups: list[int]
    rows: dict[str, dict[int, float | None]]

    def best(self, kind: str) -> int | None:
        row = {g: v for g, v in self.rows[kind].items() if v is not None}
        if not row:
            return None
        top = max(row.values())
        tol = 1e-9 * max(1.0, abs(top))
        return min(g for g, v in row.items() if v >= top - tol)

    def spread(self, kind: str) -> float:
        vals = [v for v in self.rows[kind].values() if v is not None]
        return max(vals) - min(vals)

    def format(self) -> str:
        header = [""] + [f"G={g}" for g in self.groups]
        body = []
        for kind, row in self.rows.items():
            best = self.best(kind)
            cells = []
            for g in self.groups:
                v = row.get(g)
                cell = "failed" if v is None else f"{v:.2f}"
                cells.append(cell + ("*" if g == best else ""))
            body.append([kind] + cells)
        return _align([header] + body) + "* marks the BIC-selected G in each row\n"

    def records(self) -> list[list[str]]:
        out = [["kind", "G", "bic", "selected"]]
        for kind, row in self.rows.items():
            best = self.best(kind)
            for g in self.groups:
                v = row.get(g)
                out.append([kind, str(g), "" if v is None else _num(v), str(int(g == best))])
        return out


def bic_table(fits: Mapping[str, Mapping[int, float | None]]) -> BicTable:
    """Rows ordered DWM, DM, CM (others after), columns the union of G values."""
    kinds = [k for k in KIND_ORDER if k in fits] + [k for k in fits if k not in KIND_ORDER]
    groups = sorted({g for row in fits.values() for g in row})
    return BicTable(groups, {k: dict(fits[k]) for k in kinds})


def _align(rows: list[list[str]]) -> str:
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = []
    for r in rows:
        cells = [r[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(r[1:], widths[1:])]
        lines.append("  ".join(cells).rstrip())
    return "\n".join(lines) + "\n"


def to_tsv(rows: Sequence[Sequence[str]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, delimiter="\t", lineterminator="\n")
    writer.writerows(rows)
    return buf.getvalue()


def quantiles(values: Sequence[float]) -> dict[str, float]:
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return {k: math.nan for k in ("min", "q1", "median", "q3", "max")}
    q = np.quantile(v, [0.0, 0.25, 0.5, 0.75, 1.0])
    return dict(zip(("min", "q1", "median", "q3", "max"), map(float, q)))
