"""Trajectory CSV files and gnuplot scripts for residual curves."""
from __future__ import annotations

import csv
import io
import math
from pathlib import Path

import numpy as np

from .lindblad import COLUMNS, ResidualTable, TrajectoryRecord

HEADER = ",".join(COLUMNS)


class TrajectoryFormatError(ValueError):
    pass


def _fmt(v: float) -> str:
    return "" if math.isnan(v) else f"{v:.16e}"


def format_csv(rec: TrajectoryRecord) -> str:
    buf = io.StringIO()
    buf.write(HEADER + "\n")
    cols = [rec[c] for c in COLUMNS]
    for i in range(len(rec)):
        buf.write(",".join(_fmt(float(c[i])) for c in cols) + "\n")
    return buf.getvalue()


def write_csv(rec: TrajectoryRecord, path) -> None:
    Path(path).write_text(format_csv(rec))


def parse_csv(text: str) -> TrajectoryRecord:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise TrajectoryFormatError("empty trajectory file")
    if ",".join(rows[0]) != HEADER:
        raise TrajectoryFormatError("header does not match the trajectory format")
    data = []
    for lineno, row in enumerate(rows[1:], 2):
        if not row:
            continue
        if len(row) != len(COLUMNS):
            raise TrajectoryFormatError(f"line {lineno}: expected {len(COLUMNS)} fields, got {len(row)}")
        vals = []
        for name, cell in zip(COLUMNS, row):
            if cell == "" and name == "min_eig":
                vals.append(math.nan)
                continue
            try:
                v = float(cell)
            except ValueError:
                raise TrajectoryFormatError(f"line {lineno}: bad {name} value {cell!r}") from None
            if not math.isfinite(v):
                raise TrajectoryFormatError(f"line {lineno}: {name} is not finite")
            vals.append(v)
        data.append(vals)
    arr = np.array(data, dtype=float).reshape(len(data), len(COLUMNS))
    try:
        return TrajectoryRecord({c: arr[:, i] for i, c in enumerate(COLUMNS)})
    except ValueError as err:
        raise TrajectoryFormatError(str(err)) from None


def read_csv(path) -> TrajectoryRecord:
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise TrajectoryFormatError(f"cannot read {path}: {err}") from None
    return parse_csv(text)


def plot_script(table: ResidualTable, title: str = "Ehrenfest relations") -> str:
    """Self-contained gnuplot script: d/dt of each left side against its right side."""
    out = ["# columns of each block: t, centered d/dt of the left side, right side"]
    for i, r in enumerate(table.rows):
        out.append(f"$rel{i} << EOD")
        out.extend(f"{t:.15e} {l:.15e} {h:.15e}" for t, l, h in zip(r.t, r.lhs, r.rhs))
        out.append("EOD")
    out += [
        f'set multiplot layout {len(table.rows)},1 title "{title}"',
        "set key top right",
        "set xlabel 't'",
    ]
    for i, r in enumerate(table.rows):
        out.append(f"set ylabel 'd/dt {r.name}'")
        out.append(f"plot $rel{i} using 1:2 with lines title 'finite difference', "
                   f"$rel{i} using 1:3 with points pt 7 ps 0.3 title 'right side'")
    out.append("unset multiplot")
    return "\n".join(out) + "\n"
