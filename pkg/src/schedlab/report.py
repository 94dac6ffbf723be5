"""CSV, JSON and SVG writers with fixed float formatting and deterministic bytes."""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

SCHEMA_VERSION = 1


def fmt_float(x: float) -> str:
    """17 significant digits, which round-trips any double."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return fmt_float(v)
    if isinstance(v, np.integer):
        return str(int(v))
    return v


def csv_text(rows: Sequence[Mapping], columns: Sequence[str] | None = None) -> str:
    if columns is None:
        columns = list(rows[0]) if rows else []
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(r[c]) for c in columns])
    return buf.getvalue()


def write_csv(path, rows, columns=None) -> None:
    Path(path).write_text(csv_text(rows, columns))


def json_text(obj, indent: int = 2) -> str:
    """JSON with every float written to 17 significant digits.

    Non-finite floats become strings, since JSON has no literal for them.
    """

    def enc(o, level):
        pad = " " * (indent * (level + 1))
        end = " " * (indent * level)
        if isinstance(o, (bool, np.bool_)):
            return "true" if o else "false"
        if o is None:
            return "null"
        if isinstance(o, (int, np.integer)):
            return str(int(o))
        if isinstance(o, (float, np.floating)):
            s = fmt_float(o)
            return s if math.isfinite(o) else f'"{s}"'
        if isinstance(o, str):
            return _json_str(o)
        if isinstance(o, np.ndarray):
            o = o.tolist()
        if isinstance(o, Mapping):
            if not o:
                return "{}"
            items = [f"{pad}{_json_str(str(k))}: {enc(v, level + 1)}" for k, v in o.items()]
            return "{\n" + ",\n".join(items) + "\n" + end + "}"
        if isinstance(o, (list, tuple)):
            if not o:
                return "[]"
            return "[\n" + ",\n".join(pad + enc(v, level + 1) for v in o) + "\n" + end + "]"
        raise TypeError(f"cannot serialise {type(o).__name__}")

    return enc(obj, 0) + "\n"


def _json_str(s: str) -> str:
    return json.dumps(s)


def write_json(path, obj) -> None:
    Path(path).write_text(json_text(obj))


def emit_svg_lineplot(series: Mapping[str, tuple], path, log_y: bool = False, title: str = "",
                      xlabel: str = "", ylabel: str = "") -> list[str]:
    """Write a standalone SVG line plot of ``{label: (x, y)}``.

    With ``log_y``, non-positive values are drawn at the axis floor and an
    annotation on the figure says how many were clamped. Returns the warning
    messages issued.
    """
    if not series or any(len(np.atleast_1d(xy[1])) == 0 for xy in series.values()):
        raise ValueError("nothing to plot: empty series")
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "schedlab"
    matplotlib.rcParams["svg.fonttype"] = "none"

    data = {}
    for label, (x, y) in series.items():
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        y = np.atleast_1d(np.asarray(y, dtype=np.float64))
        if x.shape != y.shape:
            raise ValueError(f"series {label!r}: x and y lengths differ")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError(f"series {label!r} has non-finite values")
        data[label] = (x, y)

    notes = []
    floor = None
    if log_y:
        positive = np.concatenate([y[y > 0] for _, y in data.values()])
        floor = positive.min() / 10 if positive.size else 1e-12
        n_clamped = sum(int(np.sum(y <= 0)) for _, y in data.values())
        if n_clamped:
            notes.append(f"{n_clamped} non-positive value(s) clamped to axis floor {fmt_float(floor)}")
            for msg in notes:
                warnings.warn(msg, stacklevel=2)

    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    try:
        for label, (x, y) in data.items():
            if floor is not None:
                y = np.where(y > 0, y, floor)
            ax.plot(x, y, label=label, marker="o" if x.size == 1 else None, linewidth=1.2)
        if log_y:
            ax.set_yscale("log")
        ax.set_title(title)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if len(data) > 1:
            ax.legend()
        for k, msg in enumerate(notes):
            ax.annotate("warning: " + msg, xy=(0.01, 0.01 + 0.05 * k), xycoords="axes fraction", fontsize=7,
                        color="tab:red")
        fig.savefig(path, format="svg", metadata={"Date": None})
    finally:
        plt.close(fig)
    return notes
