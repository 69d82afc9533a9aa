"""CSV emission and ingestion.

Floats are written in shortest round-trip form (``repr``), so emitting and
re-reading a file reproduces every value exactly.
"""
from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from ..battery import Trajectory
from ..errors import IngestionError
from ..observer import MeasurementSample, ObserverTrace

MEASUREMENT_COLUMNS = ("time_min", "v_out_V", "current_A", "flow_L_per_min")
TRUTH_COLUMNS = ("time_min", "soc", "soc_cell", "crossover_mol_per_min", "v_out_V",
                 "current_A", "flow_L_per_min", "clamped")


def _fmt(v) -> str:
    return repr(float(v))


def _write(path, header, rows):
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def write_measurements(path, samples) -> Path:
    return _write(path, MEASUREMENT_COLUMNS,
                  ((s.time, s.v_out, s.current, s.flow_rate) for s in samples))


def write_truth(path, truth: Trajectory) -> Path:
    cols = [truth.time, truth.soc, truth.soc_cell, truth.crossover_flux, truth.v_out,
            truth.current, truth.flow_rate, truth.clamped.astype(float)]
    header = list(TRUTH_COLUMNS)
    for j in range(truth.omega.shape[1] if truth.omega.ndim == 2 else 0):
        header.append(f"omega_{j + 1}")
        cols.append(truth.omega[:, j])
    return _write(path, header, zip(*cols))


def trace_columns(order_l: int):
    return (["time_min", "soc_hat", "soc_cell_hat"]
            + [f"omega_hat_{j + 1}" for j in range(order_l)]
            + ["y_meas", "innovation", "crossover_hat_mol_per_min"])


def write_trace(path, trace: ObserverTrace) -> Path:
    m = trace.x_hat.shape[1]
    rows = (np.concatenate([[trace.time[i]], trace.x_hat[i],
                            [trace.y_meas[i], trace.innovation[i], trace.crossover[i]]])
            for i in range(len(trace)))
    return _write(path, trace_columns(m - 2), rows)


def read_table(path, required=None):
    """Read a numeric CSV with a header row into ``{column: array}``."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise IngestionError(f"cannot read {path}: {exc}") from None
    rows = list(csv.reader(text.splitlines()))
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if not rows:
        raise IngestionError(f"{path}: file is empty (header row required)")
    header = [c.strip() for c in rows[0]]
    if required is not None:
        missing = [c for c in required if c not in header]
        if missing:
            raise IngestionError(f"{path}: missing column(s) {', '.join(missing)}")
    if len(rows) == 1:
        raise IngestionError(f"{path}: no data rows")
    data = np.empty((len(rows) - 1, len(header)))
    for i, row in enumerate(rows[1:], start=1):
        if len(row) != len(header):
            raise IngestionError(
                f"{path}: row {i} has {len(row)} fields, header has {len(header)}")
        for j, cell in enumerate(row):
            try:
                v = float(cell)
            except ValueError:
                raise IngestionError(
                    f"{path}: row {i}, column {header[j]!r}: not a number: {cell!r}") from None
            if not math.isfinite(v):
                raise IngestionError(f"{path}: row {i}, column {header[j]!r}: non-finite")
            data[i - 1, j] = v
    return {name: data[:, j] for j, name in enumerate(header)}


def read_measurements(path):
    """Ingest a measurement CSV into an ordered list of samples."""
    tab = read_table(path, MEASUREMENT_COLUMNS)
    t = tab["time_min"]
    for i in range(1, len(t)):
        if not t[i] > t[i - 1]:
            raise IngestionError(f"{path}: row {i + 1}: time {t[i]!r} is not increasing")
    out = []
    for i in range(len(t)):
        try:
            out.append(MeasurementSample(float(t[i]), float(tab["v_out_V"][i]),
                                         float(tab["current_A"][i]),
                                         float(tab["flow_L_per_min"][i])))
        except ValueError as exc:
            raise IngestionError(f"{path}: row {i + 1}: {exc}") from None
    return out
