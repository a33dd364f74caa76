"""CSV and JSON writers/readers for traces, plot data and experiment summaries."""

from __future__ import annotations

import contextlib
import csv
import json
import math
from pathlib import Path

import numpy as np

from .landscape import CURVATURE_CLASSES, ColourMode, CurvatureClass
from .walk import Sample, WalkTrace

__all__ = [
    "TRACE_COLUMNS",
    "format_float",
    "emit_traces_csv",
    "read_traces_csv",
    "write_cloud_csv",
    "write_histogram_csv",
    "write_attractors_csv",
    "emit_summary_json",
]

TRACE_COLUMNS = ["walk_id", "step", "loss_train", "loss_test", "grad_norm",
                 "curvature", "acc_train", "acc_test"]


def format_float(value):
    """17 significant digits, enough for an exact round trip; empty for missing values."""
    if value is None:
        return ""
    value = float(value)
    if math.isnan(value):
        return ""
    return format(value, ".17g")


def _parse_float(text):
    return float(text) if text != "" else None


def _open_writer(path):
    if hasattr(path, "write"):
        return contextlib.nullcontext(path)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return open(path, "w", newline="", encoding="utf-8")


def emit_traces_csv(traces, path):
    """One row per sample, walks in ``walk_id`` order."""
    with _open_writer(path) as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        for trace in sorted(traces, key=lambda t: t.walk_id):
            for s in trace.samples:
                writer.writerow([
                    trace.walk_id,
                    s.step_index,
                    format_float(s.loss_train),
                    format_float(s.loss_test),
                    format_float(s.grad_norm),
                    CurvatureClass(s.curvature).value if s.curvature is not None else "",
                    format_float(s.acc_train),
                    format_float(s.acc_test),
                ])
    return path


def read_traces_csv(path):
    """Rebuild walk traces from a trace CSV (the truncation flag is not stored there)."""
    traces = {}
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        missing = set(TRACE_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        for row in reader:
            wid = int(row["walk_id"])
            trace = traces.setdefault(wid, WalkTrace(wid))
            trace.samples.append(Sample(
                step_index=int(row["step"]),
                loss_train=float(row["loss_train"]),
                grad_norm=float(row["grad_norm"]),
                loss_test=_parse_float(row["loss_test"]),
                curvature=CurvatureClass(row["curvature"]) if row["curvature"] else None,
                acc_train=_parse_float(row["acc_train"]),
                acc_test=_parse_float(row["acc_test"]),
            ))
    return [traces[k] for k in sorted(traces)]


def write_cloud_csv(cloud, path):
    with _open_writer(path) as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["walk_id", "loss", "grad_norm", cloud.mode.value])
        for wid, loss, grad, colour in zip(cloud.walk_ids, cloud.loss, cloud.grad_norm, cloud.colour):
            if cloud.mode is ColourMode.GENERALISATION_ERROR:
                colour = format_float(colour)
            elif colour is not None:
                colour = CurvatureClass(colour).value
            else:
                colour = ""
            writer.writerow([int(wid), format_float(loss), format_float(grad), colour])
    return path


def write_histogram_csv(hist, path):
    fractions = hist.fractions
    with _open_writer(path) as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["bin_low", "bin_high", "count", *(c.value for c in CURVATURE_CLASSES)])
        for k in range(len(fractions)):
            writer.writerow([
                format_float(hist.edges[k]),
                format_float(hist.edges[k + 1]),
                int(hist.counts[k].sum()),
                *(format_float(v) for v in fractions[k]),
            ])
    return path


def write_attractors_csv(summary, path):
    with _open_writer(path) as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["representative_loss", "sample_count", "min_grad_norm",
                         "dominant_curvature", "stationary_kind"])
        for c in summary.clusters:
            writer.writerow([
                format_float(c.representative_loss),
                c.sample_count,
                format_float(c.min_grad_norm),
                c.dominant_curvature.value if c.dominant_curvature is not None else "",
                c.kind.value if c.kind is not None else "",
            ])
    return path


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if hasattr(value, "value") and isinstance(value.value, str):
        return value.value
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, Path):
        return value.as_posix()
    return value


def emit_summary_json(report, path):
    """Write ``report.to_dict()`` as sorted, indented JSON."""
    payload = report.to_dict() if hasattr(report, "to_dict") else report
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(_jsonable(payload), indent=2, sort_keys=True, allow_nan=False)
    path.write_text(text + "\n", encoding="utf-8")
    return path
