"""
Experiment orchestration: configuration, grid expansion, parallel walks and outputs.

A run writes, under ``output_dir``::

    summary.json                      one record per grid cell
    timing.json                       wall-clock figures (kept apart so summaries are reproducible)
    cells/<cell_id>/traces.csv        every sample of every walk
    cells/<cell_id>/cloud.csv         l-g cloud coloured by curvature class
    cells/<cell_id>/cloud_generalisation.csv   l-g cloud coloured by test loss (MNIST)
    cells/<cell_id>/histogram.csv     per-bin curvature fractions (when curvature exists)
    cells/<cell_id>/attractors.csv    attractor clusters

Walks are independent tasks keyed by ``(cell, walk_id)``; each draws from its
own seeded stream, so the bytes written do not depend on the worker count.
"""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from enum import Enum
from pathlib import Path

import numpy as np

from . import __version__
from .calculus import DEFAULT_HESSIAN_CAP
from .data import load_mnist_dir, subsample, xor_dataset
from .io import (
    emit_summary_json,
    emit_traces_csv,
    write_attractors_csv,
    write_cloud_csv,
    write_histogram_csv,
)
from .landscape import (
    DEFAULT_N_BINS,
    DEFAULT_TOL_REL,
    ColourMode,
    aggregate_accuracy,
    attractor_summary,
    build_lg_cloud,
    curvature_histogram,
)
from .nn import Architecture
from .walk import (
    BatchPolicy,
    DataSource,
    Direction,
    GradientMode,
    Granularity,
    WalkConfig,
    run_gradient_walk,
    walk_count,
)

__all__ = [
    "Problem",
    "ExperimentConfig",
    "GridCell",
    "CellRecord",
    "ExperimentReport",
    "expand_grid",
    "load_problem_data",
    "resolve_workers",
    "run_experiment",
    "THREADS_ENV",
    "MNIST_DIR_ENV",
]

THREADS_ENV = "LOSSPROBE_THREADS"
MNIST_DIR_ENV = "LOSSPROBE_MNIST_DIR"
AUTO = "auto"
# stream reserved for dataset subsampling, disjoint from the per-walk spawn keys
_SUBSAMPLE_STREAM = 0x5AB5


class Problem(str, Enum):
    XOR = "xor"
    MNIST = "mnist"


_PROBLEM_SHAPE = {Problem.XOR: (2, 1, 2), Problem.MNIST: (784, 10, 10)}  # inputs, outputs, base h
_MNIST_WALKS = 50
_MNIST_SUBSAMPLE = (1000, 1000)


def _interval(value):
    a, b = (float(v) for v in value)
    if not a < b:
        raise ValueError(f"invalid interval [{a}, {b}]")
    return (a, b)


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce a run.

    ``walks_override`` and ``subsample`` default to ``"auto"``: 50 walks on a
    1000/1000 subsample for MNIST, and the prescribed ``2m`` walks on the
    full data for XOR. An explicit ``None`` asks for the full-scale value.
    ``architectures`` (strings like ``"2-4-4-1"``) replaces the
    width-by-depth product when given.
    """

    problem: Problem = Problem.XOR
    width_multipliers: tuple = (1, 2, 10)
    depths: tuple = (1, 2, 3)
    granularities: tuple = (Granularity.MICRO, Granularity.MACRO)
    init_ranges: tuple = ((-1.0, 1.0), (-10.0, 10.0))
    architectures: tuple = None
    walks_override: object = AUTO
    steps_override: int = None
    hessian_cap: int = DEFAULT_HESSIAN_CAP
    curvature_enabled: bool = True
    curvature_stride: int = 10
    seed: int = 0
    output_dir: str = "lossprobe-out"
    batch_size: int = 100
    subsample: object = AUTO
    direction: Direction = Direction.DESCENT
    batch_policy: BatchPolicy = BatchPolicy.RESAMPLE_PER_STEP
    gradient_mode: GradientMode = GradientMode.ANALYTIC
    mnist_dir: str = None
    tol_rel: float = DEFAULT_TOL_REL
    tau_grad: float = None
    loss_tol: float = None
    n_bins: int = DEFAULT_N_BINS

    def __post_init__(self):
        self.problem = Problem(self.problem)
        self.width_multipliers = tuple(int(w) for w in self.width_multipliers)
        self.depths = tuple(int(d) for d in self.depths)
        self.granularities = tuple(Granularity(g) for g in self.granularities)
        self.init_ranges = tuple(_interval(r) for r in self.init_ranges)
        if self.architectures is not None:
            self.architectures = tuple(str(a) for a in self.architectures)
        self.direction = Direction(self.direction)
        self.batch_policy = BatchPolicy(self.batch_policy)
        self.gradient_mode = GradientMode(self.gradient_mode)
        self.output_dir = str(self.output_dir)
        if self.mnist_dir is not None:
            self.mnist_dir = str(self.mnist_dir)

        mnist = self.problem is Problem.MNIST
        if self.walks_override == AUTO:
            self.walks_override = _MNIST_WALKS if mnist else None
        if self.subsample == AUTO:
            self.subsample = _MNIST_SUBSAMPLE if mnist else None
        if self.subsample is not None:
            self.subsample = tuple(int(n) for n in self.subsample)
            if len(self.subsample) != 2 or min(self.subsample) < 1:
                raise ValueError("subsample must be a pair of positive counts")

        if any(w < 1 for w in self.width_multipliers) or any(d < 1 for d in self.depths):
            raise ValueError("width multipliers and depths must be positive")
        if self.walks_override is not None and int(self.walks_override) < 1:
            raise ValueError("walks_override must be positive")
        if self.steps_override is not None and int(self.steps_override) < 1:
            raise ValueError("steps_override must be positive")
        if self.batch_size < 1 or self.hessian_cap < 1 or self.curvature_stride < 1 or self.n_bins < 1:
            raise ValueError("batch_size, hessian_cap, curvature_stride and n_bins must be positive")

    @property
    def base_width(self):
        return _PROBLEM_SHAPE[self.problem][2]

    def to_dict(self):
        d = asdict(self)
        for key, value in d.items():
            if isinstance(value, Enum):
                d[key] = value.value
            elif isinstance(value, tuple):
                d[key] = [list(v) if isinstance(v, tuple) else getattr(v, "value", v) for v in value]
        return d

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path):
        with open(path, encoding="utf-8") as f:
            return cls.from_dict(json.load(f))

    def replace(self, **changes):
        d = self.to_dict()
        d.update(changes)
        return type(self).from_dict(d)


@dataclass(frozen=True)
class GridCell:
    index: int
    architecture: Architecture
    granularity: Granularity
    init_range: tuple

    @property
    def cell_id(self):
        a, b = self.init_range
        return f"{self.architecture}_{self.granularity.value}_{a:g}_{b:g}"


def _architectures(config):
    n_in, n_out, h = _PROBLEM_SHAPE[config.problem]
    if config.architectures is None:
        return [Architecture(n_in, (h * w,) * d, n_out)
                for w in config.width_multipliers for d in config.depths]
    archs = []
    for text in config.architectures:
        arch = Architecture.parse(text)
        if (arch.input_dim, arch.output_dim) != (n_in, n_out):
            raise ValueError(f"{text}: {config.problem.value} needs {n_in} inputs and {n_out} outputs")
        if len(set(arch.hidden_widths)) > 1:
            raise ValueError(f"{text}: hidden layers must share one width")
        archs.append(arch)
    return archs


def expand_grid(config):
    """Architectures x granularities x init ranges, in that nesting order."""
    cells = []
    for arch in _architectures(config):
        for gran in config.granularities:
            for rng in config.init_ranges:
                cells.append(GridCell(len(cells), arch, gran, rng))
    if not cells:
        raise ValueError("the experiment grid is empty")
    return cells


def load_problem_data(config):
    """Datasets the walks sample from, subsampled deterministically from the seed."""
    if config.problem is Problem.XOR:
        return DataSource(xor_dataset())
    directory = config.mnist_dir or os.environ.get(MNIST_DIR_ENV)
    if directory is None:
        raise FileNotFoundError(
            f"no MNIST directory: set mnist_dir or {MNIST_DIR_ENV} (see `lossprobe fetch-mnist`)"
        )
    train, test = load_mnist_dir(directory)
    if config.subsample is not None:
        rng = np.random.default_rng([config.seed, _SUBSAMPLE_STREAM])
        train = subsample(train, min(config.subsample[0], len(train)), rng)
        test = subsample(test, min(config.subsample[1], len(test)), rng)
    return DataSource(train, test, config.batch_size)


def resolve_workers(requested=None):
    """Worker count: ``requested`` (default: CPU count), capped by ``LOSSPROBE_THREADS``."""
    n = requested if requested is not None else (os.cpu_count() or 1)
    cap = os.environ.get(THREADS_ENV)
    if cap:
        try:
            cap = int(cap)
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be an integer, got {cap!r}") from None
        if cap < 1:
            raise ValueError(f"{THREADS_ENV} must be positive")
        n = min(n, cap)
    if n < 1:
        raise ValueError("worker count must be positive")
    return n


def _walk_config(config, cell):
    return WalkConfig(
        init_range=cell.init_range,
        granularity=cell.granularity,
        n_steps=config.steps_override,
        direction=config.direction,
        batch_policy=config.batch_policy,
        seed=config.seed,
        curvature=config.curvature_enabled,
        hessian_cap=config.hessian_cap,
        curvature_stride=config.curvature_stride,
        tol_rel=config.tol_rel,
        gradient_mode=config.gradient_mode,
    )


_WORKER_DATA = None


def _init_worker(data):
    global _WORKER_DATA
    _WORKER_DATA = data


def _walk_task(cell_index, arch, wconfig, walk_id, data=None):
    data = _WORKER_DATA if data is None else data
    start = time.perf_counter()
    try:
        trace = run_gradient_walk(arch, data, wconfig, walk_id)
        error = None
    except Exception as exc:  # isolated per cell, reported in the summary
        trace, error = None, f"{type(exc).__name__}: {exc}"
    return cell_index, walk_id, trace, error, time.perf_counter() - start


@dataclass
class CellRecord:
    cell: GridCell
    n_walks: int
    prescribed_walks: int
    n_steps: int
    epsilon: float
    status: str = "ok"
    error: str = None
    truncated_walks: int = 0
    rows: int = 0
    files: dict = field(default_factory=dict)
    curvature: dict = field(default_factory=dict)
    attractors: object = None
    accuracy: object = None
    max_grad_norm: float = None
    wall_clock: float = 0.0

    @property
    def expected_rows(self):
        return self.n_walks * (self.n_steps + 1)

    def to_dict(self):
        arch = self.cell.architecture
        d = {
            "cell_id": self.cell.cell_id,
            "architecture": str(arch),
            "n_params": arch.n_params,
            "granularity": self.cell.granularity.value,
            "init_range": list(self.cell.init_range),
            "epsilon": self.epsilon,
            "n_steps": self.n_steps,
            "walks": {"run": self.n_walks, "prescribed": self.prescribed_walks},
            "status": self.status,
            "error": self.error,
            "truncated_walks": self.truncated_walks,
            "rows": {"written": self.rows, "expected": self.expected_rows,
                     "shortfall": self.expected_rows - self.rows},
            "files": dict(self.files),
            "curvature": dict(self.curvature),
            "max_grad_norm": self.max_grad_norm,
        }
        if self.attractors is not None:
            a = self.attractors
            d["attractors"] = {
                "tau_grad": a.tau_grad,
                "loss_tol": a.loss_tol,
                "n_stationary": a.n_stationary,
                "losses": a.losses,
                "clusters": [
                    {
                        "loss": c.representative_loss,
                        "samples": c.sample_count,
                        "min_grad_norm": c.min_grad_norm,
                        "dominant_curvature": c.dominant_curvature,
                        "kind": c.kind,
                    }
                    for c in a.clusters
                ],
            }
        else:
            d["attractors"] = None
        if self.accuracy is not None:
            acc = self.accuracy
            d["accuracy"] = {
                "train": {"mean": acc.train_mean, "std": acc.train_std},
                "test": None if acc.test_mean is None else {"mean": acc.test_mean, "std": acc.test_std},
            }
        else:
            d["accuracy"] = None
        return d


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    cells: list
    version: str = __version__

    def cell(self, cell_id):
        for record in self.cells:
            if record.cell.cell_id == cell_id:
                return record
        raise KeyError(cell_id)

    def to_dict(self):
        return {
            "tool": {"name": "lossprobe", "version": self.version},
            "config": self.config.to_dict(),
            "cells": [r.to_dict() for r in self.cells],
        }

    def timing(self):
        return {r.cell.cell_id: r.wall_clock for r in self.cells}


def _analyse_cell(record, traces, config, out_dir):
    cell = record.cell
    arch = cell.architecture
    cell_dir = Path("cells") / cell.cell_id
    rel = lambda name: (cell_dir / name).as_posix()  # noqa: E731

    record.truncated_walks = sum(t.truncated for t in traces)
    record.rows = sum(len(t) for t in traces)
    emit_traces_csv(traces, out_dir / rel("traces.csv"))
    record.files["traces"] = rel("traces.csv")

    meta = {"architecture": str(arch), "hessian_cap": config.hessian_cap}
    cloud = build_lg_cloud(traces, ColourMode.CURVATURE, meta, strict=False)
    write_cloud_csv(cloud, out_dir / rel("cloud.csv"))
    record.files["cloud"] = rel("cloud.csv")
    if len(cloud):
        record.max_grad_norm = float(cloud.grad_norm.max())

    if traces and all(s.loss_test is not None for t in traces for s in t.samples):
        gen = build_lg_cloud(traces, ColourMode.GENERALISATION_ERROR, meta)
        write_cloud_csv(gen, out_dir / rel("cloud_generalisation.csv"))
        record.files["cloud_generalisation"] = rel("cloud_generalisation.csv")

    if not config.curvature_enabled:
        record.curvature = {"status": "disabled"}
    elif arch.n_params > config.hessian_cap:
        record.curvature = {
            "status": "unavailable",
            "reason": f"curvature unavailable: {arch.n_params} parameters exceed the Hessian cap of {config.hessian_cap}",
        }
    elif cloud.curvature_mask().any():
        hist = curvature_histogram(cloud, config.n_bins)
        write_histogram_csv(hist, out_dir / rel("histogram.csv"))
        record.files["histogram"] = rel("histogram.csv")
        record.curvature = {
            "status": "available",
            "fractions": hist.global_fractions,
            "singular_fraction": hist.singular_fraction(),
        }
    else:
        record.curvature = {"status": "unavailable", "reason": "no finite Hessian was sampled"}

    record.attractors = attractor_summary(cloud, config.tau_grad, config.loss_tol) if len(cloud) else None
    if record.attractors is not None:
        write_attractors_csv(record.attractors, out_dir / rel("attractors.csv"))
        record.files["attractors"] = rel("attractors.csv")
    if any(t.samples for t in traces):
        record.accuracy = aggregate_accuracy([t for t in traces if t.samples])


def run_experiment(config, workers=None, progress=None):
    """Run every grid cell and write traces, plot data and the summary.

    ``workers=1`` runs in-process; otherwise walks are spread over a process
    pool. ``progress``, if given, is called as ``progress(done, total)``.
    A cell whose walks raise is recorded as failed; the others still run.
    """
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    data = load_problem_data(config)
    cells = expand_grid(config)

    records, tasks = [], []
    for cell in cells:
        wconfig = _walk_config(config, cell)
        m = cell.architecture.n_params
        n_walks = int(config.walks_override) if config.walks_override is not None else walk_count(m)
        records.append(CellRecord(cell, n_walks, walk_count(m), wconfig.n_steps, wconfig.epsilon))
        tasks.extend((cell.index, cell.architecture, wconfig, w) for w in range(n_walks))

    results = {}
    n_workers = min(resolve_workers(workers), max(len(tasks), 1))
    if n_workers == 1:
        for done, task in enumerate(tasks, 1):
            res = _walk_task(*task, data=data)
            results[res[:2]] = res[2:]
            if progress:
                progress(done, len(tasks))
    else:
        with ProcessPoolExecutor(n_workers, initializer=_init_worker, initargs=(data,)) as pool:
            futures = [pool.submit(_walk_task, *task) for task in tasks]
            for done, fut in enumerate(futures, 1):
                res = fut.result()
                results[res[:2]] = res[2:]
                if progress:
                    progress(done, len(tasks))

    for record in records:
        start = time.perf_counter()
        outcome = [results[(record.cell.index, w)] for w in range(record.n_walks)]
        errors = [err for _, err, _ in outcome if err is not None]
        if errors:
            record.status, record.error = "failed", errors[0]
        else:
            try:
                _analyse_cell(record, [t for t, _, _ in outcome], config, out_dir)
            except Exception as exc:
                record.status, record.error = "failed", f"{type(exc).__name__}: {exc}"
        record.wall_clock = sum(dt for _, _, dt in outcome) + time.perf_counter() - start

    report = ExperimentReport(config, records)
    emit_summary_json(report, out_dir / "summary.json")
    (out_dir / "timing.json").write_text(
        json.dumps({"seconds_per_cell": report.timing()}, indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    return report
