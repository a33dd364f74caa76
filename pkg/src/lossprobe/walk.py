"""
Progressive random and progressive gradient walks over a network's weight space.

Every walk owns a PCG64 stream seeded from ``(seed, walk_id)``, so a trace
depends only on its configuration and identifier, never on scheduling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from . import calculus
from .calculus import eigvals_sym, grad_norm, hessian, loss_and_gradient
from .data import sample_batch
from .landscape import DEFAULT_TOL_REL, classify_curvature
from .nn import accuracy, forward, init_uniform, loss, param_count

__all__ = [
    "Granularity",
    "Direction",
    "BatchPolicy",
    "GradientMode",
    "WalkConfig",
    "DataSource",
    "Sample",
    "WalkTrace",
    "epsilon_from_granularity",
    "steps_from_granularity",
    "walk_count",
    "walk_rng",
    "direction_mask",
    "random_step",
    "gradient_step",
    "run_gradient_walk",
    "run_random_walk",
    "DIVERGENCE_LIMIT",
]

DIVERGENCE_LIMIT = 1e12


class Granularity(str, Enum):
    MICRO = "micro"
    MACRO = "macro"


class Direction(str, Enum):
    DESCENT = "descent"
    LITERAL = "literal"


class BatchPolicy(str, Enum):
    RESAMPLE_PER_STEP = "resample"
    FIXED_PER_WALK = "fixed"


class GradientMode(str, Enum):
    ANALYTIC = "analytic"
    NUMERIC = "numeric"


_STEP_FRACTION = {Granularity.MICRO: 100, Granularity.MACRO: 10}
_STEP_COUNT = {Granularity.MICRO: 1000, Granularity.MACRO: 100}


def epsilon_from_granularity(init_range, granularity):
    """Maximum per-dimension step: 1% (micro) or 10% (macro) of the interval width."""
    a, b = (float(v) for v in init_range)
    if not a < b:
        raise ValueError(f"invalid interval [{a}, {b}]")
    return (b - a) / _STEP_FRACTION[Granularity(granularity)]


def steps_from_granularity(granularity):
    return _STEP_COUNT[Granularity(granularity)]


def walk_count(m):
    """Number of walks prescribed for an ``m``-dimensional search space."""
    if m < 1:
        raise ValueError("dimension must be positive")
    return 2 * m


def walk_rng(seed, walk_id):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(walk_id,))))


def direction_mask(g):
    """1 where the gradient component is non-negative, 0 where it is negative."""
    return (np.asarray(g) >= 0).astype(np.int8)


def random_step(x, epsilon, signs, rng):
    """Move every coordinate by ``U[0, epsilon]`` in the direction given by ``signs``."""
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    x = np.asarray(x, dtype=float)
    return x + signs * rng.uniform(0.0, epsilon, size=x.shape)


def gradient_step(x, mask, epsilon, convention, rng):
    """One progressive gradient step.

    Under ``LITERAL`` a coordinate moves down where ``mask`` is 0 and up
    otherwise. ``DESCENT`` flips that rule so each coordinate moves against
    its gradient sign.
    """
    signs = np.where(np.asarray(mask) == 0, -1.0, 1.0)
    if Direction(convention) is Direction.DESCENT:
        signs = -signs
    return random_step(x, epsilon, signs, rng)


@dataclass
class WalkConfig:
    """Sampling parameters of one family of walks.

    ``epsilon`` and ``n_steps`` are derived from the granularity and
    initialisation range unless set explicitly.
    """

    init_range: tuple = (-1.0, 1.0)
    granularity: Granularity = Granularity.MICRO
    epsilon: float = None
    n_steps: int = None
    direction: Direction = Direction.DESCENT
    batch_policy: BatchPolicy = BatchPolicy.RESAMPLE_PER_STEP
    seed: int = 0
    curvature: bool = True
    hessian_cap: int = calculus.DEFAULT_HESSIAN_CAP
    curvature_stride: int = 10
    tol_rel: float = DEFAULT_TOL_REL
    gradient_mode: GradientMode = GradientMode.ANALYTIC

    def __post_init__(self):
        self.init_range = tuple(float(v) for v in self.init_range)
        self.granularity = Granularity(self.granularity)
        self.direction = Direction(self.direction)
        self.batch_policy = BatchPolicy(self.batch_policy)
        self.gradient_mode = GradientMode(self.gradient_mode)
        if self.epsilon is None:
            self.epsilon = epsilon_from_granularity(self.init_range, self.granularity)
        if self.n_steps is None:
            self.n_steps = steps_from_granularity(self.granularity)
        if self.epsilon <= 0 or self.n_steps < 1 or self.curvature_stride < 1:
            raise ValueError("epsilon, n_steps and curvature_stride must be positive")

    def with_overrides(self, **changes):
        return replace(self, **changes)


@dataclass(frozen=True)
class DataSource:
    """Training data (and optional test data) a walk samples its batches from.

    ``batch_size`` of None serves every split whole.
    """

    train: object
    test: object = None
    batch_size: int = None

    def draw(self, dataset, rng):
        if dataset is None:
            return None
        if self.batch_size is None or self.batch_size >= len(dataset):
            return dataset.as_batch()
        return sample_batch(dataset, self.batch_size, rng)


@dataclass
class Sample:
    step_index: int
    loss_train: float
    grad_norm: float
    loss_test: float = None
    curvature: object = None
    acc_train: float = None
    acc_test: float = None


@dataclass
class WalkTrace:
    walk_id: int
    samples: list = field(default_factory=list)
    truncated: bool = False

    def __len__(self):
        return len(self.samples)

    def column(self, name):
        return np.array([np.nan if getattr(s, name) is None else getattr(s, name)
                         for s in self.samples], dtype=float)


def _diverged(*values):
    return any(not math.isfinite(v) or abs(v) > DIVERGENCE_LIMIT for v in values)


def _evaluate(arch, x, batch, mode):
    if mode is GradientMode.ANALYTIC:
        value, g, out = loss_and_gradient(arch, x, batch)
        return float(value), g, out
    out = forward(arch, x, batch)
    g = calculus.numeric_gradient(lambda p: loss(forward(arch, p, batch), batch.targets), x)
    return float(loss(out, batch.targets)), g, out


def run_gradient_walk(arch, data, config, walk_id):
    """Sample one progressive gradient walk.

    The trace holds the initial point plus one sample per step. A walk whose
    loss or gradient norm overflows (or exceeds ``DIVERGENCE_LIMIT``) stops
    early with ``truncated`` set; the offending point is not recorded.
    """
    rng = walk_rng(config.seed, walk_id)
    m = param_count(arch)
    want_curvature = config.curvature and m <= config.hessian_cap
    x = init_uniform(arch, config.init_range, rng)
    trace = WalkTrace(walk_id)
    fixed = config.batch_policy is BatchPolicy.FIXED_PER_WALK
    if fixed:
        train_batch = data.draw(data.train, rng)
        test_batch = data.draw(data.test, rng)

    with np.errstate(over="ignore", invalid="ignore"):
        for step in range(config.n_steps + 1):
            if not fixed:
                train_batch = data.draw(data.train, rng)
                test_batch = data.draw(data.test, rng)
            value, g, out = _evaluate(arch, x, train_batch, config.gradient_mode)
            norm = grad_norm(g)
            if _diverged(value, norm):
                trace.truncated = True
                break
            sample = Sample(step, value, norm, acc_train=accuracy(out, train_batch.targets))
            if test_batch is not None:
                test_out = forward(arch, x, test_batch)
                sample.loss_test = float(loss(test_out, test_batch.targets))
                sample.acc_test = accuracy(test_out, test_batch.targets)
            if want_curvature and step % config.curvature_stride == 0:
                H = hessian(arch, x, train_batch, cap=config.hessian_cap)
                if np.all(np.isfinite(H)):
                    sample.curvature = classify_curvature(eigvals_sym(H), config.tol_rel)
            trace.samples.append(sample)
            if step == config.n_steps:
                break
            x = gradient_step(x, direction_mask(g), config.epsilon, config.direction, rng)
    return trace


def run_random_walk(arch, data, config, walk_id):
    """Progressive random walk: per-walk random signs, unbounded, no gradient guidance.

    Samples carry loss and gradient norm only.
    """
    rng = walk_rng(config.seed, walk_id)
    x = init_uniform(arch, config.init_range, rng)
    signs = rng.choice(np.array([-1.0, 1.0]), size=x.size)
    trace = WalkTrace(walk_id)
    with np.errstate(over="ignore", invalid="ignore"):
        for step in range(config.n_steps + 1):
            batch = data.draw(data.train, rng)
            value, g, _ = loss_and_gradient(arch, x, batch)
            value, norm = float(value), grad_norm(g)
            if _diverged(value, norm):
                trace.truncated = True
                break
            trace.samples.append(Sample(step, value, norm))
            if step < config.n_steps:
                x = random_step(x, config.epsilon, signs, rng)
    return trace
