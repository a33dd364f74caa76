"""
Analysis of sampled walks: curvature classes, loss-gradient clouds,
curvature histograms, attractor summaries and accuracy statistics.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

__all__ = [
    "CurvatureClass",
    "Stationarity",
    "CurvatureUnavailable",
    "ColourMode",
    "LgCloud",
    "CurvatureHistogram",
    "AttractorCluster",
    "AttractorSummary",
    "AccuracyStats",
    "classify_curvature",
    "classify_stationary",
    "build_lg_cloud",
    "curvature_histogram",
    "default_tau_grad",
    "default_loss_tol",
    "cluster_losses",
    "attractor_summary",
    "aggregate_accuracy",
]

DEFAULT_TOL_REL = 1e-4
DEFAULT_TAU_GRAD_FACTOR = 1e-2
DEFAULT_LOSS_TOL_FACTOR = 0.02
# robust "axis maximum" of a cloud, ignoring the top 1% of points
AXIS_QUANTILE = 0.99
DEFAULT_N_BINS = 50
_SCALE_FLOOR = 1e-12


class CurvatureClass(str, Enum):
    CONVEX = "convex"
    CONCAVE = "concave"
    SADDLE = "saddle"
    SINGULAR_CONVEX = "singular_convex"
    SINGULAR_CONCAVE = "singular_concave"
    SINGULAR_SADDLE = "singular_saddle"
    FLAT = "flat"

    @property
    def singular(self):
        return self in _SINGULAR

    def flipped(self):
        return _FLIP.get(self, self)


_SINGULAR = {
    CurvatureClass.SINGULAR_CONVEX,
    CurvatureClass.SINGULAR_CONCAVE,
    CurvatureClass.SINGULAR_SADDLE,
    CurvatureClass.FLAT,
}
_FLIP = {
    CurvatureClass.CONVEX: CurvatureClass.CONCAVE,
    CurvatureClass.CONCAVE: CurvatureClass.CONVEX,
    CurvatureClass.SINGULAR_CONVEX: CurvatureClass.SINGULAR_CONCAVE,
    CurvatureClass.SINGULAR_CONCAVE: CurvatureClass.SINGULAR_CONVEX,
}
CURVATURE_CLASSES = list(CurvatureClass)


class Stationarity(str, Enum):
    NOT_STATIONARY = "not_stationary"
    MINIMUM = "minimum"
    MAXIMUM = "maximum"
    SADDLE_POINT = "saddle_point"
    DEGENERATE = "degenerate_stationary"


_STATIONARY_KIND = {
    CurvatureClass.CONVEX: Stationarity.MINIMUM,
    CurvatureClass.CONCAVE: Stationarity.MAXIMUM,
    CurvatureClass.SADDLE: Stationarity.SADDLE_POINT,
}


class CurvatureUnavailable(LookupError):
    """No Hessian information exists for the requested sample(s)."""


class ColourMode(str, Enum):
    CURVATURE = "curvature"
    GENERALISATION_ERROR = "generalisation_error"


def classify_curvature(eigs, tol_rel=DEFAULT_TOL_REL):
    """Curvature class of a Hessian spectrum.

    Eigenvalues within ``tau = tol_rel * max(|lambda_min|, |lambda_max|, 1e-12)``
    of zero count as zero. Any zero eigenvalue turns the class singular; a
    spectrum of zeros only is flat.
    """
    eigs = np.asarray(eigs, dtype=float)
    if eigs.size == 0:
        raise ValueError("cannot classify an empty spectrum")
    if tol_rel <= 0:
        raise ValueError("tol_rel must be positive")
    tau = tol_rel * max(abs(eigs.min()), abs(eigs.max()), _SCALE_FLOOR)
    pos = bool(np.any(eigs > tau))
    neg = bool(np.any(eigs < -tau))
    zero = bool(np.any(np.abs(eigs) <= tau))
    if not zero:
        if pos and neg:
            return CurvatureClass.SADDLE
        return CurvatureClass.CONVEX if pos else CurvatureClass.CONCAVE
    if pos and neg:
        return CurvatureClass.SINGULAR_SADDLE
    if pos:
        return CurvatureClass.SINGULAR_CONVEX
    if neg:
        return CurvatureClass.SINGULAR_CONCAVE
    return CurvatureClass.FLAT


def stationary_kind(curvature):
    return _STATIONARY_KIND.get(CurvatureClass(curvature), Stationarity.DEGENERATE)


def classify_stationary(sample, eigs, tau_grad, tol_rel=DEFAULT_TOL_REL):
    """Classify a sample as non-stationary or as a kind of stationary point.

    ``eigs`` may be ``None``, in which case the sample's recorded curvature
    class is used. Raises ``CurvatureUnavailable`` for a stationary sample
    with no curvature information.
    """
    if tau_grad <= 0:
        raise ValueError("tau_grad must be positive")
    if sample.grad_norm > tau_grad:
        return Stationarity.NOT_STATIONARY
    if eigs is not None:
        curvature = classify_curvature(eigs, tol_rel)
    elif sample.curvature is not None:
        curvature = sample.curvature
    else:
        raise CurvatureUnavailable(
            f"no curvature for step {sample.step_index}; the architecture may exceed the Hessian cap"
        )
    return stationary_kind(curvature)


@dataclass
class LgCloud:
    """Loss-gradient scatter data.

    ``colour`` holds a CurvatureClass (or None for samples without a Hessian)
    in curvature mode, and the generalisation loss in the other mode.
    Points are an unordered set; ``walk_ids`` is kept only for bookkeeping.
    """

    loss: np.ndarray
    grad_norm: np.ndarray
    colour: list
    mode: ColourMode
    walk_ids: np.ndarray = None
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.loss)

    def curvature_mask(self):
        return np.array([c is not None for c in self.colour], dtype=bool)


def build_lg_cloud(traces, colour_mode=ColourMode.CURVATURE, metadata=None, strict=True):
    """One cloud point per finite sample of every trace.

    With ``strict=False`` a missing colour is tolerated and left as None.
    """
    mode = ColourMode(colour_mode)
    loss, grad, colour, ids = [], [], [], []
    for trace in traces:
        for s in trace.samples:
            if not (np.isfinite(s.loss_train) and np.isfinite(s.grad_norm)):
                continue
            if mode is ColourMode.CURVATURE:
                value = s.curvature
            else:
                value = s.loss_test
            loss.append(s.loss_train)
            grad.append(s.grad_norm)
            colour.append(value)
            ids.append(trace.walk_id)
    if loss and strict:
        have = [c is not None for c in colour]
        if mode is ColourMode.CURVATURE and not any(have):
            cap = (metadata or {}).get("hessian_cap")
            arch = (metadata or {}).get("architecture", "this architecture")
            raise CurvatureUnavailable(
                f"curvature colouring requested but no sample of {arch} carries curvature"
                + (f" (Hessian cap {cap})" if cap is not None else "")
            )
        if mode is ColourMode.GENERALISATION_ERROR and not all(have):
            raise ValueError("generalisation-error colouring needs a test loss on every sample")
    return LgCloud(
        loss=np.asarray(loss, dtype=float),
        grad_norm=np.asarray(grad, dtype=float),
        colour=colour,
        mode=mode,
        walk_ids=np.asarray(ids, dtype=int),
        metadata=dict(metadata or {}),
    )


@dataclass
class CurvatureHistogram:
    edges: np.ndarray
    counts: np.ndarray
    classes: list = field(default_factory=lambda: list(CURVATURE_CLASSES))

    @property
    def fractions(self):
        """Per-bin class fractions; rows of empty bins are all zero."""
        totals = self.counts.sum(axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            frac = np.where(totals > 0, self.counts / np.maximum(totals, 1), 0.0)
        return frac

    @property
    def global_fractions(self):
        totals = self.counts.sum(axis=0)
        return dict(zip((c.value for c in self.classes), totals / totals.sum()))

    def singular_fraction(self):
        g = self.global_fractions
        return sum(g[c.value] for c in self.classes if c.singular)


def curvature_histogram(cloud, n_bins=DEFAULT_N_BINS):
    """Counts of each curvature class over equal-width loss bins.

    Only points that carry a curvature class contribute. The bins span the
    observed loss range of those points.
    """
    if n_bins < 1:
        raise ValueError("n_bins must be at least 1")
    if cloud.mode is not ColourMode.CURVATURE:
        raise ValueError("histogram needs a curvature-coloured cloud")
    mask = cloud.curvature_mask()
    if not mask.any():
        raise ValueError("cloud has no curvature-coloured points")
    losses = cloud.loss[mask]
    labels = [c for c in cloud.colour if c is not None]
    lo, hi = float(losses.min()), float(losses.max())
    edges = np.linspace(lo, hi, n_bins + 1)
    if hi > lo:
        idx = np.clip(np.searchsorted(edges, losses, side="right") - 1, 0, n_bins - 1)
    else:
        idx = np.zeros(len(losses), dtype=int)
    column = {c: k for k, c in enumerate(CURVATURE_CLASSES)}
    counts = np.zeros((n_bins, len(CURVATURE_CLASSES)), dtype=int)
    np.add.at(counts, (idx, [column[CurvatureClass(c)] for c in labels]), 1)
    return CurvatureHistogram(edges=edges, counts=counts)


def default_tau_grad(cloud):
    """1% of the cloud's robust gradient-norm ceiling (its 99th percentile)."""
    if len(cloud) == 0:
        return 0.0
    return DEFAULT_TAU_GRAD_FACTOR * float(np.quantile(cloud.grad_norm, AXIS_QUANTILE))


def default_loss_tol(cloud):
    """2% of the cloud's robust loss span (minimum to 99th percentile)."""
    if len(cloud) == 0:
        return np.finfo(float).tiny
    span = float(np.quantile(cloud.loss, AXIS_QUANTILE) - cloud.loss.min())
    return DEFAULT_LOSS_TOL_FACTOR * span if span > 0 else np.finfo(float).tiny


def cluster_losses(values, loss_tol):
    """Single-linkage clustering of 1-D values: split wherever a sorted gap exceeds ``loss_tol``.

    Returns a list of index arrays into ``values``, ordered by loss.
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return []
    order = np.argsort(values, kind="stable")
    gaps = np.diff(values[order])
    cuts = np.flatnonzero(gaps > loss_tol) + 1
    return np.split(order, cuts)


@dataclass(frozen=True)
class AttractorCluster:
    representative_loss: float
    sample_count: int
    min_grad_norm: float
    dominant_curvature: CurvatureClass = None
    curvature_counts: dict = None

    @property
    def kind(self):
        if self.dominant_curvature is None:
            return None
        return stationary_kind(self.dominant_curvature)


@dataclass
class AttractorSummary:
    clusters: list
    tau_grad: float
    loss_tol: float
    n_stationary: int = 0

    def __len__(self):
        return len(self.clusters)

    @property
    def losses(self):
        return [c.representative_loss for c in self.clusters]

    def count_kind(self, kind):
        return sum(1 for c in self.clusters if c.kind == Stationarity(kind))


def attractor_summary(cloud, tau_grad=None, loss_tol=None):
    """Group near-stationary samples into attractors by loss value.

    Samples with ``grad_norm <= tau_grad`` are clustered with
    ``cluster_losses``; each cluster is reported by its median loss.
    The defaults read the cloud the way a plot of it would be read:
    ``tau_grad`` is 1% of the gradient axis and ``loss_tol`` 2% of the loss
    axis, each axis running up to the 99th percentile of the data.
    """
    if tau_grad is None:
        tau_grad = default_tau_grad(cloud)
    if loss_tol is None:
        loss_tol = default_loss_tol(cloud)
    if tau_grad < 0 or loss_tol <= 0:
        raise ValueError("tolerances must be positive")
    stationary = np.flatnonzero(cloud.grad_norm <= tau_grad)
    losses = cloud.loss[stationary]
    clusters = []
    for members in cluster_losses(losses, loss_tol):
        idx = stationary[members]
        labels = [cloud.colour[i] for i in idx] if cloud.mode is ColourMode.CURVATURE else []
        tally = Counter(CurvatureClass(c) for c in labels if c is not None)
        dominant = None
        if tally:
            # ties resolved by the fixed class order
            dominant = max(CURVATURE_CLASSES, key=lambda c: (tally[c], -CURVATURE_CLASSES.index(c)))
        clusters.append(
            AttractorCluster(
                representative_loss=float(np.median(cloud.loss[idx])),
                sample_count=int(idx.size),
                min_grad_norm=float(cloud.grad_norm[idx].min()),
                dominant_curvature=dominant,
                curvature_counts={c.value: n for c, n in tally.items()} if tally else None,
            )
        )
    return AttractorSummary(
        clusters=clusters, tau_grad=float(tau_grad), loss_tol=float(loss_tol),
        n_stationary=int(stationary.size),
    )


@dataclass(frozen=True)
class AccuracyStats:
    train_mean: float
    train_std: float
    test_mean: float = None
    test_std: float = None
    n_walks: int = 0


def aggregate_accuracy(traces):
    """Population mean and standard deviation of the final-step accuracies."""
    if not traces:
        raise ValueError("no traces to aggregate")
    finals = [t.samples[-1] for t in traces if t.samples]
    train = np.array([s.acc_train for s in finals if s.acc_train is not None], dtype=float)
    test = np.array([s.acc_test for s in finals if s.acc_test is not None], dtype=float)
    if train.size == 0:
        raise ValueError("final samples carry no training accuracy")
    return AccuracyStats(
        train_mean=float(train.mean()),
        train_std=float(train.std()),
        test_mean=float(test.mean()) if test.size else None,
        test_std=float(test.std()) if test.size else None,
        n_walks=len(finals),
    )
