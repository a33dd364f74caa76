"""
Loss-gradient cloud of the minimal XOR network
===============================================

Eighteen micro gradient walks over 2-2-1, each starting from a uniform
point in [-1, 1]. Every sample lands in the cloud as a (loss, |grad|) pair.
Near-zero-gradient samples pile up at a handful of loss values, and those
plateaus are the attractors.

Run with ``python demos/xor_lg_cloud.py [seed]``.
"""

import sys

import numpy as np

from lossprobe import (
    Architecture,
    DataSource,
    WalkConfig,
    attractor_summary,
    build_lg_cloud,
    run_gradient_walk,
    walk_count,
    xor_dataset,
)

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 1
arch = Architecture.parse("2-2-1")
data = DataSource(xor_dataset())
config = WalkConfig(init_range=(-1, 1), granularity="micro", seed=seed)

# %% sample the walks
traces = [run_gradient_walk(arch, data, config, w) for w in range(walk_count(arch.n_params))]
cloud = build_lg_cloud(traces)
print(f"{arch}: {len(traces)} walks, {len(cloud)} cloud points, epsilon {config.epsilon}")

# %% a coarse text rendering of the cloud: loss across, log gradient down
cols, rows = 60, 14
lo, hi = np.log10(max(cloud.grad_norm.min(), 1e-12)), np.log10(cloud.grad_norm.max())
grid = [[" "] * cols for _ in range(rows)]
for x, g in zip(cloud.loss, cloud.grad_norm):
    c = min(int(x / max(cloud.loss.max(), 1e-12) * (cols - 1)), cols - 1)
    r = min(int((hi - np.log10(max(g, 1e-12))) / (hi - lo) * (rows - 1)), rows - 1)
    grid[r][c] = "*"
print(f"|grad| from 1e{hi:.0f} (top) to 1e{lo:.0f} (bottom), loss 0 .. {cloud.loss.max():.2f}")
print("\n".join("|" + "".join(row) for row in grid))

# %% attractors: clusters of stationary loss values
summary = attractor_summary(cloud)
print(f"\ntau_grad {summary.tau_grad:.3g}, loss_tol {summary.loss_tol:.3g}")
for c in summary.clusters:
    kind = c.kind.value if c.kind else "?"
    print(f"  loss {c.representative_loss:.4f}  samples {c.sample_count:5d}  "
          f"curvature {c.dominant_curvature.value if c.dominant_curvature else '-':16s} {kind}")
