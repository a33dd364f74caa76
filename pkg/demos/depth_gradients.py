"""
Gradient magnitude against depth
================================

Macro walks on XOR with one, two and three hidden layers of width 2. The
largest gradient norm in the cloud grows by roughly an order of magnitude
per added layer, which is why deeper clouds stretch so far up the
gradient axis.

Run with ``python demos/depth_gradients.py``.
"""

import numpy as np

from lossprobe import ExperimentConfig, run_experiment

archs = ["2-2-1", "2-2-2-1", "2-2-2-2-1"]
table = []
for seed in range(1, 6):
    config = ExperimentConfig(
        problem="xor", architectures=archs, granularities=["macro"], init_ranges=[[-1, 1]],
        walks_override=None, curvature_enabled=False, seed=seed, output_dir=f"demo-out/depth/{seed}",
    )
    table.append([r.max_grad_norm for r in run_experiment(config).cells])

table = np.array(table)
print("max |grad| per seed:", "  ".join(archs))
for seed, row in enumerate(table, 1):
    print(f"  seed {seed}: " + "  ".join(f"{v:10.3f}" for v in row))
print("median growth per layer:", np.round(np.median(table[:, 1:] / table[:, :-1], axis=0), 1))
