"""
MNIST accuracy at the end of macro walks
========================================

Fifty macro walks in [-10, 10] per architecture on a 1000/1000 subsample
of the bundled MNIST digits. A wider hidden layer lifts the final
training accuracy, while stacking narrow layers drags it towards chance.

Run with ``python demos/mnist_accuracy.py [mnist_dir]`` (about a minute).
The default directory is the bundled ``data/mnist_subset``.
"""

import sys
from pathlib import Path

from lossprobe import ExperimentConfig, run_experiment

mnist_dir = sys.argv[1] if len(sys.argv) > 1 else Path(__file__).resolve().parents[1] / "data" / "mnist_subset"
config = ExperimentConfig(
    problem="mnist",
    architectures=["784-10-10", "784-100-10", "784-10-10-10-10"],
    granularities=["macro"],
    init_ranges=[[-10, 10]],
    seed=1,
    mnist_dir=str(mnist_dir),
    output_dir="demo-out/mnist",
)
report = run_experiment(config)

print(f"{'architecture':18s} {'C_t':>14s} {'C_g':>14s}  walks")
for r in report.cells:
    a = r.accuracy
    print(f"{str(r.cell.architecture):18s} {a.train_mean:6.3f} ± {a.train_std:5.3f} "
          f"{a.test_mean:6.3f} ± {a.test_std:5.3f}  {r.n_walks}/{r.prescribed_walks}")
