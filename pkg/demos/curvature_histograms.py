"""
Curvature classes as width and depth grow
=========================================

Hessians are sampled every tenth step of the micro walks. The share of
singular or flat Hessians rises sharply from 2-2-1 to 2-20-1 and to
2-2-2-2-1. That extra flatness shows up as redundant directions in
weight space.

Run with ``python demos/curvature_histograms.py [seed]`` (about 20 s).
"""

import sys

from lossprobe import ExperimentConfig, run_experiment

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 1
config = ExperimentConfig(
    problem="xor",
    architectures=["2-2-1", "2-20-1", "2-2-2-2-1"],
    granularities=["micro"],
    init_ranges=[[-1, 1]],
    walks_override=18,
    seed=seed,
    output_dir="demo-out/curvature",
)
report = run_experiment(config)

print(f"{'architecture':14s}" + "".join(f"{c:>17s}" for c in report.cells[0].curvature["fractions"]))
for record in report.cells:
    fractions = record.curvature["fractions"]
    print(f"{str(record.cell.architecture):14s}" + "".join(f"{v:17.3f}" for v in fractions.values()))

# per-bin fractions for plotting live next to the traces
for record in report.cells:
    print(record.cell.cell_id, "->", record.files["histogram"])
