"""Command-line entry point: ``lossprobe run | analyze | fetch-mnist``."""

from __future__ import annotations

import argparse
import json
import re
import sys
from pathlib import Path

from . import __version__
from .data import fetch_mnist
from .experiment import ExperimentConfig, run_experiment
from .io import (
    read_traces_csv,
    write_attractors_csv,
    write_cloud_csv,
    write_histogram_csv,
)
from .landscape import (
    ColourMode,
    attractor_summary,
    build_lg_cloud,
    curvature_histogram,
)

# argparse reads "--init-range -1:1" as two options; glue the value on instead
_NEGATIVE_VALUE = re.compile(r"^-\d")


def _glue_negative_values(argv):
    out, i = [], 0
    while i < len(argv):
        arg = argv[i]
        if arg in ("--init-range", "--tau-grad", "--loss-tol") and i + 1 < len(argv) \
                and _NEGATIVE_VALUE.match(argv[i + 1]):
            out.append(f"{arg}={argv[i + 1]}")
            i += 2
        else:
            out.append(arg)
            i += 1
    return out


def _parse_range(text):
    try:
        a, b = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected A:B, got {text!r}") from None
    if not a < b:
        raise argparse.ArgumentTypeError(f"empty interval {text!r}")
    return [a, b]


def _parse_walks(text):
    if text == "full":
        return None
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError("walk count must be positive")
    return n


def _build_parser():
    parser = argparse.ArgumentParser(prog="lossprobe", description=__doc__)
    parser.add_argument("--version", action="version", version=f"lossprobe {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="sample walks over an architecture grid")
    run.add_argument("--config", type=Path, help="JSON file with ExperimentConfig fields")
    run.add_argument("--problem", choices=["xor", "mnist"])
    run.add_argument("--arch", action="append", help="architecture such as 2-2-1 (repeatable)")
    run.add_argument("--granularity", action="append", choices=["micro", "macro"])
    run.add_argument("--init-range", action="append", type=_parse_range, metavar="A:B")
    run.add_argument("--walks", type=_parse_walks, default=argparse.SUPPRESS,
                     help="walks per cell, or 'full' for 2m")
    run.add_argument("--steps", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--curvature", choices=["on", "off"])
    run.add_argument("--direction", choices=["descent", "literal"])
    run.add_argument("--mnist-dir", type=Path)
    run.add_argument("--workers", type=int, help="worker processes (capped by LOSSPROBE_THREADS)")
    run.add_argument("--out", type=Path)

    analyze = sub.add_parser("analyze", help="re-derive plot data from a trace CSV")
    analyze.add_argument("--traces", type=Path, required=True)
    analyze.add_argument("--mode", choices=["cloud", "histogram", "attractors"], required=True)
    analyze.add_argument("--colour", choices=[m.value for m in ColourMode], default="curvature")
    analyze.add_argument("--bins", type=int, default=50)
    analyze.add_argument("--tau-grad", type=float)
    analyze.add_argument("--loss-tol", type=float)
    analyze.add_argument("--out", type=Path, help="output CSV (default: stdout)")

    fetch = sub.add_parser("fetch-mnist", help="download MNIST and verify checksums")
    fetch.add_argument("--dir", type=Path, required=True)
    return parser


def _config_from_args(args):
    d = {}
    if args.config is not None:
        d = json.loads(args.config.read_text(encoding="utf-8"))
    overrides = {
        "problem": args.problem,
        "architectures": args.arch,
        "granularities": args.granularity,
        "init_ranges": args.init_range,
        "steps_override": args.steps,
        "seed": args.seed,
        "direction": args.direction,
        "mnist_dir": str(args.mnist_dir) if args.mnist_dir else None,
        "output_dir": str(args.out) if args.out else None,
    }
    d.update({k: v for k, v in overrides.items() if v is not None})
    if args.curvature is not None:
        d["curvature_enabled"] = args.curvature == "on"
    if hasattr(args, "walks"):
        d["walks_override"] = args.walks
    return ExperimentConfig.from_dict(d)


def _cmd_run(args):
    config = _config_from_args(args)

    def progress(done, total):
        if done == total or done % max(total // 20, 1) == 0:
            print(f"\r{done}/{total} walks", end="", file=sys.stderr, flush=True)

    report = run_experiment(config, workers=args.workers, progress=progress)
    print(file=sys.stderr)
    failed = [r for r in report.cells if r.status != "ok"]
    for r in report.cells:
        line = f"{r.cell.cell_id}: {r.status}"
        if r.attractors is not None:
            line += f", {len(r.attractors)} attractor(s)"
        if r.error:
            line += f" ({r.error})"
        print(line)
    print(f"summary: {Path(config.output_dir) / 'summary.json'}")
    return 1 if failed else 0


def _cmd_analyze(args):
    traces = read_traces_csv(args.traces)
    mode = ColourMode(args.colour)
    out = args.out if args.out is not None else sys.stdout
    if args.mode == "cloud":
        write_cloud_csv(build_lg_cloud(traces, mode), out)
    elif args.mode == "histogram":
        write_histogram_csv(curvature_histogram(build_lg_cloud(traces), args.bins), out)
    else:
        cloud = build_lg_cloud(traces, ColourMode.CURVATURE, strict=False)
        summary = attractor_summary(cloud, args.tau_grad, args.loss_tol)
        write_attractors_csv(summary, out)
    return 0


def _cmd_fetch(args):
    for path in fetch_mnist(args.dir):
        print(path)
    return 0


def main(argv=None):
    argv = _glue_negative_values(sys.argv[1:] if argv is None else list(argv))
    args = _build_parser().parse_args(argv)
    handler = {"run": _cmd_run, "analyze": _cmd_analyze, "fetch-mnist": _cmd_fetch}[args.command]
    try:
        return handler(args)
    except (OSError, ValueError, LookupError) as exc:
        print(f"lossprobe: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
