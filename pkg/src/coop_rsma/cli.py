"""Command line entry point: ``coop-rsma run ...`` and ``coop-rsma plot ...``."""
from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

from .harness.plots import FIGURES, emit_plot_data
from .harness.presets import PRESET_NAMES, load_preset
from .harness.run import RunTable, read_csv, run_preset
from .harness.trial import ALGORITHMS

log = logging.getLogger("coop_rsma")

PRESET_FIGURES = {"fig3": ("fig3",), "fig4": ("fig4a", "fig4b"), "fig5": ("fig5",), "fig6": ("fig6",),
                  "fig7": ("fig7",), "custom": ()}


def _u64(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from exc
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def _positive(text: str) -> int:
    try:
        v = int(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from exc
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coop-rsma", description="Multi-block cooperative rate-splitting experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a figure preset or a custom sweep")
    run.add_argument("--preset", required=True, choices=PRESET_NAMES)
    run.add_argument("--scenario", type=Path, help="YAML/JSON file with config and sweep overrides")
    run.add_argument("--trials", type=_positive)
    run.add_argument("--seed", type=_u64, default=None)
    run.add_argument("--out", type=Path, required=True)
    run.add_argument("--algo", choices=(*ALGORITHMS, "all"), default="all")
    run.add_argument("-v", "--verbose", action="store_true")
    plot = sub.add_parser("plot", help="re-emit series files from an existing run directory")
    plot.add_argument("--figure", required=True, choices=sorted(FIGURES))
    plot.add_argument("--run-dir", type=Path, required=True)
    plot.add_argument("--out", type=Path)
    return parser


def _run(args) -> int:
    preset = load_preset(args.preset, args.scenario)
    algos = None if args.algo == "all" else (args.algo,)
    preset = preset.with_overrides(trials=args.trials, seed=args.seed, algorithms=algos)
    start = time.perf_counter()
    table = run_preset(preset, args.out)
    for fig in PRESET_FIGURES[preset.name]:
        emit_plot_data(table, fig, args.out / "series")
    log.info("%d trial rows in %.1f s -> %s", len(table.raw), time.perf_counter() - start, args.out)
    return 0


def _plot(args) -> int:
    run_dir = args.run_dir
    raw_path = run_dir / "raw.csv"
    if not raw_path.exists():
        raise ValueError(f"{raw_path} does not exist")
    agg_path = run_dir / "agg.csv"
    table = RunTable(raw=read_csv(raw_path), agg=read_csv(agg_path) if agg_path.exists() else [])
    emit_plot_data(table, args.figure, args.out or run_dir / "series")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return _run(args) if args.command == "run" else _plot(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
