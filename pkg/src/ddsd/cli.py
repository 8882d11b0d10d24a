"""Command-line entry point: ``ddsd {synth,train,extract,eval,det-plot}``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import pipeline
from .config import ConfigError, load_config, parse_value
from .evaluation import ScoreSet, det_curve, det_svg
from .fusion import read_scores
from .synth import SynthError

LOG_ENV = "DDSD_LOG_LEVEL"


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON run configuration")
    parser.add_argument("--seed", type=int, help="override the run seed")
    parser.add_argument("--out", help="override the output directory")
    parser.add_argument(
        "--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
        help="override a dotted config key, e.g. synth.n_directed=100 (repeatable)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ddsd", description="Device-directed speech detection pipeline.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate the synthetic corpus")
    _common(p)

    p = sub.add_parser("train", help="train one branch")
    _common(p)
    p.add_argument("--branch", required=True, choices=("acoustic", "char", "fusion"))
    p.add_argument("--mask", help="fusion feature mask(s): 'all', 'acd', 'a,d' or several joined by '+'")

    p = sub.add_parser("extract", help="extract a, c and d features for every utterance")
    _common(p)

    p = sub.add_parser("eval", help="EER table and DET curves over the scored runs")
    _common(p)
    p.add_argument("--normal-deviate", action="store_true", help="plot DET axes on the normal-deviate scale")

    p = sub.add_parser("det-plot", help="render DET curves of score files to SVG")
    p.add_argument("scores", nargs="+", help="score JSONL files")
    p.add_argument("--out", required=True, help="SVG output path")
    p.add_argument("--normal-deviate", action="store_true")
    return parser


def _overrides(args) -> list:
    pairs = []
    for item in args.overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} must look like KEY=VALUE")
        key, value = item.split("=", 1)
        pairs.append((key.strip(), parse_value(value)))
    if args.seed is not None:
        pairs.append(("seed", args.seed))
    if args.out is not None:
        pairs.append(("out", args.out))
    if getattr(args, "mask", None) is not None:
        pairs.append(("mask", args.mask))
    return pairs


def _run(args) -> None:
    if args.command == "det-plot":
        curves = {}
        for path in args.scores:
            rows = read_scores(path)
            curves[Path(path).stem] = det_curve(ScoreSet.from_pairs((s, l) for _, s, l in rows))
        Path(args.out).write_text(det_svg(curves, args.normal_deviate), encoding="utf-8")
        return
    config = load_config(args.config, _overrides(args))
    if args.command == "synth":
        print(pipeline.run_synth(config))
    elif args.command == "train":
        if args.branch == "acoustic":
            losses = pipeline.run_train_acoustic(config)
        elif args.branch == "char":
            losses = pipeline.run_train_char(config)
        else:
            for name, value in pipeline.run_train_fusion(config).items():
                print(f"{name}\ttest EER {100 * value:.2f}%")
            return
        for epoch, loss in enumerate(losses, start=1):
            print(f"epoch {epoch}\tmean loss {loss:.5f}")
    elif args.command == "extract":
        print(pipeline.run_extract(config))
    elif args.command == "eval":
        print(pipeline.run_eval(config, args.normal_deviate))


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get(LOG_ENV, "WARNING").upper(), format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        _run(args)
    except (ConfigError, pipeline.PipelineError, SynthError, OSError, ValueError) as exc:
        print(f"ddsd {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
