"""Command-line entry points: experiment runs, threshold prediction from
embedding files, and config validation."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .bench import ConfigError, run, validate_config
from .embed_io import EmbedLoadError
from .thetapredict import EmbeddingPool, ThetaPredictConfig, predict


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="quotval", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    runp = sub.add_parser("run", help="run an experiment config")
    runp.add_argument("--config", required=True)
    runp.add_argument("--seeds", help="comma-separated seed override, e.g. 0,1,2")
    runp.add_argument("--out", help="output directory override")

    tp = sub.add_parser("predict-theta", help="predict the admissible cosine threshold")
    tp.add_argument("--embeddings", required=True, help="EMBED1 file")
    tp.add_argument("--providers", type=int, required=True)
    tp.add_argument("--units-per", type=int, required=True)
    tp.add_argument("--protocol", choices=["class", "random"], default="random")
    tp.add_argument("--cutoff", type=float, default=0.10)
    tp.add_argument("--sigma", type=float, default=0.02)
    tp.add_argument("--trials", type=int, default=30)
    tp.add_argument("--seed", type=int, default=0)
    tp.add_argument("--out", help="write the JSON report here instead of stdout")

    vp = sub.add_parser("validate-config", help="check an experiment config")
    vp.add_argument("path")

    sub.add_parser("version", help="print the package version")
    return p


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "version":
            print(__version__)
            return 0
        if args.command == "validate-config":
            cfg = json.loads(Path(args.path).read_text())
            validate_config(cfg)
            print(f"ok: {args.path}")
            return 0
        if args.command == "run":
            seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else None
            return run(args.config, seeds=seeds, out_dir=args.out)
        if args.command == "predict-theta":
            protocol = "class_stratified" if args.protocol == "class" else "random"
            pool = EmbeddingPool.from_embed1(args.embeddings, partition_protocol=protocol)
            cfg = ThetaPredictConfig(
                sigma=args.sigma, cutoff=args.cutoff, trials=args.trials, seed=args.seed
            )
            report = predict(pool, (args.providers, args.units_per), cfg).to_json()
            if args.out:
                Path(args.out).write_text(report)
            else:
                print(report)
            return 0
    except (ConfigError, EmbedLoadError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
