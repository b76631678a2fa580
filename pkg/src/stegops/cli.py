"""Command line interface: gen, apply, stats, diag, extract, train, eval."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import diag, imgcore, ops, pipeline


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stegops",
        description="Detect and identify image processing operations with "
        "steganalytic features.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="synthesize a corpus and operated counterparts")
    p.add_argument("--config", required=True, help="experiment config JSON")
    p.add_argument("--out", help="override output_dir")
    p.add_argument("--seed", type=int, help="override corpus seed")
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("apply", help="apply one operation to a PGM image")
    p.add_argument("--kind", required=True, choices=ops.OP_KINDS)
    p.add_argument("--params", help='operation parameters, e.g. \'{"hsize": 3}\'')
    p.add_argument("--seed", type=int, help="sample parameters with this seed")
    p.add_argument(
        "--center-crop", nargs=2, type=int, metavar=("W", "H"),
        help="crop the centered region before the operation",
    )
    p.add_argument(
        "--downsample2", action="store_true",
        help="halve both dimensions (2x2 means) before the operation",
    )
    p.add_argument("input")
    p.add_argument("output")

    p = sub.add_parser("stats", help="modification-ratio/PSNR report per operation")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", help="output CSV (default: stats.csv next to manifest)")

    p = sub.add_parser("diag", help="class-averaged joint difference probability")
    p.add_argument("--manifest", required=True)
    p.add_argument("--label", type=int, required=True)
    p.add_argument("--support", type=int, default=diag.DEFAULT_SUPPORT)
    p.add_argument("--out", help="output CSV (default: jointprob_<label>.csv)")

    p = sub.add_parser("extract", help="extract a feature file from a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--feature-set", default="spam686")
    p.add_argument("--out")
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("train", help="train the pairwise ensemble model")
    p.add_argument("--features", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--split-seed", type=int, help="override split_seed")
    p.add_argument("--out")

    p = sub.add_parser("eval", help="evaluate a model on its held-out half")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--trials", type=int, help="override the stored trial count")
    p.add_argument("--out-dir", help="directory for confusion.csv and metrics.json")

    return parser


def _run_apply(args) -> int:
    img = imgcore.load_pgm(Path(args.input).read_bytes())
    if args.center_crop:
        img = imgcore.crop_center(img, args.center_crop[0], args.center_crop[1])
    if args.downsample2:
        img = imgcore.downsample2(img)
    if args.params:
        spec = ops.OperationSpec(args.kind, json.loads(args.params))
    elif args.seed is not None:
        spec = ops.sample_spec(args.kind, args.seed)
    elif args.kind == "HE":
        spec = ops.OperationSpec("HE", {})
    else:
        raise ValueError("either --params or --seed is required for this kind")
    Path(args.output).write_bytes(imgcore.save_pgm(ops.apply(spec, img)))
    print(f"applied {json.dumps(spec.to_json())} -> {args.output}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "gen":
            cfg = pipeline.load_config(args.config, output_dir=args.out, seed=args.seed)
            path = pipeline.cmd_gen(cfg, workers=args.workers)
            print(f"manifest: {path}")
        elif args.command == "apply":
            return _run_apply(args)
        elif args.command == "stats":
            out = args.out or Path(args.manifest).parent / "stats.csv"
            pipeline.cmd_stats(args.manifest, out)
            print(f"stats: {out}")
        elif args.command == "diag":
            out = args.out or Path(args.manifest).parent / f"jointprob_{args.label}.csv"
            pipeline.cmd_diag(args.manifest, args.label, args.support, out)
            print(f"jointprob: {out}")
        elif args.command == "extract":
            path = pipeline.cmd_extract(
                args.manifest, args.feature_set, args.out, workers=args.workers
            )
            print(f"features: {path}")
        elif args.command == "train":
            cfg = pipeline.load_config(args.config, split_seed=args.split_seed)
            path = pipeline.cmd_train(args.features, cfg, args.out)
            print(f"model: {path}")
        elif args.command == "eval":
            out_dir = Path(args.out_dir) if args.out_dir else Path(args.model).parent
            out_dir.mkdir(parents=True, exist_ok=True)
            metrics = pipeline.cmd_eval(
                args.model,
                args.features,
                out_confusion=out_dir / "confusion.csv",
                out_metrics=out_dir / "metrics.json",
                trials=args.trials,
            )
            print(
                f"accuracy={metrics['accuracy']:.4f} "
                f"diagonal_average={metrics['diagonal_average']:.4f}"
            )
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
