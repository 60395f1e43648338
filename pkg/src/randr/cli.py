"""Command-line entry point: generate, bench, textures, eval, pr-curve.

Exit codes: 0 success, 2 config error, 3 I/O error, 4 evaluation input error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

from PIL import Image

from . import dataset
from .config import parse_config, with_disabled_patterns
from .evaluate import (
    AP_MODES,
    DEFAULT_IOU_THRESHOLD,
    ClassReport,
    EvalReport,
    evaluate,
    write_pr_svgs,
    write_report,
)
from .errors import (
    ConfigError,
    ConfigInvalid,
    EmptyPatternSet,
    EvalInputError,
    InvalidPattern,
    IoFailure,
    ParseError,
    RandrError,
)
from .render import to_uint8
from .textures import PATTERN_FAMILIES, build_texture_library, pattern_to_dict
from .version import __version__
from .workers import resolve_workers

_CONFIG_ERRORS = (ConfigError, ConfigInvalid, InvalidPattern, EmptyPatternSet)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="randr",
        description=(
            "Deterministic synthetic dataset generator for shape-primitive "
            "object detection, with a detection-metrics evaluator and a "
            "scene-recycling throughput benchmark. The RANDR_THREADS "
            "environment variable overrides the worker count (0 = all cores)."
        ),
    )
    parser.add_argument("--version", action="version", version=f"randr {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate a dataset (images, annotations, manifest)")
    g.add_argument("--config", "-c", required=True, help="pipeline config JSON")
    g.add_argument("--strategy", choices=("pool", "respawn"), help="override the config's strategy")
    g.add_argument("--png", action="store_true", help="also write lossless PNG sidecars")
    g.add_argument(
        "--disable-texture",
        action="append",
        default=[],
        choices=list(PATTERN_FAMILIES),
        help="drop a texture family (repeatable), e.g. for ablation datasets",
    )

    b = sub.add_parser("bench", help="compare pool vs respawn generation throughput")
    b.add_argument("--config", "-c", required=True)
    b.add_argument("--scenes", type=int, default=200, help="scenes per strategy (>= 50)")
    b.add_argument("--out", help="also write the report JSON here")

    t = sub.add_parser("textures", help="dump sample textures as PNG files")
    t.add_argument("--config", "-c", required=True)
    t.add_argument("--count", type=int, default=16)
    t.add_argument("--out", required=True, help="output directory")

    e = sub.add_parser("eval", help="detection metrics against dataset annotations")
    e.add_argument("--gt", required=True, help="dataset annotations directory")
    e.add_argument("--dets", required=True, help="detections JSON file")
    e.add_argument("--ap-mode", choices=AP_MODES, default="allpoint")
    e.add_argument("--iou", type=float, default=DEFAULT_IOU_THRESHOLD)
    e.add_argument("--out", required=True, help="report JSON path (PR CSVs land next to it)")

    p = sub.add_parser("pr-curve", help="render PR curves from a report as static SVGs")
    p.add_argument("--report", required=True, help="report JSON produced by eval")
    p.add_argument("--out", required=True, help="output directory")
    return parser


def _cmd_generate(args) -> int:
    config = parse_config(args.config)
    if args.disable_texture:
        config = with_disabled_patterns(config, args.disable_texture)
    if args.strategy:
        config = replace(config, strategy=args.strategy)
        config.validate()
    t0 = time.perf_counter()
    manifest = dataset.generate_dataset(config, png=args.png)
    wall = time.perf_counter() - t0
    print(
        f"generated {manifest.num_scenes} scenes ({manifest.strategy}) in {wall:.1f}s "
        f"({manifest.num_scenes / wall:.2f} scenes/s) -> {config.output_dir}"
    )
    return 0


def _cmd_bench(args) -> int:
    config = parse_config(args.config)
    report = dataset.bench(config, num_scenes=args.scenes)
    print(report.table())
    payload = json.dumps(report.to_dict(), indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(payload)
        print(f"report written to {args.out}")
    else:
        print(payload, end="")
    return 0


def _cmd_textures(args) -> int:
    config = parse_config(args.config)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    seed = dataset.texture_master_seed(config.master_seed)
    library = build_texture_library(config.textures, seed, count=args.count)
    meta = []
    for i, (image, pattern) in enumerate(zip(library.images, library.patterns)):
        path = out_dir / f"texture_{i:05d}.png"
        Image.fromarray(to_uint8(image.pixels), mode="RGB").save(path, format="PNG")
        meta.append({"file": path.name, **pattern_to_dict(pattern)})
    (out_dir / "patterns.json").write_text(json.dumps(meta, indent=2) + "\n")
    print(f"wrote {len(meta)} textures to {out_dir}")
    return 0


def _cmd_eval(args) -> int:
    report = evaluate(
        Path(args.dets), Path(args.gt), iou_threshold=args.iou, ap_mode=args.ap_mode
    )
    written = write_report(report, args.out)
    print(report.table())
    print(f"report written to {written[0]}")
    return 0


def _cmd_pr_curve(args) -> int:
    path = Path(args.report)
    try:
        doc = json.loads(path.read_text())
        classes = doc["classes"]
        per_class = {
            name: ClassReport(
                ap=rec.get("ap"),
                gt_count=int(rec.get("gt_count", 0)),
                tp=int(rec.get("tp", 0)),
                fp=int(rec.get("fp", 0)),
                pr=tuple((float(r), float(p)) for r, p in rec.get("pr", [])),
            )
            for name, rec in classes.items()
        }
        report = EvalReport(
            per_class=per_class,
            map=float(doc["map"]),
            ap_mode=str(doc.get("ap_mode", "allpoint")),
            iou_threshold=float(doc.get("iou_threshold", 0.5)),
        )
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{path}: not a valid evaluation report: {exc}") from None
    written = write_pr_svgs(report, args.out)
    print(f"wrote {len(written)} PR curves to {args.out}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {
        "generate": (_cmd_generate, _CONFIG_ERRORS),
        "bench": (_cmd_bench, _CONFIG_ERRORS),
        "textures": (_cmd_textures, _CONFIG_ERRORS),
        "eval": (_cmd_eval, ()),
        "pr-curve": (_cmd_pr_curve, ()),
    }
    handler, config_errors = handlers[args.command]
    try:
        resolve_workers()  # surface a malformed RANDR_THREADS early
        return handler(args)
    except config_errors as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ParseError, EvalInputError) as exc:
        # reachable only for eval/pr-curve, whose inputs are evaluation data
        print(f"evaluation input error: {exc}", file=sys.stderr)
        return 4
    except (IoFailure, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except RandrError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
