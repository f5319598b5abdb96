"""CLI: ``bridge run --images <dir> --model <path> --out preds.txt [--tta]``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import DEFAULT_TTA_SIZES, BridgeConfig, BridgeError
from .inference import run_inference

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_IO = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bridge", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="run a model over an image directory")
    p.add_argument("--images", type=Path, required=True)
    p.add_argument("--model", type=Path, required=True, help="model artifact (JSON)")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--tta", action="store_true", help="resize sweep plus horizontal flip")
    p.add_argument(
        "--sizes",
        default=",".join(str(s) for s in DEFAULT_TTA_SIZES),
        help="comma-separated TTA resize targets (shorter edge)",
    )
    p.add_argument("--no-flip", action="store_true", help="disable the flipped TTA view")
    p.add_argument("--score-floor", type=float, default=0.0)
    p.add_argument("--device", default="cpu")
    p.add_argument("--class-map", type=Path, help="JSON object: model class -> D code")
    p.set_defaults(func=_cmd_run)
    return parser


def _cmd_run(args: argparse.Namespace) -> int:
    class_map = {}
    if args.class_map is not None:
        class_map = json.loads(Path(args.class_map).read_text(encoding="utf-8"))
    try:
        sizes = tuple(int(s) for s in str(args.sizes).split(",") if s.strip())
    except ValueError:
        raise BridgeError(f"bad --sizes value {args.sizes!r}") from None
    config = BridgeConfig(
        model_path=args.model,
        score_floor=args.score_floor,
        device=args.device,
        tta=args.tta,
        tta_sizes=sizes,
        hflip=not args.no_flip,
        class_map=class_map,
    )
    out = run_inference(args.images, config, args.out)
    print(json.dumps({"file": str(out)}))
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BridgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    raise SystemExit(main())
