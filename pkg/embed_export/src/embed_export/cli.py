"""Command line: export embedding tables, list encoders.

Exit codes follow the toolkit convention: 0 success, 1 usage error,
2 input/encoder error.
"""

from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

from .encoders import list_encoders
from .errors import ExportError
from .export import export_image_embeddings, export_text_embeddings


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embed-export",
        description="encode utterances or images into packed embedding tables",
    )
    sub = parser.add_subparsers(dest="command")

    enc = sub.add_parser("encoders", help="list registered encoders")
    del enc

    text = sub.add_parser("text", help="encode a line-JSON utterance file")
    text.add_argument("--input", required=True, help="annotation or generation line-JSON file")
    text.add_argument("--encoder", default="hashed-ngram-v1")
    text.add_argument("--out", required=True, help="payload path (writes .json/.ids/.manifest.json beside it)")
    text.add_argument("--batch-size", type=int, default=64)
    text.add_argument("--space-tag", default=None,
                      help="override the encoder's space tag (e.g. for aligned spaces)")

    image = sub.add_parser("images", help="encode files from an id<TAB>path list")
    image.add_argument("--input", required=True, help="image list TSV")
    image.add_argument("--encoder", default="pixel-grid-v1")
    image.add_argument("--out", required=True)
    image.add_argument("--batch-size", type=int, default=64)
    image.add_argument("--space-tag", default=None)
    return parser


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 0 for --help, 2 for bad flags; fold the latter to 1
        return 0 if exc.code == 0 else 1
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        if args.command == "encoders":
            for spec in list_encoders():
                status = "ready" if spec.available else "unavailable (weights not bundled)"
                print(f"{spec.name}\t{spec.kind}\tversion {spec.version}\t{status}")
            return 0
        if args.command == "text":
            manifest = export_text_embeddings(
                args.input, args.encoder, args.out,
                batch_size=args.batch_size, space_tag=args.space_tag,
            )
        else:
            manifest = export_image_embeddings(
                args.input, args.encoder, args.out,
                batch_size=args.batch_size, space_tag=args.space_tag,
            )
        print(f"wrote {manifest.count} x {manifest.dim} vectors "
              f"({manifest.encoder_name} {manifest.encoder_version}, "
              f"space {manifest.space_tag!r}) to {args.out}")
        return 0
    except ExportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
