"""Command-line interface for the extractor."""

from __future__ import annotations

import argparse
import logging
import sys

from .backends import BACKENDS, make_backend
from .extract import extract
from .manifest import load_manifest
from .specs import PTM_SPECS, get_spec


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mioextract",
        description="Turn labeled audio into MIOE embedding corpora using "
                    "pre-trained speech models",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="run one PTM over a manifest")
    p.add_argument("--manifest", required=True, help="CSV: clip_id,path,label")
    p.add_argument("--ptm", required=True, choices=sorted(PTM_SPECS))
    p.add_argument("--out", required=True, help="output MIOE path")
    p.add_argument("--backend", default="huggingface", choices=sorted(BACKENDS))
    p.add_argument("--name", help="corpus name (defaults to the output stem)")
    p.add_argument("--device", default="cpu")
    p.add_argument("--deterministic", action="store_true",
                   help="single-item, fixed-seed inference")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("specs", help="list supported PTMs")
    p.set_defaults(func=cmd_specs)
    return parser


def cmd_extract(args) -> int:
    rows = load_manifest(args.manifest)
    spec = get_spec(args.ptm)
    backend = make_backend(args.backend, device=args.device,
                           deterministic=args.deterministic)
    result = extract(rows, spec, args.out, backend, name=args.name)
    print(f"wrote {result.out_path}: {result.written} records, dim {spec.dim}")
    if result.rejects:
        print(f"skipped {len(result.rejects)} clips; see {result.rejects_path}",
              file=sys.stderr)
    return 0


def cmd_specs(args) -> int:
    for spec in PTM_SPECS.values():
        print(f"{spec.ptm_id:14s} dim {spec.dim:5d}  {spec.pooling:18s} "
              f"{spec.model_ref}")
    return 0


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
