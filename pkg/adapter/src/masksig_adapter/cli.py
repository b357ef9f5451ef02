"""Command line for exporting and validating bundles.

    masksig-adapter export --config config.json [--out DIR]
    masksig-adapter validate BUNDLE_DIR

export prints the bundle directory on success. validate prints a short
report and exits 0 when the bundle is structurally sound, 1 when it is not.
Configuration or I/O failures exit 2.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from masksig_adapter.config import AdapterConfig, ConfigError
from masksig_adapter.export import ExportError, export_bundle
from masksig_adapter.models import ModelError
from masksig_adapter.validate import validate_bundle


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="masksig-adapter",
        description="Evaluate a fitted model into a prediction bundle, or validate one.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_export = sub.add_parser("export", help="evaluate a model and write a bundle")
    p_export.add_argument("--config", required=True, help="json configuration file")
    p_export.add_argument("--out", default=None, help="override the configured output directory")

    p_validate = sub.add_parser("validate", help="recheck a bundle directory")
    p_validate.add_argument("bundle", help="bundle directory")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "export":
            config = AdapterConfig.from_json(args.config)
            if args.out is not None:
                config = replace(config, out_dir=args.out)
            print(export_bundle(config))
            return 0
        report = validate_bundle(args.bundle)
        for line in report.lines():
            print(line)
        return 0 if report.valid else 1
    except (ConfigError, ExportError, ModelError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
