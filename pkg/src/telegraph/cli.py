"""Command-line entry point.

    telegraph <stage> --config pipeline.json
    telegraph run-all --config pipeline.json

Exit codes: 0 success, 1 usage error, 2 stage failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from .errors import TelegraphError
from .pipeline import STAGES, PipelineConfig, run_all, run_stage

USAGE_EXIT = 1
FAILURE_EXIT = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_EXIT)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="telegraph",
        description="Message-forwarding graph pipeline: ingest, weak-label, train, analyze.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for stage in STAGES + ("run-all",):
        stage_parser = sub.add_parser(stage, help=f"run the {stage} stage")
        stage_parser.add_argument("--config", required=True, help="pipeline config JSON file")
        stage_parser.add_argument(
            "--workdir", default=None, help="override the config's working directory"
        )
        if stage == "serve-annotation":
            stage_parser.add_argument(
                "--port", type=int, default=None, help="override the annotation port"
            )
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else USAGE_EXIT
    try:
        config = PipelineConfig.from_file(args.config)
        if args.workdir:
            config.workdir = args.workdir
        if getattr(args, "port", None) is not None:
            config.annotation_port = args.port
        if args.command == "run-all":
            manifests = run_all(config)
            for manifest in manifests:
                print(f"{manifest['stage']}: ok ({manifest['duration_seconds']:.2f}s)")
        else:
            manifest = run_stage(args.command, config)
            print(json.dumps(manifest, ensure_ascii=False, indent=2, sort_keys=True))
    except TelegraphError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return FAILURE_EXIT
    except KeyboardInterrupt:
        return FAILURE_EXIT
    return 0


if __name__ == "__main__":
    sys.exit(main())
