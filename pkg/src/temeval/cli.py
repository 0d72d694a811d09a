"""Command-line interface: eval, trajectory, and compare subcommands.

Exit codes: 0 success, 1 partial (some pairs errored), 2 fatal input or
config error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .backends import GatewayBackend, MockBackend
from .harness import (
    METRIC_CHOICES,
    HarnessConfig,
    MissingReference,
    NoOverlap,
    compare_runs,
    run_eval,
    run_trajectory,
)
from .io import InputParseError
from .report import render_compare_text, render_text_table, write_report
from .trajectory import DimensionMismatch


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="temeval",
        description="Caption-evaluation toolkit and face-trajectory pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    eval_parser = sub.add_parser("eval", help="score predictions against references")
    eval_parser.add_argument("--predictions", required=True, type=Path)
    eval_parser.add_argument("--references", required=True, type=Path)
    eval_parser.add_argument(
        "--metrics",
        default="tem,autodq,cider,rougel",
        help=f"comma-separated subset of: {','.join(METRIC_CHOICES)}",
    )
    eval_parser.add_argument("--backend", choices=("mock", "gateway"), default="mock")
    eval_parser.add_argument("--config", type=Path, default=None)
    eval_parser.add_argument("--out", type=Path, default=Path("eval_report"))
    eval_parser.add_argument(
        "--align",
        action="store_true",
        help="restyle predictions to the reference format before semantic metrics",
    )

    traj_parser = sub.add_parser("trajectory", help="run the face-trajectory pipeline")
    traj_parser.add_argument("--detections", required=True, type=Path)
    traj_parser.add_argument("--frames", type=int, default=16)
    traj_parser.add_argument("--fps", type=float, required=True)
    traj_parser.add_argument(
        "--frame-count",
        type=int,
        default=None,
        help="source frame count (default: max frame_idx + 1)",
    )
    traj_parser.add_argument("--config", type=Path, default=None)
    traj_parser.add_argument("--out", required=True, type=Path)

    compare_parser = sub.add_parser("compare", help="diff two eval reports")
    compare_parser.add_argument("report_a", type=Path)
    compare_parser.add_argument("report_b", type=Path)
    compare_parser.add_argument("--out", type=Path, default=None)

    return parser


def _cmd_eval(args: argparse.Namespace) -> int:
    metrics = {item.strip() for item in args.metrics.split(",") if item.strip()}
    unknown = metrics - set(METRIC_CHOICES)
    if unknown:
        raise ValueError(f"unknown metrics: {', '.join(sorted(unknown))}")
    if not metrics:
        raise ValueError("at least one metric is required")
    config = HarnessConfig.from_file(args.config)

    if args.backend == "gateway":
        backend = GatewayBackend(config.gateway_config())
    else:
        backend = MockBackend()
    try:
        report = run_eval(
            args.predictions,
            args.references,
            metrics=metrics,
            backend=backend,
            config=config,
            align=args.align,
        )
    finally:
        if args.backend == "gateway":
            backend.close()

    paths = write_report(report, args.out)
    print(render_text_table(report), end="")
    print(f"report written to {paths['json'].parent}")
    return 1 if report.metadata["error_count"] else 0


def _cmd_trajectory(args: argparse.Namespace) -> int:
    config = HarnessConfig.from_file(args.config)
    report, warnings = run_trajectory(
        args.detections,
        src_fps=args.fps,
        src_frame_count=args.frame_count,
        n_frames=args.frames,
        config=config,
    )
    for warning in warnings:
        print(f"warning: {warning}", file=sys.stderr)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(
        json.dumps(report, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )
    main_count = sum(1 for track in report["tracks"] if track["is_main"])
    print(
        f"{len(report['tracks'])} track(s), {main_count} main; "
        f"output written to {args.out}"
    )
    return 0


def _cmd_compare(args: argparse.Namespace) -> int:
    report_a = json.loads(args.report_a.read_text(encoding="utf-8"))
    report_b = json.loads(args.report_b.read_text(encoding="utf-8"))
    delta = compare_runs(report_a, report_b)
    print(render_compare_text(delta), end="")
    if args.out is not None:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(
            json.dumps(delta, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
        )
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "eval": _cmd_eval,
        "trajectory": _cmd_trajectory,
        "compare": _cmd_compare,
    }
    try:
        return handlers[args.command](args)
    except (
        InputParseError,
        MissingReference,
        NoOverlap,
        DimensionMismatch,
        FileNotFoundError,
        ValueError,
        json.JSONDecodeError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
