from __future__ import annotations

import argparse
from pathlib import Path

from tabulate import tabulate

from src.core.context import RunContext
from src.core.errors import ConfigurationError
from src.services.flow_viz import flow_to_rgb
from src.services.image_io import load_image, save_image
from src.services.motion_fit import DEFAULT_ITERATIONS, DEFAULT_STEP, fit_motion, mean_endpoint_error


def parse_vector(text: str) -> tuple[float, float]:
    """``"dx,dy"`` -> (dx, dy)."""
    parts = [p.strip() for p in str(text).split(",")]
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected dx,dy, got {text!r}")
    try:
        return float(parts[0]), float(parts[1])
    except ValueError as ex:
        raise argparse.ArgumentTypeError(f"expected dx,dy, got {text!r}") from ex


def register(subparsers: argparse._SubParsersAction) -> None:
    p = subparsers.add_parser(
        "fit-motion", help="fit a motion field by gradient descent through the warp"
    )
    p.add_argument("frame0", type=Path)
    p.add_argument("frame1", type=Path)
    p.add_argument("--iterations", type=int, default=DEFAULT_ITERATIONS)
    p.add_argument("--step", type=float, default=DEFAULT_STEP)
    p.add_argument(
        "--truth-flow",
        type=parse_vector,
        default=None,
        help="constant reference motion dx,dy for the endpoint-error report",
    )
    p.add_argument("--out-flow", type=Path, default=None, help="write the fitted field as a colour image")
    p.set_defaults(handler=cmd_fit_motion)


def cmd_fit_motion(args: argparse.Namespace, ctx: RunContext) -> int:
    if args.iterations < 0:
        raise ConfigurationError("--iterations must be >= 0")
    frame0 = load_image(args.frame0, dtype="float64")
    frame1 = load_image(args.frame1, dtype="float64")
    result = fit_motion(frame0, frame1, args.iterations, args.step)

    rows = [
        ["iterations", result.iterations],
        ["initial loss", f"{result.initial_loss:.6e}"],
        ["final loss", f"{result.final_loss:.6e}"],
    ]
    if args.truth_flow is not None:
        epe = mean_endpoint_error(result.field, args.truth_flow)
        rows.append(["mean endpoint error (interior 80%)", f"{epe:.4f} px"])
    print(tabulate(rows, tablefmt="pretty", numalign="left", stralign="left"))

    if args.out_flow is not None:
        save_image(flow_to_rgb(result.field), args.out_flow)
        print(f"wrote {args.out_flow}")
    return 0
