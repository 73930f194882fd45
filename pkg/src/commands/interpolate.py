from __future__ import annotations

import argparse
from pathlib import Path

from src.commands.common import resolve_model
from src.core.context import RunContext
from src.services.flow_viz import flow_to_rgb
from src.services.image_io import load_image, save_grayscale, save_image
from src.services.losses import psnr, reconstruction_loss
from src.services.pipeline import Diagnostics, interpolate_midframe

DUMP_SUFFIXES = ("flow_t0", "flow_t1", "occlusion", "occlusion_final")


def register(subparsers: argparse._SubParsersAction) -> None:
    p = subparsers.add_parser("interpolate", help="synthesize the middle frame of two images")
    p.add_argument("frame0", type=Path)
    p.add_argument("frame1", type=Path)
    p.add_argument("out", type=Path)
    p.add_argument(
        "--dump-flow",
        action="store_true",
        help="also write both motion fields, O and O_final next to the output",
    )
    p.add_argument("--truth", type=Path, default=None, help="ground-truth frame for PSNR/L1")
    p.set_defaults(handler=cmd_interpolate)


def dump_paths(out: Path) -> list[Path]:
    return [out.with_name(f"{out.stem}_{suffix}.png") for suffix in DUMP_SUFFIXES]


def write_diagnostics(out: Path, diag: Diagnostics) -> list[Path]:
    flow0, flow1, occ, occ_final = dump_paths(out)
    save_image(flow_to_rgb(diag.field0), flow0)
    save_image(flow_to_rgb(diag.field1), flow1)
    save_grayscale(diag.occlusion, occ)
    save_grayscale(diag.occlusion_final, occ_final)
    return [flow0, flow1, occ, occ_final]


def cmd_interpolate(args: argparse.Namespace, ctx: RunContext) -> int:
    logger = ctx.logger
    precision = ctx.run.precision
    frame0 = load_image(args.frame0, dtype=precision)
    frame1 = load_image(args.frame1, dtype=precision)
    model = resolve_model(ctx)

    frame, diag = interpolate_midframe(
        frame0, frame1, model, ctx.run.pyramid, ctx.run.t, precision=precision
    )
    save_image(frame, args.out)
    logger.info("wrote %s (%dx%d)", args.out, frame.shape[1], frame.shape[0])
    print(f"wrote {args.out}")

    if args.dump_flow:
        for path in write_diagnostics(args.out, diag):
            print(f"wrote {path}")

    if args.truth is not None:
        truth = load_image(args.truth, dtype=precision)
        print(f"PSNR {psnr(frame, truth):.2f} dB  L1 {reconstruction_loss(frame, truth):.6f}")
    return 0
