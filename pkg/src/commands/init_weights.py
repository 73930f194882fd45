from __future__ import annotations

import argparse
from pathlib import Path

from src.core.context import RunContext
from src.services.config_service import RunConfig
from src.services.model_weights import count_parameters
from src.services.weight_archive import payload_sha256, save_archive
from src.services.weight_init import init_weights


def register(subparsers: argparse._SubParsersAction) -> None:
    p = subparsers.add_parser("init-weights", help="write a deterministic weight archive")
    p.add_argument("out", type=Path)
    p.set_defaults(handler=lambda args, ctx: cmd_init_weights(args.out, ctx.run.seed, ctx.run))


def cmd_init_weights(out_path: str | Path, seed: int, config: RunConfig | None = None) -> int:
    archive = init_weights(config, seed=seed)
    path = save_archive(archive, out_path)
    print(f"wrote {path}")
    print(f"payload sha256 {payload_sha256(archive)}")
    print(f"parameters {count_parameters(archive):.2f}M ({archive.parameter_count})")
    return 0
