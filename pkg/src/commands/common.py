from __future__ import annotations

from src.core.context import RunContext
from src.services.model_weights import ModelWeights, count_parameters
from src.services.weight_archive import WeightArchive, load_archive
from src.services.weight_init import init_weights


def resolve_archive(ctx: RunContext) -> WeightArchive:
    """Archive from ``--weights`` or, when absent, ``init_weights`` from the run seed."""

    if ctx.weights_path is not None:
        return load_archive(ctx.weights_path)
    ctx.logger.info("no --weights given; initialising from seed %d", ctx.run.seed)
    return init_weights(ctx.run)


def resolve_model(ctx: RunContext) -> ModelWeights:
    archive = resolve_archive(ctx)
    model = ModelWeights.from_archive(archive, ctx.run.pyramid)
    ctx.logger.debug("model ready: %.2fM parameters", count_parameters(archive))
    return model
