"""Layer layout of the whole model and its assembly from a weight archive.

Every conv layer ``<name>`` is stored as ``<name>.kernel`` (out, in, k, k)
and ``<name>.bias`` (out,). ``required_tensor_specs`` is the single source
of truth for names, shapes and order; ``init_weights`` draws in that order.
"""
from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, fields, replace
from typing import Any, NamedTuple

from src.core.errors import ConfigurationError
from src.core.tensor import ConvSpec
from src.services.correlation import (
    DQBCWeights,
    EnhancementWeights,
    FeatureExtractorWeights,
    PyramidConfig,
)
from src.services.motion import (
    HEAD_CHANNELS,
    ContextBlockWeights,
    ContextWeights,
    MGMWeights,
    MRMWeights,
    UpBlockWeights,
)
from src.services.synthesis import ConvDownWeights, SynthUpWeights, SynthWeights
from src.services.weight_archive import WeightArchive, validate_archive

_TRIPLES = ("extractor", "context", "synth_encoder", "synth_decoder")


@dataclass(frozen=True, slots=True)
class ModelWidths:
    extractor: tuple[int, int, int] = (32, 64, 96)
    # Context pyramid widths at 1/2, 1/4, 1/8.
    context: tuple[int, int, int] = (32, 48, 64)
    mgm_context: int = 64
    mgm_hidden: int = 256
    mgm_out: int = 128
    mgm_generator: int = 128
    trunk: int = 64
    hidden: int = 64
    synth_encoder: tuple[int, int, int] = (32, 64, 96)
    synth_decoder: tuple[int, int, int] = (64, 32, 32)

    def __post_init__(self) -> None:
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name in _TRIPLES:
                value = tuple(int(v) for v in value)
                if len(value) != 3:
                    raise ConfigurationError(f"width {f.name!r} needs 3 entries, got {len(value)}")
                object.__setattr__(self, f.name, value)
                values = value
            else:
                values = (int(value),)
                object.__setattr__(self, f.name, int(value))
            if any(v <= 0 for v in values):
                raise ConfigurationError(f"width {f.name!r} must be positive, got {value}")

    def with_overrides(self, overrides: Mapping[str, Any] | None) -> "ModelWidths":
        if not overrides:
            return self
        known = {f.name for f in fields(self)}
        unknown = sorted(set(overrides) - known)
        if unknown:
            raise ConfigurationError(f"unknown width key(s): {', '.join(unknown)}")
        return replace(self, **dict(overrides))

    def to_dict(self) -> dict[str, Any]:
        return {
            f.name: list(getattr(self, f.name)) if f.name in _TRIPLES else getattr(self, f.name)
            for f in fields(self)
        }


class LayerSpec(NamedTuple):
    name: str
    out_channels: int
    in_channels: int
    kernel: int = 3
    stride: int = 1

    @property
    def kernel_shape(self) -> tuple[int, int, int, int]:
        return (self.out_channels, self.in_channels, self.kernel, self.kernel)


def context_width_for_block(widths: ModelWidths, index: int) -> int:
    """Channels of the context level feeding UpBlock ``index`` (1..3)."""
    return widths.context[3 - index]


def layer_specs(pyramid: PyramidConfig, widths: ModelWidths) -> list[LayerSpec]:
    n = pyramid.channels_per_direction
    w = widths
    layers: list[LayerSpec] = []

    prev = 3
    for k, out in enumerate(w.extractor):
        layers.append(LayerSpec(f"dqbc.extractor.conv{k}", out, prev, stride=2))
        prev = out
    layers.append(LayerSpec("dqbc.enhance.conv0", n, n))
    layers.append(LayerSpec("dqbc.enhance.conv1", n, n))

    prev = 6
    for k in range(3):
        layers.append(LayerSpec(f"mgm.context.conv{k}", w.mgm_context, prev, stride=2))
        prev = w.mgm_context
    layers.append(LayerSpec("mgm.mlp.fc0", w.mgm_hidden, 2 * n, kernel=1))
    layers.append(LayerSpec("mgm.mlp.fc1", w.mgm_out, w.mgm_hidden, kernel=1))
    layers.append(LayerSpec("mgm.generator.conv0", w.mgm_generator, w.mgm_context + w.mgm_out))
    layers.append(LayerSpec("mgm.generator.conv1", 4, w.mgm_generator))

    prev = 3
    for k, out in enumerate(w.context):
        layers.append(LayerSpec(f"mrm.context.block{k}.conv0", out, prev, stride=2))
        layers.append(LayerSpec(f"mrm.context.block{k}.conv1", out, out))
        prev = out

    for k in (1, 2, 3):
        trunk_in = 4 + 2 * context_width_for_block(w, k)
        if k > 1:
            layers.append(LayerSpec(f"mrm.up{k}.hidden_in", w.hidden, w.hidden))
            trunk_in += w.hidden
        layers.append(LayerSpec(f"mrm.up{k}.trunk.conv0", w.trunk, trunk_in))
        layers.append(LayerSpec(f"mrm.up{k}.trunk.conv1", w.trunk, w.trunk))
        layers.append(LayerSpec(f"mrm.up{k}.head", HEAD_CHANNELS, w.trunk))
        layers.append(LayerSpec(f"mrm.up{k}.hidden_out", w.hidden, w.trunk))
    layers.append(LayerSpec("mrm.occlusion", 1, w.hidden))

    prev = 7
    for k, out in enumerate(w.synth_encoder):
        layers.append(LayerSpec(f"synth.down{k}.conv0", out, prev, stride=2))
        layers.append(LayerSpec(f"synth.down{k}.conv1", out, out))
        prev = out

    dec_prev = 0
    for j, out in enumerate(w.synth_decoder):
        skip = w.synth_encoder[2 - j]
        fuse_in = dec_prev + skip + 2 * context_width_for_block(w, j + 1)
        layers.append(LayerSpec(f"synth.up{j}.fuse", out, fuse_in))
        layers.append(LayerSpec(f"synth.up{j}.rb.conv0", out, out))
        layers.append(LayerSpec(f"synth.up{j}.rb.conv1", out, out))
        layers.append(LayerSpec(f"synth.up{j}.out", out, out))
        dec_prev = out
    layers.append(LayerSpec("synth.head", 4, w.synth_decoder[2] + 7))
    return layers


def required_tensor_specs(
    pyramid: PyramidConfig | None = None, widths: ModelWidths | None = None
) -> list[tuple[str, tuple[int, ...]]]:
    """Every (name, shape) the pipeline needs, in archive order."""

    specs: list[tuple[str, tuple[int, ...]]] = []
    for layer in layer_specs(pyramid or PyramidConfig(), widths or ModelWidths()):
        specs.append((f"{layer.name}.kernel", layer.kernel_shape))
        specs.append((f"{layer.name}.bias", (layer.out_channels,)))
    return specs


def widths_from_archive(archive: WeightArchive) -> ModelWidths:
    """Read widths back from declared kernel shapes, defaulting where absent."""

    defaults = ModelWidths()

    def out_of(layer: str, default: int) -> int:
        key = f"{layer}.kernel"
        return int(archive[key].shape[0]) if key in archive else default

    def triple(prefix: str, suffix: str, default: tuple[int, int, int]) -> tuple[int, int, int]:
        return tuple(out_of(f"{prefix}{k}{suffix}", default[k]) for k in range(3))  # type: ignore[return-value]

    return ModelWidths(
        extractor=triple("dqbc.extractor.conv", "", defaults.extractor),
        context=triple("mrm.context.block", ".conv0", defaults.context),
        mgm_context=out_of("mgm.context.conv0", defaults.mgm_context),
        mgm_hidden=out_of("mgm.mlp.fc0", defaults.mgm_hidden),
        mgm_out=out_of("mgm.mlp.fc1", defaults.mgm_out),
        mgm_generator=out_of("mgm.generator.conv0", defaults.mgm_generator),
        trunk=out_of("mrm.up1.trunk.conv0", defaults.trunk),
        hidden=out_of("mrm.up1.hidden_out", defaults.hidden),
        synth_encoder=triple("synth.down", ".conv0", defaults.synth_encoder),
        synth_decoder=triple("synth.up", ".fuse", defaults.synth_decoder),
    )


def count_parameters(archive: WeightArchive) -> float:
    """Parameter total in millions."""
    return archive.parameter_count / 1e6


@dataclass(frozen=True, slots=True)
class ModelWeights:
    dqbc: DQBCWeights
    context: ContextWeights
    mgm: MGMWeights
    mrm: MRMWeights
    synth: SynthWeights
    widths: ModelWidths

    @classmethod
    def from_archive(
        cls, archive: WeightArchive, pyramid: PyramidConfig | None = None
    ) -> "ModelWeights":
        """Validate ``archive`` against the layout and build every stage's weights."""

        pyramid = pyramid or PyramidConfig()
        widths = widths_from_archive(archive)
        layers = layer_specs(pyramid, widths)
        validate_archive(archive, required_tensor_specs(pyramid, widths))
        convs = {
            layer.name: ConvSpec.same(
                archive[f"{layer.name}.kernel"],
                archive[f"{layer.name}.bias"],
                stride=layer.stride,
            )
            for layer in layers
        }
        return cls._assemble(convs, widths)

    @classmethod
    def _assemble(cls, c: dict[str, ConvSpec], widths: ModelWidths) -> "ModelWeights":
        dqbc = DQBCWeights(
            extractor=FeatureExtractorWeights(
                convs=tuple(c[f"dqbc.extractor.conv{k}"] for k in range(3))  # type: ignore[arg-type]
            ),
            enhancement=EnhancementWeights(c["dqbc.enhance.conv0"], c["dqbc.enhance.conv1"]),
        )
        context = ContextWeights(
            blocks=tuple(  # type: ignore[arg-type]
                ContextBlockWeights(c[f"mrm.context.block{k}.conv0"], c[f"mrm.context.block{k}.conv1"])
                for k in range(3)
            )
        )
        mgm = MGMWeights(
            context=tuple(c[f"mgm.context.conv{k}"] for k in range(3)),  # type: ignore[arg-type]
            mlp=(c["mgm.mlp.fc0"], c["mgm.mlp.fc1"]),
            generator=(c["mgm.generator.conv0"], c["mgm.generator.conv1"]),
        )
        mrm = MRMWeights(
            blocks=tuple(  # type: ignore[arg-type]
                UpBlockWeights(
                    trunk=(c[f"mrm.up{k}.trunk.conv0"], c[f"mrm.up{k}.trunk.conv1"]),
                    head=c[f"mrm.up{k}.head"],
                    hidden_out=c[f"mrm.up{k}.hidden_out"],
                    hidden_in=c.get(f"mrm.up{k}.hidden_in"),
                )
                for k in (1, 2, 3)
            ),
            occlusion=c["mrm.occlusion"],
        )
        synth = SynthWeights(
            down=tuple(  # type: ignore[arg-type]
                ConvDownWeights(c[f"synth.down{k}.conv0"], c[f"synth.down{k}.conv1"])
                for k in range(3)
            ),
            up=tuple(  # type: ignore[arg-type]
                SynthUpWeights(
                    fuse=c[f"synth.up{j}.fuse"],
                    rb_conv0=c[f"synth.up{j}.rb.conv0"],
                    rb_conv1=c[f"synth.up{j}.rb.conv1"],
                    out=c[f"synth.up{j}.out"],
                )
                for j in range(3)
            ),
            head=c["synth.head"],
        )
        return cls(dqbc=dqbc, context=context, mgm=mgm, mrm=mrm, synth=synth, widths=widths)
