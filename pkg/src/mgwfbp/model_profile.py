"""Per-layer training profiles: the compute side of the scheduling problem.

A profile lists, in forward order, every learnable layer of a network
together with its parameter count and the wall time of its backward pass,
plus the forward time of the whole network.  That is all the scheduling
machinery needs: parameter counts (times the element width) give message
sizes, backward times give the windows communication can hide in.

Profiles are stored as JSON documents (conventionally ``*.profile.json``)
and round-trip bit-exactly.  ``synth_profile`` generates randomized but
reproducible profiles; ``resnet50_like`` and ``googlenet_like`` build
deterministic traces whose layer structure follows the standard
architectures.  The bundled traces are representative, not measurements.
"""

from __future__ import annotations

import io
import json
import math
import random
from dataclasses import dataclass, field

_ELEMENT_WIDTHS = (2, 4, 8)


@dataclass(frozen=True)
class LayerProfile:
    """One learnable layer: 1-based position, parameter count, backward seconds."""

    index: int
    params: int
    backward_time: float

    def __post_init__(self) -> None:
        if not isinstance(self.index, int) or self.index < 1:
            raise ValueError(f"layer index must be an int >= 1, got {self.index!r}")
        if not isinstance(self.params, int) or self.params < 0:
            raise ValueError(f"layer {self.index}: params must be an int >= 0, got {self.params!r}")
        if not math.isfinite(self.backward_time) or self.backward_time < 0:
            raise ValueError(
                f"layer {self.index}: backward_time must be finite and >= 0, got {self.backward_time!r}"
            )


@dataclass(frozen=True)
class ModelProfile:
    """A named network profile with layers indexed 1..L in forward order.

    Layer L is the last one the forward pass touches, hence the first to
    produce a gradient during backward.  Layers with params == 0 (for
    bookkeeping of parameterless stages) contribute backward time but no
    communication.
    """

    name: str
    layers: tuple[LayerProfile, ...]
    forward_time: float
    element_bytes: int = 4

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("profile name must be non-empty")
        object.__setattr__(self, "layers", tuple(self.layers))
        if not self.layers:
            raise ValueError("profile must contain at least one layer")
        for pos, layer in enumerate(self.layers, start=1):
            if layer.index != pos:
                raise ValueError(
                    f"layer indices must be consecutive from 1; position {pos} holds index {layer.index}"
                )
        if not math.isfinite(self.forward_time) or self.forward_time < 0:
            raise ValueError(f"forward_time must be finite and >= 0, got {self.forward_time!r}")
        if self.element_bytes not in _ELEMENT_WIDTHS:
            raise ValueError(f"element_bytes must be one of {_ELEMENT_WIDTHS}, got {self.element_bytes!r}")

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    @property
    def total_params(self) -> int:
        return sum(layer.params for layer in self.layers)

    @property
    def total_backward_time(self) -> float:
        return math.fsum(layer.backward_time for layer in self.layers)

    def param_counts(self) -> list[int]:
        return [layer.params for layer in self.layers]

    def backward_times(self) -> list[float]:
        return [layer.backward_time for layer in self.layers]

    def message_bytes(self, index: int) -> int:
        """Gradient message size of one layer, in bytes."""
        return self.element_bytes * self.layers[index - 1].params


def _to_document(profile: ModelProfile) -> dict:
    return {
        "name": profile.name,
        "forward_time": profile.forward_time,
        "element_bytes": profile.element_bytes,
        "layers": [
            {"index": l.index, "params": l.params, "backward_time": l.backward_time}
            for l in profile.layers
        ],
    }


def _from_document(doc: dict) -> ModelProfile:
    if not isinstance(doc, dict):
        raise ValueError("profile document must be a JSON object")
    try:
        layers = tuple(
            LayerProfile(
                index=entry["index"],
                params=entry["params"],
                backward_time=entry["backward_time"],
            )
            for entry in doc["layers"]
        )
        return ModelProfile(
            name=doc["name"],
            layers=layers,
            forward_time=doc["forward_time"],
            element_bytes=doc.get("element_bytes", 4),
        )
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed profile document: {exc!r}") from None


def save_profile(profile: ModelProfile, dest) -> None:
    """Write a profile as JSON.  Floats keep full precision (repr round-trip)."""
    text = json.dumps(_to_document(profile), indent=2) + "\n"
    if isinstance(dest, (str, bytes)) or hasattr(dest, "__fspath__"):
        with open(dest, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        dest.write(text)


def load_profile(source) -> ModelProfile:
    """Read a profile written by ``save_profile`` (path or file object)."""
    if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__"):
        with open(source, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    else:
        data = source.read()
        if isinstance(data, bytes):
            data = data.decode("utf-8")
        doc = json.loads(data)
    return _from_document(doc)


def synth_profile(
    num_layers: int,
    param_range: tuple[float, float] = (1e2, 5e6),
    time_scale: float = 5e-3,
    seed: int = 0,
) -> ModelProfile:
    """Generate a reproducible random profile.

    Parameter counts are log-uniform over ``param_range`` (layer sizes in
    real networks span orders of magnitude).  Backward time scales with
    the layer's relative size, ``time_scale * params / max_params``, plus
    up to 10% jitter so no two layers tie exactly.  Forward time is half
    the total backward time.  Same seed, same profile.
    """
    if num_layers < 1:
        raise ValueError("num_layers must be >= 1")
    lo, hi = param_range
    if not (0 < lo <= hi):
        raise ValueError(f"param_range must satisfy 0 < lo <= hi, got {param_range!r}")
    if time_scale < 0:
        raise ValueError("time_scale must be >= 0")
    rng = random.Random(seed)
    params = [max(1, round(math.exp(rng.uniform(math.log(lo), math.log(hi))))) for _ in range(num_layers)]
    max_p = max(params)
    times = [time_scale * (p / max_p) + rng.uniform(0.0, 0.1) * time_scale for p in params]
    layers = tuple(
        LayerProfile(index=i + 1, params=p, backward_time=t)
        for i, (p, t) in enumerate(zip(params, times))
    )
    return ModelProfile(
        name=f"synth-{num_layers}x{seed}",
        layers=layers,
        forward_time=0.5 * math.fsum(times),
    )


def _profile_from_costs(
    name: str,
    param_flops: list[tuple[int, int]],
    backward_seconds: float,
    forward_seconds: float,
) -> ModelProfile:
    total_flops = sum(f for _, f in param_flops)
    layers = tuple(
        LayerProfile(
            index=i + 1,
            params=p,
            backward_time=backward_seconds * (f / total_flops),
        )
        for i, (p, f) in enumerate(param_flops)
    )
    return ModelProfile(name=name, layers=layers, forward_time=forward_seconds)


def resnet50_like(backward_seconds: float = 0.2, forward_seconds: float = 0.1) -> ModelProfile:
    """Representative 54-layer residual-network trace (~25.5M parameters).

    Parameter counts follow the standard 50-layer bottleneck arithmetic
    (convolutions and the classifier; normalization layers folded out).
    Backward time is split across layers in proportion to a FLOPs proxy,
    params times output positions, which is why the 3x3 convolutions
    dominate and stages stay roughly balanced.  Defaults describe a
    mid-range accelerator at batch size 32; scale the two totals to taste.
    """
    # (in_channels, bottleneck_planes, blocks, output_positions)
    stages = [(64, 64, 3, 56 * 56), (256, 128, 4, 28 * 28), (512, 256, 6, 14 * 14), (1024, 512, 3, 7 * 7)]
    entries: list[tuple[int, int]] = [(9408, 9408 * 112 * 112)]  # 7x7 stem conv
    for in_ch, planes, blocks, spatial in stages:
        for block in range(blocks):
            cin = in_ch if block == 0 else 4 * planes
            for p in (planes * cin, planes * planes * 9, 4 * planes * planes):
                entries.append((p, p * spatial))
            if block == 0:  # projection shortcut
                p = 4 * planes * cin
                entries.append((p, p * spatial))
    fc = 2048 * 1000 + 1000
    entries.append((fc, fc))
    return _profile_from_costs("resnet50-like", entries, backward_seconds, forward_seconds)


def googlenet_like(backward_seconds: float = 0.18, forward_seconds: float = 0.09) -> ModelProfile:
    """Representative 64-layer inception-network trace (~13.4M parameters).

    Stem, nine inception modules (six convolutions each), two auxiliary
    heads, and the classifier, with the standard channel table.  Backward
    time uses the same FLOPs-proxy split as ``resnet50_like``.
    """
    entries: list[tuple[int, int]] = [
        (9408, 9408 * 112 * 112),      # 7x7 stem conv
        (4096, 4096 * 56 * 56),        # 1x1 reduce
        (110592, 110592 * 56 * 56),    # 3x3 conv
    ]
    # (in, 1x1, 3x3 reduce, 3x3, 5x5 reduce, 5x5, pool proj, output positions)
    modules = [
        (192, 64, 96, 128, 16, 32, 32, 28 * 28),
        (256, 128, 128, 192, 32, 96, 64, 28 * 28),
        (480, 192, 96, 208, 16, 48, 64, 14 * 14),
        (512, 160, 112, 224, 24, 64, 64, 14 * 14),
        (512, 128, 128, 256, 24, 64, 64, 14 * 14),
        (512, 112, 144, 288, 32, 64, 64, 14 * 14),
        (528, 256, 160, 320, 32, 128, 128, 14 * 14),
        (832, 256, 160, 320, 32, 128, 128, 7 * 7),
        (832, 384, 192, 384, 48, 128, 128, 7 * 7),
    ]
    aux_after = {2: 512, 5: 528}  # auxiliary heads branch after modules 4a and 4d

    def add(p: int, spatial: int) -> None:
        entries.append((p, p * spatial))

    for mod_idx, (cin, n1, r3, n3, r5, n5, pool, spatial) in enumerate(modules):
        add(n1 * cin, spatial)
        add(r3 * cin, spatial)
        add(n3 * r3 * 9, spatial)
        add(r5 * cin, spatial)
        add(n5 * r5 * 25, spatial)
        add(pool * cin, spatial)
        if mod_idx in aux_after:
            head_in = aux_after[mod_idx]
            add(128 * head_in, 4 * 4)      # 1x1 projection
            add(1024 * 128 * 4 * 4, 1)     # hidden fc
            add(1000 * 1024, 1)            # classifier fc
    add(1000 * 1024, 1)  # main classifier
    return _profile_from_costs("googlenet-like", entries, backward_seconds, forward_seconds)
