"""Desk-scale encoder architectures.

Two reference backbones: ``mlp2`` (flatten + two ReLU hidden layers, feature
dim = second hidden width) and ``smallconv`` (three conv/pool blocks and a
linear neck). Both support per-layer activation capture for the
subspace-projection methods and a frozen mode under which no encoder
parameter changes.
"""

from __future__ import annotations

import numpy as np

from .layers import AvgPool2, Conv2d, Dense, Flatten, Layer, ReLU

ARCHS = ("mlp2", "smallconv")


class Backbone:
    """Encoder mapping inputs to a fixed-dimension feature vector."""

    def __init__(self, arch: str, input_shape: tuple[int, ...], layers: list[Layer], feature_dim: int):
        self.arch = arch
        self.input_shape = tuple(input_shape)
        self.layers = layers
        self.feature_dim = feature_dim
        self.frozen = False

    def forward(self, x: np.ndarray) -> np.ndarray:
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def backward(self, gfeat: np.ndarray) -> np.ndarray:
        g = gfeat
        for layer in reversed(self.layers):
            g = layer.backward(g)
        return g

    def params(self) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {}
        for layer in self.layers:
            out.update(layer.params())
        return out

    def grads(self) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {}
        for layer in self.layers:
            out.update(layer.grads())
        return out

    def zero_grads(self) -> None:
        for layer in self.layers:
            layer.zero_grads()

    def freeze(self) -> None:
        self.frozen = True

    def projection_layers(self) -> list[Layer]:
        """Layers whose weight gradients live in an input-row space."""
        return [l for l in self.layers if isinstance(l, (Dense, Conv2d))]

    def set_capture(self, enabled: bool) -> None:
        for layer in self.projection_layers():
            layer.capture = enabled
            if not enabled:
                layer.captured = []

    def collect_captured(self) -> dict[str, np.ndarray]:
        out = {}
        for layer in self.projection_layers():
            if layer.captured:
                out[layer.name] = np.concatenate(layer.captured, axis=0)
        return out


def build_backbone(
    arch: str,
    input_shape: tuple[int, ...],
    seed: int,
    hidden: tuple[int, ...] = (100, 100),
    feature_dim: int = 64,
) -> Backbone:
    """Construct a seeded backbone; identical seeds give identical weights."""
    if arch not in ARCHS:
        raise ValueError(f"unsupported arch '{arch}', expected one of {ARCHS}")
    rng = np.random.default_rng([seed, 101])
    if arch == "mlp2":
        in_dim = int(np.prod(input_shape))
        h1, h2 = hidden[0], hidden[1] if len(hidden) > 1 else hidden[0]
        layers: list[Layer] = [
            Flatten("enc.flatten"),
            Dense(in_dim, h1, rng, "enc.l0"),
            ReLU("enc.relu0"),
            Dense(h1, h2, rng, "enc.l1"),
            ReLU("enc.relu1"),
        ]
        return Backbone(arch, input_shape, layers, feature_dim=h2)

    if len(input_shape) != 3:
        raise ValueError(f"smallconv expects (H, W, C) input, got {input_shape}")
    h, w, c = input_shape
    chans = (8, 16, 32)
    layers = []
    in_ch = c
    for i, out_ch in enumerate(chans):
        layers += [Conv2d(in_ch, out_ch, 3, rng, f"enc.conv{i}"), ReLU(f"enc.crelu{i}"), AvgPool2(f"enc.pool{i}")]
        in_ch = out_ch
        h, w = (h - 2) // 2, (w - 2) // 2
        if h < 3 or w < 3:
            raise ValueError(f"input {input_shape} too small for smallconv")
    flat = h * w * chans[-1]
    layers += [Flatten("enc.flatten"), Dense(flat, feature_dim, rng, "enc.neck"), ReLU("enc.nrelu")]
    return Backbone(arch, input_shape, layers, feature_dim=feature_dim)
