"""Encoder/classifier decomposition, reference backbones, and parameter censuses."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .backbones import ARCHS, Backbone, build_backbone
from .census import ParameterCensus, census
from .heads import ClassifierHead, RandomProjectionHead, expand_head

__all__ = [
    "ARCHS",
    "Backbone",
    "ClassifierHead",
    "Model",
    "ParameterCensus",
    "RandomProjectionHead",
    "build_backbone",
    "build_model",
    "census",
    "expand_head",
    "load_checkpoint",
    "model_census",
    "save_checkpoint",
]


class Model:
    """A backbone plus an expanding classifier head."""

    def __init__(self, backbone: Backbone, head: ClassifierHead):
        self.backbone = backbone
        self.head = head
        self.rp_head: RandomProjectionHead | None = None

    def features(self, x: np.ndarray) -> np.ndarray:
        return self.backbone.forward(x)

    def logits(self, x: np.ndarray) -> np.ndarray:
        return self.head.forward(self.features(x))

    def named_arrays(self) -> dict[str, tuple[np.ndarray, bool]]:
        out: dict[str, tuple[np.ndarray, bool]] = {}
        for name, p in self.backbone.params().items():
            out[name] = (p, not self.backbone.frozen)
        for name, p in self.head.params().items():
            out[name] = (p, True)
        if self.rp_head is not None:
            for name, p in self.rp_head.params().items():
                out[name] = (p, False)
        return out

    def trainable_params(self) -> dict[str, np.ndarray]:
        out = {} if self.backbone.frozen else dict(self.backbone.params())
        out.update(self.head.params())
        return out

    def trainable_grads(self) -> dict[str, np.ndarray]:
        out = {} if self.backbone.frozen else dict(self.backbone.grads())
        out.update(self.head.grads())
        return out

    def zero_grads(self) -> None:
        self.backbone.zero_grads()
        self.head.zero_grads()

    def snapshot(self) -> dict[str, np.ndarray]:
        return {k: v.copy() for k, v in {**self.backbone.params(), **self.head.params()}.items()}

    def restore(self, snap: dict[str, np.ndarray]) -> None:
        live = {**self.backbone.params(), **self.head.params()}
        for k, v in snap.items():
            live[k][...] = v


def build_model(arch: str, input_shape: tuple[int, ...], seed: int, hidden=(100, 100), feature_dim=64) -> Model:
    backbone = build_backbone(arch, input_shape, seed, hidden=tuple(hidden), feature_dim=feature_dim)
    head = ClassifierHead(backbone.feature_dim, 0, seed)
    return Model(backbone, head)


def model_census(model: Model) -> ParameterCensus:
    activation_dims = {
        layer.name: layer.in_dim for layer in model.backbone.projection_layers() if layer.capture
    }
    return census(model.named_arrays(), activation_dims)


def save_checkpoint(model: Model, path: str | Path) -> None:
    """Flat map of named float32 little-endian arrays plus a census JSON twin."""
    path = Path(path)
    arrays = {
        name: np.asarray(arr, dtype="<f4") for name, (arr, _) in model.named_arrays().items()
    }
    np.savez(path, **arrays)
    census_path = path.with_suffix(".census.json")
    census_path.write_text(json.dumps(model_census(model).to_dict(), indent=2), encoding="utf-8")


def load_checkpoint(path: str | Path) -> dict[str, np.ndarray]:
    with np.load(Path(path)) as data:
        return {name: data[name].copy() for name in data.files}
