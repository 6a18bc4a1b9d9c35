"""Exact parameter censuses for budgeting and checkpoint metadata."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class ParameterCensus:
    """Integer parameter counts per component, split trainable vs frozen."""

    components: dict[str, dict[str, int]] = field(default_factory=dict)
    activation_dims: dict[str, int] = field(default_factory=dict)

    @property
    def trainable_total(self) -> int:
        return sum(c["trainable"] for c in self.components.values())

    @property
    def frozen_total(self) -> int:
        return sum(c["frozen"] for c in self.components.values())

    def to_dict(self) -> dict:
        return {
            "components": self.components,
            "activation_dims": self.activation_dims,
            "trainable_total": self.trainable_total,
            "frozen_total": self.frozen_total,
        }


def census(
    arrays: dict[str, tuple[np.ndarray, bool]],
    activation_dims: dict[str, int] | None = None,
) -> ParameterCensus:
    """Count parameters exactly from named (array, trainable) pairs.

    The component of a name is its first dot-segment, so "enc.l0.W" and
    "enc.l1.b" both land in component "enc".
    """
    out = ParameterCensus(activation_dims=dict(activation_dims or {}))
    for name, (arr, trainable) in arrays.items():
        comp = name.split(".", 1)[0]
        bucket = out.components.setdefault(comp, {"trainable": 0, "frozen": 0})
        bucket["trainable" if trainable else "frozen"] += int(arr.size)
    return out
