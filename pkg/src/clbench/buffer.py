"""Bounded exemplar memory with pluggable selection and sampling strategies.

Strategies: ``reservoir`` (per-batch algorithm-R updates over the whole
stream), ``balanced_random`` and ``herding`` (task-boundary updates that
evict old classes down to the per-class quota floor(capacity / classes_seen)
before inserting the new classes' exemplars). Balanced evictions keep each
class's selection-order prefix, so stored prefixes are stable as quotas
shrink.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ReplayBufferError

STRATEGIES = ("reservoir", "balanced_random", "herding")


@dataclass
class BufferItem:
    input: np.ndarray
    label: int
    task_index: int


class ExemplarBuffer:
    def __init__(self, capacity: int, strategy: str = "reservoir", seed: int = 0):
        if strategy not in STRATEGIES:
            raise ReplayBufferError(f"unknown strategy '{strategy}'")
        if capacity < 0:
            raise ReplayBufferError("capacity must be >= 0")
        self.capacity = capacity
        self.strategy = strategy
        self.seed = seed
        self.seen_count = 0
        self._rng = np.random.default_rng([seed, 557])
        # per-class selection-order lists; flattened view built on demand
        self._per_class: dict[int, list[BufferItem]] = {}

    def __len__(self) -> int:
        return sum(len(v) for v in self._per_class.values())

    @property
    def entries(self) -> list[BufferItem]:
        return [item for c in sorted(self._per_class) for item in self._per_class[c]]

    def class_counts(self) -> dict[int, int]:
        return {c: len(v) for c, v in sorted(self._per_class.items()) if v}

    def manifest(self) -> dict:
        """Snapshot consumed by the memory-budget module."""
        item_elements = 0
        for items in self._per_class.values():
            if items:
                item_elements = int(np.prod(items[0].input.shape))
                break
        return {
            "strategy": self.strategy,
            "capacity": self.capacity,
            "size": len(self),
            "per_class_counts": {str(k): v for k, v in self.class_counts().items()},
            "item_elements": item_elements,
        }


def herding_select(features: np.ndarray, m: int) -> list[int]:
    """Greedy mean-matching selection over one class's feature rows.

    Step j picks the unchosen index i minimizing
    ``|| mu - (sum(chosen) + f_i) / j ||_2`` where ``mu`` is the class mean.
    Ties break toward the lowest index. Returns the first m picks in pick
    order.
    """
    if features.ndim != 2 or features.shape[0] == 0:
        raise ReplayBufferError("herding needs a non-empty (n, d) feature matrix")
    if not np.all(np.isfinite(features)):
        raise ReplayBufferError("herding features must be finite")
    n = features.shape[0]
    if m > n:
        raise ReplayBufferError(f"cannot select {m} of {n} samples")
    feats = features.astype(np.float64)
    mu = feats.mean(axis=0)
    chosen: list[int] = []
    running = np.zeros_like(mu)
    remaining = np.ones(n, dtype=bool)
    for j in range(1, m + 1):
        cand = (running + feats) / j  # candidate means if i were added
        dists = np.linalg.norm(mu - cand, axis=1)
        dists[~remaining] = np.inf
        pick = int(np.argmin(dists))  # argmin takes the lowest index on ties
        chosen.append(pick)
        remaining[pick] = False
        running += feats[pick]
    return chosen


def sample_batch(
    buf: ExemplarBuffer, k: int, seed: int | np.random.Generator
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Uniform sample of k exemplars; with replacement only when k exceeds size.

    An empty buffer yields empty arrays rather than an error, so a replay
    loss simply contributes nothing.
    """
    items = buf.entries
    if not items or k <= 0:
        return np.empty((0,)), np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng([seed, 613])
    idx = rng.choice(len(items), size=k, replace=k > len(items))
    picked = [items[i] for i in idx]
    x = np.stack([p.input for p in picked])
    y = np.asarray([p.label for p in picked], dtype=np.int64)
    t = np.asarray([p.task_index for p in picked], dtype=np.int64)
    return x, y, t


def update_buffer(
    buf: ExemplarBuffer,
    inputs: np.ndarray,
    labels: np.ndarray,
    task_index: int,
    feature_fn: Callable[[np.ndarray], np.ndarray] | None = None,
) -> ExemplarBuffer:
    """Insert task data under the buffer's strategy; capacity is never exceeded.

    Reservoir expects per-batch calls over the stream; the balanced
    strategies expect one call per finished task with that task's full data
    (``feature_fn`` is required for herding only).
    """
    if buf.capacity == 0:
        raise ReplayBufferError("buffer capacity is 0; configure a capacity for replay methods")
    if buf.strategy == "reservoir":
        _reservoir_insert(buf, inputs, labels, task_index)
        return buf
    new_classes = [int(c) for c in np.unique(labels)]
    classes_seen = sorted(set(buf._per_class) | set(new_classes))
    quota = buf.capacity // len(classes_seen)
    # shrink old classes to the new quota, keeping the selection-order prefix
    for c in list(buf._per_class):
        buf._per_class[c] = buf._per_class[c][:quota]
    for c in new_classes:
        mask = labels == c
        class_inputs = inputs[mask]
        m = min(quota, len(class_inputs))
        if m == 0:
            continue
        if buf.strategy == "herding":
            if feature_fn is None:
                raise ReplayBufferError("herding requires a feature_fn")
            order = herding_select(feature_fn(class_inputs), m)
        else:
            rng = np.random.default_rng([buf.seed, 733, task_index, c])
            order = rng.permutation(len(class_inputs))[:m].tolist()
        buf._per_class[c] = [BufferItem(class_inputs[i].copy(), c, task_index) for i in order]
    return buf


def _reservoir_insert(buf: ExemplarBuffer, inputs: np.ndarray, labels: np.ndarray, task_index: int) -> None:
    flat = buf.entries
    store: list[BufferItem] = flat
    for x, y in zip(inputs, labels):
        item = BufferItem(np.array(x), int(y), task_index)
        if len(store) < buf.capacity:
            store.append(item)
        else:
            j = int(buf._rng.integers(0, buf.seen_count + 1))
            if j < buf.capacity:
                store[j] = item
        buf.seen_count += 1
    by_class: dict[int, list[BufferItem]] = {}
    for item in store:
        by_class.setdefault(item.label, []).append(item)
    buf._per_class = by_class
