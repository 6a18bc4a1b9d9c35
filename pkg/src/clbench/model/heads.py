"""Classifier heads: an expanding linear head and a frozen random-projection head."""

from __future__ import annotations

import numpy as np


class ClassifierHead:
    """Linear head over global class ids; rows grow as tasks add classes.

    Expansion preserves existing rows bit-exactly: logits on old classes are
    unchanged for a fixed input after the head grows.
    """

    def __init__(self, feature_dim: int, n_classes: int, seed: int):
        self.feature_dim = feature_dim
        self.seed = seed
        self.W = np.zeros((0, feature_dim), dtype=np.float32)
        self.b = np.zeros(0, dtype=np.float32)
        self.gW = np.zeros_like(self.W)
        self.gb = np.zeros_like(self.b)
        self._features: np.ndarray | None = None
        if n_classes > 0:
            expand_head(self, n_classes)

    @property
    def n_classes(self) -> int:
        return self.W.shape[0]

    def forward(self, f: np.ndarray) -> np.ndarray:
        self._features = f
        return f @ self.W.T + self.b

    def backward(self, gz: np.ndarray) -> np.ndarray:
        self.gW += (gz.T @ self._features).astype(np.float32)
        self.gb += gz.sum(axis=0).astype(np.float32)
        return gz @ self.W

    def params(self) -> dict[str, np.ndarray]:
        return {"head.W": self.W, "head.b": self.b}

    def grads(self) -> dict[str, np.ndarray]:
        return {"head.W": self.gW, "head.b": self.gb}

    def zero_grads(self) -> None:
        self.gW[...] = 0.0
        self.gb[...] = 0.0


def expand_head(head: ClassifierHead, new_class_count: int) -> ClassifierHead:
    """Append ``new_class_count`` rows; old rows are untouched.

    New rows follow the backbone init rule (He normal over the feature dim),
    seeded by (head seed, current size) so growth is deterministic.
    """
    if new_class_count <= 0:
        raise ValueError("new_class_count must be positive")
    old_c = head.n_classes
    rng = np.random.default_rng([head.seed, 211, old_c])
    scale = np.sqrt(2.0 / head.feature_dim)
    new_rows = (rng.standard_normal((new_class_count, head.feature_dim)) * scale).astype(np.float32)
    head.W = np.concatenate([head.W, new_rows], axis=0)
    head.b = np.concatenate([head.b, np.zeros(new_class_count, dtype=np.float32)])
    head.gW = np.zeros_like(head.W)
    head.gb = np.zeros_like(head.b)
    return head


class RandomProjectionHead:
    """Frozen nonlinear random projection with a ridge-decoded class readout.

    Features are lifted by ``h = max(0, P f)`` with ``P`` drawn once from a
    seeded standard normal, then per-class sums and the Gram matrix
    ``G = sum(h h^T)`` accumulate over fitted samples. Accumulation is
    order-independent, so tasks can be fitted in any order.
    """

    def __init__(self, feature_dim: int, proj_dim: int, seed: int, ridge: float = 1e-3):
        if ridge <= 0:
            raise ValueError("ridge coefficient must be positive")
        rng = np.random.default_rng([seed, 307])
        self.P = rng.standard_normal((proj_dim, feature_dim)).astype(np.float32)
        self.proj_dim = proj_dim
        self.feature_dim = feature_dim
        self.ridge = ridge
        self.G = np.zeros((proj_dim, proj_dim), dtype=np.float64)
        self.class_sums: dict[int, np.ndarray] = {}
        self.fitted = 0
        self._decoded: np.ndarray | None = None
        self._decoded_classes: list[int] | None = None

    def _lift(self, features: np.ndarray) -> np.ndarray:
        h = features.astype(np.float64) @ self.P.T.astype(np.float64)
        return np.maximum(h, 0.0)

    def fit(self, features: np.ndarray, labels: np.ndarray) -> None:
        """Accumulate Gram and class sums from one batch of encoder features."""
        h = self._lift(features)
        self.G += h.T @ h
        for c in np.unique(labels):
            vec = h[labels == c].sum(axis=0)
            if int(c) in self.class_sums:
                self.class_sums[int(c)] += vec
            else:
                self.class_sums[int(c)] = vec
        self.fitted += len(labels)
        self._decoded = None

    def _decode(self) -> tuple[np.ndarray, list[int]]:
        if self._decoded is None:
            classes = sorted(self.class_sums)
            sums = np.stack([self.class_sums[c] for c in classes])  # (C, M)
            a = self.G + self.ridge * np.eye(self.proj_dim)
            self._decoded = np.linalg.solve(a, sums.T)  # (M, C)
            self._decoded_classes = classes
        return self._decoded, self._decoded_classes

    def scores(self, features: np.ndarray) -> tuple[np.ndarray, list[int]]:
        if self.fitted == 0:
            raise RuntimeError("classify called before any fit")
        decoded, classes = self._decode()
        return self._lift(features) @ decoded, classes

    def classify(self, features: np.ndarray) -> np.ndarray:
        """Global class ids, ties resolved toward the lowest class id."""
        s, classes = self.scores(features)
        return np.asarray(classes, dtype=np.int64)[np.argmax(s, axis=1)]

    def params(self) -> dict[str, np.ndarray]:
        return {"rp.P": self.P}

    def state_element_count(self) -> int:
        """Elements of adaptation state priced by the budget module."""
        return self.G.size + sum(v.size for v in self.class_sums.values())
