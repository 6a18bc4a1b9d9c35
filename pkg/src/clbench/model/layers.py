"""Minimal numpy layers with explicit forward/backward passes.

Weight convention: ``W`` has shape (out_dim, in_dim) and a forward pass is
``y = x @ W.T + b`` with sample rows. Layers with weights expose
``input_rows`` from the last forward, the per-sample input matrix used by
the subspace-projection methods (for convolutions these are the im2col
patch rows).
"""

from __future__ import annotations

import numpy as np


class Layer:
    """Stateless-by-default layer; subclasses may hold parameters."""

    name = "layer"

    def forward(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def backward(self, gy: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def params(self) -> dict[str, np.ndarray]:
        return {}

    def grads(self) -> dict[str, np.ndarray]:
        return {}

    def zero_grads(self) -> None:
        for g in self.grads().values():
            g[...] = 0.0


class Dense(Layer):
    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator, name: str):
        self.name = name
        self.in_dim, self.out_dim = in_dim, out_dim
        scale = np.sqrt(2.0 / in_dim)
        self.W = (rng.standard_normal((out_dim, in_dim)) * scale).astype(np.float32)
        self.b = np.zeros(out_dim, dtype=np.float32)
        self.gW = np.zeros_like(self.W)
        self.gb = np.zeros_like(self.b)
        self.effective_W: np.ndarray | None = None
        self.input_rows: np.ndarray | None = None
        self.capture = False
        self.captured: list[np.ndarray] = []

    def forward(self, x: np.ndarray) -> np.ndarray:
        self.input_rows = x
        if self.capture:
            self.captured.append(np.array(x, dtype=np.float64))
        W = self.W if self.effective_W is None else self.effective_W
        return x @ W.T + self.b

    def backward(self, gy: np.ndarray) -> np.ndarray:
        W = self.W if self.effective_W is None else self.effective_W
        self.gW += (gy.T @ self.input_rows).astype(np.float32)
        self.gb += gy.sum(axis=0).astype(np.float32)
        return gy @ W

    def params(self):
        return {f"{self.name}.W": self.W, f"{self.name}.b": self.b}

    def grads(self):
        return {f"{self.name}.W": self.gW, f"{self.name}.b": self.gb}


class ReLU(Layer):
    def __init__(self, name: str = "relu"):
        self.name = name
        self._mask: np.ndarray | None = None

    def forward(self, x):
        self._mask = x > 0
        return x * self._mask

    def backward(self, gy):
        return gy * self._mask


class Flatten(Layer):
    def __init__(self, name: str = "flatten"):
        self.name = name
        self._shape: tuple[int, ...] | None = None

    def forward(self, x):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, gy):
        return gy.reshape(self._shape)


def _im2col(x: np.ndarray, k: int) -> np.ndarray:
    """(n,h,w,c) -> (n*oh*ow, k*k*c) patch rows, stride 1, valid padding."""
    n, h, w, c = x.shape
    oh, ow = h - k + 1, w - k + 1
    s = x.strides
    windows = np.lib.stride_tricks.as_strided(
        x, shape=(n, oh, ow, k, k, c), strides=(s[0], s[1], s[2], s[1], s[2], s[3])
    )
    return np.ascontiguousarray(windows).reshape(n * oh * ow, k * k * c)


def _col2im(cols: np.ndarray, x_shape: tuple[int, ...], k: int) -> np.ndarray:
    n, h, w, c = x_shape
    oh, ow = h - k + 1, w - k + 1
    out = np.zeros(x_shape, dtype=cols.dtype)
    patches = cols.reshape(n, oh, ow, k, k, c)
    for di in range(k):
        for dj in range(k):
            out[:, di : di + oh, dj : dj + ow, :] += patches[:, :, :, di, dj, :]
    return out


class Conv2d(Layer):
    """3x3-style valid convolution implemented as a matmul over patch rows."""

    def __init__(self, in_ch: int, out_ch: int, k: int, rng: np.random.Generator, name: str):
        self.name = name
        self.k, self.in_ch, self.out_ch = k, in_ch, out_ch
        self.in_dim = k * k * in_ch
        scale = np.sqrt(2.0 / self.in_dim)
        self.W = (rng.standard_normal((out_ch, self.in_dim)) * scale).astype(np.float32)
        self.b = np.zeros(out_ch, dtype=np.float32)
        self.gW = np.zeros_like(self.W)
        self.gb = np.zeros_like(self.b)
        self.effective_W: np.ndarray | None = None
        self.input_rows: np.ndarray | None = None
        self._x_shape: tuple[int, ...] | None = None
        self.capture = False
        self.captured: list[np.ndarray] = []

    def forward(self, x):
        self._x_shape = x.shape
        n, h, w, _ = x.shape
        oh, ow = h - self.k + 1, w - self.k + 1
        cols = _im2col(x, self.k)
        self.input_rows = cols
        if self.capture:
            self.captured.append(np.array(cols, dtype=np.float64))
        W = self.W if self.effective_W is None else self.effective_W
        y = cols @ W.T + self.b
        return y.reshape(n, oh, ow, self.out_ch)

    def backward(self, gy):
        W = self.W if self.effective_W is None else self.effective_W
        rows = gy.reshape(-1, self.out_ch)
        self.gW += (rows.T @ self.input_rows).astype(np.float32)
        self.gb += rows.sum(axis=0).astype(np.float32)
        gcols = rows @ W
        return _col2im(gcols, self._x_shape, self.k)

    def params(self):
        return {f"{self.name}.W": self.W, f"{self.name}.b": self.b}

    def grads(self):
        return {f"{self.name}.W": self.gW, f"{self.name}.b": self.gb}


class AvgPool2(Layer):
    """2x2 average pooling, floor semantics on odd sizes."""

    def __init__(self, name: str = "pool"):
        self.name = name
        self._x_shape: tuple[int, ...] | None = None

    def forward(self, x):
        self._x_shape = x.shape
        n, h, w, c = x.shape
        oh, ow = h // 2, w // 2
        x = x[:, : oh * 2, : ow * 2, :]
        return x.reshape(n, oh, 2, ow, 2, c).mean(axis=(2, 4))

    def backward(self, gy):
        n, h, w, c = self._x_shape
        oh, ow = h // 2, w // 2
        out = np.zeros(self._x_shape, dtype=gy.dtype)
        spread = np.repeat(np.repeat(gy, 2, axis=1), 2, axis=2) / 4.0
        out[:, : oh * 2, : ow * 2, :] = spread
        return out
