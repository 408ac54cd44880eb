"""3x3 convolution, batch normalization and ReLU with explicit backward passes.

Layers work on channels-last arrays (B, H, W, C) internally; the public
``conv2d_forward`` helper accepts and returns (B, C, H, W).
"""

from __future__ import annotations

import numpy as np

from ..errors import ContractError

BN_EPS = 1e-5
BN_MOMENTUM = 0.9


def im2col3x3(x: np.ndarray) -> np.ndarray:
    """(B, H, W, C) -> (B*H*W, 9*C) patches with zero padding 1, tap-major."""
    b, h, w, c = x.shape
    xp = np.zeros((b, h + 2, w + 2, c), x.dtype)
    xp[:, 1:-1, 1:-1, :] = x
    cols = np.empty((b, h, w, 3, 3, c), x.dtype)
    for ky in range(3):
        for kx in range(3):
            cols[:, :, :, ky, kx, :] = xp[:, ky:ky + h, kx:kx + w, :]
    return cols.reshape(b * h * w, 9 * c)


def col2im3x3(dcols: np.ndarray, shape: tuple[int, int, int, int]) -> np.ndarray:
    b, h, w, c = shape
    dcols = dcols.reshape(b, h, w, 3, 3, c)
    dxp = np.zeros((b, h + 2, w + 2, c), dcols.dtype)
    for ky in range(3):
        for kx in range(3):
            dxp[:, ky:ky + h, kx:kx + w, :] += dcols[:, :, :, ky, kx, :]
    return dxp[:, 1:-1, 1:-1, :]


class Conv2d:
    """3x3 convolution, stride 1, zero padding 1, optional fused ReLU."""

    def __init__(self, in_ch: int, out_ch: int, relu: bool, rng: np.random.Generator | None = None,
                 dtype=np.float32):
        self.in_ch, self.out_ch, self.relu = in_ch, out_ch, relu
        self.weight = np.zeros((out_ch, in_ch, 3, 3), dtype)
        self.bias = np.zeros(out_ch, dtype)
        if rng is not None:
            # He-normal keeps activation variance stable through the ReLU stack
            std = np.sqrt(2.0 / (in_ch * 9))
            self.weight[...] = rng.normal(0.0, std, self.weight.shape)
        self.grads = {"weight": np.zeros_like(self.weight), "bias": np.zeros_like(self.bias)}
        self._cache = None

    @property
    def params(self) -> dict[str, np.ndarray]:
        return {"weight": self.weight, "bias": self.bias}

    def _wmat(self) -> np.ndarray:
        # (9*C_in, C_out), matching im2col's (ky, kx, c) ordering
        return self.weight.transpose(2, 3, 1, 0).reshape(9 * self.in_ch, self.out_ch)

    def forward(self, x: np.ndarray, cache: bool = False) -> np.ndarray:
        if x.shape[-1] != self.in_ch:
            raise ContractError(f"conv expects {self.in_ch} input channels, got {x.shape[-1]}")
        b, h, w, _ = x.shape
        cols = im2col3x3(x.astype(self.weight.dtype, copy=False))
        out = cols @ self._wmat()
        out += self.bias
        out = out.reshape(b, h, w, self.out_ch)
        if self.relu:
            np.maximum(out, 0, out=out)
        self._cache = (cols, x.shape, out if self.relu else None) if cache else None
        return out

    def backward(self, grad: np.ndarray) -> np.ndarray:
        if self._cache is None:
            raise ContractError("backward called without a cached forward pass")
        cols, xshape, out = self._cache
        if out is not None:
            grad = grad * (out > 0)
        g2 = grad.reshape(-1, self.out_ch)
        dw = cols.T @ g2
        self.grads["weight"] += dw.reshape(3, 3, self.in_ch, self.out_ch).transpose(3, 2, 0, 1)
        self.grads["bias"] += g2.sum(axis=0)
        dx = col2im3x3(g2 @ self._wmat().T, xshape)
        self._cache = None
        return dx


class BatchNorm2d:
    def __init__(self, channels: int, dtype=np.float32):
        self.gamma = np.ones(channels, dtype)
        self.beta = np.zeros(channels, dtype)
        self.running_mean = np.zeros(channels, dtype)
        self.running_var = np.ones(channels, dtype)
        self.grads = {"gamma": np.zeros_like(self.gamma), "beta": np.zeros_like(self.beta)}
        self._cache = None

    @property
    def params(self) -> dict[str, np.ndarray]:
        return {"gamma": self.gamma, "beta": self.beta}

    @property
    def buffers(self) -> dict[str, np.ndarray]:
        return {"running_mean": self.running_mean, "running_var": self.running_var}

    def forward(self, x: np.ndarray, train: bool, cache: bool = False) -> np.ndarray:
        if train:
            if x.shape[0] < 2:
                raise ContractError("batch normalization in train mode needs batch size >= 2")
            n = x.shape[0] * x.shape[1] * x.shape[2]
            mean = x.mean(axis=(0, 1, 2))
            var = x.var(axis=(0, 1, 2))
            self.running_mean[...] = BN_MOMENTUM * self.running_mean + (1 - BN_MOMENTUM) * mean
            self.running_var[...] = BN_MOMENTUM * self.running_var + (1 - BN_MOMENTUM) * var * (n / (n - 1))
        else:
            mean, var = self.running_mean, self.running_var
        inv_std = (1.0 / np.sqrt(var + BN_EPS)).astype(x.dtype)
        xhat = (x - mean) * inv_std
        self._cache = (xhat, inv_std, train) if cache else None
        return xhat * self.gamma + self.beta

    def backward(self, grad: np.ndarray) -> np.ndarray:
        if self._cache is None:
            raise ContractError("backward called without a cached forward pass")
        xhat, inv_std, train = self._cache
        self.grads["gamma"] += (grad * xhat).sum(axis=(0, 1, 2))
        self.grads["beta"] += grad.sum(axis=(0, 1, 2))
        dxhat = grad * self.gamma
        self._cache = None
        if not train:
            return dxhat * inv_std
        n = grad.shape[0] * grad.shape[1] * grad.shape[2]
        return (inv_std / n) * (n * dxhat - dxhat.sum(axis=(0, 1, 2))
                                - xhat * (dxhat * xhat).sum(axis=(0, 1, 2)))


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0)


def to_nhwc(x: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(x.transpose(0, 2, 3, 1))


def to_nchw(x: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(x.transpose(0, 3, 1, 2))


def conv2d_forward(x: np.ndarray, layer: Conv2d) -> np.ndarray:
    """Convolution on a (B, C, H, W) tensor."""
    if x.ndim != 4 or x.shape[1] != layer.in_ch:
        raise ContractError(f"expected (B, {layer.in_ch}, H, W) input, got {x.shape}")
    return to_nchw(layer.forward(to_nhwc(x)))
