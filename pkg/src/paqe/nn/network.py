"""The quality-enhancement network.

    out = F3(F1b(F1a(Bn(F2(Res^N(F1(x)))) + F1(x))))

F1* are 3x3 convolutions with ReLU, F2 without, F3 maps to one channel
followed by ReLU. Each residual block is conv-ReLU-conv plus an identity skip.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ContractError
from .layers import BatchNorm2d, Conv2d, to_nchw, to_nhwc


@dataclass(frozen=True)
class NetConfig:
    in_channels: int = 3
    channels: int = 256
    n_blocks: int = 16

    def __post_init__(self):
        if self.in_channels not in (2, 3):
            raise ContractError(f"in_channels must be 2 or 3, got {self.in_channels}")
        if self.channels < 1 or self.n_blocks < 0:
            raise ContractError("channels must be >= 1 and n_blocks >= 0")

    @property
    def conv_count(self) -> int:
        return 2 * self.n_blocks + 5

    @property
    def receptive_radius(self) -> int:
        return self.conv_count


PAPER_NET = NetConfig(3, 256, 16)
DESK_NET = NetConfig(3, 16, 2)


class ResidualBlock:
    def __init__(self, channels: int, rng, dtype):
        self.conv_a = Conv2d(channels, channels, relu=True, rng=rng, dtype=dtype)
        self.conv_b = Conv2d(channels, channels, relu=False, rng=rng, dtype=dtype)

    def forward(self, x, cache=False):
        return x + self.conv_b.forward(self.conv_a.forward(x, cache), cache)

    def backward(self, grad):
        return grad + self.conv_a.backward(self.conv_b.backward(grad))


class QENetwork:
    def __init__(self, config: NetConfig, seed: int | None = 0, dtype=np.float32, identity: bool = False):
        """He-normal initialization; ``seed=None`` gives all-zero parameters.

        With ``identity`` the reconstruction channel is additionally routed
        straight to the output, so the untrained net returns its C input.
        """
        self.config = config
        rng = None if seed is None else np.random.default_rng(seed)
        c = config.channels
        self.head = Conv2d(config.in_channels, c, relu=True, rng=rng, dtype=dtype)
        self.blocks = [ResidualBlock(c, rng, dtype) for _ in range(config.n_blocks)]
        self.body_tail = Conv2d(c, c, relu=False, rng=rng, dtype=dtype)
        self.bn = BatchNorm2d(c, dtype=dtype)
        self.recon_a = Conv2d(c, c, relu=True, rng=rng, dtype=dtype)
        self.recon_b = Conv2d(c, c, relu=True, rng=rng, dtype=dtype)
        self.out = Conv2d(c, 1, relu=True, rng=rng, dtype=dtype)
        self._cached = False
        if identity:
            self._route_identity()

    def _route_identity(self) -> None:
        # channel 0 carries C: head picks it, the Bn branch is muted on that
        # channel (gamma=0), the reconstruction convs and F3 pass it through
        c_in = self.config.in_channels - 2  # C sits just before Q
        self.head.weight[0] = 0
        self.head.weight[0, c_in, 1, 1] = 1
        self.head.bias[0] = 0
        self.bn.gamma[0] = 0
        for conv in (self.recon_a, self.recon_b, self.out):
            conv.weight[0] = 0
            conv.weight[0, 0, 1, 1] = 1
            conv.bias[0] = 0

    @property
    def in_channels(self) -> int:
        return self.config.in_channels

    @property
    def dtype(self):
        return self.head.weight.dtype

    def convs(self) -> list[Conv2d]:
        layers = [self.head]
        for blk in self.blocks:
            layers += [blk.conv_a, blk.conv_b]
        return layers + [self.body_tail, self.recon_a, self.recon_b, self.out]

    def _modules(self):
        """(name, layer) pairs in declaration order."""
        yield "head", self.head
        for i, blk in enumerate(self.blocks):
            yield f"res{i}.conv_a", blk.conv_a
            yield f"res{i}.conv_b", blk.conv_b
        yield "body_tail", self.body_tail
        yield "bn", self.bn
        yield "recon_a", self.recon_a
        yield "recon_b", self.recon_b
        yield "out", self.out

    def named_parameters(self) -> list[tuple[str, np.ndarray]]:
        return [(f"{name}.{k}", v) for name, mod in self._modules() for k, v in mod.params.items()]

    def named_grads(self) -> list[tuple[str, np.ndarray]]:
        return [(f"{name}.{k}", v) for name, mod in self._modules() for k, v in mod.grads.items()]

    def named_tensors(self) -> list[tuple[str, np.ndarray]]:
        """Parameters plus batch-norm running statistics, in serialization order."""
        out = []
        for name, mod in self._modules():
            items = dict(mod.params)
            items.update(getattr(mod, "buffers", {}))
            out += [(f"{name}.{k}", v) for k, v in items.items()]
        return out

    def zero_grad(self) -> None:
        for _, g in self.named_grads():
            g[...] = 0

    def forward_nhwc(self, x: np.ndarray, train: bool = False, cache: bool = False) -> np.ndarray:
        if x.shape[-1] != self.config.in_channels:
            raise ContractError(f"network expects {self.config.in_channels} input channels, got {x.shape[-1]}")
        x = x.astype(self.dtype, copy=False)
        skip = self.head.forward(x, cache)
        h = skip
        for blk in self.blocks:
            h = blk.forward(h, cache)
        h = self.bn.forward(self.body_tail.forward(h, cache), train, cache)
        h = h + skip
        h = self.recon_b.forward(self.recon_a.forward(h, cache), cache)
        out = self.out.forward(h, cache)
        self._cached = cache
        return out

    def backward_nhwc(self, grad: np.ndarray) -> np.ndarray:
        if not self._cached:
            raise ContractError("backward called without a cached forward pass")
        g = self.recon_a.backward(self.recon_b.backward(self.out.backward(grad.astype(self.dtype, copy=False))))
        g_skip = g
        g = self.body_tail.backward(self.bn.backward(g))
        for blk in reversed(self.blocks):
            g = blk.backward(g)
        self._cached = False
        return self.head.backward(g + g_skip)

    def forward(self, x: np.ndarray, mode: str = "infer", cache: bool | None = None) -> np.ndarray:
        """(B, C_in, H, W) -> (B, 1, H, W). ``mode`` is "train" or "infer"."""
        if mode not in ("train", "infer"):
            raise ValueError(f"mode must be 'train' or 'infer', got {mode!r}")
        if x.ndim != 4:
            raise ContractError(f"expected a rank-4 tensor, got shape {x.shape}")
        if cache is None:
            cache = mode == "train"
        return to_nchw(self.forward_nhwc(to_nhwc(x), mode == "train", cache))

    __call__ = forward

    def backward(self, grad: np.ndarray) -> np.ndarray:
        """Accumulate parameter gradients; returns the input gradient (B, C_in, H, W)."""
        return to_nchw(self.backward_nhwc(to_nhwc(grad)))

    def astype(self, dtype) -> "QENetwork":
        net = QENetwork(self.config, seed=None, dtype=dtype)
        for (_, dst), (_, src) in zip(net.named_tensors(), self.named_tensors()):
            dst[...] = src
        return net

    def copy(self) -> "QENetwork":
        return self.astype(self.dtype)

    def load_state(self, tensors: list[np.ndarray]) -> None:
        for (_, dst), src in zip(self.named_tensors(), tensors):
            dst[...] = src


def network_forward(x: np.ndarray, net: QENetwork, mode: str = "infer") -> np.ndarray:
    return net.forward(x, mode)


def network_backward(net: QENetwork, grad: np.ndarray) -> dict[str, np.ndarray]:
    net.backward(grad)
    return dict(net.named_grads())
