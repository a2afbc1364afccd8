"""Fully convolutional U-Net decoder.

Layout for depth D and base width B (level i has B * 2**i channels):

* D down blocks: double 3x3 conv + relu with a residual bridge, then maxpool2
* a bottleneck block at width B * 2**D
* D up blocks: upconv2, concat with the matching skip, residual double conv
* a 1x1 conv head followed by a sigmoid

A residual bridge is the identity when the block keeps its width and a 1x1
projection otherwise.  There are no dense layers and no normalisation, so
samples in a batch never interact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..channel import make_rng
from .autograd import Tensor
from .ops import add, concat_channels, conv2d, maxpool2, relu, sigmoid, upconv2

INIT_STREAM = 1


@dataclass(frozen=True)
class UNetConfig:
    depth: int = 2
    base_channels: int = 8
    in_channels: int = 2
    out_channels: int = 1
    kernel: int = 3

    def __post_init__(self):
        if self.depth < 0:
            raise ValueError(f"depth must be >= 0, got {self.depth}")
        if self.base_channels < 1:
            raise ValueError(f"base_channels must be >= 1, got {self.base_channels}")
        if self.kernel % 2 == 0:
            raise ValueError(f"kernel must be odd, got {self.kernel}")

    def width(self, level: int) -> int:
        return self.base_channels << level


def _block_shapes(prefix, cin, cout, k):
    shapes = [
        (f"{prefix}.conv1.weight", (cout, cin, k, k)),
        (f"{prefix}.conv1.bias", (cout,)),
        (f"{prefix}.conv2.weight", (cout, cout, k, k)),
        (f"{prefix}.conv2.bias", (cout,)),
    ]
    if cin != cout:
        shapes += [(f"{prefix}.proj.weight", (cout, cin, 1, 1)), (f"{prefix}.proj.bias", (cout,))]
    return shapes


def layer_shapes(cfg: UNetConfig) -> list[tuple[str, tuple[int, ...]]]:
    """Every parameter name and shape, in initialisation order."""
    k, D = cfg.kernel, cfg.depth
    shapes = []
    cin = cfg.in_channels
    for i in range(D):
        shapes += _block_shapes(f"down{i}", cin, cfg.width(i), k)
        cin = cfg.width(i)
    shapes += _block_shapes("bottleneck", cin, cfg.width(D), k)
    for i in reversed(range(D)):
        c = cfg.width(i)
        shapes += [(f"up{i}.upconv.weight", (cfg.width(i + 1), c, 2, 2)), (f"up{i}.upconv.bias", (c,))]
        shapes += _block_shapes(f"up{i}", 2 * c, c, k)
    shapes += [("head.weight", (cfg.out_channels, cfg.width(0), 1, 1)), ("head.bias", (cfg.out_channels,))]
    return shapes


def _fan_in(name: str, shape) -> int:
    if name.endswith("upconv.weight"):
        return shape[0]  # each output cell sees one tap per input channel
    return int(np.prod(shape[1:]))


class UNet:
    def __init__(self, cfg: UNetConfig, params: dict[str, Tensor]):
        self.cfg = cfg
        self.params = params

    def parameters(self) -> dict[str, Tensor]:
        return self.params

    @property
    def dtype(self):
        return next(iter(self.params.values())).dtype

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data for name, p in self.params.items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        for name, p in self.params.items():
            if name not in state:
                raise KeyError(f"missing parameter {name!r}")
            if state[name].shape != p.shape:
                raise ValueError(f"shape mismatch for {name}: {state[name].shape} vs {p.shape}")
            p.data = np.array(state[name], dtype=p.dtype)

    def _conv(self, name, x):
        return conv2d(x, self.params[f"{name}.weight"], self.params[f"{name}.bias"])

    def _block(self, prefix, x):
        h = relu(self._conv(f"{prefix}.conv1", x))
        h = relu(self._conv(f"{prefix}.conv2", h))
        skip = self._conv(f"{prefix}.proj", x) if f"{prefix}.proj.weight" in self.params else x
        return add(h, skip)

    def forward(self, x) -> Tensor:
        """Map (N, in_c, S, S) grids to (N, out_c, S, S) probabilities."""
        if not isinstance(x, Tensor):
            x = Tensor(np.asarray(x, dtype=self.dtype))
        if x.data.ndim != 4 or x.shape[1] != self.cfg.in_channels:
            raise ValueError(f"expected (N, {self.cfg.in_channels}, S, S) input, got {x.shape}")
        div = 1 << self.cfg.depth
        if x.shape[2] % div or x.shape[3] % div:
            raise ValueError(f"spatial dims {x.shape[2:]} not divisible by 2**depth = {div}")
        skips = []
        h = x
        for i in range(self.cfg.depth):
            h = self._block(f"down{i}", h)
            skips.append(h)
            h = maxpool2(h)
        h = self._block("bottleneck", h)
        for i in reversed(range(self.cfg.depth)):
            up = upconv2(h, self.params[f"up{i}.upconv.weight"], self.params[f"up{i}.upconv.bias"])
            h = self._block(f"up{i}", concat_channels(up, skips[i]))
        return sigmoid(self._conv("head", h))

    __call__ = forward


def build_unet(cfg: UNetConfig, init_seed: int, dtype=np.float32) -> UNet:
    """He-normal weights and zero biases, drawn in :func:`layer_shapes` order."""
    rng = make_rng(init_seed, INIT_STREAM)
    params = {}
    for name, shape in layer_shapes(cfg):
        if name.endswith(".bias"):
            data = np.zeros(shape)
        else:
            data = rng.standard_normal(shape) * np.sqrt(2.0 / _fan_in(name, shape))
        params[name] = Tensor(data.astype(dtype), requires_grad=True)
    return UNet(cfg, params)


def count_params(model: UNet) -> int:
    return sum(p.size for p in model.params.values())
