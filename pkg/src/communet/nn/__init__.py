from .autograd import Tape, Tensor, apply, as_tensor
from .ops import add, concat_channels, conv2d, maxpool2, relu, sigmoid, upconv2
from .unet import UNet, UNetConfig, build_unet, count_params, layer_shapes

__all__ = [
    "Tape",
    "Tensor",
    "apply",
    "as_tensor",
    "add",
    "concat_channels",
    "conv2d",
    "maxpool2",
    "relu",
    "sigmoid",
    "upconv2",
    "UNet",
    "UNetConfig",
    "build_unet",
    "count_params",
    "layer_shapes",
]
