"""Minimal tensor/autodiff kit: tape, layers, convs, grid ops, Adam."""

from .tensor import (
    Tensor,
    absolute,
    add,
    as_tensor,
    clip,
    concat,
    custom_op,
    div,
    exp,
    gelu,
    getitem,
    index_gather,
    log,
    matmul,
    mul,
    power,
    reshape,
    scatter_add,
    set_debug_nan,
    sigmoid,
    softmax,
    sqrt,
    sub,
    tanh,
    tmean,
    transpose,
    tsum,
)
from .conv import avg_pool2d, conv2d, conv3d
from .grids import (
    bilinear_sample,
    collapse_features,
    expand_features,
    gather_trilinear,
    scatter_average,
    trilinear_corners,
)
from .layers import (
    MLP,
    LayerNorm,
    Linear,
    MultiHeadAttention,
    TransformerBlock,
    xavier_uniform,
)
from .params import ParamStore, load_checkpoint, save_checkpoint

__all__ = [
    "Tensor", "absolute", "add", "as_tensor", "clip", "concat", "custom_op",
    "div", "exp", "gelu", "getitem", "index_gather", "log", "matmul", "mul",
    "power", "reshape", "scatter_add", "set_debug_nan", "sigmoid", "softmax",
    "sqrt", "sub", "tanh", "tmean", "transpose", "tsum",
    "avg_pool2d", "conv2d", "conv3d",
    "bilinear_sample", "collapse_features", "expand_features",
    "gather_trilinear", "scatter_average", "trilinear_corners",
    "MLP", "LayerNorm", "Linear", "MultiHeadAttention", "TransformerBlock",
    "xavier_uniform",
    "ParamStore", "load_checkpoint", "save_checkpoint",
]
