"""Spatio-temporal network: a two-level encoder-decoder over three stacked frames.

Three RGB frames are stacked into a 9-channel tensor and pushed through a
U-shaped net: two conv+BN+ReLU pairs per level, max-pooling down, 2x2
transposed convolutions up, and a channel-attention gate joining each
encoder level to its decoder counterpart.  Channel plan 9 -> 64 -> 128 ->
256 -> 128 -> 64 -> 3, capped at 256 filters.  The deconvolutions and the
final 3x3 output conv carry no batch norm and no activation, so the output
is a sign-free residual map.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .attention import AttentionParams, apply_attention, attention_init
from .tensor import (
    GradTape,
    RunningStats,
    Tensor,
    batchnorm,
    conv2d,
    deconv2d,
    maxpool2d,
    relu,
    stack_channels,
)

__all__ = [
    "ConvBnParams",
    "DeconvParams",
    "ConvParams",
    "StnParams",
    "stn_init",
    "stn_forward",
    "stn_named_parameters",
    "stn_named_buffers",
    "stn_from_arrays",
]

FRAME_CHANNELS = 3
STACKED_CHANNELS = 3 * FRAME_CHANNELS
LEVEL_CHANNELS = (64, 128)
BOTTLENECK_CHANNELS = 256


@dataclass
class ConvBnParams:
    """One 3x3 conv followed by batch norm (the ReLU carries no parameters)."""

    weight: Tensor
    bias: Tensor
    gamma: Tensor
    beta: Tensor
    stats: RunningStats


@dataclass
class DeconvParams:
    weight: Tensor  # (C_in, C_out, 2, 2)
    bias: Tensor


@dataclass
class ConvParams:
    weight: Tensor  # (C_out, C_in, 3, 3)
    bias: Tensor


@dataclass
class StnParams:
    enc0: tuple[ConvBnParams, ConvBnParams]        # 9 -> 64 -> 64
    enc1: tuple[ConvBnParams, ConvBnParams]        # 64 -> 128 -> 128
    bottleneck: tuple[ConvBnParams, ConvBnParams]  # 128 -> 256 -> 256
    up1: DeconvParams                              # 256 -> 128
    attn1: AttentionParams                         # C = 128
    dec1: tuple[ConvBnParams, ConvBnParams]        # 128 -> 128 -> 128
    up0: DeconvParams                              # 128 -> 64
    attn0: AttentionParams                         # C = 64
    dec0: tuple[ConvBnParams, ConvBnParams]        # 64 -> 64 -> 64
    out_conv: ConvParams                           # 64 -> 3


def _xavier_conv(rng: np.random.Generator, c_out: int, c_in: int, k: int) -> Tensor:
    fan_in = c_in * k * k
    fan_out = c_out * k * k
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return Tensor(rng.uniform(-bound, bound, size=(c_out, c_in, k, k)))


def _init_conv_bn(rng: np.random.Generator, c_in: int, c_out: int) -> ConvBnParams:
    return ConvBnParams(
        weight=_xavier_conv(rng, c_out, c_in, 3),
        bias=Tensor(np.zeros(c_out, dtype=np.float32)),
        gamma=Tensor(np.ones(c_out, dtype=np.float32)),
        beta=Tensor(np.zeros(c_out, dtype=np.float32)),
        stats=RunningStats.zeros(c_out),
    )


def _init_deconv(rng: np.random.Generator, c_in: int, c_out: int) -> DeconvParams:
    fan_in = c_in * 4
    fan_out = c_out * 4
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return DeconvParams(
        weight=Tensor(rng.uniform(-bound, bound, size=(c_in, c_out, 2, 2))),
        bias=Tensor(np.zeros(c_out, dtype=np.float32)),
    )


def stn_init(seed: int) -> StnParams:
    """Deterministic Xavier-uniform initialization; biases zero, BN gamma 1 / beta 0."""
    rng = np.random.default_rng(seed)
    c0, c1 = LEVEL_CHANNELS
    cb = BOTTLENECK_CHANNELS
    return StnParams(
        enc0=(_init_conv_bn(rng, STACKED_CHANNELS, c0), _init_conv_bn(rng, c0, c0)),
        enc1=(_init_conv_bn(rng, c0, c1), _init_conv_bn(rng, c1, c1)),
        bottleneck=(_init_conv_bn(rng, c1, cb), _init_conv_bn(rng, cb, cb)),
        up1=_init_deconv(rng, cb, c1),
        attn1=attention_init(c1, rng),
        dec1=(_init_conv_bn(rng, c1, c1), _init_conv_bn(rng, c1, c1)),
        up0=_init_deconv(rng, c1, c0),
        attn0=attention_init(c0, rng),
        dec0=(_init_conv_bn(rng, c0, c0), _init_conv_bn(rng, c0, c0)),
        out_conv=ConvParams(
            weight=_xavier_conv(rng, FRAME_CHANNELS, c0, 3),
            bias=Tensor(np.zeros(FRAME_CHANNELS, dtype=np.float32)),
        ),
    )


def _conv_block(x: Tensor, layers: Sequence[ConvBnParams], mode: str,
                tape: Optional[GradTape]) -> Tensor:
    for layer in layers:
        x = conv2d(x, layer.weight, layer.bias, stride=1, padding=1, tape=tape)
        x = batchnorm(x, layer.gamma, layer.beta, layer.stats, mode=mode, tape=tape)
        x = relu(x, tape)
    return x


def stn_forward(frames: Sequence[Tensor], params: StnParams, mode: str = "train",
                tape: Optional[GradTape] = None) -> Tensor:
    """Map three 3 x H x W frames to one 3 x H x W residual estimate.

    H and W must be divisible by 4 (two pooling levels).
    """
    if len(frames) != 3:
        raise ValueError(f"stn_forward takes exactly 3 frames, got {len(frames)}")
    shape = frames[0].shape
    for f in frames:
        if f.shape != shape:
            raise ValueError(f"stn_forward frame size mismatch: {f.shape} vs {shape}")
    if len(shape) != 3 or shape[0] != FRAME_CHANNELS:
        raise ValueError(f"stn_forward frames must be 3 x H x W, got shape {shape}")
    _, h, w = shape
    if h % 4 != 0 or w % 4 != 0:
        raise ValueError(f"stn_forward needs H and W divisible by 4, got {h}x{w}")

    x = stack_channels(frames, tape)
    e0 = _conv_block(x, params.enc0, mode, tape)
    e1 = _conv_block(maxpool2d(e0, tape=tape), params.enc1, mode, tape)
    b = _conv_block(maxpool2d(e1, tape=tape), params.bottleneck, mode, tape)

    u1 = deconv2d(b, params.up1.weight, params.up1.bias, tape=tape)
    d1 = _conv_block(apply_attention(e1, u1, params.attn1, tape), params.dec1, mode, tape)

    u0 = deconv2d(d1, params.up0.weight, params.up0.bias, tape=tape)
    d0 = _conv_block(apply_attention(e0, u0, params.attn0, tape), params.dec0, mode, tape)

    return conv2d(d0, params.out_conv.weight, params.out_conv.bias, stride=1, padding=1, tape=tape)


def _named_conv_bn(out: dict, prefix: str, layers: Sequence[ConvBnParams]) -> None:
    for i, layer in enumerate(layers):
        out[f"{prefix}.{i}.weight"] = layer.weight
        out[f"{prefix}.{i}.bias"] = layer.bias
        out[f"{prefix}.{i}.gamma"] = layer.gamma
        out[f"{prefix}.{i}.beta"] = layer.beta


def stn_named_parameters(params: StnParams, prefix: str = "") -> dict[str, Tensor]:
    """Trainable tensors in canonical (network) order, keyed by dotted names."""
    out: dict[str, Tensor] = {}
    _named_conv_bn(out, prefix + "enc0", params.enc0)
    _named_conv_bn(out, prefix + "enc1", params.enc1)
    _named_conv_bn(out, prefix + "bottleneck", params.bottleneck)
    out[prefix + "up1.weight"] = params.up1.weight
    out[prefix + "up1.bias"] = params.up1.bias
    out[prefix + "attn1.w1"] = params.attn1.w1
    out[prefix + "attn1.b1"] = params.attn1.b1
    out[prefix + "attn1.w2"] = params.attn1.w2
    out[prefix + "attn1.b2"] = params.attn1.b2
    _named_conv_bn(out, prefix + "dec1", params.dec1)
    out[prefix + "up0.weight"] = params.up0.weight
    out[prefix + "up0.bias"] = params.up0.bias
    out[prefix + "attn0.w1"] = params.attn0.w1
    out[prefix + "attn0.b1"] = params.attn0.b1
    out[prefix + "attn0.w2"] = params.attn0.w2
    out[prefix + "attn0.b2"] = params.attn0.b2
    _named_conv_bn(out, prefix + "dec0", params.dec0)
    out[prefix + "out_conv.weight"] = params.out_conv.weight
    out[prefix + "out_conv.bias"] = params.out_conv.bias
    return out


def stn_named_buffers(params: StnParams, prefix: str = "") -> dict[str, np.ndarray]:
    """Non-trainable running statistics, keyed alongside their layers."""
    out: dict[str, np.ndarray] = {}
    for name, layers in (("enc0", params.enc0), ("enc1", params.enc1),
                         ("bottleneck", params.bottleneck), ("dec1", params.dec1),
                         ("dec0", params.dec0)):
        for i, layer in enumerate(layers):
            out[f"{prefix}{name}.{i}.running_mean"] = layer.stats.mean
            out[f"{prefix}{name}.{i}.running_var"] = layer.stats.var
    return out


def stn_from_arrays(arrays: dict[str, np.ndarray], prefix: str = "") -> StnParams:
    """Rebuild an StnParams tree from the flat name -> array view.

    Raises KeyError (with the dotted name) if an expected entry is missing.
    """

    def take(name: str) -> np.ndarray:
        full = prefix + name
        if full not in arrays:
            raise KeyError(full)
        return arrays[full]

    def conv_bn(name: str, i: int) -> ConvBnParams:
        return ConvBnParams(
            weight=Tensor(take(f"{name}.{i}.weight")),
            bias=Tensor(take(f"{name}.{i}.bias")),
            gamma=Tensor(take(f"{name}.{i}.gamma")),
            beta=Tensor(take(f"{name}.{i}.beta")),
            stats=RunningStats(
                mean=np.array(take(f"{name}.{i}.running_mean"), dtype=np.float32),
                var=np.array(take(f"{name}.{i}.running_var"), dtype=np.float32),
            ),
        )

    def attn(name: str) -> AttentionParams:
        return AttentionParams(
            w1=Tensor(take(f"{name}.w1")),
            b1=Tensor(take(f"{name}.b1")),
            w2=Tensor(take(f"{name}.w2")),
            b2=Tensor(take(f"{name}.b2")),
        )

    return StnParams(
        enc0=(conv_bn("enc0", 0), conv_bn("enc0", 1)),
        enc1=(conv_bn("enc1", 0), conv_bn("enc1", 1)),
        bottleneck=(conv_bn("bottleneck", 0), conv_bn("bottleneck", 1)),
        up1=DeconvParams(weight=Tensor(take("up1.weight")), bias=Tensor(take("up1.bias"))),
        attn1=attn("attn1"),
        dec1=(conv_bn("dec1", 0), conv_bn("dec1", 1)),
        up0=DeconvParams(weight=Tensor(take("up0.weight")), bias=Tensor(take("up0.bias"))),
        attn0=attn("attn0"),
        dec0=(conv_bn("dec0", 0), conv_bn("dec0", 1)),
        out_conv=ConvParams(
            weight=Tensor(take("out_conv.weight")),
            bias=Tensor(take("out_conv.bias")),
        ),
    )
