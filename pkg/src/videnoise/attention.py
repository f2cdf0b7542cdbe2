"""Channel-wise soft attention: squeeze a feature map to one weight per channel.

The gate pools each channel of the encoder features to its spatial mean,
pushes the pooled vector through a two-layer bottleneck (C -> C/2 -> C,
ReLU inside, sigmoid outside), and scales the decoder features channel by
channel with the resulting weights in (0, 1).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .tensor import (
    GradTape,
    Tensor,
    channel_scale,
    fully_connected,
    global_mean_pool,
    relu,
    sigmoid,
)

__all__ = ["AttentionParams", "attention_init", "attention_forward", "apply_attention"]


@dataclass
class AttentionParams:
    """Bottleneck weights for one attention gate over C channels.

    w1 maps C -> C/2, w2 maps C/2 -> C; C must be even.
    """

    w1: Tensor  # (C/2, C)
    b1: Tensor  # (C/2,)
    w2: Tensor  # (C, C/2)
    b2: Tensor  # (C,)

    @property
    def channels(self) -> int:
        return self.w1.shape[1]


def attention_init(channels: int, rng: np.random.Generator) -> AttentionParams:
    """Xavier-uniform weights, zero biases, for a gate over ``channels`` channels."""
    if channels % 2 != 0:
        raise ValueError(f"attention gate needs an even channel count, got {channels}")
    half = channels // 2

    def xavier(rows: int, cols: int) -> Tensor:
        bound = np.sqrt(6.0 / (rows + cols))
        return Tensor(rng.uniform(-bound, bound, size=(rows, cols)))

    return AttentionParams(
        w1=xavier(half, channels),
        b1=Tensor(np.zeros(half, dtype=np.float32)),
        w2=xavier(channels, half),
        b2=Tensor(np.zeros(channels, dtype=np.float32)),
    )


def attention_forward(x: Tensor, params: AttentionParams,
                      tape: Optional[GradTape] = None) -> Tensor:
    """Per-channel gate weights from a C x H x W map: sigmoid(w2 @ relu(w1 @ mean(x) + b1) + b2).

    Only the spatial mean of ``x`` enters, so the result is invariant to
    spatial permutations and every component lies strictly inside (0, 1).
    """
    if x.data.ndim != 3 or x.shape[0] != params.channels:
        raise ValueError(
            f"attention channel mismatch: params expect {params.channels} channels, "
            f"input has shape {x.shape}"
        )
    pooled = global_mean_pool(x, tape)
    hidden = relu(fully_connected(pooled, params.w1, params.b1, tape), tape)
    return sigmoid(fully_connected(hidden, params.w2, params.b2, tape), tape)


def apply_attention(encoder_features: Tensor, decoder_features: Tensor,
                    params: AttentionParams, tape: Optional[GradTape] = None) -> Tensor:
    """Scale decoder features by gate weights computed from the encoder features."""
    if encoder_features.shape[0] != decoder_features.shape[0]:
        raise ValueError(
            f"apply_attention channel mismatch: encoder has {encoder_features.shape[0]} "
            f"channels, decoder has {decoder_features.shape[0]}"
        )
    weights = attention_forward(encoder_features, params, tape)
    return channel_scale(decoder_features, weights, tape)
