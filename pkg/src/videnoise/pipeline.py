"""Two-stage denoising cascade over a five-frame temporal window.

Stage one maps each of the three overlapping frame triplets through a single
shared network; stage two fuses the three intermediate outputs with its own
network of identical shape.  The stage-two output is a residual added to the
noisy middle frame, so an all-zero residual reproduces the input exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .stn import (
    StnParams,
    stn_forward,
    stn_from_arrays,
    stn_init,
    stn_named_buffers,
    stn_named_parameters,
)
from .tensor import GradTape, Tensor, add

__all__ = [
    "WINDOW_SIZE",
    "MID_INDEX",
    "PipelineParams",
    "pipeline_init",
    "pipeline_forward",
    "pipeline_named_parameters",
    "pipeline_named_buffers",
    "pipeline_from_arrays",
]

WINDOW_SIZE = 5
MID_INDEX = 2


@dataclass
class PipelineParams:
    """Both cascade stages.  stage1 is applied three times per window."""

    stage1: StnParams
    stage2: StnParams


def pipeline_init(seed: int = 0) -> PipelineParams:
    """Initialize both stages from independent streams derived from one seed."""
    s1, s2 = np.random.SeedSequence(seed).generate_state(2)
    return PipelineParams(stage1=stn_init(int(s1)), stage2=stn_init(int(s2)))


def pipeline_forward(
    frames: Sequence[Tensor],
    params: PipelineParams,
    mode: str = "train",
    tape: Optional[GradTape] = None,
) -> Tensor:
    """Denoise the middle frame of a five-frame window.

    The three triplets (f0,f1,f2), (f1,f2,f3), (f2,f3,f4) all go through the
    shared stage-one network; its outputs form the stage-two input triplet.
    Returns f2 + residual, unclamped.
    """
    if len(frames) != WINDOW_SIZE:
        raise ValueError(f"expected {WINDOW_SIZE} frames, got {len(frames)}")
    o0 = stn_forward(frames[0:3], params.stage1, mode=mode, tape=tape)
    o1 = stn_forward(frames[1:4], params.stage1, mode=mode, tape=tape)
    o2 = stn_forward(frames[2:5], params.stage1, mode=mode, tape=tape)
    residual = stn_forward((o0, o1, o2), params.stage2, mode=mode, tape=tape)
    return add(frames[MID_INDEX], residual, tape=tape)


def pipeline_named_parameters(params: PipelineParams) -> dict[str, Tensor]:
    out = stn_named_parameters(params.stage1, prefix="stage1.")
    out.update(stn_named_parameters(params.stage2, prefix="stage2."))
    return out


def pipeline_named_buffers(params: PipelineParams) -> dict[str, np.ndarray]:
    out = stn_named_buffers(params.stage1, prefix="stage1.")
    out.update(stn_named_buffers(params.stage2, prefix="stage2."))
    return out


def pipeline_from_arrays(arrays: dict[str, np.ndarray]) -> PipelineParams:
    """Rebuild both stages from a flat name -> array mapping."""
    return PipelineParams(
        stage1=stn_from_arrays(arrays, prefix="stage1."),
        stage2=stn_from_arrays(arrays, prefix="stage2."),
    )
