"""Two-stage video denoising with channel-wise attention, from scratch.

A five-frame window is denoised by a cascade of two identical
encoder-decoder networks: the first maps each overlapping frame triplet
through shared weights, the second fuses the three intermediate maps into
a residual added to the noisy middle frame.  Everything runs on a small
tape-based reverse-mode autodiff engine over numpy arrays.
"""

from .attention import AttentionParams, apply_attention, attention_forward, attention_init
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .data import (
    ClipSource,
    FrameWindow,
    SIGMA_SET,
    add_gaussian_noise,
    discover_clips,
    load_frame,
    make_window,
    reflect_index,
    save_frame,
    window_indices,
)
from .metrics import MetricsReport, psnr, ssim
from .optim import AdamState, adam_state_for, adam_step, zero_grad
from .pipeline import (
    PipelineParams,
    pipeline_forward,
    pipeline_init,
    pipeline_named_buffers,
    pipeline_named_parameters,
)
from .stn import StnParams, stn_forward, stn_init, stn_named_buffers, stn_named_parameters
from .tensor import GradTape, RunningStats, Tensor
from .train import TrainConfig, TrainResult, lr_for_epoch, mse_loss, train

__version__ = "0.1.0"
