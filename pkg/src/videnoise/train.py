"""Training loop: seeded window sampling, MSE loss, Adam, two-phase LR.

One window per step (batch size one).  An epoch is a shuffled pass over
every (clip, frame) pair in the dataset; each visit draws a noise level
from the sigma set and a crop origin from one master generator, so a fixed
seed reproduces the run bit-exactly.  The noise seed for a window is a pure
function of the window's identity (run seed, clip, frame, sigma, crop
origin), never of the step count: revisiting the same window in a later
epoch regenerates the identical noisy realization, which is what lets a
small run drive the loss below the noise floor on a fixed clip.  The
learning rate holds at lr_initial through lr_switch_epoch and drops to
lr_late afterwards.  Checkpoints and the loss log are rewritten at every
epoch boundary through a temp-file rename, so interrupting a run leaves
the previous epoch's files intact.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .data import SIGMA_SET, discover_clips, make_window
from .optim import AdamState, adam_state_for, adam_step, zero_grad
from .pipeline import PipelineParams, pipeline_forward, pipeline_init, pipeline_named_parameters
from .checkpoint import save_checkpoint
from .tensor import GradTape, Tensor

__all__ = ["TrainConfig", "TrainResult", "lr_for_epoch", "mse_loss", "train",
           "window_noise_seed", "write_loss_log"]


@dataclass
class TrainConfig:
    """Knobs for a training run.  Defaults follow the reference recipe
    except crop_size, which defaults to a desk-scale 64 (512 upstream)."""

    dataset_root: Union[str, Path] = "data"
    epochs: int = 100
    lr_initial: float = 1e-3
    lr_late: float = 1e-4
    lr_switch_epoch: int = 50
    batch_size: int = 1
    crop_size: int = 64
    sigma_set: Sequence[float] = SIGMA_SET
    seed: int = 0
    checkpoint_path: Optional[Union[str, Path]] = "model.ckpt"
    loss_log_path: Optional[Union[str, Path]] = None
    max_steps: Optional[int] = None

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size != 1:
            raise ValueError(f"only batch size 1 is supported, got {self.batch_size}")
        if self.crop_size % 4 != 0 or self.crop_size <= 0:
            raise ValueError(f"crop size must be a positive multiple of 4, got {self.crop_size}")
        if not self.sigma_set:
            raise ValueError("sigma set must not be empty")
        if any(s < 0 for s in self.sigma_set):
            raise ValueError(f"sigma values must be non-negative: {tuple(self.sigma_set)}")
        if self.max_steps is not None and self.max_steps < 1:
            raise ValueError(f"max_steps must be >= 1, got {self.max_steps}")


@dataclass
class TrainResult:
    """Final parameters and the full per-step loss log."""

    params: PipelineParams
    state: AdamState
    rows: list[tuple[int, int, float, float, float]] = field(default_factory=list)

    @property
    def losses(self) -> list[float]:
        return [row[2] for row in self.rows]


def lr_for_epoch(config: TrainConfig, epoch: int) -> float:
    """Learning rate for a 1-based epoch number."""
    return config.lr_initial if epoch <= config.lr_switch_epoch else config.lr_late


def window_noise_seed(seed: int, clip_index: int, t: int, sigma: float,
                      y: int, x: int) -> int:
    """Noise seed for one training window, derived from its identity alone.

    The same (run seed, clip, frame, sigma, crop origin) always maps to the
    same seed, so a window revisited in a later epoch carries the exact
    noise it had the first time.  Sigma enters through its float64 bit
    pattern to keep non-integer levels distinct.
    """
    sigma_bits = int.from_bytes(struct.pack(">d", float(sigma)), "big")
    ss = np.random.SeedSequence((seed, clip_index, t, sigma_bits, y, x))
    return int(ss.generate_state(2, np.uint64)[0] >> 1)


def mse_loss(pred: Tensor, target: Tensor, tape: Optional[GradTape] = None) -> Tensor:
    """Mean squared difference as a scalar tensor; mean taken in float64."""
    if pred.shape != target.shape:
        raise ValueError(f"mse_loss shape mismatch: {pred.shape} vs {target.shape}")
    diff = pred.data.astype(np.float64) - target.data.astype(np.float64)
    out = Tensor(np.asarray(np.mean(diff * diff), dtype=np.float32))
    if tape is not None:
        scale = 2.0 / diff.size
        local = (diff * scale).astype(np.float32)

        def backward(grad_out: np.ndarray) -> None:
            pred.accumulate_grad(grad_out * local)
            target.accumulate_grad(grad_out * -local)

        tape.record(out, backward)
    return out


def _format_row(row: tuple[int, int, float, float, float]) -> str:
    epoch, step, loss, lr, sigma = row
    return f"{epoch},{step},{loss:.8e},{lr:g},{sigma:g}"


def write_loss_log(rows: Sequence[tuple[int, int, float, float, float]],
                   path: Union[str, Path]) -> None:
    """Rewrite the per-step CSV atomically: epoch,step,loss,lr,sigma."""
    path = Path(path)
    body = "epoch,step,loss,lr,sigma\n" + "".join(_format_row(r) + "\n" for r in rows)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(body)
    os.replace(tmp, path)


def train(
    config: TrainConfig,
    progress: Optional[Callable[[int, float], None]] = None,
) -> TrainResult:
    """Run the training loop; returns final parameters, state, and loss rows.

    The optional progress callback receives (epoch, mean epoch loss) after
    each completed epoch.
    """
    clips = discover_clips(config.dataset_root)
    if not clips:
        raise ValueError(f"no clips found under {config.dataset_root}")
    for clip in clips:
        if clip.height < config.crop_size or clip.width < config.crop_size:
            raise ValueError(
                f"clip {clip.name} is {clip.height}x{clip.width}, smaller than "
                f"crop size {config.crop_size}"
            )

    params = pipeline_init(config.seed)
    named = pipeline_named_parameters(params)
    state = adam_state_for(named)
    master = np.random.default_rng(config.seed)
    sigma_set = tuple(float(s) for s in config.sigma_set)

    pairs = [(ci, t) for ci, clip in enumerate(clips) for t in range(len(clip))]
    result = TrainResult(params=params, state=state)
    step = 0
    stop = False

    for epoch in range(1, config.epochs + 1):
        lr = lr_for_epoch(config, epoch)
        order = master.permutation(len(pairs))
        epoch_losses = []
        for k in order:
            ci, t = pairs[k]
            clip = clips[ci]
            sigma = sigma_set[int(master.integers(0, len(sigma_set)))]
            y = int(master.integers(0, clip.height - config.crop_size + 1))
            x = int(master.integers(0, clip.width - config.crop_size + 1))
            window_seed = window_noise_seed(config.seed, ci, t, sigma, y, x)
            window = make_window(clip, t, sigma, (config.crop_size, y, x), window_seed)

            tape = GradTape()
            out = pipeline_forward(window.frames, params, mode="train", tape=tape)
            loss = mse_loss(out, window.clean_mid, tape)
            zero_grad(named)
            tape.backward(loss)
            adam_step(named, state, lr)

            loss_value = loss.item()
            result.rows.append((epoch, step, loss_value, lr, sigma))
            epoch_losses.append(loss_value)
            step += 1
            if config.max_steps is not None and step >= config.max_steps:
                stop = True
                break

        if config.checkpoint_path is not None:
            save_checkpoint(params, config.checkpoint_path, state)
        if config.loss_log_path is not None:
            write_loss_log(result.rows, config.loss_log_path)
        if progress is not None:
            progress(epoch, float(np.mean(epoch_losses)) if epoch_losses else float("nan"))
        if stop:
            break

    return result
