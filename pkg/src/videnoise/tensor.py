"""Dense float32 tensors with reverse-mode differentiation on an explicit tape.

Every operation here is a pure function of its inputs plus an optional
:class:`GradTape`.  With ``tape=None`` an op runs forward-only (inference
mode); with a tape it records a backward closure, and ``tape.backward``
replays the closures in exact reverse execution order, accumulating
gradients into the participating tensors' ``grad`` buffers.

Storage is float32 throughout.  Statistical reductions (means, variances,
summed gradients) accumulate in float64 before casting back to float32;
the dense matrix products inside ``conv2d`` / ``deconv2d`` /
``fully_connected`` run in float32 BLAS, which keeps a full training step
fast on a single core.

Ops are safe to call concurrently on disjoint tapes; a single tape and the
tensors recorded on it must stay on one logical thread for the duration of
a forward/backward pass.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "Tensor",
    "GradTape",
    "RunningStats",
    "conv2d",
    "maxpool2d",
    "deconv2d",
    "batchnorm",
    "relu",
    "sigmoid",
    "fully_connected",
    "global_mean_pool",
    "add",
    "channel_scale",
    "stack_channels",
]


class Tensor:
    """A contiguous float32 array plus an optional gradient buffer.

    ``grad`` starts as ``None`` and is allocated lazily the first time a
    backward closure accumulates into it; it always has the same shape as
    ``data``.
    """

    __slots__ = ("data", "grad")

    def __init__(self, data) -> None:
        self.data: np.ndarray = np.ascontiguousarray(data, dtype=np.float32)
        self.grad: Optional[np.ndarray] = None

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(()))

    def zero_grad(self) -> None:
        self.grad = None

    def accumulate_grad(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape})"


class GradTape:
    """Ordered record of executed ops, replayed backwards for the chain rule.

    Each record pairs an op's output tensor with a closure that pushes the
    output's gradient onto the op's inputs.  ``backward`` walks records in
    exact reverse execution order, so every consumer of a tensor has already
    deposited its gradient contribution by the time the producer runs.
    """

    __slots__ = ("_records",)

    def __init__(self) -> None:
        self._records: list[tuple[Tensor, Callable[[np.ndarray], None]]] = []

    def record(self, out: Tensor, backward: Callable[[np.ndarray], None]) -> None:
        self._records.append((out, backward))

    def __len__(self) -> int:
        return len(self._records)

    def backward(self, root: Tensor, seed: Optional[np.ndarray] = None) -> None:
        """Propagate from ``root``, seeded with ones (or an explicit gradient)."""
        if seed is None:
            root.grad = np.ones_like(root.data)
        else:
            if seed.shape != root.data.shape:
                raise ValueError(f"seed shape {seed.shape} != root shape {root.data.shape}")
            root.grad = seed.astype(np.float32).copy()
        for out, fn in reversed(self._records):
            if out.grad is not None:
                fn(out.grad)


@dataclass
class RunningStats:
    """Per-channel running mean/variance maintained by ``batchnorm``."""

    mean: np.ndarray
    var: np.ndarray

    @classmethod
    def zeros(cls, channels: int) -> "RunningStats":
        return cls(
            mean=np.zeros(channels, dtype=np.float32),
            var=np.ones(channels, dtype=np.float32),
        )


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ValueError(message)


def _im2col(x_padded: np.ndarray, k: int, stride: int, h_out: int, w_out: int) -> np.ndarray:
    """Unfold k x k receptive fields into a (C*k*k, h_out*w_out) matrix."""
    c = x_padded.shape[0]
    cols = np.empty((c, k, k, h_out, w_out), dtype=x_padded.dtype)
    for i in range(k):
        for j in range(k):
            cols[:, i, j] = x_padded[:, i : i + stride * h_out : stride, j : j + stride * w_out : stride]
    return cols.reshape(c * k * k, h_out * w_out)


def _col2im(cols: np.ndarray, c: int, k: int, stride: int, h_pad: int, w_pad: int,
            h_out: int, w_out: int) -> np.ndarray:
    """Adjoint of :func:`_im2col`: scatter-add columns back onto the padded grid."""
    grid = np.zeros((c, h_pad, w_pad), dtype=np.float32)
    cols = cols.reshape(c, k, k, h_out, w_out)
    for i in range(k):
        for j in range(k):
            grid[:, i : i + stride * h_out : stride, j : j + stride * w_out : stride] += cols[:, i, j]
    return grid


def conv2d(x: Tensor, kernel: Tensor, bias: Tensor, stride: int = 1, padding: int = 0,
           tape: Optional[GradTape] = None) -> Tensor:
    """2-D cross-correlation over a C x H x W map (no kernel flip).

    ``kernel`` is C_out x C_in x k x k, ``bias`` is C_out.  Outside the
    padded border the input is zero.  Output spatial dims follow
    ``(H + 2*padding - k) // stride + 1``.
    """
    _require(x.data.ndim == 3, f"conv2d input must be C x H x W, got shape {x.shape}")
    _require(kernel.data.ndim == 4 and kernel.shape[2] == kernel.shape[3],
             f"conv2d kernel must be C_out x C_in x k x k, got shape {kernel.shape}")
    c_in, h, w = x.shape
    c_out, kc_in, k, _ = kernel.shape
    _require(kc_in == c_in,
             f"conv2d channel mismatch: kernel expects C_in={kc_in} (kernel shape {kernel.shape}) "
             f"but input has {c_in} channels (input shape {x.shape})")
    _require(bias.shape == (c_out,), f"conv2d bias must have shape ({c_out},), got {bias.shape}")
    _require(stride >= 1, f"conv2d stride must be >= 1, got {stride}")
    _require(padding >= 0, f"conv2d padding must be >= 0, got {padding}")
    _require(h + 2 * padding >= k and w + 2 * padding >= k,
             f"conv2d window {k}x{k} exceeds padded input {h + 2 * padding}x{w + 2 * padding}")

    h_out = (h + 2 * padding - k) // stride + 1
    w_out = (w + 2 * padding - k) // stride + 1
    if padding:
        x_padded = np.pad(x.data, ((0, 0), (padding, padding), (padding, padding)))
    else:
        x_padded = x.data
    cols = _im2col(x_padded, k, stride, h_out, w_out)
    w_mat = kernel.data.reshape(c_out, c_in * k * k)
    out_data = (w_mat @ cols + bias.data[:, None]).reshape(c_out, h_out, w_out)
    out = Tensor(out_data)

    if tape is not None:
        def backward(grad_out: np.ndarray) -> None:
            g_mat = grad_out.reshape(c_out, h_out * w_out)
            kernel.accumulate_grad((g_mat @ cols.T).reshape(kernel.shape))
            bias.accumulate_grad(grad_out.sum(axis=(1, 2), dtype=np.float64).astype(np.float32))
            g_cols = w_mat.T @ g_mat
            g_padded = _col2im(g_cols, c_in, k, stride, h + 2 * padding, w + 2 * padding, h_out, w_out)
            if padding:
                x.accumulate_grad(g_padded[:, padding : padding + h, padding : padding + w])
            else:
                x.accumulate_grad(g_padded)

        tape.record(out, backward)
    return out


def maxpool2d(x: Tensor, window: int = 2, stride: int = 2, tape: Optional[GradTape] = None) -> Tensor:
    """Non-overlapping max pooling; backward routes to the first (row-major) max."""
    _require(x.data.ndim == 3, f"maxpool2d input must be C x H x W, got shape {x.shape}")
    _require(window == stride, f"maxpool2d supports window == stride only, got window={window} stride={stride}")
    c, h, w = x.shape
    _require(h % stride == 0 and w % stride == 0,
             f"maxpool2d needs H and W divisible by stride={stride}, got {h}x{w}")

    h_out, w_out = h // stride, w // stride
    windows = (
        x.data.reshape(c, h_out, stride, w_out, stride)
        .transpose(0, 1, 3, 2, 4)
        .reshape(c, h_out, w_out, stride * stride)
    )
    # np.argmax returns the first occurrence, which is row-major within the window
    arg = windows.argmax(axis=-1)
    out = Tensor(windows.max(axis=-1))

    if tape is not None:
        def backward(grad_out: np.ndarray) -> None:
            g_windows = np.zeros((c, h_out, w_out, stride * stride), dtype=np.float32)
            np.put_along_axis(g_windows, arg[..., None], grad_out[..., None], axis=-1)
            g = (
                g_windows.reshape(c, h_out, w_out, stride, stride)
                .transpose(0, 1, 3, 2, 4)
                .reshape(c, h, w)
            )
            x.accumulate_grad(g)

        tape.record(out, backward)
    return out


def deconv2d(x: Tensor, kernel: Tensor, bias: Tensor, stride: int = 2,
             tape: Optional[GradTape] = None) -> Tensor:
    """Transposed convolution, 2x upsampling: the exact adjoint of a stride-2 2x2 conv.

    ``kernel`` is C_in x C_out x 2 x 2; each input element scatters
    ``x[c, y, x] * kernel[c]`` into the output block at ``(2y, 2x)``.
    """
    _require(x.data.ndim == 3, f"deconv2d input must be C x H x W, got shape {x.shape}")
    _require(stride == 2, f"deconv2d supports stride=2 only, got {stride}")
    _require(kernel.data.ndim == 4 and kernel.shape[2:] == (2, 2),
             f"deconv2d kernel must be C_in x C_out x 2 x 2, got shape {kernel.shape}")
    c_in, h, w = x.shape
    kc_in, c_out = kernel.shape[:2]
    _require(kc_in == c_in,
             f"deconv2d channel mismatch: kernel expects C_in={kc_in} (kernel shape {kernel.shape}) "
             f"but input has {c_in} channels (input shape {x.shape})")
    _require(bias.shape == (c_out,), f"deconv2d bias must have shape ({c_out},), got {bias.shape}")

    # t[o, i, j, y, x] = sum_c kernel[c, o, i, j] * x[c, y, x]; stride 2 with a
    # 2x2 kernel never overlaps, so the scatter is a pure reshape.
    t = np.tensordot(kernel.data, x.data, axes=([0], [0]))
    out_data = t.transpose(0, 3, 1, 4, 2).reshape(c_out, 2 * h, 2 * w) + bias.data[:, None, None]
    out = Tensor(out_data)

    if tape is not None:
        def backward(grad_out: np.ndarray) -> None:
            g_t = grad_out.reshape(c_out, h, 2, w, 2).transpose(0, 2, 4, 1, 3)
            kernel.accumulate_grad(np.tensordot(x.data, g_t, axes=([1, 2], [3, 4])))
            bias.accumulate_grad(grad_out.sum(axis=(1, 2), dtype=np.float64).astype(np.float32))
            x.accumulate_grad(np.tensordot(kernel.data, g_t, axes=([1, 2, 3], [0, 1, 2])))

        tape.record(out, backward)
    return out


def batchnorm(x: Tensor, gamma: Tensor, beta: Tensor, stats: RunningStats,
              mode: str = "train", eps: float = 1e-5, momentum: float = 0.1,
              tape: Optional[GradTape] = None) -> Tensor:
    """Per-channel normalization over spatial positions (single-sample batches).

    Train mode normalizes each channel by its own spatial mean/variance and
    updates ``stats`` in place with the given momentum (the one mutation in
    this module); eval mode normalizes by the running statistics.
    """
    _require(x.data.ndim == 3, f"batchnorm input must be C x H x W, got shape {x.shape}")
    c, h, w = x.shape
    _require(gamma.shape == (c,) and beta.shape == (c,),
             f"batchnorm gamma/beta must have shape ({c},), got {gamma.shape} and {beta.shape}")
    _require(mode in ("train", "eval"), f"batchnorm mode must be 'train' or 'eval', got {mode!r}")
    _require(eps > 0, f"batchnorm eps must be > 0, got {eps}")

    n = h * w
    if mode == "train":
        x64 = x.data.astype(np.float64)
        mean64 = x64.mean(axis=(1, 2))
        var64 = ((x64 - mean64[:, None, None]) ** 2).mean(axis=(1, 2))
        inv_std = (1.0 / np.sqrt(var64 + eps)).astype(np.float32)
        x_hat = (x.data - mean64.astype(np.float32)[:, None, None]) * inv_std[:, None, None]

        unbiased = var64 * (n / (n - 1)) if n > 1 else var64
        stats.mean = ((1.0 - momentum) * stats.mean.astype(np.float64) + momentum * mean64).astype(np.float32)
        stats.var = ((1.0 - momentum) * stats.var.astype(np.float64) + momentum * unbiased).astype(np.float32)
    else:
        inv_std = (1.0 / np.sqrt(stats.var.astype(np.float64) + eps)).astype(np.float32)
        x_hat = (x.data - stats.mean[:, None, None]) * inv_std[:, None, None]

    out = Tensor(gamma.data[:, None, None] * x_hat + beta.data[:, None, None])

    if tape is not None:
        def backward(grad_out: np.ndarray) -> None:
            sum_dy = grad_out.sum(axis=(1, 2), dtype=np.float64)
            sum_dy_xhat = (grad_out * x_hat).sum(axis=(1, 2), dtype=np.float64)
            gamma.accumulate_grad(sum_dy_xhat.astype(np.float32))
            beta.accumulate_grad(sum_dy.astype(np.float32))
            d_xhat = grad_out * gamma.data[:, None, None]
            if mode == "train":
                # d_x = inv_std/n * (n*d_xhat - sum(d_xhat) - x_hat * sum(d_xhat*x_hat))
                s1 = d_xhat.sum(axis=(1, 2), dtype=np.float64).astype(np.float32)
                s2 = (d_xhat * x_hat).sum(axis=(1, 2), dtype=np.float64).astype(np.float32)
                g = (inv_std[:, None, None] / n) * (
                    n * d_xhat - s1[:, None, None] - x_hat * s2[:, None, None]
                )
            else:
                g = d_xhat * inv_std[:, None, None]
            x.accumulate_grad(g)

        tape.record(out, backward)
    return out


def relu(x: Tensor, tape: Optional[GradTape] = None) -> Tensor:
    """Elementwise max(x, 0)."""
    out = Tensor(np.maximum(x.data, 0.0))
    if tape is not None:
        mask = (x.data > 0).astype(np.float32)

        def backward(grad_out: np.ndarray) -> None:
            x.accumulate_grad(grad_out * mask)

        tape.record(out, backward)
    return out


def sigmoid(x: Tensor, tape: Optional[GradTape] = None) -> Tensor:
    """Numerically stable logistic function; sigmoid(0) is exactly 0.5."""
    d = x.data
    out_data = np.empty_like(d)
    pos = d >= 0
    out_data[pos] = 1.0 / (1.0 + np.exp(-d[pos]))
    e = np.exp(d[~pos])
    out_data[~pos] = e / (1.0 + e)
    out = Tensor(out_data)

    if tape is not None:
        def backward(grad_out: np.ndarray) -> None:
            x.accumulate_grad(grad_out * out_data * (1.0 - out_data))

        tape.record(out, backward)
    return out


def fully_connected(x: Tensor, weights: Tensor, bias: Tensor,
                    tape: Optional[GradTape] = None) -> Tensor:
    """Affine map of a vector: weights (M x N) @ x (N) + bias (M)."""
    _require(x.data.ndim == 1, f"fully_connected input must be a vector, got shape {x.shape}")
    _require(weights.data.ndim == 2, f"fully_connected weights must be M x N, got shape {weights.shape}")
    m, n = weights.shape
    _require(x.shape == (n,),
             f"fully_connected shape mismatch: weights {weights.shape} expect input ({n},), got {x.shape}")
    _require(bias.shape == (m,), f"fully_connected bias must have shape ({m},), got {bias.shape}")

    out = Tensor(weights.data @ x.data + bias.data)

    if tape is not None:
        def backward(grad_out: np.ndarray) -> None:
            weights.accumulate_grad(np.outer(grad_out, x.data))
            bias.accumulate_grad(grad_out.copy())
            x.accumulate_grad(weights.data.T @ grad_out)

        tape.record(out, backward)
    return out


def global_mean_pool(x: Tensor, tape: Optional[GradTape] = None) -> Tensor:
    """Spatial mean per channel: C x H x W -> C.

    Accumulates in float64, so the result is invariant to spatial
    permutations for image-range data.
    """
    _require(x.data.ndim == 3, f"global_mean_pool input must be C x H x W, got shape {x.shape}")
    c, h, w = x.shape
    out = Tensor(x.data.mean(axis=(1, 2), dtype=np.float64).astype(np.float32))

    if tape is not None:
        def backward(grad_out: np.ndarray) -> None:
            x.accumulate_grad(np.broadcast_to((grad_out / (h * w))[:, None, None], (c, h, w)).astype(np.float32))

        tape.record(out, backward)
    return out


def add(a: Tensor, b: Tensor, tape: Optional[GradTape] = None) -> Tensor:
    """Elementwise sum of two same-shape tensors."""
    _require(a.shape == b.shape, f"add shape mismatch: {a.shape} vs {b.shape}")
    out = Tensor(a.data + b.data)

    if tape is not None:
        def backward(grad_out: np.ndarray) -> None:
            a.accumulate_grad(grad_out)
            b.accumulate_grad(grad_out)

        tape.record(out, backward)
    return out


def channel_scale(features: Tensor, weights: Tensor, tape: Optional[GradTape] = None) -> Tensor:
    """Multiply every spatial position of channel c by weights[c]."""
    _require(features.data.ndim == 3,
             f"channel_scale features must be C x H x W, got shape {features.shape}")
    c = features.shape[0]
    _require(weights.shape == (c,),
             f"channel_scale channel mismatch: features have {c} channels (shape {features.shape}) "
             f"but weights have shape {weights.shape}")
    out = Tensor(features.data * weights.data[:, None, None])

    if tape is not None:
        def backward(grad_out: np.ndarray) -> None:
            features.accumulate_grad(grad_out * weights.data[:, None, None])
            weights.accumulate_grad(
                (grad_out * features.data).sum(axis=(1, 2), dtype=np.float64).astype(np.float32)
            )

        tape.record(out, backward)
    return out


def stack_channels(frames: Sequence[Tensor], tape: Optional[GradTape] = None) -> Tensor:
    """Concatenate rank-3 tensors along the channel axis."""
    _require(len(frames) > 0, "stack_channels needs at least one frame")
    spatial = frames[0].shape[1:]
    for f in frames:
        _require(f.data.ndim == 3, f"stack_channels frames must be C x H x W, got shape {f.shape}")
        _require(f.shape[1:] == spatial,
                 f"stack_channels spatial mismatch: {f.shape[1:]} vs {spatial}")
    out = Tensor(np.concatenate([f.data for f in frames], axis=0))

    if tape is not None:
        offsets = np.cumsum([0] + [f.shape[0] for f in frames])

        def backward(grad_out: np.ndarray) -> None:
            for f, lo, hi in zip(frames, offsets[:-1], offsets[1:]):
                f.accumulate_grad(grad_out[lo:hi])

        tape.record(out, backward)
    return out
