"""PSNR and single-scale SSIM for images in the [0,1] domain.

PSNR is 10*log10(1/mse) with an infinity sentinel for identical inputs,
rendered as the string "inf" in reports.  SSIM uses the classic recipe:
11x11 Gaussian window with sigma 1.5, K1 = 0.01, K2 = 0.03, dynamic range
L = 1, valid-mode windows, averaged over channels and positions.  All
metric arithmetic runs in float64.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor import Tensor

__all__ = ["psnr", "ssim", "MetricsReport", "format_metric"]

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_L = 1.0

ArrayLike = Union[Tensor, np.ndarray]


def _as_f64(x: ArrayLike) -> np.ndarray:
    data = x.data if isinstance(x, Tensor) else np.asarray(x)
    return data.astype(np.float64)


def psnr(a: ArrayLike, b: ArrayLike) -> float:
    """Peak signal-to-noise ratio in dB for unit dynamic range."""
    xa, xb = _as_f64(a), _as_f64(b)
    if xa.shape != xb.shape:
        raise ValueError(f"shape mismatch {xa.shape} vs {xb.shape}")
    mse = float(np.mean(np.square(xa - xb)))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def _gaussian_window() -> np.ndarray:
    half = (SSIM_WINDOW - 1) / 2.0
    coords = np.arange(SSIM_WINDOW, dtype=np.float64) - half
    g = np.exp(-(coords ** 2) / (2.0 * SSIM_SIGMA ** 2))
    kernel = np.outer(g, g)
    return kernel / kernel.sum()


_WINDOW = _gaussian_window()


def _filter(x: np.ndarray) -> np.ndarray:
    """Gaussian-weighted local means over valid 11x11 windows, per channel."""
    views = sliding_window_view(x, (SSIM_WINDOW, SSIM_WINDOW), axis=(-2, -1))
    return np.einsum("...ij,ij->...", views, _WINDOW)


def ssim(a: ArrayLike, b: ArrayLike) -> float:
    """Mean structural similarity; symmetric in its arguments."""
    xa, xb = _as_f64(a), _as_f64(b)
    if xa.shape != xb.shape:
        raise ValueError(f"shape mismatch {xa.shape} vs {xb.shape}")
    if xa.shape[-2] < SSIM_WINDOW or xa.shape[-1] < SSIM_WINDOW:
        raise ValueError(
            f"image {xa.shape[-2]}x{xa.shape[-1]} smaller than the "
            f"{SSIM_WINDOW}x{SSIM_WINDOW} window"
        )
    c1 = (SSIM_K1 * SSIM_L) ** 2
    c2 = (SSIM_K2 * SSIM_L) ** 2
    mu_a = _filter(xa)
    mu_b = _filter(xb)
    var_a = _filter(xa * xa) - mu_a * mu_a
    var_b = _filter(xb * xb) - mu_b * mu_b
    cov = _filter(xa * xb) - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def format_metric(value: float, digits: int = 6) -> str:
    """Render a metric for reports; infinities become the string "inf"."""
    if math.isinf(value):
        return "inf"
    return f"{value:.{digits}f}"


@dataclass
class MetricsReport:
    """Per-frame PSNR/SSIM plus means, as written by the evaluate command."""

    frames: list[str] = field(default_factory=list)
    psnr_db: list[float] = field(default_factory=list)
    ssim: list[float] = field(default_factory=list)
    sigma: Union[float, None] = None

    def add(self, frame: str, psnr_value: float, ssim_value: float) -> None:
        self.frames.append(frame)
        self.psnr_db.append(psnr_value)
        self.ssim.append(ssim_value)

    @property
    def mean_psnr_db(self) -> float:
        return float(np.mean(self.psnr_db)) if self.psnr_db else math.nan

    @property
    def mean_ssim(self) -> float:
        return float(np.mean(self.ssim)) if self.ssim else math.nan

    def to_csv(self) -> str:
        lines = ["frame,psnr_db,ssim"]
        for frame, p, s in zip(self.frames, self.psnr_db, self.ssim):
            lines.append(f"{frame},{format_metric(p)},{format_metric(s)}")
        return "\n".join(lines) + "\n"

    def to_json_dict(self) -> dict:
        def render(v: float) -> Union[str, float]:
            return "inf" if math.isinf(v) else v

        out: dict = {
            "frames": [
                {"frame": f, "psnr_db": render(p), "ssim": render(s)}
                for f, p, s in zip(self.frames, self.psnr_db, self.ssim)
            ],
            "mean_psnr_db": render(self.mean_psnr_db),
            "mean_ssim": render(self.mean_ssim),
        }
        if self.sigma is not None:
            out["sigma"] = self.sigma
        return out
