"""Frame-sequence ingestion, additive Gaussian noise, and window extraction.

Clips are directories of 8-bit RGB PNG frames with zero-padded decimal
filenames.  Pixels live in [0,1] as float32; noise std is quoted in 0-255
units and divided by 255.  Noisy frames are NOT clipped to [0,1]: clipping
would bend the additive-noise model the network is trained against.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
from PIL import Image

from .tensor import Tensor

__all__ = [
    "FrameWindow",
    "ClipSource",
    "load_frame",
    "save_frame",
    "reflect_index",
    "window_indices",
    "add_gaussian_noise",
    "make_window",
    "discover_clips",
]

SIGMA_SET = (5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0, 45.0)
WINDOW_OFFSETS = (-2, -1, 0, 1, 2)

SeedLike = Union[int, np.random.SeedSequence]


def load_frame(path: Union[str, Path]) -> np.ndarray:
    """Read one RGB image as a 3xHxW float32 array in [0,1]."""
    with Image.open(path) as img:
        rgb = np.asarray(img.convert("RGB"), dtype=np.float32)
    return np.ascontiguousarray(rgb.transpose(2, 0, 1) / np.float32(255.0))


def save_frame(data: np.ndarray, path: Union[str, Path]) -> None:
    """Write a 3xHxW array as an 8-bit RGB PNG.

    Values are clamped to [0,1] and rounded half away from zero; this is the
    only place pixel values are clipped.
    """
    if data.ndim != 3 or data.shape[0] != 3:
        raise ValueError(f"expected a 3xHxW array, got shape {data.shape}")
    clamped = np.clip(data.astype(np.float64), 0.0, 1.0)
    quantized = np.floor(clamped * 255.0 + 0.5).astype(np.uint8)
    Image.fromarray(quantized.transpose(1, 2, 0), mode="RGB").save(path)


def reflect_index(i: int, n: int) -> int:
    """Reflect an out-of-range frame index back into [0, n): -1 -> 1, n -> n-2."""
    if n < 1:
        raise ValueError("clip must contain at least one frame")
    if n == 1:
        return 0
    while i < 0 or i >= n:
        if i < 0:
            i = -i
        else:
            i = 2 * (n - 1) - i
    return i


def window_indices(t: int, n: int) -> tuple[int, ...]:
    """Source indices for the five-frame window centered on t."""
    return tuple(reflect_index(t + d, n) for d in WINDOW_OFFSETS)


@dataclass
class FrameWindow:
    """Five noisy frames plus the clean middle frame they were cut from."""

    frames: tuple[Tensor, ...]
    clean_mid: Tensor
    sigma: float
    mid_index: int = 2

    def __post_init__(self) -> None:
        if len(self.frames) != 5:
            raise ValueError(f"expected 5 frames, got {len(self.frames)}")


class ClipSource:
    """A directory of numbered PNG frames, all sharing one resolution.

    Frame numbering must be gapless; dimensions are checked from the image
    headers without decoding pixels.  Decoded frames go through a small LRU
    cache since training revisits the same clip many times.
    """

    _CACHE_SLOTS = 32

    def __init__(self, directory: Union[str, Path]):
        self.directory = Path(directory)
        if not self.directory.is_dir():
            raise FileNotFoundError(f"clip directory not found: {self.directory}")
        entries = []
        for p in self.directory.iterdir():
            if p.suffix.lower() == ".png" and p.stem.isdigit():
                entries.append((int(p.stem), p))
        if not entries:
            raise ValueError(f"no numbered PNG frames in {self.directory}")
        entries.sort()
        numbers = [n for n, _ in entries]
        if numbers != list(range(numbers[0], numbers[0] + len(numbers))):
            raise ValueError(f"frame numbering has gaps in {self.directory}")
        self.paths = tuple(p for _, p in entries)
        with Image.open(self.paths[0]) as img:
            self.width, self.height = img.size
        for p in self.paths[1:]:
            with Image.open(p) as img:
                if img.size != (self.width, self.height):
                    raise ValueError(
                        f"frame {p.name} is {img.size}, expected "
                        f"{(self.width, self.height)} in {self.directory}"
                    )
        self._cache: OrderedDict[int, np.ndarray] = OrderedDict()

    def __len__(self) -> int:
        return len(self.paths)

    @property
    def name(self) -> str:
        return self.directory.name

    def frame(self, i: int) -> np.ndarray:
        """Decoded frame i as 3xHxW float32 in [0,1]; treat as read-only."""
        if not 0 <= i < len(self.paths):
            raise IndexError(f"frame index {i} out of range for {len(self.paths)} frames")
        if i in self._cache:
            self._cache.move_to_end(i)
            return self._cache[i]
        data = load_frame(self.paths[i])
        self._cache[i] = data
        if len(self._cache) > self._CACHE_SLOTS:
            self._cache.popitem(last=False)
        return data


def add_gaussian_noise(frame: np.ndarray, sigma255: float, rng_seed: SeedLike) -> np.ndarray:
    """Add i.i.d. Normal(0, (sigma255/255)^2) noise; the result is not clipped."""
    if sigma255 < 0:
        raise ValueError(f"sigma must be non-negative, got {sigma255}")
    rng = np.random.default_rng(rng_seed)
    noise = rng.standard_normal(size=frame.shape, dtype=np.float32)
    return frame + noise * np.float32(sigma255 / 255.0)


def make_window(
    clip: ClipSource,
    t: int,
    sigma255: float,
    crop: Optional[tuple[int, int, int]] = None,
    seed: int = 0,
) -> FrameWindow:
    """Build the noisy five-frame window centered on frame t.

    Out-of-range indices reflect at clip boundaries.  One crop rectangle
    (size, y, x) applies to all five frames and the clean mid.  Each window
    slot gets an independent noise stream derived from the seed, so the two
    slots that share a source frame in a reflected boundary window still
    receive distinct noise.
    """
    if not 0 <= t < len(clip):
        raise IndexError(f"frame index {t} out of range for {len(clip)} frames")
    if crop is not None:
        size, y, x = crop
        if size % 4 != 0:
            raise ValueError(f"crop size must be divisible by 4, got {size}")
        if y < 0 or x < 0 or y + size > clip.height or x + size > clip.width:
            raise ValueError(
                f"crop {crop} exceeds frame bounds {clip.height}x{clip.width}"
            )

    def cut(data: np.ndarray) -> np.ndarray:
        if crop is None:
            return data
        size, y, x = crop
        return data[:, y : y + size, x : x + size]

    indices = window_indices(t, len(clip))
    frames = []
    for slot, src in enumerate(indices):
        clean = cut(clip.frame(src))
        slot_seed = np.random.SeedSequence(entropy=seed, spawn_key=(slot,))
        frames.append(Tensor(add_gaussian_noise(clean, sigma255, slot_seed)))
    clean_mid = Tensor(cut(clip.frame(indices[2])).copy())
    return FrameWindow(frames=tuple(frames), clean_mid=clean_mid, sigma=float(sigma255))


def discover_clips(root: Union[str, Path]) -> list[ClipSource]:
    """All clip subdirectories under a dataset root, sorted by name."""
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"dataset root not found: {root}")
    clips = []
    for sub in sorted(p for p in root.iterdir() if p.is_dir()):
        try:
            clips.append(ClipSource(sub))
        except ValueError:
            continue
    return clips
