"""Shared fixtures: synthetic clips written as PNG frame directories."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from videnoise.data import save_frame


def smooth_clip_arrays(n_frames: int, height: int, width: int, seed: int = 0,
                       drift_scale: float = 1.0,
                       amplitude: float = 0.2) -> list[np.ndarray]:
    """Slowly varying sinusoid mixture with a constant subpixel drift.

    Values stay inside [0.5 - 2*amplitude, 0.5 + 2*amplitude], so with the
    default amplitude both 8-bit quantization and additive noise behave
    well; the drift gives the frames real temporal structure without any
    occlusion effects.  drift_scale=0 freezes the scene, turning the clip
    into a static shot.
    """
    rng = np.random.default_rng(seed)
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    freqs = rng.uniform(0.03, 0.12, size=(3, 2))
    phases = rng.uniform(0.0, 2.0 * np.pi, size=(3, 2))
    drift = rng.uniform(-0.8, 0.8, size=2) * drift_scale
    frames = []
    for t in range(n_frames):
        channels = []
        for c in range(3):
            fy, fx = freqs[c]
            py, px = phases[c]
            field = np.sin(2.0 * np.pi * fy * (ys + drift[0] * t) + py) + np.cos(
                2.0 * np.pi * fx * (xs + drift[1] * t) + px
            )
            channels.append(field)
        frames.append((0.5 + amplitude * np.stack(channels)).astype(np.float32))
    return frames


def random_clip_arrays(n_frames: int, height: int, width: int, seed: int = 0) -> list[np.ndarray]:
    rng = np.random.default_rng(seed)
    return [rng.random((3, height, width), dtype=np.float32) for _ in range(n_frames)]


def write_clip(directory: Path, frames: list[np.ndarray]) -> Path:
    directory.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(frames):
        save_frame(frame, directory / f"{i:06d}.png")
    return directory


@pytest.fixture
def clip_factory(tmp_path):
    """Build a PNG clip directory; returns its path."""

    def make(
        n_frames: int = 6,
        height: int = 16,
        width: int = 16,
        seed: int = 0,
        kind: str = "random",
        name: str = "clip0",
    ) -> Path:
        if kind == "smooth":
            frames = smooth_clip_arrays(n_frames, height, width, seed)
        else:
            frames = random_clip_arrays(n_frames, height, width, seed)
        return write_clip(tmp_path / name, frames)

    return make


@pytest.fixture
def dataset_factory(tmp_path):
    """Build a dataset root holding one or more clips; returns the root."""

    def make(
        n_clips: int = 1,
        n_frames: int = 6,
        height: int = 16,
        width: int = 16,
        seed: int = 0,
        kind: str = "random",
    ) -> Path:
        root = tmp_path / "dataset"
        for c in range(n_clips):
            if kind == "smooth":
                frames = smooth_clip_arrays(n_frames, height, width, seed + c)
            else:
                frames = random_clip_arrays(n_frames, height, width, seed + c)
            write_clip(root / f"clip{c}", frames)
        return root

    return make
