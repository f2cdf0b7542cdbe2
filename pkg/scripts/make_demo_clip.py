"""Write a small synthetic PNG clip for demos and smoke runs.

The frames are a smooth three-channel sinusoid mixture sliding along a
fixed subpixel drift, so the clip has real temporal structure and stays
inside [0.1, 0.9] where 8-bit quantization is benign.

Usage: python3 scripts/make_demo_clip.py --out data/clip0 --frames 8
"""

import argparse
from pathlib import Path

import numpy as np

from videnoise.data import save_frame


def demo_frames(n_frames: int, height: int, width: int, seed: int) -> list:
    rng = np.random.default_rng(seed)
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    freqs = rng.uniform(0.03, 0.12, size=(3, 2))
    phases = rng.uniform(0.0, 2.0 * np.pi, size=(3, 2))
    drift = rng.uniform(-0.8, 0.8, size=2)
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
        frames.append((0.5 + 0.2 * np.stack(channels)).astype(np.float32))
    return frames


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", required=True, help="output clip directory")
    parser.add_argument("--frames", type=int, default=8)
    parser.add_argument("--height", type=int, default=64)
    parser.add_argument("--width", type=int, default=64)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(demo_frames(args.frames, args.height, args.width, args.seed)):
        save_frame(frame, out / f"{i:06d}.png")
    print(f"wrote {args.frames} frames ({args.height}x{args.width}) to {out}")


if __name__ == "__main__":
    main()
