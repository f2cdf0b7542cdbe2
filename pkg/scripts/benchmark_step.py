"""Time forward/backward/update for one training step at a given crop size.

Usage: python3 scripts/benchmark_step.py --crop 64 --steps 20
"""

import argparse
import time

import numpy as np

from videnoise.optim import adam_state_for, adam_step, zero_grad
from videnoise.pipeline import pipeline_forward, pipeline_init, pipeline_named_parameters
from videnoise.tensor import GradTape, Tensor
from videnoise.train import mse_loss


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--crop", type=int, default=64, help="square input size, multiple of 4")
    parser.add_argument("--steps", type=int, default=20)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    params = pipeline_init(args.seed)
    named = pipeline_named_parameters(params)
    state = adam_state_for(named)

    def one_step() -> float:
        frames = [Tensor(rng.random((3, args.crop, args.crop), dtype=np.float32))
                  for _ in range(5)]
        target = Tensor(rng.random((3, args.crop, args.crop), dtype=np.float32))
        tape = GradTape()
        out = pipeline_forward(frames, params, mode="train", tape=tape)
        loss = mse_loss(out, target, tape)
        zero_grad(named)
        tape.backward(loss)
        adam_step(named, state, 1e-3)
        return loss.item()

    one_step()  # warm up allocators and BLAS
    times = []
    for _ in range(args.steps):
        start = time.perf_counter()
        one_step()
        times.append(time.perf_counter() - start)
    times_ms = np.array(times) * 1e3
    print(f"crop {args.crop}: {args.steps} steps, "
          f"median {np.median(times_ms):.1f} ms, "
          f"mean {times_ms.mean():.1f} ms, max {times_ms.max():.1f} ms")


if __name__ == "__main__":
    main()
