"""Command-line front end: noise synthesis, training, inference, evaluation.

Every command accepts --config FILE, a key=value overlay ('#' starts a
comment) whose keys are the command's flag names with dashes replaced by
underscores.  Precedence is flags > config file > defaults; unknown flags
and unknown config keys are rejected.  Commands exit 0 on success and 1
with a one-line stderr diagnostic otherwise.  Input directories are never
written to.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .checkpoint import CheckpointError, load_checkpoint
from .data import ClipSource, add_gaussian_noise, save_frame, window_indices
from .metrics import MetricsReport, format_metric, psnr, ssim
from .pipeline import pipeline_forward
from .tensor import Tensor
from .train import TrainConfig, train

__all__ = ["main"]


class CliError(Exception):
    """User-facing command failure; its message becomes the diagnostic."""


@dataclass(frozen=True)
class Option:
    """One command flag: spelled --{name}, stored under name with underscores."""

    name: str
    parse: Callable[[str], object]
    default: object = None
    required: bool = False
    help: str = ""

    @property
    def key(self) -> str:
        return self.name.replace("-", "_")


def _parse_sigma_set(raw: str) -> tuple[float, ...]:
    try:
        values = tuple(float(p) for p in raw.split(",") if p.strip())
    except ValueError:
        raise CliError(f"bad sigma set {raw!r}; expected comma-separated numbers")
    if not values:
        raise CliError(f"bad sigma set {raw!r}; expected comma-separated numbers")
    return values


def _read_config_file(path: str) -> dict[str, str]:
    p = Path(path)
    if not p.is_file():
        raise CliError(f"config file not found: {p}")
    out: dict[str, str] = {}
    for lineno, line in enumerate(p.read_text().splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise CliError(f"{p}:{lineno}: expected key=value, got {line.strip()!r}")
        key, value = stripped.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _resolve(options: Sequence[Option], ns: argparse.Namespace) -> dict[str, object]:
    """Merge defaults, config-file entries, and explicit flags."""
    by_key = {opt.key: opt for opt in options}
    values: dict[str, object] = {opt.key: opt.default for opt in options}
    flags = {k: v for k, v in vars(ns).items() if k in by_key}
    config_path = getattr(ns, "config", None)
    if config_path is not None:
        for key, raw in _read_config_file(config_path).items():
            if key not in by_key:
                raise CliError(f"unknown config key {key!r} in {config_path}")
            if key not in flags:
                values[key] = by_key[key].parse(raw)
    values.update(flags)
    for opt in options:
        if opt.required and values[opt.key] is None:
            raise CliError(f"missing required flag --{opt.name}")
    return values


def _add_command(subparsers, name: str, options: Sequence[Option], help_text: str):
    sub = subparsers.add_parser(name, help=help_text)
    for opt in options:
        sub.add_argument(
            f"--{opt.name}",
            dest=opt.key,
            type=opt.parse,
            default=argparse.SUPPRESS,
            help=opt.help,
        )
    sub.add_argument("--config", default=None, help="key=value overlay file")
    return sub


SYNTH_OPTIONS = (
    Option("input-dir", str, required=True, help="directory of clean PNG frames"),
    Option("output-dir", str, required=True, help="where noisy frames go"),
    Option("sigma", float, default=25.0, help="noise std in 0-255 units"),
    Option("seed", int, default=0, help="noise seed"),
)

TRAIN_OPTIONS = (
    Option("data-dir", str, required=True, help="dataset root, one subdirectory per clip"),
    Option("epochs", int, default=100, help="training epochs"),
    Option("crop", int, default=64, help="square crop size, multiple of 4"),
    Option("seed", int, default=0, help="master seed"),
    Option("checkpoint-out", str, default="model.ckpt", help="checkpoint path"),
    Option("loss-log", str, default=None, help="per-step loss CSV path"),
    Option("lr-initial", float, default=1e-3, help="learning rate before the switch"),
    Option("lr-late", float, default=1e-4, help="learning rate after the switch"),
    Option("lr-switch-epoch", int, default=50, help="last epoch at the initial rate"),
    Option("sigma-set", _parse_sigma_set, default=None,
           help="comma-separated noise levels, default 5..45 step 5"),
    Option("max-steps", int, default=None, help="stop after this many steps"),
)

DENOISE_OPTIONS = (
    Option("checkpoint", str, required=True, help="trained checkpoint"),
    Option("input-dir", str, required=True, help="noisy input clip"),
    Option("output-dir", str, required=True, help="where denoised frames go"),
)

EVALUATE_OPTIONS = (
    Option("clean-dir", str, required=True, help="reference clip"),
    Option("test-dir", str, required=True, help="clip to score"),
    Option("report", str, required=True, help="report base path (.csv/.json added)"),
)


def cmd_synth_noise(values: dict[str, object]) -> None:
    sigma = float(values["sigma"])
    seed = int(values["seed"])
    if sigma < 0:
        raise CliError(f"sigma must be non-negative, got {sigma}")
    clip = ClipSource(values["input_dir"])
    out_dir = Path(values["output_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    for i in range(len(clip)):
        slot_seed = np.random.SeedSequence(entropy=seed, spawn_key=(i,))
        noisy = add_gaussian_noise(clip.frame(i), sigma, slot_seed)
        save_frame(noisy, out_dir / clip.paths[i].name)
    manifest = {
        "command": "synth-noise",
        "input_dir": str(values["input_dir"]),
        "output_dir": str(values["output_dir"]),
        "sigma": sigma,
        "seed": seed,
        "frames": len(clip),
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    print(f"wrote {len(clip)} noisy frames (sigma={sigma:g}) to {out_dir}")


def cmd_train(values: dict[str, object]) -> None:
    config = TrainConfig(
        dataset_root=values["data_dir"],
        epochs=int(values["epochs"]),
        lr_initial=float(values["lr_initial"]),
        lr_late=float(values["lr_late"]),
        lr_switch_epoch=int(values["lr_switch_epoch"]),
        crop_size=int(values["crop"]),
        sigma_set=values["sigma_set"] if values["sigma_set"] is not None else TrainConfig.sigma_set,
        seed=int(values["seed"]),
        checkpoint_path=values["checkpoint_out"],
        loss_log_path=values["loss_log"],
        max_steps=int(values["max_steps"]) if values["max_steps"] is not None else None,
    )

    def progress(epoch: int, mean_loss: float) -> None:
        print(f"epoch {epoch}: mean loss {mean_loss:.6e}")

    result = train(config, progress=progress)
    print(f"finished {len(result.rows)} steps; checkpoint at {config.checkpoint_path}")


def _pad_to_multiple_of_4(data: np.ndarray) -> tuple[np.ndarray, int, int]:
    h, w = data.shape[1], data.shape[2]
    ph = (-h) % 4
    pw = (-w) % 4
    if ph or pw:
        data = np.pad(data, ((0, 0), (0, ph), (0, pw)), mode="edge")
    return data, h, w


def cmd_denoise(values: dict[str, object]) -> None:
    params, _ = load_checkpoint(values["checkpoint"])
    clip = ClipSource(values["input_dir"])
    out_dir = Path(values["output_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    n = len(clip)
    for t in range(n):
        frames = [Tensor(_pad_to_multiple_of_4(clip.frame(src))[0])
                  for src in window_indices(t, n)]
        out = pipeline_forward(frames, params, mode="eval", tape=None)
        save_frame(out.data[:, : clip.height, : clip.width], out_dir / clip.paths[t].name)
    print(f"denoised {n} frames to {out_dir}")


def cmd_evaluate(values: dict[str, object]) -> None:
    clean = ClipSource(values["clean_dir"])
    test = ClipSource(values["test_dir"])
    if len(clean) != len(test):
        raise CliError(
            f"frame count mismatch: {len(clean)} clean vs {len(test)} test frames"
        )
    if (clean.height, clean.width) != (test.height, test.width):
        raise CliError(
            f"frame size mismatch: clean {clean.height}x{clean.width} vs "
            f"test {test.height}x{test.width}"
        )
    sigma: Optional[float] = None
    manifest_path = Path(values["test_dir"]) / "manifest.json"
    if manifest_path.is_file():
        try:
            sigma = float(json.loads(manifest_path.read_text()).get("sigma"))
        except (ValueError, TypeError):
            sigma = None
    report = MetricsReport(sigma=sigma)
    for i in range(len(clean)):
        a = clean.frame(i)
        b = test.frame(i)
        report.add(clean.paths[i].name, psnr(a, b), ssim(a, b))
    base = Path(values["report"])
    if base.suffix in (".csv", ".json"):
        base = base.with_suffix("")
    base.parent.mkdir(parents=True, exist_ok=True)
    base.with_suffix(".csv").write_text(report.to_csv())
    base.with_suffix(".json").write_text(json.dumps(report.to_json_dict(), indent=2) + "\n")
    print(
        f"{len(report.frames)} frames: mean PSNR {format_metric(report.mean_psnr_db, 3)} dB, "
        f"mean SSIM {format_metric(report.mean_ssim, 4)}"
    )


COMMANDS: dict[str, tuple[Sequence[Option], Callable[[dict[str, object]], None], str]] = {
    "synth-noise": (SYNTH_OPTIONS, cmd_synth_noise, "add Gaussian noise to a clip"),
    "train": (TRAIN_OPTIONS, cmd_train, "train the denoiser"),
    "denoise": (DENOISE_OPTIONS, cmd_denoise, "denoise a clip with a checkpoint"),
    "evaluate": (EVALUATE_OPTIONS, cmd_evaluate, "score a clip against a reference"),
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="videnoise",
        description="two-stage video denoising with channel attention",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name, (options, _, help_text) in COMMANDS.items():
        _add_command(subparsers, name, options, help_text)
    try:
        ns = parser.parse_args(argv)
        options, handler, _ = COMMANDS[ns.command]
        handler(_resolve(options, ns))
    except (CliError, CheckpointError, OSError, ValueError, KeyError, IndexError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
