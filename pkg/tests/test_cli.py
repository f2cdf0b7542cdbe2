"""Command-line workflows end to end on tiny clips."""

import json

import numpy as np
import pytest

from videnoise.checkpoint import load_checkpoint, save_checkpoint
from videnoise.cli import main
from videnoise.data import load_frame
from videnoise.metrics import psnr
from videnoise.pipeline import pipeline_init

from oracles import psnr_reference


def frame_bytes(directory):
    return {p.name: p.read_bytes() for p in sorted(directory.glob("*.png"))}


def zero_residual_checkpoint(path):
    params = pipeline_init(0)
    for stage in (params.stage1, params.stage2):
        stage.out_conv.weight.data[:] = 0.0
        stage.out_conv.bias.data[:] = 0.0
    save_checkpoint(params, path)
    return path


class TestSynthNoise:
    def test_sigma_zero_round_trips_exactly(self, clip_factory, tmp_path):
        source = clip_factory(n_frames=4, height=8, width=8)
        out = tmp_path / "noisy"
        code = main(["synth-noise", "--input-dir", str(source),
                     "--output-dir", str(out), "--sigma", "0", "--seed", "1"])
        assert code == 0
        assert frame_bytes(out) == frame_bytes(source)

    def test_same_seed_gives_identical_bytes(self, clip_factory, tmp_path):
        source = clip_factory(n_frames=3, height=8, width=8)
        runs = []
        for tag in ("a", "b"):
            out = tmp_path / f"noisy_{tag}"
            assert main(["synth-noise", "--input-dir", str(source),
                         "--output-dir", str(out), "--sigma", "20",
                         "--seed", "7"]) == 0
            runs.append(frame_bytes(out))
        assert runs[0] == runs[1]
        other = tmp_path / "noisy_c"
        assert main(["synth-noise", "--input-dir", str(source),
                     "--output-dir", str(other), "--sigma", "20",
                     "--seed", "8"]) == 0
        assert frame_bytes(other) != runs[0]

    def test_manifest_records_flags(self, clip_factory, tmp_path):
        source = clip_factory(n_frames=3, height=8, width=8)
        out = tmp_path / "noisy"
        assert main(["synth-noise", "--input-dir", str(source),
                     "--output-dir", str(out), "--sigma", "15", "--seed", "3"]) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["sigma"] == 15.0
        assert manifest["seed"] == 3
        assert manifest["frames"] == 3

    def test_input_directory_never_mutated(self, clip_factory, tmp_path):
        source = clip_factory(n_frames=3, height=8, width=8)
        before = frame_bytes(source)
        assert main(["synth-noise", "--input-dir", str(source),
                     "--output-dir", str(tmp_path / "out"), "--sigma", "25",
                     "--seed", "0"]) == 0
        assert frame_bytes(source) == before

    def test_missing_input_dir_fails_with_diagnostic(self, tmp_path, capsys):
        code = main(["synth-noise", "--input-dir", str(tmp_path / "nope"),
                     "--output-dir", str(tmp_path / "out")])
        assert code == 1
        assert "error:" in capsys.readouterr().err


class TestTrain:
    def test_one_epoch_writes_valid_checkpoint(self, dataset_factory, tmp_path):
        root = dataset_factory(n_frames=5, height=8, width=8)
        ckpt = tmp_path / "model.ckpt"
        log = tmp_path / "loss.csv"
        code = main(["train", "--data-dir", str(root), "--epochs", "1",
                     "--crop", "8", "--seed", "0",
                     "--checkpoint-out", str(ckpt), "--loss-log", str(log)])
        assert code == 0
        params, state = load_checkpoint(ckpt)
        assert state is not None
        assert log.read_text().startswith("epoch,step,loss,lr,sigma\n")

    def test_config_file_supplies_defaults_and_flags_win(self, dataset_factory, tmp_path):
        root = dataset_factory(n_frames=5, height=8, width=8)
        config = tmp_path / "train.cfg"
        config.write_text(
            "epochs=5          # overridden by the flag below\n"
            "crop=8\n"
            f"data_dir={root}\n"
            "max_steps=2\n"
        )
        ckpt = tmp_path / "model.ckpt"
        code = main(["train", "--config", str(config), "--epochs", "1",
                     "--checkpoint-out", str(ckpt)])
        assert code == 0
        assert ckpt.is_file()

    def test_unknown_config_key_rejected(self, dataset_factory, tmp_path, capsys):
        root = dataset_factory(n_frames=5, height=8, width=8)
        config = tmp_path / "bad.cfg"
        config.write_text("bogus_knob=1\n")
        code = main(["train", "--data-dir", str(root), "--config", str(config)])
        assert code == 1
        assert "bogus_knob" in capsys.readouterr().err

    def test_unknown_flag_rejected(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            main(["train", "--data-dir", "x", "--bogus", "1"])
        assert excinfo.value.code != 0

    def test_missing_required_flag_rejected(self, capsys):
        code = main(["train"])
        assert code == 1
        assert "--data-dir" in capsys.readouterr().err


class TestDenoise:
    def test_output_count_and_zero_residual_identity(self, clip_factory, tmp_path):
        source = clip_factory(n_frames=6, height=8, width=8)
        ckpt = zero_residual_checkpoint(tmp_path / "zero.ckpt")
        out = tmp_path / "denoised"
        code = main(["denoise", "--checkpoint", str(ckpt),
                     "--input-dir", str(source), "--output-dir", str(out)])
        assert code == 0
        assert frame_bytes(out) == frame_bytes(source)

    def test_non_multiple_of_four_dims_padded_and_restored(self, clip_factory, tmp_path):
        source = clip_factory(n_frames=5, height=10, width=14)
        ckpt = zero_residual_checkpoint(tmp_path / "zero.ckpt")
        out = tmp_path / "denoised"
        code = main(["denoise", "--checkpoint", str(ckpt),
                     "--input-dir", str(source), "--output-dir", str(out)])
        assert code == 0
        assert frame_bytes(out) == frame_bytes(source)

    def test_deterministic_output_bytes(self, clip_factory, tmp_path):
        source = clip_factory(n_frames=5, height=8, width=8)
        ckpt = tmp_path / "model.ckpt"
        save_checkpoint(pipeline_init(4), ckpt)
        runs = []
        for tag in ("a", "b"):
            out = tmp_path / f"denoised_{tag}"
            assert main(["denoise", "--checkpoint", str(ckpt),
                         "--input-dir", str(source),
                         "--output-dir", str(out)]) == 0
            runs.append(frame_bytes(out))
        assert runs[0] == runs[1]

    def test_corrupt_checkpoint_fails_cleanly(self, clip_factory, tmp_path, capsys):
        bad = tmp_path / "bad.ckpt"
        bad.write_bytes(b"not a checkpoint at all")
        code = main(["denoise", "--checkpoint", str(bad),
                     "--input-dir", str(clip_factory(n_frames=5, height=8, width=8)),
                     "--output-dir", str(tmp_path / "out")])
        assert code == 1
        assert "error:" in capsys.readouterr().err


class TestEvaluate:
    def test_identity_gives_inf_and_one(self, clip_factory, tmp_path):
        source = clip_factory(n_frames=4, height=16, width=16)
        report = tmp_path / "report"
        code = main(["evaluate", "--clean-dir", str(source),
                     "--test-dir", str(source), "--report", str(report)])
        assert code == 0
        lines = (tmp_path / "report.csv").read_text().strip().split("\n")
        assert lines[0] == "frame,psnr_db,ssim"
        assert len(lines) == 5
        for line in lines[1:]:
            _, psnr_text, ssim_text = line.split(",")
            assert psnr_text == "inf"
            assert float(ssim_text) == 1.0
        payload = json.loads((tmp_path / "report.json").read_text())
        assert payload["mean_psnr_db"] == "inf"
        assert payload["mean_ssim"] == 1.0

    def test_noisy_pair_matches_direct_oracle(self, clip_factory, tmp_path):
        source = clip_factory(n_frames=4, height=24, width=24)
        noisy = tmp_path / "noisy"
        assert main(["synth-noise", "--input-dir", str(source),
                     "--output-dir", str(noisy), "--sigma", "25",
                     "--seed", "2"]) == 0
        report = tmp_path / "report"
        assert main(["evaluate", "--clean-dir", str(source),
                     "--test-dir", str(noisy), "--report", str(report)]) == 0
        payload = json.loads((tmp_path / "report.json").read_text())

        clean_paths = sorted(source.glob("*.png"))
        noisy_paths = sorted(noisy.glob("*.png"))
        direct = float(np.mean([
            psnr_reference(load_frame(c), load_frame(n))
            for c, n in zip(clean_paths, noisy_paths)
        ]))
        assert payload["mean_psnr_db"] == pytest.approx(direct, abs=0.5)
        assert payload["sigma"] == 25.0

    def test_mismatched_counts_list_both(self, clip_factory, tmp_path, capsys):
        clean = clip_factory(n_frames=4, height=16, width=16, name="clean")
        short = clip_factory(n_frames=3, height=16, width=16, name="short")
        code = main(["evaluate", "--clean-dir", str(clean),
                     "--test-dir", str(short), "--report", str(tmp_path / "r")])
        assert code == 1
        err = capsys.readouterr().err
        assert "4" in err and "3" in err


class TestEndToEnd:
    def test_full_workflow(self, clip_factory, tmp_path):
        clean = clip_factory(n_frames=5, height=16, width=16, kind="smooth")
        noisy = tmp_path / "noisy"
        ckpt = tmp_path / "model.ckpt"
        denoised = tmp_path / "denoised"
        report = tmp_path / "report"

        assert main(["synth-noise", "--input-dir", str(clean),
                     "--output-dir", str(noisy), "--sigma", "15",
                     "--seed", "0"]) == 0
        root = tmp_path / "root"
        root.mkdir()
        (root / "clip0").symlink_to(noisy)
        assert main(["train", "--data-dir", str(root), "--epochs", "1",
                     "--crop", "8", "--seed", "0",
                     "--checkpoint-out", str(ckpt)]) == 0
        assert main(["denoise", "--checkpoint", str(ckpt),
                     "--input-dir", str(noisy),
                     "--output-dir", str(denoised)]) == 0
        assert len(list(denoised.glob("*.png"))) == len(list(noisy.glob("*.png")))
        assert main(["evaluate", "--clean-dir", str(clean),
                     "--test-dir", str(denoised), "--report", str(report)]) == 0
        payload = json.loads((tmp_path / "report.json").read_text())
        assert len(payload["frames"]) == 5
