"""Tests for the command line interface."""

import json
import os

import numpy as np
import pytest

from signaudio.cli import main
from signaudio.core import (
    AudioBuffer,
    ComplexSpectrogram,
    PipelineConfig,
    spectrogram_save,
    tensor_write,
    wav_read,
    wav_write,
)
from signaudio.extractor import FileBackedSource
from signaudio.ingest import Clip, clip_write
from signaudio.metrics import TranscriptPair, bleu, cer, wer
from signaudio.nms import NmsParams, simulate_positions
from signaudio.pipeline import run_stream
from signaudio.specgen import GeneratorParams, SpectrogramGenerator


def read_stdout_json(capsys):
    return json.loads(capsys.readouterr().out)


def small_config_file(tmp_path, **overrides):
    base = dict(window_size=4, hop_length=1, overlap=2, confidence_threshold=0.7,
                feature_dim=32, class_count=5)
    base.update(overrides)
    path = tmp_path / "config.json"
    PipelineConfig(**base).to_json(path)
    return str(path)


def write_feature_dir(tmp_path, positions=15, peaks=(3, 8, 13), feature_dim=32,
                      class_count=5):
    """Stored extractions with high-confidence peaks at chosen positions."""
    directory = tmp_path / "features"
    directory.mkdir()
    rng = np.random.default_rng(7)
    for t in range(1, positions + 1):
        phi = rng.uniform(-1.0, 1.0, feature_dim).astype(np.float32)
        conf = np.full(class_count, 0.2, dtype=np.float32)
        if t in peaks:
            conf[t % class_count] = 0.9
        tensor_write(phi, directory / f"win_{t:06d}.phi.isvt")
        tensor_write(conf, directory / f"win_{t:06d}.conf.isvt")
    return str(directory)


class TestRunCommand:
    def test_feature_directory_run_matches_library(self, tmp_path, capsys):
        config_path = small_config_file(tmp_path)
        features = write_feature_dir(tmp_path)
        out = tmp_path / "out"
        rc = main(["run", "--features", features, "--config", config_path,
                   "--out-dir", str(out), "--seed", "3"])
        assert rc == 0
        summary = read_stdout_json(capsys)
        assert summary["frames"] == 18  # window 4 - 1 + last position 15
        assert os.path.exists(summary["wav"])
        with open(summary["detections_json"]) as fh:
            records = json.load(fh)

        expected = run_stream(range(18), FileBackedSource(features),
                              SpectrogramGenerator(GeneratorParams.toy(), seed=3),
                              config=PipelineConfig.from_json(config_path))
        assert [r["emitted_at"] for r in records] == \
               [d.emitted_at for d in expected.detections]
        assert summary["detections"] == len(expected.detections)
        audio = wav_read(summary["wav"])
        assert len(audio.samples) == len(expected.audio.samples)

    def test_frames_directory_run_with_mock_source(self, tmp_path, capsys):
        clip_dir = tmp_path / "clip"
        rng = np.random.default_rng(0)
        frames = rng.integers(0, 256, size=(3, 10, 6, 5)).astype(np.float32)
        clip_write(clip_dir, Clip(frames))
        config_path = small_config_file(tmp_path, class_count=20)
        out = tmp_path / "out"
        rc = main(["run", "--frames", str(clip_dir), "--config", config_path,
                   "--out-dir", str(out)])
        assert rc == 0
        summary = read_stdout_json(capsys)
        assert summary["frames"] == 10
        assert summary["windows"] == 7  # positions 1..7 at hop 1
        assert os.path.exists(os.path.join(str(out), "detections.json"))

    def test_vocab_resolves_gloss_names(self, tmp_path, capsys):
        config_path = small_config_file(tmp_path)
        features = write_feature_dir(tmp_path)
        vocab_path = tmp_path / "vocab.txt"
        labels = ["ZERO", "ONE", "TWO", "THREE", "FOUR"]
        vocab_path.write_text("\n".join(labels) + "\n")
        out = tmp_path / "out"
        rc = main(["run", "--features", features, "--config", config_path,
                   "--out-dir", str(out), "--vocab", str(vocab_path)])
        assert rc == 0
        summary = read_stdout_json(capsys)
        with open(summary["detections_json"]) as fh:
            records = json.load(fh)
        assert records
        for record in records:
            assert record["gloss"] == labels[record["predicted_class"]]
            assert set(record) == {"emitted_at", "predicted_class", "gloss",
                                   "max_confidence"}

    def test_missing_feature_dir_is_reported(self, tmp_path, capsys):
        config_path = small_config_file(tmp_path)
        empty = tmp_path / "nothing"
        empty.mkdir()
        rc = main(["run", "--features", str(empty), "--config", config_path,
                   "--out-dir", str(tmp_path / "out")])
        assert rc == 2
        assert "win_" in capsys.readouterr().err


class TestSynthCommand:
    def test_round_trip_from_saved_spectrogram(self, tmp_path, capsys):
        rng = np.random.default_rng(4)
        spec = ComplexSpectrogram(
            rng.standard_normal((9, 6)).astype(np.float32),
            rng.standard_normal((9, 6)).astype(np.float32),
            sample_rate=22050, n_fft=16, hop=4,
        )
        path = tmp_path / "spec.isvt"
        spectrogram_save(spec, path)
        out = tmp_path / "out"
        rc = main(["synth", str(path), "--out-dir", str(out)])
        assert rc == 0
        summary = read_stdout_json(capsys)
        assert summary["frames"] == 6
        assert summary["samples"] == 5 * 4 + 16
        audio = wav_read(summary["wav"])
        assert len(audio.samples) == summary["samples"]


class TestMetricsCommand:
    def test_audio_report_on_identical_files(self, tmp_path, capsys):
        rng = np.random.default_rng(9)
        audio = AudioBuffer(0.3 * rng.standard_normal(22050).astype(np.float32),
                            22050)
        a = tmp_path / "a.wav"
        b = tmp_path / "b.wav"
        wav_write(audio, a)
        wav_write(audio, b)
        out = tmp_path / "out"
        rc = main(["metrics", str(a), str(b), "--out-dir", str(out)])
        assert rc == 0
        report = read_stdout_json(capsys)
        assert report["kind"] == "audio"
        assert report["snr_db"] == 120.0
        assert report["mse"] == 0.0
        assert report["stoi"] >= 0.99
        assert report["mcd"] == 0.0
        assert os.path.exists(os.path.join(str(out), "metrics.json"))

    def test_tensor_report(self, tmp_path, capsys):
        a = np.arange(12, dtype=np.float32).reshape(3, 4)
        b = a + 0.5
        pa, pb = tmp_path / "a.isvt", tmp_path / "b.isvt"
        tensor_write(a, pa)
        tensor_write(b, pb)
        rc = main(["metrics", str(pa), str(pb), "--out-dir", str(tmp_path)])
        assert rc == 0
        report = read_stdout_json(capsys)
        assert report["kind"] == "tensor"
        assert report["shape"] == [3, 4]
        assert report["mse"] == pytest.approx(0.25)
        assert report["max_abs_diff"] == pytest.approx(0.5)

    def test_tensor_shape_mismatch_fails(self, tmp_path, capsys):
        tensor_write(np.zeros((2, 2), dtype=np.float32), tmp_path / "a.isvt")
        tensor_write(np.zeros((3, 2), dtype=np.float32), tmp_path / "b.isvt")
        rc = main(["metrics", str(tmp_path / "a.isvt"), str(tmp_path / "b.isvt"),
                   "--out-dir", str(tmp_path)])
        assert rc == 2
        assert "shapes differ" in capsys.readouterr().err

    def test_transcript_report(self, tmp_path, capsys):
        ref = tmp_path / "ref.txt"
        hyp = tmp_path / "hyp.txt"
        ref.write_text("the cat sat on the mat\n")
        hyp.write_text("the cat sat on a mat\n")
        rc = main(["metrics", str(ref), str(hyp), "--out-dir", str(tmp_path)])
        assert rc == 0
        report = read_stdout_json(capsys)
        pair = TranscriptPair("the cat sat on the mat".split(),
                              "the cat sat on a mat".split())
        assert report["kind"] == "transcript"
        assert report["wer"] == pytest.approx(wer(pair))
        assert report["cer"] == pytest.approx(cer(pair))
        assert report["bleu"] == pytest.approx(bleu(pair))

    def test_mixed_kinds_rejected(self, tmp_path, capsys):
        wav_write(AudioBuffer(np.zeros(100, dtype=np.float32), 22050),
                  tmp_path / "a.wav")
        (tmp_path / "b.txt").write_text("hello\n")
        rc = main(["metrics", str(tmp_path / "a.wav"), str(tmp_path / "b.txt"),
                   "--out-dir", str(tmp_path)])
        assert rc == 2


class TestNmsSimCommand:
    def test_json_confidences_match_library_simulation(self, tmp_path, capsys):
        config_path = small_config_file(tmp_path)
        values = [0.2, 0.8, 0.3, 0.2, 0.9, 0.2, 0.2, 0.75, 0.1]
        conf_path = tmp_path / "conf.json"
        conf_path.write_text(json.dumps(values))
        rc = main(["nms-sim", str(conf_path), "--config", config_path,
                   "--out-dir", str(tmp_path)])
        assert rc == 0
        report = read_stdout_json(capsys)
        params = NmsParams(window_size=4, hop=1, overlap=2, threshold=0.7)
        assert report["positions"] == simulate_positions(values, params)
        with open(tmp_path / "emissions.json") as fh:
            assert json.load(fh) == report

    def test_plain_text_confidences_and_threshold_override(self, tmp_path, capsys):
        config_path = small_config_file(tmp_path)
        conf_path = tmp_path / "conf.txt"
        conf_path.write_text("0.2 0.8 0.3\n0.2 0.9 0.2\n")
        rc = main(["nms-sim", str(conf_path), "--config", config_path,
                   "--threshold", "0.85", "--out-dir", str(tmp_path)])
        assert rc == 0
        report = read_stdout_json(capsys)
        params = NmsParams(window_size=4, hop=1, overlap=2, threshold=0.85)
        values = [0.2, 0.8, 0.3, 0.2, 0.9, 0.2]
        assert report["positions"] == simulate_positions(values, params)
        assert report["threshold"] == 0.85


class TestBenchCommand:
    def test_bench_writes_report(self, tmp_path, capsys):
        rc = main(["bench", "--length", "300", "--repetitions", "3",
                   "--out-dir", str(tmp_path)])
        assert rc == 0
        report = read_stdout_json(capsys)
        assert report["windows"] == 84
        assert report["fps_median"] > 0
        with open(tmp_path / "bench.json") as fh:
            assert json.load(fh) == report


class TestAugmentCommand:
    def test_writes_requested_variants(self, tmp_path, capsys):
        clip_dir = tmp_path / "clip"
        rng = np.random.default_rng(2)
        frames = rng.integers(0, 256, size=(3, 8, 6, 5)).astype(np.float32)
        clip_write(clip_dir, Clip(frames))
        out = tmp_path / "out"
        rc = main(["augment", str(clip_dir), "--versions", "3",
                   "--out-dir", str(out), "--seed", "5"])
        assert rc == 0
        summary = read_stdout_json(capsys)
        assert summary["versions"] == 3
        assert len(summary["directories"]) == 3
        for directory, count in zip(summary["directories"],
                                    summary["frames_per_version"]):
            names = sorted(os.listdir(directory))
            assert len(names) == count
            assert 7 <= count <= 8  # at most floor(8/8) = 1 frame dropped
            assert names[0] == "frame_000000.ppm"


class TestTrainCommands:
    def test_train_specgen_writes_history_and_weights(self, tmp_path, capsys):
        out = tmp_path / "out"
        rc = main(["train-specgen", "--scale", "micro", "--samples", "8",
                   "--epochs", "3", "--batch-size", "8", "--out-dir", str(out),
                   "--seed", "1"])
        assert rc == 0
        summary = read_stdout_json(capsys)
        assert summary["epochs"] == 3
        assert np.isfinite(summary["final_loss"])
        with open(os.path.join(summary["history"])) as fh:
            history = json.load(fh)
        assert len(history["train_loss"]) == 3
        assert os.path.exists(os.path.join(summary["weights"], "manifest.json"))

    def test_train_combined_writes_history(self, tmp_path, capsys):
        out = tmp_path / "out"
        rc = main(["train-combined", "--per-class", "2", "--epochs", "2",
                   "--out-dir", str(out), "--seed", "0"])
        assert rc == 0
        summary = read_stdout_json(capsys)
        assert summary["classes"] == 3
        assert summary["samples"] == 6
        assert summary["epochs"] == 2
        assert os.path.exists(summary["history"])


class TestParser:
    def test_no_arguments_exits_with_usage_error(self):
        with pytest.raises(SystemExit):
            main([])

    def test_unknown_command_exits_with_usage_error(self):
        with pytest.raises(SystemExit):
            main(["frobnicate"])
