"""Command line front end.

Subcommands:
    run             stored features or a PPM clip -> WAV + detections JSON
    synth           saved complex spectrogram -> WAV
    metrics         score two WAVs, two tensors, or two transcripts
    train-specgen   fit the spectrogram generator on a synthetic task
    train-combined  jointly fit the toy classifier and generator
    nms-sim         confidence trace -> emitted window positions
    bench           pipeline throughput report
    augment         clip directory -> several augmented clip directories

Global flags on every subcommand: --config (pipeline JSON), --seed,
--out-dir.  All commands print a JSON summary to stdout and write their
artifacts under --out-dir.
"""

from __future__ import annotations

import argparse
import json
import os
import re
import sys

import numpy as np

from .core import GlossVocab, PipelineConfig, spectrogram_load, tensor_read, wav_read, wav_write
from .dsp import istft
from .extractor import FileBackedSource, MockSource, ToyClassifier
from .ingest import AugmentParams, augment_clip, clip_read, clip_write
from .metrics import TranscriptPair, bleu, cer, mcd, mse_metric, snr, stoi, wer
from .nms import NmsParams, simulate_positions
from .pipeline import benchmark_throughput, detections_to_records, run_stream
from .specgen import GeneratorParams, SpectrogramGenerator, load_generator, save_generator
from .train import train_combined, train_specgen


def _config_from(args) -> PipelineConfig:
    if args.config:
        return PipelineConfig.from_json(args.config)
    return PipelineConfig()


def _out_dir(args) -> str:
    os.makedirs(args.out_dir, exist_ok=True)
    return args.out_dir


def _emit(report: dict, path=None) -> None:
    text = json.dumps(report, indent=2)
    print(text)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text + "\n")


def _generator_for(args, seed: int) -> SpectrogramGenerator:
    if getattr(args, "weights", None):
        return load_generator(args.weights)
    return SpectrogramGenerator(GeneratorParams.toy(), seed=seed)


def _stored_feature_count(directory) -> int:
    """Highest window index covered by win_%06d.*.isvt files."""
    best = 0
    for name in os.listdir(directory):
        match = re.match(r"win_(\d{6})\.phi\.isvt$", name)
        if match:
            best = max(best, int(match.group(1)))
    if best == 0:
        raise FileNotFoundError(f"no win_*.phi.isvt files in {directory}")
    return best


def cmd_run(args) -> int:
    config = _config_from(args)
    out = _out_dir(args)
    generator = _generator_for(args, args.seed)

    if args.features:
        source = FileBackedSource(args.features)
        last_position = _stored_feature_count(args.features)
        frame_count = args.num_frames or (config.window_size - 1 + last_position)
        frames = range(frame_count)
    else:
        clip = clip_read(args.frames)
        frame_count = clip.num_frames
        frames = [clip.frames[:, j] for j in range(frame_count)]
        # no video backbone ships with this package; clips are driven with
        # the reproducible mock extractor keyed by --seed
        source = MockSource(args.seed, feature_dim=generator.params.input_dim,
                            class_count=config.class_count)

    run = run_stream(frames, source, generator, config=config, gap_ms=args.gap_ms)

    vocab = GlossVocab.from_file(args.vocab) if args.vocab else None
    records = detections_to_records(run.detections, vocab)
    wav_path = os.path.join(out, "audio.wav")
    det_path = os.path.join(out, "detections.json")
    wav_write(run.audio, wav_path)
    with open(det_path, "w") as fh:
        json.dump(records, fh, indent=2)

    _emit({
        "frames": int(frame_count),
        "windows": run.timing.windows,
        "detections": len(run.detections),
        "audio_samples": int(len(run.audio.samples)),
        "audio_seconds": run.audio.duration,
        "fps": run.timing.fps,
        "wav": wav_path,
        "detections_json": det_path,
    })
    return 0


def cmd_synth(args) -> int:
    out = _out_dir(args)
    spec = spectrogram_load(args.spectrogram)
    audio = istft(spec)
    wav_path = os.path.join(out, args.name)
    wav_write(audio, wav_path)
    _emit({
        "frames": spec.num_frames,
        "bins": spec.num_bins,
        "samples": int(len(audio.samples)),
        "seconds": audio.duration,
        "wav": wav_path,
    })
    return 0


def _audio_metrics(ref_path, test_path) -> dict:
    reference = wav_read(ref_path)
    test = wav_read(test_path)
    n = min(len(reference.samples), len(test.samples))
    ref_cut = reference.samples[:n]
    test_cut = test.samples[:n]
    report = {
        "kind": "audio",
        "samples_compared": int(n),
        "snr_db": snr(ref_cut, test_cut),
        "mse": mse_metric(ref_cut, test_cut),
    }
    for name, fn in (("stoi", stoi), ("mcd", mcd)):
        try:
            report[name] = fn(reference, test)
        except ValueError as exc:
            report[name] = None
            report[f"{name}_error"] = str(exc)
    return report


def _tensor_metrics(ref_path, test_path) -> dict:
    reference = tensor_read(ref_path)
    test = tensor_read(test_path)
    if reference.shape != test.shape:
        raise ValueError(
            f"tensor shapes differ: {reference.shape} vs {test.shape}"
        )
    diff = reference.astype(np.float64) - test.astype(np.float64)
    return {
        "kind": "tensor",
        "shape": list(reference.shape),
        "mse": mse_metric(reference.reshape(-1), test.reshape(-1)),
        "max_abs_diff": float(np.max(np.abs(diff))) if diff.size else 0.0,
    }


def _transcript_metrics(ref_path, test_path) -> dict:
    with open(ref_path) as fh:
        reference = fh.read().split()
    with open(test_path) as fh:
        hypothesis = fh.read().split()
    pair = TranscriptPair(reference, hypothesis)
    return {
        "kind": "transcript",
        "reference_tokens": len(reference),
        "hypothesis_tokens": len(hypothesis),
        "wer": wer(pair),
        "cer": cer(pair),
        "bleu": bleu(pair),
    }


def cmd_metrics(args) -> int:
    out = _out_dir(args)
    ext_ref = os.path.splitext(args.reference)[1].lower()
    ext_test = os.path.splitext(args.test)[1].lower()
    if ext_ref != ext_test:
        raise ValueError(
            f"both inputs must be the same kind, got {ext_ref!r} and {ext_test!r}"
        )
    if ext_ref == ".wav":
        report = _audio_metrics(args.reference, args.test)
    elif ext_ref == ".isvt":
        report = _tensor_metrics(args.reference, args.test)
    else:
        report = _transcript_metrics(args.reference, args.test)
    _emit(report, os.path.join(out, "metrics.json"))
    return 0


def _teacher_student_data(params: GeneratorParams, seed: int, count: int):
    """Reachable targets: a frozen same-shaped network labels random features."""
    rng = np.random.default_rng(seed)
    teacher = SpectrogramGenerator(params, seed=seed + 100)
    data = []
    for _ in range(count):
        phi = rng.uniform(-1.0, 1.0, params.input_dim)
        data.append((phi, teacher.forward(phi)))
    return data


def cmd_train_specgen(args) -> int:
    out = _out_dir(args)
    params = GeneratorParams.micro() if args.scale == "micro" else GeneratorParams.toy()
    generator = SpectrogramGenerator(params, seed=args.seed)
    data = _teacher_student_data(params, args.seed, args.samples)
    history_path = os.path.join(out, "history.json")
    history = train_specgen(data, generator, epochs=args.epochs,
                            batch_size=args.batch_size, seed=args.seed,
                            history_path=history_path)
    weights_dir = os.path.join(out, "generator")
    save_generator(generator, weights_dir)
    _emit({
        "scale": args.scale,
        "samples": args.samples,
        "epochs": len(history.train_losses),
        "initial_loss": history.train_losses[0],
        "final_loss": history.train_losses[-1],
        "stopped_early": history.stopped_early,
        "weights": weights_dir,
        "history": history_path,
    })
    return 0


def _combined_data(seed: int, class_count: int, per_class: int,
                   params: GeneratorParams):
    """Separable labeled windows with per-class reachable target spectrograms."""
    rng = np.random.default_rng(seed)
    teacher = SpectrogramGenerator(params, seed=seed + 99)
    feature_dim = params.input_dim
    centers = 2.0 * np.eye(class_count)
    targets = [teacher.forward(rng.uniform(-1.0, 1.0, feature_dim))
               for _ in range(class_count)]
    data = []
    for label in range(class_count):
        for _ in range(per_class):
            window = centers[label] + 0.1 * rng.standard_normal(class_count)
            data.append((window, label, targets[label]))
    return data


def cmd_train_combined(args) -> int:
    out = _out_dir(args)
    params = GeneratorParams.micro()
    class_count = 3
    classifier = ToyClassifier(input_dim=class_count,
                               feature_dim=params.input_dim,
                               class_count=class_count, seed=args.seed)
    generator = SpectrogramGenerator(params, seed=args.seed + 50)
    data = _combined_data(args.seed, class_count, args.per_class, params)
    history_path = os.path.join(out, "history.json")
    history = train_combined(data, classifier, generator, epochs=args.epochs,
                             batch_size=args.batch_size, seed=args.seed,
                             history_path=history_path)
    weights_dir = os.path.join(out, "generator")
    save_generator(generator, weights_dir)
    _emit({
        "classes": class_count,
        "samples": len(data),
        "epochs": len(history.train_losses),
        "initial_loss": history.train_losses[0],
        "final_loss": history.train_losses[-1],
        "stopped_early": history.stopped_early,
        "weights": weights_dir,
        "history": history_path,
    })
    return 0


def _read_confidences(path):
    with open(path) as fh:
        text = fh.read()
    stripped = text.lstrip()
    if stripped.startswith("["):
        values = json.loads(text)
    else:
        values = [float(tok) for tok in text.split()]
    return [float(v) for v in values]


def cmd_nms_sim(args) -> int:
    config = _config_from(args)
    out = _out_dir(args)
    values = _read_confidences(args.confidences)
    threshold = config.confidence_threshold if args.threshold is None else args.threshold
    params = NmsParams(window_size=config.window_size, hop=config.hop_length,
                       overlap=config.overlap, threshold=threshold)
    positions = simulate_positions(values, params)
    _emit({
        "positions": positions,
        "count": len(positions),
        "window_size": params.window_size,
        "hop": params.hop,
        "overlap": params.overlap,
        "threshold": params.threshold,
    }, os.path.join(out, "emissions.json"))
    return 0


def cmd_bench(args) -> int:
    config = _config_from(args) if args.config else None
    out = _out_dir(args)
    report = benchmark_throughput(args.length, config=config,
                                  repetitions=args.repetitions, seed=args.seed)
    _emit(report, os.path.join(out, "bench.json"))
    return 0


def cmd_augment(args) -> int:
    out = _out_dir(args)
    clip = clip_read(args.clip)
    params = AugmentParams(seed=args.seed, versions=args.versions)
    directories = []
    frame_counts = []
    for version in range(params.versions):
        variant = augment_clip(clip, params, version)
        directory = os.path.join(out, f"aug_v{version}")
        clip_write(directory, variant)
        directories.append(directory)
        frame_counts.append(variant.num_frames)
    _emit({
        "source_frames": clip.num_frames,
        "versions": params.versions,
        "directories": directories,
        "frames_per_version": frame_counts,
    })
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="pipeline configuration JSON file")
    common.add_argument("--seed", type=int, default=0, help="master random seed")
    common.add_argument("--out-dir", default=".", help="directory for artifacts")

    parser = argparse.ArgumentParser(
        prog="signaudio",
        description="streaming sign-gesture detection and direct audio synthesis",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common],
                       help="stored features or a PPM clip -> WAV + detections")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--features", help="directory of win_*.isvt extractions")
    group.add_argument("--frames", help="clip directory of frame_*.ppm files")
    p.add_argument("--weights", help="saved generator weight directory")
    p.add_argument("--vocab", help="gloss label file, one label per line")
    p.add_argument("--num-frames", type=int, default=None,
                   help="stream length override for --features runs")
    p.add_argument("--gap-ms", type=float, default=0.0,
                   help="silence between consecutive signs, milliseconds")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("synth", parents=[common],
                       help="saved complex spectrogram -> WAV")
    p.add_argument("spectrogram", help="ISVT spectrogram (with .json sidecar)")
    p.add_argument("--name", default="synth.wav", help="output WAV file name")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("metrics", parents=[common],
                       help="score two WAVs, two .isvt tensors, or two transcripts")
    p.add_argument("reference")
    p.add_argument("test")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("train-specgen", parents=[common],
                       help="fit the generator on a synthetic teacher task")
    p.add_argument("--scale", choices=("micro", "toy"), default="micro")
    p.add_argument("--samples", type=int, default=64)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--batch-size", type=int, default=64)
    p.set_defaults(func=cmd_train_specgen)

    p = sub.add_parser("train-combined", parents=[common],
                       help="jointly fit the toy classifier and the generator")
    p.add_argument("--per-class", type=int, default=4)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--batch-size", type=int, default=4)
    p.set_defaults(func=cmd_train_combined)

    p = sub.add_parser("nms-sim", parents=[common],
                       help="confidence trace file -> emitted window positions")
    p.add_argument("confidences",
                   help="JSON list or whitespace-separated floats, one per position")
    p.add_argument("--threshold", type=float, default=None,
                   help="override the config confidence threshold")
    p.set_defaults(func=cmd_nms_sim)

    p = sub.add_parser("bench", parents=[common],
                       help="full-pipeline throughput report")
    p.add_argument("--length", type=int, default=2000, help="stream frames")
    p.add_argument("--repetitions", type=int, default=3)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("augment", parents=[common],
                       help="clip directory -> several augmented clip directories")
    p.add_argument("clip", help="directory of frame_*.ppm files")
    p.add_argument("--versions", type=int, default=5)
    p.set_defaults(func=cmd_augment)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
