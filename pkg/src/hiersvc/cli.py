"""Command-line entry points: extract, train, convert, eval."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from . import audio_io
from .audio_io import LING_HOP, SAMPLE_RATE, AudioClip, build_manifest, load_audio, write_wav
from .content_encoder import LinguisticFeatures, load_features
from .dsp_features import extract_f0, harmonic_sine_excitation
from .features import (MissingFeatureError, UtteranceFeatures, cache_dir, compute_features,
                       feature_paths, save_utterance_features)
from .losses import multiscale_stft_loss
from .trainer import TrainConfig, load_generator, train_loop

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_MISSING_FEATURE = 2


# --- extract ----------------------------------------------------------------

def utterance_id(data_dir: Path, wav: Path) -> str:
    """``<singer>_<stem>`` for files in singer subdirectories, else the stem."""
    rel = wav.relative_to(data_dir)
    return f"{rel.parent.as_posix().replace('/', '_')}_{wav.stem}" if rel.parent != Path(".") else wav.stem


def cmd_extract(data_dir, out_dir=None, ling_dir=None, force: bool = False, seed: int = 0) -> list[str]:
    """Write ``.ling.bin``, ``.f0.bin`` and ``.loud.bin`` for every WAV under `data_dir`.

    Returns the utterance ids processed (skipped ones excluded).
    """
    data_dir = Path(data_dir)
    out_dir = Path(out_dir or cache_dir(data_dir / "features"))
    out_dir.mkdir(parents=True, exist_ok=True)
    wavs = sorted(p for p in data_dir.rglob("*") if p.suffix.lower() == ".wav" and out_dir not in p.parents)
    if not wavs:
        raise FileNotFoundError(f"no WAV files under {data_dir}")
    done = []
    for wav in wavs:
        uid = utterance_id(data_dir, wav)
        paths = feature_paths(out_dir, uid)
        if not force and all(p.exists() for p in paths.values()):
            continue
        try:
            clip = load_audio(wav, SAMPLE_RATE)
            ling = None
            if ling_dir is not None:
                ling = load_features(Path(ling_dir) / f"{uid}.ling.bin")
            save_utterance_features(out_dir, uid, compute_features(clip, ling, seed))
        except BaseException:
            for p in paths.values():
                p.unlink(missing_ok=True)
            raise
        done.append(uid)
    return done


# --- convert ----------------------------------------------------------------

@dataclass(frozen=True)
class ConvertRequest:
    source_wav: Path
    reference_wav: Path
    checkpoint: Path
    output: Path | None = None
    f0_shift_semitones: float = 0.0
    ling_path: Path | None = None
    seed: int = 0

    def __post_init__(self):
        for name in ("source_wav", "reference_wav", "checkpoint"):
            p = Path(getattr(self, name))
            if not p.is_file():
                raise FileNotFoundError(f"{name} not found: {p}")
            object.__setattr__(self, name, p)
        if not -24 <= self.f0_shift_semitones <= 24:
            raise ValueError("f0 shift must lie within [-24, 24] semitones")


def trim_to_hop(clip: AudioClip, hop: int = LING_HOP) -> AudioClip:
    return AudioClip(clip.samples[: len(clip) // hop * hop], clip.sample_rate)


def speaker_stats_of(gen, clip: AudioClip):
    clip = trim_to_hop(clip)
    if len(clip) < LING_HOP:
        raise ValueError(f"reference must hold at least {LING_HOP} samples")
    with torch.no_grad():
        stats, _ = gen.speaker_stats(torch.from_numpy(clip.samples.astype(np.float32))[None, None])
    return stats


def synthesize(gen, feats: UtteranceFeatures, stats, seed: int = 0) -> np.ndarray:
    """Generator output for one utterance's features and a set of speaker stats."""
    rng = np.random.default_rng(seed)
    sine = harmonic_sine_excitation(feats.f0_audio_rate(), rng=rng).values
    as_tensor = lambda a: torch.from_numpy(np.asarray(a, dtype=np.float32))  # noqa: E731
    with torch.no_grad():
        out = gen(as_tensor(feats.ling.T)[None], as_tensor(sine)[None],
                  as_tensor(feats.loud_audio_rate())[None, None], stats)
    return out[0, 0].numpy().astype(np.float64)


def source_features(clip: AudioClip, ling_path=None, f0_shift_semitones: float = 0.0,
                    pseudo_seed: int = 0) -> UtteranceFeatures:
    clip = trim_to_hop(clip)
    if len(clip) < 2048:
        raise ValueError("source must be at least 2048 samples long")
    ling = None
    if ling_path is not None:
        ext = load_features(ling_path)
        n = len(clip) // LING_HOP
        if len(ext) < n:
            raise ValueError(f"{ling_path}: {len(ext)} frames, source needs {n}")
        ling = LinguisticFeatures(ext.values[:n])
    return compute_features(clip, ling, pseudo_seed, f0_ratio=2.0 ** (f0_shift_semitones / 12.0))


def cmd_convert(req: ConvertRequest) -> np.ndarray:
    """One-shot conversion of the source to the reference singer; writes req.output if set."""
    gen, meta = load_generator(req.checkpoint)
    pseudo_seed = meta.get("train_config", {}).get("pseudo_seed", 0)
    source = load_audio(req.source_wav, SAMPLE_RATE)
    reference = load_audio(req.reference_wav, SAMPLE_RATE)
    stats = speaker_stats_of(gen, reference)
    feats = source_features(source, req.ling_path, req.f0_shift_semitones, pseudo_seed)
    audio = synthesize(gen, feats, stats, req.seed)
    if req.output is not None:
        write_wav(req.output, AudioClip(audio, SAMPLE_RATE))
    return audio


# --- eval -----------------------------------------------------------------

def f0_rmse_cents(f0_a, f0_b) -> float | None:
    """RMS pitch difference over frames voiced in both tracks; None if there are none."""
    a, b = np.asarray(f0_a), np.asarray(f0_b)
    n = min(len(a), len(b))
    a, b = a[:n], b[:n]
    both = (a > 0) & (b > 0)
    if not both.any():
        return None
    return float(np.sqrt(np.mean((1200 * np.log2(a[both] / b[both])) ** 2)))


def f0_correlation(f0_a, f0_b) -> float | None:
    """Pearson correlation of F0 over frames voiced in both tracks."""
    a, b = np.asarray(f0_a), np.asarray(f0_b)
    n = min(len(a), len(b))
    a, b = a[:n], b[:n]
    both = (a > 0) & (b > 0)
    if both.sum() < 3:
        return None
    return float(np.corrcoef(a[both], b[both])[0, 1])


def stat_distances(stats_a, stats_b) -> list[float]:
    return [float(torch.linalg.norm(x - y)) for x, y in zip(stats_a.means, stats_b.means)]


def cmd_eval(converted_wav, source_wav, reference_wav=None, checkpoint=None) -> dict:
    converted = load_audio(converted_wav, SAMPLE_RATE)
    source = load_audio(source_wav, SAMPLE_RATE)
    n = min(len(converted), len(source))
    record: dict = {}
    if n >= 2048:
        record["stft_loss"] = float(multiscale_stft_loss(
            torch.from_numpy(source.samples[:n]), torch.from_numpy(converted.samples[:n])))
    else:
        record["stft_loss"] = None
    record["f0_rmse_cents"] = f0_rmse_cents(extract_f0(converted).values, extract_f0(source).values)
    if reference_wav is not None and checkpoint is not None:
        gen, _ = load_generator(checkpoint)
        ref = speaker_stats_of(gen, load_audio(reference_wav, SAMPLE_RATE))
        dists = stat_distances(speaker_stats_of(gen, converted), ref)
        record["speaker_stat_l2"] = dists
        record["speaker_stat_l2_total"] = float(np.sqrt(np.sum(np.square(dists))))
    return record


# --- argument parsing -------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--config", type=Path, help="flat key = value training config")
    common.add_argument("--force", action="store_true", help="overwrite existing outputs")

    p = argparse.ArgumentParser(prog="hiersvc", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    ex = sub.add_parser("extract", parents=[common], help="compute feature files")
    ex.add_argument("data_dir", type=Path)
    ex.add_argument("out_dir", type=Path, nargs="?")
    ex.add_argument("--ling-dir", type=Path, help="precomputed <id>.ling.bin files")

    tr = sub.add_parser("train", parents=[common], help="train from a directory of singers")
    tr.add_argument("data_dir", type=Path)
    tr.add_argument("--features", type=Path, help="feature directory (default $HIERSVC_CACHE)")
    tr.add_argument("--out", type=Path, default=Path("runs/latest"))
    tr.add_argument("--resume", type=Path)
    tr.add_argument("--ratios", type=float, nargs=3, default=(0.9, 0.05, 0.05))

    cv = sub.add_parser("convert", parents=[common], help="one-shot conversion")
    cv.add_argument("source", type=Path)
    cv.add_argument("reference", type=Path)
    cv.add_argument("checkpoint", type=Path)
    cv.add_argument("output", type=Path)
    cv.add_argument("--f0-shift", type=float, default=0.0, help="semitones")
    cv.add_argument("--ling", type=Path, help="external linguistic features for the source")

    ev = sub.add_parser("eval", parents=[common], help="objective metrics")
    ev.add_argument("converted", type=Path)
    ev.add_argument("source", type=Path)
    ev.add_argument("reference", type=Path, nargs="?")
    ev.add_argument("--checkpoint", type=Path)
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    torch.manual_seed(args.seed)
    try:
        if args.command == "extract":
            done = cmd_extract(args.data_dir, args.out_dir, args.ling_dir, args.force, args.seed)
            print(json.dumps({"extracted": len(done)}))
        elif args.command == "train":
            cfg = TrainConfig.from_file(args.config) if args.config else TrainConfig()
            manifest = build_manifest(args.data_dir, args.ratios, args.seed)
            args.out.mkdir(parents=True, exist_ok=True)
            manifest.save(args.out / "manifest.tsv")
            features = args.features or cache_dir()
            final = train_loop(cfg, manifest, args.out, features, args.resume, echo=print)
            print(json.dumps({"checkpoint": str(final)}))
        elif args.command == "convert":
            req = ConvertRequest(args.source, args.reference, args.checkpoint, args.output,
                                 args.f0_shift, args.ling, args.seed)
            audio = cmd_convert(req)
            print(json.dumps({"output": str(args.output), "samples": len(audio)}))
        elif args.command == "eval":
            print(json.dumps(cmd_eval(args.converted, args.source, args.reference, args.checkpoint)))
    except MissingFeatureError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING_FEATURE
    except (OSError, ValueError, audio_io.AudioError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
