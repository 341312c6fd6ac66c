"""WAV reading/writing, resampling, segmenting and dataset manifests."""
from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.io import wavfile
from scipy.signal import resample_poly

logger = logging.getLogger(__name__)

SAMPLE_RATE = 16000
LING_HOP = 640
SPLITS = ("train", "valid", "test")


class AudioError(Exception):
    """Base class for audio input/output failures."""


class AudioFileNotFoundError(AudioError, FileNotFoundError):
    pass


class MalformedWavError(AudioError):
    pass


class UnsupportedEncodingError(AudioError):
    pass


@dataclass(frozen=True)
class AudioClip:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError(f"AudioClip expects mono samples, got shape {samples.shape}")
        if int(self.sample_rate) <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


def read_wav(path) -> AudioClip:
    """Read a PCM16 or float32 RIFF/WAVE file as a mono clip.

    Multichannel audio is averaged to mono. PCM16 is scaled by 1/32768.
    """
    path = Path(path)
    if not path.is_file():
        raise AudioFileNotFoundError(f"no such audio file: {path}")
    try:
        rate, data = wavfile.read(path)
    except (ValueError, EOFError, OSError) as exc:
        raise MalformedWavError(f"{path}: {exc}") from exc

    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    else:
        raise UnsupportedEncodingError(f"{path}: unsupported sample type {data.dtype}")
    if samples.ndim == 2:
        samples = samples.mean(axis=1)
    if not np.all(np.isfinite(samples)):
        raise MalformedWavError(f"{path}: non-finite samples")
    return AudioClip(np.clip(samples, -1.0, 1.0), rate)


def write_wav(path, clip: AudioClip) -> None:
    """Write `clip` as PCM16, clamping to [-1, 1] before quantization."""
    path = Path(path)
    if not path.parent.is_dir():
        raise AudioError(f"parent directory does not exist: {path.parent}")
    clipped = np.clip(clip.samples, -1.0, 1.0)
    pcm = np.clip(np.round(clipped * 32768.0), -32768, 32767).astype(np.int16)
    try:
        wavfile.write(path, clip.sample_rate, pcm)
    except OSError as exc:
        raise AudioError(f"cannot write {path}: {exc}") from exc


def resample(clip: AudioClip, target_rate: int) -> AudioClip:
    """Band-limited polyphase resampling to `target_rate`.

    Output length is round(len * target / source).
    """
    target_rate = int(target_rate)
    if target_rate <= 0:
        raise ValueError(f"target_rate must be positive, got {target_rate}")
    if target_rate == clip.sample_rate:
        return clip
    ratio = Fraction(target_rate, clip.sample_rate)
    out = resample_poly(clip.samples, ratio.numerator, ratio.denominator)
    n_out = int(round(len(clip) * target_rate / clip.sample_rate))
    if len(out) < n_out:
        out = np.pad(out, (0, n_out - len(out)))
    return AudioClip(np.clip(out[:n_out], -1.0, 1.0), target_rate)


def load_audio(path, sample_rate: int = SAMPLE_RATE) -> AudioClip:
    """read_wav followed by resampling to `sample_rate`."""
    return resample(read_wav(path), sample_rate)


def sample_segment(clip: AudioClip, length_samples: int, rng: np.random.Generator,
                   align: int = LING_HOP) -> AudioClip:
    """Random contiguous slice whose start is a multiple of `align`.

    Clips shorter than the request are zero-padded at the end.
    """
    if length_samples < 1:
        raise ValueError("length_samples must be >= 1")
    start = segment_start(len(clip), length_samples, rng, align)
    piece = clip.samples[start:start + length_samples]
    if len(piece) < length_samples:
        piece = np.pad(piece, (0, length_samples - len(piece)))
    return AudioClip(piece, clip.sample_rate)


def segment_start(n_samples: int, length_samples: int, rng: np.random.Generator,
                  align: int = LING_HOP) -> int:
    max_start = max(n_samples - length_samples, 0)
    return int(rng.integers(0, max_start // align + 1)) * align


@dataclass(frozen=True)
class ManifestEntry:
    utterance_id: str
    path: str
    singer_id: str
    split: str


@dataclass(frozen=True)
class Manifest:
    entries: tuple[ManifestEntry, ...]

    def __post_init__(self):
        ids = [e.utterance_id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate utterance ids in manifest")
        for e in self.entries:
            if e.split not in SPLITS:
                raise ValueError(f"bad split tag {e.split!r}")

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def split(self, tag: str) -> list[ManifestEntry]:
        return [e for e in self.entries if e.split == tag]

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for e in self.entries:
                fh.write(f"{e.utterance_id}\t{e.path}\t{e.singer_id}\t{e.split}\n")

    @classmethod
    def load(cls, path) -> "Manifest":
        entries = []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.rstrip("\n")
                if not line:
                    continue
                fields = line.split("\t")
                if len(fields) != 4:
                    raise ValueError(f"{path}:{lineno}: expected 4 tab-separated fields")
                entries.append(ManifestEntry(*fields))
        return cls(tuple(entries))


def _split_counts(n: int, ratios: Sequence[float]) -> tuple[int, int, int]:
    n_valid = int(round(n * ratios[1]))
    n_test = int(round(n * ratios[2]))
    return n - n_valid - n_test, n_valid, n_test


def build_manifest(dataset_dir, ratios: Iterable[float] = (0.9, 0.05, 0.05),
                   seed: int = 0) -> Manifest:
    """Per-singer random train/valid/test split of `dataset_dir/<singer>/*.wav`.

    Singers with fewer than 3 utterances go entirely to train.
    """
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or min(ratios) < 0 or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must be three non-negative values summing to 1, got {ratios}")
    root = Path(dataset_dir)
    if not root.is_dir():
        raise FileNotFoundError(f"dataset directory not found: {root}")

    singers = sorted(p for p in root.iterdir() if p.is_dir())
    rng = np.random.default_rng(seed)
    entries = []
    for singer_dir in singers:
        files = sorted(f for f in singer_dir.iterdir() if f.suffix.lower() == ".wav" and f.is_file())
        if not files:
            continue
        singer = singer_dir.name
        tags = ["train"] * len(files)
        if len(files) < 3:
            if ratios[0] < 1.0:
                logger.warning("singer %s has %d utterances; all assigned to train", singer, len(files))
        else:
            n_train, n_valid, n_test = _split_counts(len(files), ratios)
            if n_train < 1:
                # keep every singer trainable
                if n_valid >= n_test:
                    n_valid -= 1
                else:
                    n_test -= 1
            order = rng.permutation(len(files))
            for i in order[:n_valid]:
                tags[i] = "valid"
            for i in order[n_valid:n_valid + n_test]:
                tags[i] = "test"
        for f, tag in zip(files, tags):
            entries.append(ManifestEntry(f"{singer}_{f.stem}", os.fspath(f), singer, tag))
    if not entries:
        raise ValueError(f"no WAV files found under {root}")
    return Manifest(tuple(entries))
