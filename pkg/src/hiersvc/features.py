"""Per-utterance feature bundles shared by training, extraction and conversion."""
from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import tensor_file
from .audio_io import LING_HOP, SAMPLE_RATE, AudioClip
from .content_encoder import LING_DIM, LinguisticFeatures, load_features, pseudo_encode
from .dsp_features import (F0_HOP, LOUDNESS_HOP, a_weighted_loudness, extract_f0,
                           linear_interpolate, loudness_condition)

CACHE_ENV = "HIERSVC_CACHE"
SUFFIXES = {"ling": ".ling.bin", "f0": ".f0.bin", "loud": ".loud.bin"}


class MissingFeatureError(FileNotFoundError):
    def __init__(self, utterance_id: str, path):
        super().__init__(f"missing feature file for utterance {utterance_id}: {path}")
        self.utterance_id = utterance_id


def pad_to_hop(samples: np.ndarray, hop: int = LING_HOP) -> np.ndarray:
    n = int(np.ceil(len(samples) / hop)) * hop
    return np.pad(samples, (0, n - len(samples)))


def upsample_track(values: np.ndarray, hop: int, n_samples: int) -> np.ndarray:
    """Frame k sits at sample k*hop; linear in between, held after the last frame."""
    span = (len(values) - 1) * hop + 1
    out = linear_interpolate(values, span)
    if span >= n_samples:
        return out[:n_samples]
    return np.concatenate([out, np.full(n_samples - span, out[-1])])


@dataclass
class UtteranceFeatures:
    """Audio padded to a multiple of 640 plus its frame-rate features."""
    audio: np.ndarray
    ling: np.ndarray   # (n/640, 512)
    f0: np.ndarray     # (n/160,)
    loud: np.ndarray   # (n/64,) dB

    def __post_init__(self):
        n = len(self.audio)
        if n % LING_HOP:
            raise ValueError(f"audio length {n} is not a multiple of {LING_HOP}")
        if self.ling.shape != (n // LING_HOP, LING_DIM):
            raise ValueError(f"ling shape {self.ling.shape} does not match {n} samples")
        if len(self.f0) != n // F0_HOP or len(self.loud) != n // LOUDNESS_HOP:
            raise ValueError("f0/loudness frame counts do not match audio length")

    @property
    def num_samples(self) -> int:
        return len(self.audio)

    def f0_audio_rate(self) -> np.ndarray:
        return upsample_track(self.f0, F0_HOP, self.num_samples)

    def loud_audio_rate(self) -> np.ndarray:
        return loudness_condition(upsample_track(self.loud, LOUDNESS_HOP, self.num_samples))


def compute_features(clip: AudioClip, ling: LinguisticFeatures | None = None,
                     pseudo_seed: int = 0, f0_ratio: float = 1.0) -> UtteranceFeatures:
    """Compute every feature for a 16 kHz clip; `ling` overrides the pseudo-encoder."""
    if clip.sample_rate != SAMPLE_RATE:
        raise ValueError(f"expected {SAMPLE_RATE} Hz audio, got {clip.sample_rate}")
    padded = AudioClip(pad_to_hop(clip.samples), SAMPLE_RATE)
    if ling is None:
        ling = pseudo_encode(padded, pseudo_seed)
    if len(ling) != len(padded) // LING_HOP:
        raise ValueError(f"linguistic features have {len(ling)} frames, audio needs {len(padded) // LING_HOP}")
    f0 = extract_f0(padded).values * f0_ratio
    loud = a_weighted_loudness(padded).values
    return UtteranceFeatures(padded.samples, ling.values, f0, loud)


def feature_paths(directory, utterance_id: str) -> dict[str, Path]:
    directory = Path(directory)
    return {k: directory / f"{utterance_id}{s}" for k, s in SUFFIXES.items()}


def save_utterance_features(directory, utterance_id: str, feats: UtteranceFeatures) -> None:
    paths = feature_paths(directory, utterance_id)
    tensor_file.save_matrix(paths["ling"], feats.ling)
    tensor_file.save_matrix(paths["f0"], feats.f0[:, None])
    tensor_file.save_matrix(paths["loud"], feats.loud[:, None])


def load_utterance_features(directory, utterance_id: str, clip: AudioClip,
                            pseudo_seed: int | None = 0) -> UtteranceFeatures:
    """Load cached features; missing pieces are computed unless the ling file is
    missing and `pseudo_seed` is None (pseudo-encoder disabled)."""
    paths = feature_paths(directory, utterance_id) if directory is not None else None
    ling = None
    if paths is not None and paths["ling"].is_file():
        ling = load_features(paths["ling"])
    elif pseudo_seed is None:
        raise MissingFeatureError(utterance_id, paths["ling"] if paths else f"{utterance_id}.ling.bin")
    padded = AudioClip(pad_to_hop(clip.samples), clip.sample_rate)
    if paths is not None and paths["f0"].is_file() and paths["loud"].is_file():
        if ling is None:
            ling = pseudo_encode(padded, pseudo_seed)
        f0 = tensor_file.load_matrix(paths["f0"])[:, 0].astype(np.float64)
        loud = tensor_file.load_matrix(paths["loud"])[:, 0].astype(np.float64)
        return UtteranceFeatures(padded.samples, ling.values, f0, loud)
    return compute_features(clip, ling, pseudo_seed or 0)


def cache_dir(default=None):
    return os.environ.get(CACHE_ENV) or default
