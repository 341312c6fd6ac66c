"""512-dim linguistic features at hop 640: file loading and a pseudo-encoder."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import tensor_file
from .audio_io import LING_HOP, SAMPLE_RATE, AudioClip
from .tensor_file import BadMagicError, TensorFileError, TruncatedPayloadError  # noqa: F401

LING_DIM = 512
N_MELS = 80
MEL_WINDOW = 2048


class DimensionMismatchError(TensorFileError):
    pass


@dataclass(frozen=True)
class LinguisticFeatures:
    values: np.ndarray  # (T_ling, 512) float32
    hop: int = LING_HOP
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float32)
        if v.ndim != 2 or v.shape[1] != LING_DIM:
            raise DimensionMismatchError(f"linguistic features must be (T, {LING_DIM}), got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("linguistic features contain non-finite values")
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def num_samples(self) -> int:
        return len(self) * self.hop


def load_features(path) -> LinguisticFeatures:
    m = tensor_file.load_matrix(path)
    if m.shape[1] != LING_DIM:
        raise DimensionMismatchError(f"{path}: feature dimension {m.shape[1]} != {LING_DIM}")
    return LinguisticFeatures(m)


def save_features(path, feats: LinguisticFeatures) -> None:
    tensor_file.save_matrix(path, feats.values)


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m) / 2595.0) - 1.0)


@lru_cache(maxsize=8)
def mel_filterbank(n_mels: int = N_MELS, n_fft: int = MEL_WINDOW,
                   sample_rate: int = SAMPLE_RATE) -> np.ndarray:
    """Triangular HTK-style filters, shape (n_mels, n_fft//2 + 1)."""
    freqs = np.fft.rfftfreq(n_fft, 1.0 / sample_rate)
    edges = mel_to_hz(np.linspace(hz_to_mel(0.0), hz_to_mel(sample_rate / 2), n_mels + 2))
    lower, center, upper = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (freqs[None, :] - lower) / (center - lower)
    falling = (upper - freqs[None, :]) / (upper - center)
    return np.maximum(0.0, np.minimum(rising, falling))


def log_mel(samples: np.ndarray, hop: int = LING_HOP, n_fft: int = MEL_WINDOW) -> np.ndarray:
    """(ceil(len/hop), 80) log-mel frames; frame k is centered on the middle of hop k."""
    n_frames = int(np.ceil(len(samples) / hop))
    offset = n_fft // 2 - hop // 2
    padded = np.zeros((n_frames - 1) * hop + n_fft)
    n = min(len(samples), len(padded) - offset)
    padded[offset:offset + n] = samples[:n]
    idx = np.arange(n_fft)[None, :] + hop * np.arange(n_frames)[:, None]
    window = np.hanning(n_fft + 1)[:-1]
    power = np.abs(np.fft.rfft(padded[idx] * window, axis=1)) ** 2
    return np.log(np.maximum(power @ mel_filterbank(N_MELS, n_fft).T, 1e-10))


@lru_cache(maxsize=8)
def _projection(seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((LING_DIM, N_MELS)))
    return q.T  # (80, 512) with orthonormal rows


def pseudo_encode(clip: AudioClip, seed: int = 0) -> LinguisticFeatures:
    """Deterministic stand-in for an ASR encoder.

    Log-mel (80 bins, window 2048, hop 640) is projected to 512 dims by a
    seed-derived matrix with orthonormal rows, then standardized per
    dimension over the utterance. The clip is zero padded to a multiple
    of 640 samples first.
    """
    if clip.sample_rate != SAMPLE_RATE:
        raise ValueError(f"pseudo_encode expects {SAMPLE_RATE} Hz audio, got {clip.sample_rate}")
    if len(clip) < MEL_WINDOW:
        raise ValueError(f"clip of {len(clip)} samples is shorter than one {MEL_WINDOW}-sample window")
    feats = log_mel(clip.samples) @ _projection(seed)
    mean = feats.mean(axis=0)
    std = feats.std(axis=0)
    feats = (feats - mean) / np.where(std > 1e-8, std, 1.0)
    return LinguisticFeatures(feats.astype(np.float32))
