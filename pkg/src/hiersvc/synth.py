"""Synthetic sung notes for demos and tests (no corpus needed)."""
from __future__ import annotations

import numpy as np
from scipy.signal import lfilter

from .audio_io import SAMPLE_RATE, AudioClip


def melody_contour(notes_hz, duration: float, sample_rate: int = SAMPLE_RATE,
                   vibrato_hz: float = 5.5, vibrato_cents: float = 30.0) -> np.ndarray:
    """Piecewise-constant note sequence with glides and vibrato, at audio rate."""
    n = int(round(duration * sample_rate))
    notes = np.asarray(notes_hz, dtype=np.float64)
    idx = np.minimum((np.arange(n) * len(notes)) // n, len(notes) - 1)
    cents = 1200 * np.log2(notes[idx])
    glide = max(int(0.03 * sample_rate), 1)
    cents = np.convolve(np.pad(cents, (glide // 2, glide - glide // 2 - 1), mode="edge"),
                        np.ones(glide) / glide, mode="valid")
    t = np.arange(n) / sample_rate
    cents = cents + vibrato_cents * np.sin(2 * np.pi * vibrato_hz * t)
    return 2.0 ** (cents / 1200)


def _formant_filter(x: np.ndarray, formants, sample_rate: int) -> np.ndarray:
    y = np.zeros_like(x)
    for freq, bw, gain in formants:
        r = np.exp(-np.pi * bw / sample_rate)
        theta = 2 * np.pi * freq / sample_rate
        y += gain * lfilter([1 - r], [1, -2 * r * np.cos(theta), r * r], x)
    return y


VOICES = {
    "alto": [(800, 80, 1.0), (1150, 90, 0.5), (2800, 120, 0.25)],
    "tenor": [(650, 70, 1.0), (1080, 90, 0.6), (2650, 120, 0.2)],
    "bright": [(400, 60, 0.6), (2000, 100, 1.0), (3500, 150, 0.5)],
}


def sing(f0: np.ndarray, voice: str = "alto", sample_rate: int = SAMPLE_RATE,
         breath: float = 0.003, seed: int = 0, level: float = 0.5) -> AudioClip:
    """Glottal-like harmonic source shaped by a formant filter bank."""
    rng = np.random.default_rng(seed)
    f0 = np.asarray(f0, dtype=np.float64)
    phase = np.cumsum(2 * np.pi * f0 / sample_rate)
    source = np.zeros_like(f0)
    for h in range(1, 31):
        alive = h * f0 < 0.45 * sample_rate
        source += alive * np.sin(h * phase) / h
    source += breath * rng.standard_normal(len(f0))
    y = _formant_filter(source, VOICES[voice], sample_rate)
    n = len(y)
    fade = min(int(0.02 * sample_rate), n // 2)
    env = np.ones(n)
    env[:fade] = np.linspace(0, 1, fade)
    env[n - fade:] = np.linspace(1, 0, fade)
    y = y * env
    return AudioClip(level * y / max(np.abs(y).max(), 1e-9), sample_rate)


def sung_phrase(duration: float = 2.0, notes_hz=(220.0, 247.0, 277.0, 247.0, 196.0),
                voice: str = "alto", seed: int = 0) -> AudioClip:
    return sing(melody_contour(notes_hz, duration), voice, seed=seed)
